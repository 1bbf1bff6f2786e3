//! Self-checks of the algebra, samplers and variance identities.
//!
//! Each check reports a pass flag and the largest residual it saw. Sampler
//! checks report the chi-square statistic or the number of unseen elements
//! instead, and the envelope checks the largest `Gamma2 / ||O0||^2`. The
//! `fast` level finishes in seconds; `full` adds the Monte Carlo checks.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::clifford::{CliffordTableau, Ensemble, SingleQubitClifford};
use crate::dense::{DenseOperator, EXACT_TOL};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::observable::Observable;
use crate::pauli::{Pauli, PauliString};
use crate::state::QuantumState;
use crate::stats::chi_square_uniform;
use crate::variance::{
    check_pi_inequality, exact_shadow_mean, gamma1_pauli_analytic, gamma2_pauli_analytic, gamma2_twirl_form,
    gamma_brute, lambda1_twirl_closed_form, lambda_n, pauli_twirl_closed_form, permutation_operator, q_projector,
    random_traceless, s4_permutations, twirl4_single, twirl_t_single_pauli,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Level {
    Fast,
    Full,
}

impl FromStr for Level {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fast" => Ok(Level::Fast),
            "full" => Ok(Level::Full),
            other => Err(Error::invalid(format!("unknown verification level {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub max_residual: f64,
}

impl CheckResult {
    fn within(name: &'static str, residual: f64, tol: f64) -> Self {
        CheckResult {
            name,
            passed: residual <= tol,
            max_residual: residual,
        }
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "CHECK {} {} max_residual={:.3e}",
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.max_residual
        )
    }
}

type Check = fn(&mut ChaCha8Rng, Execution) -> Result<CheckResult>;

const FAST: &[Check] = &[
    pauli_products,
    clifford_conjugation,
    single_qubit_sampler,
    exact_unbiasedness,
    four_copy_twirl,
    pauli_power_twirls,
    twirl_form_gamma2,
    pauli_second_moments,
    q_projector_checks,
    permutation_inequality,
];

const FULL: &[Check] = &[
    two_qubit_pauli_moments,
    exact_jensen,
    clifford_two_qubit_unbiasedness,
    two_qubit_sampler_coverage,
    clifford_gamma2_envelope,
    haar_gamma2_envelope,
];

/// Runs the checks of a level with a fixed seed.
pub fn run_checks(level: Level, seed: u64, exec: Execution) -> Result<Vec<CheckResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks: Vec<Check> = FAST.to_vec();
    if level == Level::Full {
        checks.extend_from_slice(FULL);
    }
    checks.into_iter().map(|check| check(&mut rng, exec)).collect()
}

fn pauli_products(_: &mut ChaCha8Rng, _: Execution) -> Result<CheckResult> {
    let all = PauliString::enumerate(2);
    let dense: Vec<DenseOperator> = all.iter().map(|p| p.to_matrix()).collect::<Result<_>>()?;
    let mut worst = 0.0f64;
    for (a, da) in all.iter().zip(&dense) {
        for (b, db) in all.iter().zip(&dense) {
            worst = worst.max(((*a) * (*b)).to_matrix()?.max_abs_diff(&(da * db)));
            let comm = da.commutator(db).max_abs();
            if a.commutes_with(b) != (comm < EXACT_TOL) {
                worst = worst.max(1.0);
            }
        }
    }
    Ok(CheckResult::within("pauli_products", worst, EXACT_TOL))
}

fn clifford_conjugation(rng: &mut ChaCha8Rng, _: Execution) -> Result<CheckResult> {
    let mut worst = 0.0f64;
    for n in 1..=3 {
        for _ in 0..20 {
            let t = CliffordTableau::sample(n, rng);
            let u = t.to_unitary()?;
            worst = worst.max((&(&u * &u.adjoint()) - &DenseOperator::identity(1 << n)).max_abs());
            let p = PauliString::new(n, rng.random_range(0..1u64 << n), rng.random_range(0..1u64 << n), 0)?;
            let lhs = t.conjugate(&p).to_matrix()?;
            let rhs = &(&u * &p.to_matrix()?) * &u.adjoint();
            worst = worst.max(lhs.max_abs_diff(&rhs));
        }
    }
    Ok(CheckResult::within("clifford_conjugation", worst, 1e-10))
}

fn single_qubit_sampler(rng: &mut ChaCha8Rng, _: Execution) -> Result<CheckResult> {
    let mut counts = [0u64; 24];
    for _ in 0..24_000 {
        counts[SingleQubitClifford::sample(rng).index()] += 1;
    }
    let (stat, p) = chi_square_uniform(&counts);
    Ok(CheckResult {
        name: "single_qubit_sampler",
        passed: p > 1e-3,
        max_residual: stat,
    })
}

fn exact_unbiasedness(rng: &mut ChaCha8Rng, _: Execution) -> Result<CheckResult> {
    let mut worst = 0.0f64;
    for (ens, n) in [(Ensemble::Pauli, 1), (Ensemble::Pauli, 2), (Ensemble::Clifford, 1)] {
        let rho = QuantumState::random_mixed(n, rng);
        worst = worst.max(exact_shadow_mean(&rho, ens)?.max_abs_diff(&rho.to_density()));
    }
    Ok(CheckResult::within("exact_unbiasedness", worst, 1e-10))
}

fn four_copy_twirl(_: &mut ChaCha8Rng, _: Execution) -> Result<CheckResult> {
    let residual = twirl4_single(&lambda_n(1))?.max_abs_diff(&lambda1_twirl_closed_form());
    Ok(CheckResult::within("four_copy_twirl", residual, EXACT_TOL))
}

fn pauli_power_twirls(_: &mut ChaCha8Rng, _: Execution) -> Result<CheckResult> {
    let mut worst = 0.0f64;
    for p in [Pauli::X, Pauli::Y, Pauli::Z] {
        for t in 2..=6 {
            worst = worst.max(twirl_t_single_pauli(p, t)?.max_abs_diff(&pauli_twirl_closed_form(t)));
        }
    }
    Ok(CheckResult::within("pauli_power_twirls", worst, EXACT_TOL))
}

fn twirl_form_gamma2(rng: &mut ChaCha8Rng, exec: Execution) -> Result<CheckResult> {
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let sigma = QuantumState::random_mixed(1, rng);
        let o = random_traceless(2, rng);
        let via_twirl = gamma2_twirl_form(&sigma, &o)?;
        let g = gamma_brute(&sigma, &Observable::dense(o)?, Ensemble::Pauli, 0, 0, exec)?;
        worst = worst.max((g.gamma2 - via_twirl).abs());
    }
    Ok(CheckResult::within("twirl_form_gamma2", worst, 1e-10))
}

fn pauli_second_moments(rng: &mut ChaCha8Rng, exec: Execution) -> Result<CheckResult> {
    let mut worst = 0.0f64;
    for n in 1..=3 {
        let sigma = QuantumState::random_mixed(n, rng);
        for _ in 0..4 {
            let p = PauliString::new(n, rng.random_range(0..1u64 << n), rng.random_range(0..1u64 << n), 0)?;
            if p.is_identity() {
                continue;
            }
            // a dense observable forces enumeration over all 24^n layers
            let g = gamma_brute(&sigma, &Observable::dense(p.to_matrix()?)?, Ensemble::Pauli, 0, 0, exec)?;
            worst = worst.max((g.gamma1 - gamma1_pauli_analytic(&p)).abs());
            worst = worst.max((g.gamma2 - gamma2_pauli_analytic(&sigma, &p)?).abs());
        }
    }
    Ok(CheckResult::within("pauli_second_moments", worst, 1e-9))
}

fn q_projector_checks(_: &mut ChaCha8Rng, _: Execution) -> Result<CheckResult> {
    let mut worst = 0.0f64;
    for n in 1..=2 {
        let q = q_projector(n)?;
        worst = worst.max((&q * &q).max_abs_diff(&q));
        for perm in s4_permutations() {
            worst = worst.max(q.commutator(&permutation_operator(&perm, 1 << n)?).max_abs());
        }
    }
    Ok(CheckResult::within("q_projector", worst, EXACT_TOL))
}

fn permutation_inequality(rng: &mut ChaCha8Rng, _: Execution) -> Result<CheckResult> {
    let perms = s4_permutations();
    let mut worst = f64::NEG_INFINITY;
    for n in 1..=2 {
        for _ in 0..50 {
            let sigma = QuantumState::random_mixed(n, rng).to_density();
            let o0 = random_traceless(1 << n, rng);
            for perm in &perms {
                let r = check_pi_inequality(&sigma, &o0, perm);
                worst = worst.max((r.value - r.bound) / r.bound.max(1e-300));
            }
        }
    }
    Ok(CheckResult {
        name: "permutation_inequality",
        passed: worst <= 1e-10,
        max_residual: worst.max(0.0),
    })
}

/// All 15 non-identity two-qubit Paulis against the closed forms, enumerating 576 layers each.
fn two_qubit_pauli_moments(rng: &mut ChaCha8Rng, exec: Execution) -> Result<CheckResult> {
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let sigma = QuantumState::random_mixed(2, rng);
        for p in PauliString::enumerate(2).into_iter().filter(|p| !p.is_identity()) {
            let g = gamma_brute(&sigma, &Observable::dense(p.to_matrix()?)?, Ensemble::Pauli, 0, 0, exec)?;
            worst = worst.max((g.gamma1 - gamma1_pauli_analytic(&p)).abs());
            worst = worst.max((g.gamma2 - gamma2_pauli_analytic(&sigma, &p)?).abs());
        }
    }
    Ok(CheckResult::within("two_qubit_pauli_moments", worst, 1e-10))
}

/// `tr(sigma O)^2 <= Gamma2 <= Gamma1` on exactly enumerated instances; the residual is the largest violation.
fn exact_jensen(rng: &mut ChaCha8Rng, exec: Execution) -> Result<CheckResult> {
    let mut worst = 0.0f64;
    for (ens, n) in [
        (Ensemble::Pauli, 1),
        (Ensemble::Pauli, 2),
        (Ensemble::Clifford, 1),
        (Ensemble::Clifford, 2),
    ] {
        for _ in 0..5 {
            let sigma = QuantumState::random_mixed(n, rng);
            let o = random_traceless(1 << n, rng);
            let mean = sigma.expectation(&o)?;
            let g = gamma_brute(&sigma, &Observable::dense(o)?, ens, 0, 0, exec)?;
            worst = worst.max(g.gamma2 - g.gamma1).max(mean * mean - g.gamma2);
        }
    }
    Ok(CheckResult::within("exact_jensen", worst.max(0.0), 1e-10))
}

fn clifford_two_qubit_unbiasedness(rng: &mut ChaCha8Rng, _: Execution) -> Result<CheckResult> {
    let rho = QuantumState::random_mixed(2, rng);
    let residual = exact_shadow_mean(&rho, Ensemble::Clifford)?.max_abs_diff(&rho.to_density());
    Ok(CheckResult::within("clifford_two_qubit_unbiasedness", residual, 1e-10))
}

fn two_qubit_sampler_coverage(rng: &mut ChaCha8Rng, _: Execution) -> Result<CheckResult> {
    let mut seen = HashSet::new();
    for _ in 0..1_000_000 {
        seen.insert(CliffordTableau::sample(2, rng));
    }
    let missing = (CliffordTableau::group_order(2) as usize - seen.len()) as f64;
    Ok(CheckResult {
        name: "two_qubit_sampler_coverage",
        passed: seen.len() >= 11_000,
        max_residual: missing,
    })
}

/// Largest `(Gamma2 - 3 stderr) / ||O0||^2` over random instances; passes below the envelope 10.
fn gamma2_envelope(rng: &mut ChaCha8Rng, exec: Execution, ensemble: Ensemble, qubits: &[usize]) -> Result<f64> {
    let mut worst = 0.0f64;
    for &n in qubits {
        for _ in 0..3 {
            let sigma = QuantumState::random_pure(n, rng);
            let o0 = random_traceless(1 << n, rng);
            let norm_sq = o0.trace_product(&o0).re;
            let g = gamma_brute(&sigma, &Observable::dense(o0)?, ensemble, 400, rng.random(), exec)?;
            let err = g.mc_error.map_or(0.0, |e| e.1);
            worst = worst.max((g.gamma2 - 3.0 * err) / norm_sq);
        }
    }
    Ok(worst)
}

fn clifford_gamma2_envelope(rng: &mut ChaCha8Rng, exec: Execution) -> Result<CheckResult> {
    let worst = gamma2_envelope(rng, exec, Ensemble::Clifford, &[2, 3, 4, 5, 6])?;
    Ok(CheckResult::within("clifford_gamma2_envelope", worst, 10.0))
}

fn haar_gamma2_envelope(rng: &mut ChaCha8Rng, exec: Execution) -> Result<CheckResult> {
    let worst = gamma2_envelope(rng, exec, Ensemble::Haar, &[2, 3])?;
    Ok(CheckResult::within("haar_gamma2_envelope", worst, 10.0))
}
