//! Second-moment functionals, variance predictions and four-copy twirl checks.
//!
//! For a state `sigma`, an observable `O` and an ensemble of unitaries,
//! `p(b|U) = <b|U sigma U^dag|b>` and `q(b|U) = <b|U M^{-1}(O) U^dag|b>`. Then
//!
//! ```text
//! Gamma1 = E_U sum_b p q^2        Gamma2 = E_U (sum_b p q)^2
//! Var    = (1/M) [Gamma1 / K + (1 - 1/K) Gamma2 - tr(O0 rho)^2]
//! ```
//!
//! with both functionals taken for the traceless part `O0` in the variance.

use std::sync::OnceLock;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::clifford::{CliffordTableau, Ensemble, SingleQubitClifford, UnitaryDescriptor};
use crate::dense::{c, DenseOperator, C_ONE, C_ZERO};
use crate::error::{Error, Result};
use crate::exec::{try_map_indexed, Execution};
use crate::observable::Observable;
use crate::pauli::{Pauli, PauliString};
use crate::shadow::{child_seed, simulate_estimates, snapshot_operator, PreparedObservable};
use crate::state::QuantumState;
use crate::stats::VarianceSummary;

/// Largest support enumerated exactly for the Pauli ensemble (`24^3` layers).
pub const MAX_EXACT_PAULI_QUBITS: usize = 3;
/// Largest `n` enumerated exactly for the global Clifford ensemble (`11520` elements at `n = 2`).
pub const MAX_EXACT_CLIFFORD_QUBITS: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaMethod {
    ExactEnumeration,
    MonteCarlo,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaPair {
    pub gamma1: f64,
    pub gamma2: f64,
    pub method: GammaMethod,
    /// Standard errors `(gamma1, gamma2)` over sampled unitaries; `None` when exact.
    pub mc_error: Option<(f64, f64)>,
}

/// Every element of a small ensemble, each with equal weight.
pub fn enumerate_ensemble(ensemble: Ensemble, n: usize) -> Result<Vec<UnitaryDescriptor>> {
    match ensemble {
        Ensemble::Pauli if (1..=MAX_EXACT_PAULI_QUBITS).contains(&n) => {
            let total = 24usize.pow(n as u32);
            Ok((0..total)
                .map(|mut code| {
                    let mut layer = vec![SingleQubitClifford::identity(); n];
                    for slot in layer.iter_mut().rev() {
                        *slot = SingleQubitClifford::from_index(code % 24).expect("in range");
                        code /= 24;
                    }
                    UnitaryDescriptor::PauliLayer(layer)
                })
                .collect())
        }
        Ensemble::Clifford if (1..=MAX_EXACT_CLIFFORD_QUBITS).contains(&n) => {
            static GROUPS: [OnceLock<Vec<UnitaryDescriptor>>; 2] = [OnceLock::new(), OnceLock::new()];
            Ok(GROUPS[n - 1]
                .get_or_init(|| {
                    CliffordTableau::enumerate(n)
                        .expect("small n")
                        .into_iter()
                        .map(UnitaryDescriptor::GlobalClifford)
                        .collect()
                })
                .clone())
        }
        _ => Err(Error::DimensionTooLarge {
            what: "exact ensemble enumeration",
            qubits: n,
            limit: match ensemble {
                Ensemble::Pauli => MAX_EXACT_PAULI_QUBITS,
                Ensemble::Clifford => MAX_EXACT_CLIFFORD_QUBITS,
                Ensemble::Haar => 0,
            },
        }),
    }
}

fn can_enumerate(ensemble: Ensemble, n: usize) -> bool {
    match ensemble {
        Ensemble::Pauli => n <= MAX_EXACT_PAULI_QUBITS,
        Ensemble::Clifford => n <= MAX_EXACT_CLIFFORD_QUBITS,
        Ensemble::Haar => false,
    }
}

/// `(sum_b p q^2, (sum_b p q)^2)` for one unitary.
fn per_unitary(sigma: &QuantumState, prepared: &PreparedObservable, u: &UnitaryDescriptor) -> Result<(f64, f64)> {
    let p = sigma.born_distribution(u)?;
    let kernel = prepared.kernel(u)?;
    let (mut s1, mut s) = (0.0, 0.0);
    for (b, &pb) in p.probabilities().iter().enumerate() {
        if pb == 0.0 {
            continue;
        }
        let q = kernel.value(b as u64);
        s1 += pb * q * q;
        s += pb * q;
    }
    Ok((s1, s * s))
}

/// `Gamma1` and `Gamma2` by exact enumeration where feasible, otherwise by sampling `budget` unitaries.
///
/// For a Pauli observable under the Pauli ensemble only the support is
/// enumerated: qubits outside it contribute a factor of one.
pub fn gamma_brute(
    sigma: &QuantumState,
    o: &Observable,
    ensemble: Ensemble,
    budget: usize,
    seed: u64,
    exec: Execution,
) -> Result<GammaPair> {
    let n = sigma.num_qubits();
    if o.num_qubits() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: o.num_qubits(),
        });
    }
    if let (Ensemble::Pauli, Observable::Pauli(p)) = (ensemble, o) {
        if p.is_identity() {
            return Ok(GammaPair {
                gamma1: 1.0,
                gamma2: 1.0,
                method: GammaMethod::ExactEnumeration,
                mc_error: None,
            });
        }
        if p.weight() <= MAX_EXACT_PAULI_QUBITS && p.weight() < n {
            let support = p.support();
            let reduced = sigma.reduced(&support)?;
            let restricted = Observable::pauli(p.restrict(&support))?;
            return gamma_brute(&reduced, &restricted, ensemble, budget, seed, exec);
        }
    }
    let prepared = PreparedObservable::new(o, ensemble)?;
    if can_enumerate(ensemble, n) {
        let group = enumerate_ensemble(ensemble, n)?;
        let terms = try_map_indexed(exec, group.len(), |i| per_unitary(sigma, &prepared, &group[i]))?;
        let count = terms.len() as f64;
        let (g1, g2) = terms.iter().fold((0.0, 0.0), |acc, t| (acc.0 + t.0, acc.1 + t.1));
        return Ok(GammaPair {
            gamma1: g1 / count,
            gamma2: g2 / count,
            method: GammaMethod::ExactEnumeration,
            mc_error: None,
        });
    }
    if budget < 2 {
        return Err(Error::invalid(
            "Monte Carlo estimation of the second moments needs a budget of at least 2",
        ));
    }
    let terms = try_map_indexed(exec, budget, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(child_seed(seed, i as u64));
        let u = UnitaryDescriptor::sample(ensemble, n, &mut rng)?;
        per_unitary(sigma, &prepared, &u)
    })?;
    let (s1, s2): (Vec<f64>, Vec<f64>) = terms.into_iter().unzip();
    let a = VarianceSummary::from_samples(&s1);
    let b = VarianceSummary::from_samples(&s2);
    Ok(GammaPair {
        gamma1: a.mean,
        gamma2: b.mean,
        method: GammaMethod::MonteCarlo,
        mc_error: Some((a.stderr_mean, b.stderr_mean)),
    })
}

/// The traceless part `O0 = O - tr(O) I / D`, kept as a Pauli string when possible.
pub fn traceless(o: &Observable) -> Result<Observable> {
    match o {
        Observable::Pauli(p) if !p.is_identity() => Ok(o.clone()),
        Observable::Pauli(p) => Observable::dense(DenseOperator::zeros(1 << p.num_qubits())),
        Observable::Dense(d) => Observable::dense(d.traceless_part()),
    }
}

/// `Gamma1` for a Pauli observable under the Pauli ensemble: `3^w`.
pub fn gamma1_pauli_analytic(p: &PauliString) -> f64 {
    3f64.powi(p.weight() as i32)
}

/// `Gamma2 = 3^w tr(sigma P)^2` for a Pauli observable under the Pauli ensemble.
pub fn gamma2_pauli_analytic(sigma: &QuantumState, p: &PauliString) -> Result<f64> {
    if p.phase() != 0 {
        return Err(Error::invalid("the closed form takes a Pauli string with phase +1"));
    }
    let e = sigma.expectation_pauli(p)?;
    Ok(3f64.powi(p.weight() as i32) * e * e)
}

/// Cross-shadow norm of a Pauli observable under the Pauli ensemble: `3^{w/2}`.
pub fn xshadow_norm_pauli(p: &PauliString) -> f64 {
    3f64.powf(p.weight() as f64 / 2.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariancePrediction {
    pub value: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub mean_sq: f64,
    pub m: usize,
    pub k: usize,
}

/// Variance of the multi-shot estimator given the second moments of the traceless part.
pub fn variance_predict(
    sigma: &QuantumState,
    o: &Observable,
    m: usize,
    k: usize,
    gammas: &GammaPair,
) -> Result<VariancePrediction> {
    if m == 0 || k == 0 {
        return Err(Error::invalid("M and K must be at least 1"));
    }
    let mean = traceless(o)?.expectation(sigma)?;
    let mean_sq = mean * mean;
    let kf = k as f64;
    let value = (gammas.gamma1 / kf + (1.0 - 1.0 / kf) * gammas.gamma2 - mean_sq) / m as f64;
    Ok(VariancePrediction {
        value,
        gamma1: gammas.gamma1,
        gamma2: gammas.gamma2,
        mean_sq,
        m,
        k,
    })
}

/// Exact variance for a Pauli observable under the Pauli ensemble.
pub fn variance_pauli_exact(p: &PauliString, rho: &QuantumState, m: usize, k: usize) -> Result<f64> {
    if p.phase() != 0 {
        return Err(Error::invalid("the closed form takes a Pauli string with phase +1"));
    }
    if p.is_identity() {
        return Ok(0.0);
    }
    let e = rho.expectation_pauli(p)?;
    let e2 = e * e;
    let g = 3f64.powi(p.weight() as i32);
    let kf = k as f64;
    Ok((g / kf + (1.0 - 1.0 / kf) * g * e2 - e2) / m as f64)
}

/// Upper bound `(1/M) [3/K + (1 - 1/K) c] ||O0||_2^2` for global Clifford measurements.
pub fn clifford_variance_bound(o: &Observable, m: usize, k: usize, c: f64) -> Result<f64> {
    let kf = k as f64;
    Ok((3.0 / kf + (1.0 - 1.0 / kf) * c) * o.traceless_norm_sq()? / m as f64)
}

/// Sample mean and variance of the estimate over `trials` independent shadow sets.
///
/// Trial `t` uses the master seed `child_seed(seed, t)`.
#[allow(clippy::too_many_arguments)]
pub fn empirical_variance(
    state: &QuantumState,
    o: &Observable,
    ensemble: Ensemble,
    m: usize,
    k: usize,
    trials: usize,
    seed: u64,
    exec: Execution,
) -> Result<VarianceSummary> {
    if trials < 2 {
        return Err(Error::invalid("need at least two trials"));
    }
    let prepared = [PreparedObservable::new(o, ensemble)?];
    let values = try_map_indexed(exec, trials, |t| {
        Ok(simulate_estimates(state, ensemble, m, k, child_seed(seed, t as u64), &prepared)?[0])
    })?;
    Ok(VarianceSummary::from_samples(&values))
}

/// `sum_U w_U sum_b p(b|U) M^{-1}(U^dag|b><b|U)` over a fully enumerated ensemble.
pub fn exact_shadow_mean(state: &QuantumState, ensemble: Ensemble) -> Result<DenseOperator> {
    let group = enumerate_ensemble(ensemble, state.num_qubits())?;
    let weight = 1.0 / group.len() as f64;
    let mut acc = DenseOperator::zeros(state.dim());
    for u in &group {
        let p = state.born_distribution(u)?;
        for (b, &pb) in p.probabilities().iter().enumerate() {
            if pb > 0.0 {
                acc = &acc + &snapshot_operator(u, b as u64)?.scale_real(pb * weight);
            }
        }
    }
    Ok(acc)
}

// ---------------------------------------------------------------------------
// Four-copy operators

/// `A^{⊗t}`.
pub fn tensor_power(a: &DenseOperator, t: usize) -> DenseOperator {
    DenseOperator::kron_all(std::iter::repeat_n(a, t))
}

fn pauli_power(op: Pauli, t: usize) -> DenseOperator {
    PauliString::from_ops(&vec![op; t]).to_matrix().expect("small")
}

/// `F^(t) = 2^{-t/2} (I^{⊗t} + X^{⊗t} + Y^{⊗t} + Z^{⊗t})`; the swap for `t = 2`.
pub fn flip_operator(t: usize) -> DenseOperator {
    let mut acc = DenseOperator::zeros(1 << t);
    for op in Pauli::ALL {
        acc = &acc + &pauli_power(op, t);
    }
    acc.scale_real(2f64.powf(-(t as f64) / 2.0))
}

/// `(1/24) sum_u u^{dag ⊗t} A u^{⊗t}` over the single-qubit Clifford group.
pub fn twirl_single(a: &DenseOperator, t: usize) -> Result<DenseOperator> {
    if a.dim() != 1 << t {
        return Err(Error::DimensionMismatch {
            expected: 1 << t,
            found: a.dim(),
        });
    }
    let mut acc = DenseOperator::zeros(a.dim());
    for u in SingleQubitClifford::all() {
        let ut = tensor_power(&u.to_matrix(), t);
        acc = &acc + &(&(&ut.adjoint() * a) * &ut);
    }
    Ok(acc.scale_real(1.0 / 24.0))
}

/// Four-fold single-qubit Clifford twirl of a 16 x 16 operator.
pub fn twirl4_single(a: &DenseOperator) -> Result<DenseOperator> {
    twirl_single(a, 4)
}

/// `Lambda_n = sum_{b, b'} |b><b|^{⊗2} ⊗ |b'><b'|^{⊗2}` on four copies of `n` qubits.
pub fn lambda_n(n: usize) -> DenseOperator {
    let d = 1usize << n;
    let mut diag = vec![C_ZERO; d * d * d * d];
    for b in 0..d {
        for bp in 0..d {
            diag[((b * d + b) * d + bp) * d + bp] = C_ONE;
        }
    }
    DenseOperator::diagonal(&diag)
}

/// `(1/3) [ (1/2) I ⊗ I ⊗ F2 + (1/2) F2 ⊗ I ⊗ I + F4 ]`, the closed form of the twirled `Lambda_1`.
pub fn lambda1_twirl_closed_form() -> DenseOperator {
    let i2 = DenseOperator::identity(4);
    let f2 = flip_operator(2);
    let a = i2.kron(&f2).scale_real(0.5);
    let b = f2.kron(&i2).scale_real(0.5);
    (&(&a + &b) + &flip_operator(4)).scale_real(1.0 / 3.0)
}

/// Twirl of `P^{⊗t}` for a single-qubit Pauli `P`.
pub fn twirl_t_single_pauli(p: Pauli, t: usize) -> Result<DenseOperator> {
    if p == Pauli::I || t == 0 || t > 6 {
        return Err(Error::invalid("need P in {X, Y, Z} and 1 <= t <= 6"));
    }
    twirl_single(&pauli_power(p, t), t)
}

/// `(X^{⊗t} + Y^{⊗t} + Z^{⊗t}) / 3` for even `t`, zero for odd `t`.
pub fn pauli_twirl_closed_form(t: usize) -> DenseOperator {
    if t % 2 == 1 {
        return DenseOperator::zeros(1 << t);
    }
    let sum = &(&pauli_power(Pauli::X, t) + &pauli_power(Pauli::Y, t)) + &pauli_power(Pauli::Z, t);
    sum.scale_real(1.0 / 3.0)
}

/// `Q = D^{-2} sum_W W^{⊗4}` over all `n`-qubit Pauli strings.
pub fn q_projector(n: usize) -> Result<DenseOperator> {
    if !(1..=2).contains(&n) {
        return Err(Error::DimensionTooLarge {
            what: "four-copy projector",
            qubits: n,
            limit: 2,
        });
    }
    let d = (1usize << n) as f64;
    let mut acc = DenseOperator::zeros(1 << (4 * n));
    for w in PauliString::enumerate(n) {
        let w4 = w.tensor(&w).tensor(&w).tensor(&w);
        acc = &acc + &w4.to_matrix()?;
    }
    Ok(acc.scale_real(1.0 / (d * d)))
}

/// A permutation of four slots, `perm[i] = pi(i)` with 0-based slots.
pub type Perm4 = [usize; 4];

/// All 24 elements of `S_4` in lexicographic order.
pub fn s4_permutations() -> Vec<Perm4> {
    let mut out = Vec::with_capacity(24);
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    let p = [a, b, c, d];
                    let mut seen = [false; 4];
                    p.iter().for_each(|&x| seen[x] = true);
                    if seen.iter().all(|&s| s) {
                        out.push(p);
                    }
                }
            }
        }
    }
    out
}

pub fn cycle_count(perm: &Perm4) -> usize {
    let mut seen = [false; 4];
    let mut cycles = 0;
    for start in 0..4 {
        if seen[start] {
            continue;
        }
        cycles += 1;
        let mut i = start;
        while !seen[i] {
            seen[i] = true;
            i = perm[i];
        }
    }
    cycles
}

/// `T_pi |b1 b2 b3 b4> = |b_pi(1) b_pi(2) b_pi(3) b_pi(4)>` on `(C^D)^{⊗4}`.
pub fn permutation_operator(perm: &Perm4, d: usize) -> Result<DenseOperator> {
    if d == 0 || d > 4 {
        return Err(Error::invalid(format!(
            "permutation operators are built for D <= 4, got {d}"
        )));
    }
    let dim = d.pow(4);
    let mut m = nalgebra::DMatrix::from_element(dim, dim, C_ZERO);
    for col in 0..dim {
        let b = digits4(col, d);
        let row = perm.iter().fold(0, |acc, &slot| acc * d + b[slot]);
        m[(row, col)] = C_ONE;
    }
    DenseOperator::new(m)
}

fn digits4(mut idx: usize, d: usize) -> [usize; 4] {
    let mut b = [0; 4];
    for slot in (0..4).rev() {
        b[slot] = idx % d;
        idx /= d;
    }
    b
}

/// `tr(A1 ⊗ A2 ⊗ A3 ⊗ A4 T_pi) = sum_b prod_k A_k[b_k, b_pi(k)]`.
pub fn trace_with_permutation(ops: [&DenseOperator; 4], perm: &Perm4) -> Complex64 {
    let d = ops[0].dim();
    let mut acc = C_ZERO;
    for idx in 0..d.pow(4) {
        let b = digits4(idx, d);
        let mut term = C_ONE;
        for k in 0..4 {
            term *= ops[k].get(b[k], b[perm[k]]);
        }
        acc += term;
    }
    acc
}

/// Outcome of one permutation-trace inequality check.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PiCheck {
    pub value: f64,
    pub bound: f64,
    pub holds: bool,
}

/// `tr(sigma ⊗ O0 ⊗ sigma ⊗ O0 T_pi) <= tr(O0^2)` (with `1e-10` slack).
pub fn check_pi_inequality(sigma: &DenseOperator, o0: &DenseOperator, perm: &Perm4) -> PiCheck {
    let value = trace_with_permutation([sigma, o0, sigma, o0], perm).re;
    let bound = o0.trace_product(o0).re;
    PiCheck {
        value,
        bound,
        holds: value <= bound + 1e-10,
    }
}

/// `Gamma2` of a single-qubit instance from the twirled four-copy form:
/// `tr[sigma ⊗ M^{-1}(O) ⊗ sigma ⊗ M^{-1}(O) Phi(Lambda_1)]` with `Phi` the explicit 24-term twirl.
pub fn gamma2_twirl_form(sigma: &QuantumState, o: &DenseOperator) -> Result<f64> {
    if sigma.num_qubits() != 1 || o.dim() != 2 {
        return Err(Error::invalid("the four-copy form is evaluated for a single qubit"));
    }
    static TWIRLED: OnceLock<DenseOperator> = OnceLock::new();
    let twirled = TWIRLED.get_or_init(|| twirl4_single(&lambda_n(1)).expect("16 x 16"));
    // both ensembles share M^{-1}(A) = 3A - tr(A) I on one qubit
    let m_inv = crate::shadow::inverse_channel(Ensemble::Pauli, o);
    let rho = sigma.to_density();
    let big = DenseOperator::kron_all([&rho, &m_inv, &rho, &m_inv]);
    Ok(big.trace_product(twirled).re)
}

// ---------------------------------------------------------------------------
// Norm search

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormLowerBound {
    /// `max sqrt(Gamma2)` over the candidate states; a lower bound on the cross-shadow norm.
    pub value: f64,
    pub candidates: usize,
    /// Whether every candidate's `Gamma2` was computed exactly.
    pub exact_gammas: bool,
}

/// Lower bound on `max_sigma sqrt(Gamma2(sigma, O0))` over eigenstates of `O` and `candidates` random pure states.
pub fn xshadow_norm_search(
    o: &Observable,
    ensemble: Ensemble,
    candidates: usize,
    budget: usize,
    seed: u64,
    exec: Execution,
) -> Result<NormLowerBound> {
    let o0 = traceless(o)?;
    let n = o.num_qubits();
    let mut states = Vec::new();
    let (_, vecs) = o.to_dense()?.hermitian_eigen();
    for v in vecs {
        states.push(QuantumState::from_amplitudes(v)?);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..candidates {
        states.push(QuantumState::random_pure(n, &mut rng));
    }
    let mut best = 0.0f64;
    let mut exact = true;
    for (i, s) in states.iter().enumerate() {
        let g = gamma_brute(s, &o0, ensemble, budget, child_seed(seed, i as u64), exec)?;
        exact &= g.method == GammaMethod::ExactEnumeration;
        best = best.max(g.gamma2.max(0.0).sqrt());
    }
    Ok(NormLowerBound {
        value: best,
        candidates: states.len(),
        exact_gammas: exact,
    })
}

/// Random traceless Hermitian operator with entries of order one.
pub fn random_traceless<R: rand::Rng + ?Sized>(dim: usize, rng: &mut R) -> DenseOperator {
    let g = DenseOperator::from_fn(dim, |_, _| {
        c(
            rng.sample::<f64, _>(rand_distr::StandardNormal),
            rng.sample::<f64, _>(rand_distr::StandardNormal),
        )
    });
    (&g + &g.adjoint()).scale_real(0.5).traceless_part()
}
