//! Small quantum states and computational-basis measurement.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::clifford::{apply_gate_1q, UnitaryDescriptor};
use crate::dense::{c, DenseOperator, C_ZERO};
use crate::error::{Error, Result};
use crate::pauli::{PauliString, MAX_DENSE_QUBITS};

const NORM_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;
const CLAMP_TOL: f64 = 1e-12;
const SUM_TOL: f64 = 1e-10;

#[derive(Clone, PartialEq, Debug)]
enum Repr {
    Pure(Vec<Complex64>),
    Density(DenseOperator),
}

/// A pure or mixed state on `n` qubits, qubit 0 the most significant bit.
#[derive(Clone, PartialEq, Debug)]
pub struct QuantumState {
    n: usize,
    repr: Repr,
}

fn check_qubits(n: usize) -> Result<()> {
    if n == 0 || n > MAX_DENSE_QUBITS {
        return Err(Error::DimensionTooLarge {
            what: "quantum state",
            qubits: n,
            limit: MAX_DENSE_QUBITS,
        });
    }
    Ok(())
}

fn qubits_for_dim(dim: usize) -> Result<usize> {
    if dim < 2 || !dim.is_power_of_two() {
        return Err(Error::InvalidState(format!(
            "dimension {dim} is not a power of two >= 2"
        )));
    }
    let n = dim.trailing_zeros() as usize;
    check_qubits(n)?;
    Ok(n)
}

impl QuantumState {
    /// `(|0...0> + e^{i theta}|1...1>) / sqrt(2)`.
    pub fn ghz_theta(n: usize, theta: f64) -> Self {
        assert!((1..=MAX_DENSE_QUBITS).contains(&n), "GHZ state needs 1..=14 qubits");
        let dim = 1usize << n;
        let mut v = vec![C_ZERO; dim];
        v[0] = c(FRAC_1_SQRT_2, 0.0);
        v[dim - 1] += Complex64::from_polar(FRAC_1_SQRT_2, theta);
        Self { n, repr: Repr::Pure(v) }
    }

    /// The basis state `|b>`.
    pub fn basis(n: usize, b: u64) -> Result<Self> {
        check_qubits(n)?;
        if b >> n != 0 {
            return Err(Error::invalid(format!("basis index {b} needs more than {n} qubits")));
        }
        let mut v = vec![C_ZERO; 1 << n];
        v[b as usize] = c(1.0, 0.0);
        Ok(Self { n, repr: Repr::Pure(v) })
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let n = qubits_for_dim(amps.len())?;
        let norm = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidState(format!("statevector norm {norm} is not 1")));
        }
        Ok(Self {
            n,
            repr: Repr::Pure(amps),
        })
    }

    /// Validates Hermiticity, unit trace and positivity.
    pub fn from_density(rho: DenseOperator) -> Result<Self> {
        let n = qubits_for_dim(rho.dim())?;
        let herm = rho.hermitian_residual();
        if herm > NORM_TOL {
            return Err(Error::NotHermitian(herm));
        }
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > PSD_TOL || tr.im.abs() > PSD_TOL {
            return Err(Error::InvalidState(format!("density trace {tr} is not 1")));
        }
        let (evals, _) = rho.hermitian_eigen();
        if evals[0] < -PSD_TOL {
            return Err(Error::InvalidState(format!("density has eigenvalue {}", evals[0])));
        }
        Ok(Self {
            n,
            repr: Repr::Density(rho),
        })
    }

    /// Haar-random pure state.
    pub fn random_pure<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        assert!((1..=MAX_DENSE_QUBITS).contains(&n));
        let mut v: Vec<Complex64> = (0..1usize << n)
            .map(|_| c(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        v.iter_mut().for_each(|z| *z /= norm);
        Self { n, repr: Repr::Pure(v) }
    }

    /// Full-rank random density matrix `G G^dag / tr(G G^dag)` with Ginibre `G`.
    pub fn random_mixed<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        assert!((1..=MAX_DENSE_QUBITS).contains(&n));
        let dim = 1usize << n;
        let g = DenseOperator::from_fn(dim, |_, _| c(rng.sample(StandardNormal), rng.sample(StandardNormal)));
        let gg = &g * &g.adjoint();
        let tr = gg.trace().re;
        let mut rho = gg.scale_real(1.0 / tr);
        // exact Hermiticity after rounding
        rho = &rho.scale_real(0.5) + &rho.adjoint().scale_real(0.5);
        Self {
            n,
            repr: Repr::Density(rho),
        }
    }

    pub fn maximally_mixed(n: usize) -> Self {
        assert!((1..=MAX_DENSE_QUBITS).contains(&n));
        let dim = 1usize << n;
        Self {
            n,
            repr: Repr::Density(DenseOperator::identity(dim).scale_real(1.0 / dim as f64)),
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn is_pure_vector(&self) -> bool {
        matches!(self.repr, Repr::Pure(_))
    }

    /// Statevector amplitudes, if stored as a pure vector.
    pub fn amplitudes(&self) -> Option<&[Complex64]> {
        match &self.repr {
            Repr::Pure(v) => Some(v),
            Repr::Density(_) => None,
        }
    }

    pub fn to_density(&self) -> DenseOperator {
        match &self.repr {
            Repr::Pure(v) => DenseOperator::projector(v),
            Repr::Density(rho) => rho.clone(),
        }
    }

    /// Same state stored as a density matrix.
    pub fn as_density_state(&self) -> Self {
        Self {
            n: self.n,
            repr: Repr::Density(self.to_density()),
        }
    }

    /// `tr(O rho)` for Hermitian `O`.
    pub fn expectation(&self, o: &DenseOperator) -> Result<f64> {
        if o.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: o.dim(),
            });
        }
        let herm = o.hermitian_residual();
        if herm > NORM_TOL {
            return Err(Error::NotHermitian(herm));
        }
        let value = match &self.repr {
            Repr::Pure(v) => {
                let ov = o.apply(v);
                v.iter().zip(ov.iter()).map(|(a, b)| a.conj() * b).sum::<Complex64>()
            }
            Repr::Density(rho) => o.trace_product(rho),
        };
        debug_assert!(value.im.abs() < 1e-10, "imaginary residue {}", value.im);
        Ok(value.re)
    }

    /// `tr(P rho)` without building the dense Pauli matrix.
    pub fn expectation_pauli(&self, p: &PauliString) -> Result<f64> {
        if p.num_qubits() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: p.num_qubits(),
            });
        }
        if !p.is_hermitian() {
            return Err(Error::NotHermitian(2.0));
        }
        let value: Complex64 = match &self.repr {
            Repr::Pure(v) => {
                let mut acc = C_ZERO;
                for (cidx, &amp) in v.iter().enumerate() {
                    if amp == C_ZERO {
                        continue;
                    }
                    let (to, coef) = p.apply_to_basis(cidx as u64);
                    acc += v[to as usize].conj() * coef * amp;
                }
                acc
            }
            Repr::Density(rho) => {
                // P|c> = coef |r>, so tr(P rho) = sum_c coef * rho[c, r]
                let mut acc = C_ZERO;
                for col in 0..self.dim() {
                    let (row, coef) = p.apply_to_basis(col as u64);
                    acc += coef * rho.get(col, row as usize);
                }
                acc
            }
        };
        Ok(value.re)
    }

    /// `p(b) = <b|U rho U^dag|b>`.
    pub fn born_distribution(&self, u: &UnitaryDescriptor) -> Result<OutcomeDistribution> {
        if u.num_qubits() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: u.num_qubits(),
            });
        }
        let probs = match &self.repr {
            Repr::Pure(v) => {
                let mut out = v.clone();
                apply_unitary_in_place(u, &mut out);
                out.iter().map(|z| z.norm_sqr()).collect()
            }
            Repr::Density(rho) => {
                let urho = apply_columns(u, rho);
                let both = apply_columns(u, &urho.adjoint());
                (0..self.dim()).map(|b| both.get(b, b).re).collect()
            }
        };
        OutcomeDistribution::from_probabilities(self.n, probs)
    }

    /// Reduced state on the listed qubits.
    pub fn reduced(&self, keep: &[usize]) -> Result<Self> {
        if keep.is_empty() || keep.iter().any(|&q| q >= self.n) {
            return Err(Error::invalid("reduced state needs a non-empty list of valid qubits"));
        }
        let rho = self.to_density().partial_trace_keep(self.n, keep);
        Ok(Self {
            n: keep.len(),
            repr: Repr::Density(rho),
        })
    }
}

/// `U v` in place; the Pauli-layer case uses local gates.
pub(crate) fn apply_unitary_in_place(u: &UnitaryDescriptor, v: &mut [Complex64]) {
    match u {
        UnitaryDescriptor::PauliLayer(layer) => {
            let n = layer.len();
            for (q, g) in layer.iter().enumerate() {
                apply_gate_1q(v, n, q, g.gate());
            }
        }
        other => {
            let out = other.apply(v);
            v.copy_from_slice(&out);
        }
    }
}

fn apply_columns(u: &UnitaryDescriptor, m: &DenseOperator) -> DenseOperator {
    let dim = m.dim();
    let mut out = nalgebra::DMatrix::from_element(dim, dim, C_ZERO);
    let mut col = vec![C_ZERO; dim];
    for j in 0..dim {
        for (i, z) in col.iter_mut().enumerate() {
            *z = m.get(i, j);
        }
        apply_unitary_in_place(u, &mut col);
        out.column_mut(j).iter_mut().zip(col.iter()).for_each(|(o, z)| *o = *z);
    }
    DenseOperator::new(out).expect("square")
}

/// Born probabilities over `2^n` outcomes, with a cumulative table for sampling.
#[derive(Clone, PartialEq, Debug)]
pub struct OutcomeDistribution {
    n: usize,
    probs: Vec<f64>,
    cdf: Vec<f64>,
}

impl OutcomeDistribution {
    /// Clamps entries in `[-1e-12, 0)` to zero and renormalizes.
    pub fn from_probabilities(n: usize, mut probs: Vec<f64>) -> Result<Self> {
        if probs.len() != 1usize << n {
            return Err(Error::DimensionMismatch {
                expected: 1 << n,
                found: probs.len(),
            });
        }
        for p in probs.iter_mut() {
            if *p < 0.0 {
                if *p < -CLAMP_TOL {
                    return Err(Error::InvalidState(format!("negative probability {p}")));
                }
                *p = 0.0;
            }
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidState(format!("probabilities sum to {total}")));
        }
        probs.iter_mut().for_each(|p| *p /= total);
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        // guard the top bin against rounding so every uniform draw lands
        let last = probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
        for v in cdf[last..].iter_mut() {
            *v = f64::INFINITY;
        }
        Ok(Self { n, probs, cdf })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn probability(&self, b: u64) -> f64 {
        self.probs[b as usize]
    }

    /// One draw by inverse-CDF lookup of a single uniform variate.
    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let r: f64 = rng.random();
        self.cdf.partition_point(|&c| c <= r) as u64
    }

    /// `k` independent draws.
    pub fn sample_bitstrings<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Vec<u64> {
        (0..k).map(|_| self.sample(rng)).collect()
    }
}

/// Renders an outcome as `n` binary digits, qubit 0 first.
pub fn format_bitstring(b: u64, n: usize) -> String {
    (0..n)
        .map(|q| if (b >> (n - 1 - q)) & 1 == 1 { '1' } else { '0' })
        .collect()
}

pub fn parse_bitstring(s: &str, n: usize) -> Result<u64> {
    if s.len() != n {
        return Err(Error::invalid(format!("bitstring {s:?} does not have {n} digits")));
    }
    s.chars().try_fold(0u64, |acc, ch| match ch {
        '0' => Ok(acc << 1),
        '1' => Ok((acc << 1) | 1),
        other => Err(Error::invalid(format!("bad bit {other:?} in {s:?}"))),
    })
}
