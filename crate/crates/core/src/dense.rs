//! Dense complex operators for small Hilbert spaces.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Entrywise tolerance used for exact operator identities.
pub const EXACT_TOL: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// A square complex matrix acting on a `dim`-dimensional space.
#[derive(Clone, PartialEq)]
pub struct DenseOperator {
    mat: DMatrix<Complex64>,
}

impl DenseOperator {
    pub fn new(mat: DMatrix<Complex64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::DimensionMismatch {
                expected: mat.nrows(),
                found: mat.ncols(),
            });
        }
        Ok(Self { mat })
    }

    /// Builds a Hermitian operator, rejecting inputs with `|A - A^dag|_max > 1e-12`.
    pub fn hermitian(mat: DMatrix<Complex64>) -> Result<Self> {
        let op = Self::new(mat)?;
        let residual = op.hermitian_residual();
        if residual > EXACT_TOL {
            return Err(Error::NotHermitian(residual));
        }
        Ok(op)
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            mat: DMatrix::identity(dim, dim),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            mat: DMatrix::zeros(dim, dim),
        }
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize, usize) -> Complex64) -> Self {
        Self {
            mat: DMatrix::from_fn(dim, dim, f),
        }
    }

    pub fn diagonal(entries: &[Complex64]) -> Self {
        let dim = entries.len();
        Self::from_fn(dim, |r, c| if r == c { entries[r] } else { ZERO })
    }

    /// The rank-one projector `|v><v|`.
    pub fn projector(v: &[Complex64]) -> Self {
        Self::from_fn(v.len(), |r, c| v[r] * v[c].conj())
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.mat
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.mat[(row, col)]
    }

    pub fn trace(&self) -> Complex64 {
        self.mat.trace()
    }

    pub fn adjoint(&self) -> Self {
        Self {
            mat: self.mat.adjoint(),
        }
    }

    pub fn scale(&self, a: Complex64) -> Self {
        Self { mat: &self.mat * a }
    }

    pub fn scale_real(&self, a: f64) -> Self {
        self.scale(Complex64::new(a, 0.0))
    }

    pub fn kron(&self, other: &Self) -> Self {
        Self {
            mat: self.mat.kronecker(&other.mat),
        }
    }

    /// Tensor product of a list of operators, left factor most significant.
    pub fn kron_all<'a>(ops: impl IntoIterator<Item = &'a DenseOperator>) -> Self {
        let mut acc = DenseOperator::identity(1);
        for op in ops {
            acc = acc.kron(op);
        }
        acc
    }

    /// `O - tr(O) I / D`.
    pub fn traceless_part(&self) -> Self {
        let shift = self.trace() / self.dim() as f64;
        let mut mat = self.mat.clone();
        for i in 0..self.dim() {
            mat[(i, i)] -= shift;
        }
        Self { mat }
    }

    /// `sqrt(tr(A A^dag))`.
    pub fn frobenius_norm(&self) -> f64 {
        self.mat.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn hermitian_residual(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for r in 0..d {
            for c in r..d {
                let diff = (self.mat[(r, c)] - self.mat[(c, r)].conj()).norm();
                worst = worst.max(diff);
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_residual() <= tol
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim(), other.dim(), "operator dimensions differ");
        self.mat
            .iter()
            .zip(other.mat.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.mat.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Commutator `[A, B] = AB - BA`.
    pub fn commutator(&self, other: &Self) -> Self {
        &(self * other) - &(other * self)
    }

    /// `tr(A B)` without forming the product.
    pub fn trace_product(&self, other: &Self) -> Complex64 {
        let d = self.dim();
        let mut acc = ZERO;
        for r in 0..d {
            for c in 0..d {
                acc += self.mat[(r, c)] * other.mat[(c, r)];
            }
        }
        acc
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let d = self.dim();
        assert_eq!(v.len(), d);
        let mut out = vec![ZERO; d];
        for (c, &vc) in v.iter().enumerate() {
            if vc == ZERO {
                continue;
            }
            let col = self.mat.column(c);
            for (o, m) in out.iter_mut().zip(col.iter()) {
                *o += m * vc;
            }
        }
        out
    }

    /// `U^dag U = I` to within `tol` entrywise.
    pub fn is_unitary(&self, tol: f64) -> bool {
        let prod = &self.adjoint() * self;
        prod.max_abs_diff(&DenseOperator::identity(self.dim())) <= tol
    }

    /// Eigen-decomposition of a Hermitian operator, eigenvalues ascending.
    pub fn hermitian_eigen(&self) -> (Vec<f64>, Vec<Vec<Complex64>>) {
        let eig = nalgebra::SymmetricEigen::new(self.mat.clone());
        let mut pairs: Vec<(f64, Vec<Complex64>)> = eig
            .eigenvalues
            .iter()
            .enumerate()
            .map(|(k, &lambda)| (lambda, eig.eigenvectors.column(k).iter().copied().collect()))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        pairs.into_iter().unzip()
    }

    /// Reduced operator on the qubits listed in `keep` (0 = most significant).
    pub fn partial_trace_keep(&self, num_qubits: usize, keep: &[usize]) -> Self {
        assert_eq!(self.dim(), 1 << num_qubits);
        let kept = keep.len();
        let traced: Vec<usize> = (0..num_qubits).filter(|q| !keep.contains(q)).collect();
        let compose = |k_bits: usize, t_bits: usize| -> usize {
            let mut idx = 0usize;
            for (pos, &q) in keep.iter().enumerate() {
                if (k_bits >> (kept - 1 - pos)) & 1 == 1 {
                    idx |= 1 << (num_qubits - 1 - q);
                }
            }
            for (pos, &q) in traced.iter().enumerate() {
                if (t_bits >> (traced.len() - 1 - pos)) & 1 == 1 {
                    idx |= 1 << (num_qubits - 1 - q);
                }
            }
            idx
        };
        let dk = 1 << kept;
        let dt = 1 << traced.len();
        Self::from_fn(dk, |r, c| {
            (0..dt).map(|t| self.mat[(compose(r, t), compose(c, t))]).sum()
        })
    }
}

impl fmt::Debug for DenseOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DenseOperator(dim={}) {}", self.dim(), self.mat)
    }
}

impl<'a> Mul<&'a DenseOperator> for &'a DenseOperator {
    type Output = DenseOperator;
    fn mul(self, rhs: &'a DenseOperator) -> DenseOperator {
        DenseOperator {
            mat: &self.mat * &rhs.mat,
        }
    }
}

impl<'a> Add<&'a DenseOperator> for &'a DenseOperator {
    type Output = DenseOperator;
    fn add(self, rhs: &'a DenseOperator) -> DenseOperator {
        DenseOperator {
            mat: &self.mat + &rhs.mat,
        }
    }
}

impl<'a> Sub<&'a DenseOperator> for &'a DenseOperator {
    type Output = DenseOperator;
    fn sub(self, rhs: &'a DenseOperator) -> DenseOperator {
        DenseOperator {
            mat: &self.mat - &rhs.mat,
        }
    }
}

pub(crate) fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub(crate) const C_ZERO: Complex64 = ZERO;
pub(crate) const C_ONE: Complex64 = ONE;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::PauliString;

    fn ket0_proj() -> DenseOperator {
        DenseOperator::diagonal(&[C_ONE, C_ZERO])
    }

    #[test]
    fn traceless_part_examples() {
        let z = "Z".parse::<PauliString>().unwrap().to_matrix().unwrap();
        assert!(z.traceless_part().max_abs_diff(&z) < EXACT_TOL);

        let expect = DenseOperator::diagonal(&[c(0.5, 0.0), c(-0.5, 0.0)]);
        assert!(ket0_proj().traceless_part().max_abs_diff(&expect) < EXACT_TOL);

        let zero = DenseOperator::identity(4).traceless_part();
        assert!(zero.max_abs() < EXACT_TOL);
    }

    #[test]
    fn frobenius_examples() {
        let z = "Z".parse::<PauliString>().unwrap().to_matrix().unwrap();
        assert!((z.frobenius_norm() - 2f64.sqrt()).abs() < EXACT_TOL);
        for n in 1..=4 {
            let p = PauliString::from_ops(&vec![crate::pauli::Pauli::Y; n]);
            let norm = p.to_matrix().unwrap().frobenius_norm();
            assert!((norm - 2f64.powf(n as f64 / 2.0)).abs() < 1e-10);
        }
    }

    #[test]
    fn ghz_projector_traceless_norm() {
        for n in 1..=6 {
            let ghz = crate::state::QuantumState::ghz_theta(n, 0.0);
            let proj = DenseOperator::projector(ghz.amplitudes().unwrap());
            let o0 = proj.traceless_part();
            let d = (1usize << n) as f64;
            // tr(O0^2) = 1 - 1/D for a pure-state projector
            let direct: f64 = (&o0 * &o0).trace().re;
            assert!((direct - (1.0 - 1.0 / d)).abs() < 1e-12);
            assert!((o0.frobenius_norm().powi(2) - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn partial_trace_of_product() {
        let a = "X".parse::<PauliString>().unwrap().to_matrix().unwrap();
        let b = ket0_proj();
        let ab = a.kron(&b);
        let keep0 = ab.partial_trace_keep(2, &[0]);
        assert!(keep0.max_abs_diff(&a) < EXACT_TOL);
        let keep1 = ab.partial_trace_keep(2, &[1]);
        assert!(keep1.max_abs() < EXACT_TOL); // tr(X) = 0
    }

    #[test]
    fn rejects_non_square_and_non_hermitian() {
        assert!(DenseOperator::new(DMatrix::zeros(2, 3)).is_err());
        let m = DMatrix::from_row_slice(2, 2, &[C_ZERO, C_ONE, C_ZERO, C_ZERO]);
        assert!(matches!(DenseOperator::hermitian(m), Err(Error::NotHermitian(_))));
    }
}
