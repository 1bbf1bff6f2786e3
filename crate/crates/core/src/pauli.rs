//! n-qubit Pauli operators in (x, z) bit encoding with a quarter phase.
//!
//! A [`PauliString`] stands for `i^phase * P_1 ⊗ ... ⊗ P_n` where each factor is
//! one of `I, X, Y, Z` and `(x_q, z_q) = (1, 1)` denotes `Y` itself (not `XZ`).
//! Qubit `q = 0` is the leftmost tensor factor and lives in the most
//! significant bit, so the masks line up with computational-basis indices.

use std::fmt;
use std::ops::Mul;
use std::str::FromStr;

use num_complex::Complex64;

use crate::dense::{DenseOperator, C_ZERO};
use crate::error::{Error, Result};

/// Qubit limit of the bit encoding.
pub const MAX_QUBITS: usize = 63;
/// Qubit limit for dense matrix realizations.
pub const MAX_DENSE_QUBITS: usize = 14;

const I_POW: [Complex64; 4] = [
    Complex64::new(1.0, 0.0),
    Complex64::new(0.0, 1.0),
    Complex64::new(-1.0, 0.0),
    Complex64::new(0.0, -1.0),
];

#[inline]
pub(crate) fn i_pow(k: u32) -> Complex64 {
    I_POW[(k & 3) as usize]
}

/// Single-qubit Pauli factor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    fn letter(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct PauliString {
    n: u8,
    x: u64,
    z: u64,
    phase: u8,
}

impl PauliString {
    pub fn new(n: usize, x: u64, z: u64, phase: u8) -> Result<Self> {
        if n == 0 || n > MAX_QUBITS {
            return Err(Error::invalid(format!(
                "Pauli string needs 1..={MAX_QUBITS} qubits, got {n}"
            )));
        }
        let mask = (1u64 << n) - 1;
        if x & !mask != 0 || z & !mask != 0 {
            return Err(Error::invalid("bit masks wider than the qubit count"));
        }
        Ok(Self::from_raw(n, x, z, phase))
    }

    #[inline]
    pub(crate) fn from_raw(n: usize, x: u64, z: u64, phase: u8) -> Self {
        Self {
            n: n as u8,
            x,
            z,
            phase: phase & 3,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_raw(n, 0, 0, 0)
    }

    /// `op` on qubit `q`, identity elsewhere.
    pub fn single(n: usize, q: usize, op: Pauli) -> Self {
        let (x, z) = op.bits();
        let bit = 1u64 << (n - 1 - q);
        Self::from_raw(n, if x { bit } else { 0 }, if z { bit } else { 0 }, 0)
    }

    pub fn from_ops(ops: &[Pauli]) -> Self {
        let n = ops.len();
        assert!((1..=MAX_QUBITS).contains(&n), "qubit count out of range");
        let mut p = Self::identity(n);
        for (q, op) in ops.iter().enumerate() {
            let (x, z) = op.bits();
            let bit = 1u64 << (n - 1 - q);
            if x {
                p.x |= bit;
            }
            if z {
                p.z |= bit;
            }
        }
        p
    }

    #[inline]
    pub fn num_qubits(&self) -> usize {
        self.n as usize
    }

    #[inline]
    pub fn x_bits(&self) -> u64 {
        self.x
    }

    #[inline]
    pub fn z_bits(&self) -> u64 {
        self.z
    }

    /// Exponent `k` of the overall factor `i^k`.
    #[inline]
    pub fn phase(&self) -> u8 {
        self.phase
    }

    pub fn with_phase(mut self, phase: u8) -> Self {
        self.phase = phase & 3;
        self
    }

    /// Drops the overall phase.
    pub fn unsigned(self) -> Self {
        self.with_phase(0)
    }

    #[inline]
    fn bit(&self, q: usize) -> u64 {
        1u64 << (self.num_qubits() - 1 - q)
    }

    pub fn op(&self, q: usize) -> Pauli {
        let b = self.bit(q);
        Pauli::from_bits(self.x & b != 0, self.z & b != 0)
    }

    pub fn ops(&self) -> Vec<Pauli> {
        (0..self.num_qubits()).map(|q| self.op(q)).collect()
    }

    #[inline]
    pub fn support_mask(&self) -> u64 {
        self.x | self.z
    }

    /// Qubits carrying a non-identity factor, in ascending order.
    pub fn support(&self) -> Vec<usize> {
        (0..self.num_qubits())
            .filter(|&q| self.support_mask() & self.bit(q) != 0)
            .collect()
    }

    /// Number of non-identity tensor factors.
    #[inline]
    pub fn weight(&self) -> usize {
        self.support_mask().count_ones() as usize
    }

    pub fn is_identity(&self) -> bool {
        self.support_mask() == 0
    }

    /// Hermitian iff the overall phase is real.
    #[inline]
    pub fn is_hermitian(&self) -> bool {
        self.phase & 1 == 0
    }

    /// `+1.0` or `-1.0` for Hermitian strings.
    pub fn sign(&self) -> f64 {
        debug_assert!(self.is_hermitian());
        if self.phase == 2 {
            -1.0
        } else {
            1.0
        }
    }

    #[inline]
    pub fn commutes_with(&self, other: &Self) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()).is_multiple_of(2)
    }

    /// Restriction to the listed qubits (phase kept).
    pub fn restrict(&self, qubits: &[usize]) -> Self {
        let ops: Vec<Pauli> = qubits.iter().map(|&q| self.op(q)).collect();
        Self::from_ops(&ops).with_phase(self.phase)
    }

    /// Tensor product `self ⊗ other`.
    pub fn tensor(&self, other: &Self) -> Self {
        let n = self.num_qubits() + other.num_qubits();
        assert!(n <= MAX_QUBITS);
        let shift = other.num_qubits();
        Self::from_raw(
            n,
            (self.x << shift) | other.x,
            (self.z << shift) | other.z,
            self.phase + other.phase,
        )
    }

    /// Action on a basis state: `P|c> = amp * |target>`.
    #[inline]
    pub fn apply_to_basis(&self, c: u64) -> (u64, Complex64) {
        let k = self.phase as u32 + (self.x & self.z).count_ones() + 2 * (self.z & c).count_ones();
        (c ^ self.x, i_pow(k))
    }

    /// `P v` for a statevector of length `2^n`.
    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![C_ZERO; v.len()];
        self.apply_into(v, &mut out);
        out
    }

    pub(crate) fn apply_into(&self, v: &[Complex64], out: &mut [Complex64]) {
        debug_assert_eq!(v.len(), 1 << self.num_qubits());
        let base = self.phase as u32 + (self.x & self.z).count_ones();
        let x = self.x as usize;
        let z = self.z;
        for (c, &amp) in v.iter().enumerate() {
            let k = base + 2 * (z & c as u64).count_ones();
            out[c ^ x] = amp * i_pow(k);
        }
    }

    /// `phase * ⊗ P_q` as a `2^n x 2^n` matrix.
    pub fn to_matrix(&self) -> Result<DenseOperator> {
        let n = self.num_qubits();
        if n > MAX_DENSE_QUBITS {
            return Err(Error::DimensionTooLarge {
                what: "dense Pauli matrix",
                qubits: n,
                limit: MAX_DENSE_QUBITS,
            });
        }
        let dim = 1usize << n;
        let mut mat = nalgebra::DMatrix::from_element(dim, dim, C_ZERO);
        for col in 0..dim as u64 {
            let (row, amp) = self.apply_to_basis(col);
            mat[(row as usize, col as usize)] = amp;
        }
        DenseOperator::new(mat)
    }

    /// All `4^n` phase-free Pauli strings on `n` qubits, identity first.
    pub fn enumerate(n: usize) -> Vec<PauliString> {
        assert!((1..=8).contains(&n), "enumeration limited to 8 qubits");
        let mut out = Vec::with_capacity(1 << (2 * n));
        for code in 0..(1u64 << (2 * n)) {
            let ops: Vec<Pauli> = (0..n)
                .map(|q| Pauli::ALL[((code >> (2 * (n - 1 - q))) & 3) as usize])
                .collect();
            out.push(Self::from_ops(&ops));
        }
        out
    }
}

impl Mul for PauliString {
    type Output = PauliString;

    /// Operator product with exact phase tracking.
    fn mul(self, rhs: PauliString) -> PauliString {
        debug_assert_eq!(self.n, rhs.n);
        // i^{|x&z|} X^x Z^z representation: Z^z1 X^x2 = (-1)^{|z1&x2|} X^x2 Z^z1
        let x = self.x ^ rhs.x;
        let z = self.z ^ rhs.z;
        let k = self.phase as u32
            + rhs.phase as u32
            + (self.x & self.z).count_ones()
            + (rhs.x & rhs.z).count_ones()
            + 2 * (self.z & rhs.x).count_ones();
        let k = (k + 4 * 64 - (x & z).count_ones()) & 3;
        PauliString::from_raw(self.n as usize, x, z, k as u8)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = match self.phase {
            0 => "",
            1 => "+i",
            2 => "-",
            _ => "-i",
        };
        f.write_str(prefix)?;
        for q in 0..self.num_qubits() {
            write!(f, "{}", self.op(q).letter())?;
        }
        Ok(())
    }
}

impl fmt::Debug for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PauliString({self})")
    }
}

impl FromStr for PauliString {
    type Err = Error;

    /// Parses `[+|-|+i|-i]` followed by letters from `IXYZ`.
    fn from_str(s: &str) -> Result<Self> {
        let (phase, body, offset) = if let Some(rest) = s.strip_prefix("+i") {
            (1, rest, 2)
        } else if let Some(rest) = s.strip_prefix("-i") {
            (3, rest, 2)
        } else if let Some(rest) = s.strip_prefix('+') {
            (0, rest, 1)
        } else if let Some(rest) = s.strip_prefix('-') {
            (2, rest, 1)
        } else {
            (0, s, 0)
        };
        if body.is_empty() {
            return Err(Error::parse(1, offset + 1, "empty Pauli string"));
        }
        let mut ops = Vec::with_capacity(body.len());
        for (i, ch) in body.chars().enumerate() {
            let op = match ch {
                'I' => Pauli::I,
                'X' => Pauli::X,
                'Y' => Pauli::Y,
                'Z' => Pauli::Z,
                other => {
                    return Err(Error::parse(
                        1,
                        offset + i + 1,
                        format!("unexpected character {other:?} in Pauli string"),
                    ))
                }
            };
            ops.push(op);
        }
        if ops.len() > MAX_QUBITS {
            return Err(Error::invalid(format!("more than {MAX_QUBITS} qubits")));
        }
        Ok(PauliString::from_ops(&ops).with_phase(phase))
    }
}
