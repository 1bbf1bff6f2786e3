//! Clifford and Haar unitaries used as measurement ensembles.
//!
//! Global Cliffords are stored as tableaux: row `q` holds `U X_q U^dag` and row
//! `n + q` holds `U Z_q U^dag`, each a signed Hermitian [`PauliString`].
//! Uniform sampling builds the symplectic part row pair by row pair inside
//! the symplectic complement of the pairs already chosen, then draws the
//! `2n` sign bits uniformly. Every group element corresponds to exactly one
//! sequence of choices, so the resulting distribution is exactly uniform.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::dense::{c, DenseOperator, C_ZERO};
use crate::error::{Error, Result};
use crate::pauli::{i_pow, Pauli, PauliString, MAX_DENSE_QUBITS};

/// Qubit limit for dense realizations of global Cliffords.
pub const MAX_GLOBAL_DENSE_QUBITS: usize = 10;
/// Qubit limit for tableau sampling (choice counts must fit in 64 bits).
pub const MAX_TABLEAU_QUBITS: usize = 31;
/// Dimension limit for Haar sampling.
pub const MAX_HAAR_DIM: usize = 1 << 10;

/// Measurement-ensemble tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ensemble {
    /// Tensor products of independent uniform single-qubit Cliffords.
    Pauli,
    /// Uniform global n-qubit Cliffords.
    Clifford,
    /// Haar-random unitaries on the full space.
    Haar,
}

impl Ensemble {
    pub fn as_str(&self) -> &'static str {
        match self {
            Ensemble::Pauli => "pauli",
            Ensemble::Clifford => "clifford",
            Ensemble::Haar => "haar",
        }
    }

    /// Largest qubit count this ensemble is simulated on.
    pub fn qubit_limit(&self) -> usize {
        match self {
            Ensemble::Pauli => MAX_DENSE_QUBITS,
            Ensemble::Clifford | Ensemble::Haar => MAX_GLOBAL_DENSE_QUBITS,
        }
    }

    pub fn check_qubits(&self, n: usize) -> Result<()> {
        if n == 0 || n > self.qubit_limit() {
            return Err(Error::DimensionTooLarge {
                what: "measurement ensemble",
                qubits: n,
                limit: self.qubit_limit(),
            });
        }
        Ok(())
    }
}

impl fmt::Display for Ensemble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Ensemble {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "pauli" => Ok(Ensemble::Pauli),
            "clifford" => Ok(Ensemble::Clifford),
            "haar" => Ok(Ensemble::Haar),
            other => Err(Error::invalid(format!(
                "unknown ensemble {other:?} (expected pauli, clifford or haar)"
            ))),
        }
    }
}

// ---------------------------------------------------------------------------
// Single-qubit Cliffords

/// Signed single-qubit Paulis `+X, -X, +Y, -Y, +Z, -Z`.
fn signed_axis(k: usize) -> PauliString {
    let op = [Pauli::X, Pauli::Y, Pauli::Z][k / 2];
    PauliString::from_ops(&[op]).with_phase(if k % 2 == 1 { 2 } else { 0 })
}

/// One of the 24 single-qubit Cliffords (modulo global phase).
///
/// `index = 4 * a + b` where `a` picks the image of `X` among the six signed
/// axes and `b` picks the image of `Z` among the four signed axes orthogonal to it.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct SingleQubitClifford {
    index: u8,
}

type Gate = [[Complex64; 2]; 2];

struct SingleTable {
    images: [(PauliString, PauliString); 24],
    gates: [Gate; 24],
    /// `U Y U^dag` for each element.
    image_y: [PauliString; 24],
}

fn single_table() -> &'static SingleTable {
    static TABLE: OnceLock<SingleTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut images = [(PauliString::identity(1), PauliString::identity(1)); 24];
        let mut gates = [[[C_ZERO; 2]; 2]; 24];
        let mut image_y = [PauliString::identity(1); 24];
        for idx in 0..24 {
            let a = idx / 4;
            let b = idx % 4;
            let zs: Vec<usize> = (0..6).filter(|k| k / 2 != a / 2).collect();
            let ix = signed_axis(a);
            let iz = signed_axis(zs[b]);
            images[idx] = (ix, iz);
            let tab = CliffordTableau::from_rows(1, vec![ix, iz]).expect("valid single-qubit tableau");
            let u = tab.to_unitary().expect("one qubit");
            gates[idx] = [[u.get(0, 0), u.get(0, 1)], [u.get(1, 0), u.get(1, 1)]];
            image_y[idx] = tab.conjugate(&PauliString::from_ops(&[Pauli::Y]));
        }
        SingleTable { images, gates, image_y }
    })
}

impl SingleQubitClifford {
    pub const COUNT: usize = 24;

    pub fn from_index(index: usize) -> Result<Self> {
        if index >= Self::COUNT {
            return Err(Error::invalid(format!(
                "single-qubit Clifford index {index} out of range"
            )));
        }
        Ok(Self { index: index as u8 })
    }

    pub fn index(&self) -> usize {
        self.index as usize
    }

    pub fn all() -> impl Iterator<Item = SingleQubitClifford> {
        (0..Self::COUNT as u8).map(|index| SingleQubitClifford { index })
    }

    pub fn identity() -> Self {
        Self::find(Pauli::X, Pauli::Z)
    }

    /// The element exchanging `X` and `Z` with positive signs.
    pub fn hadamard() -> Self {
        Self::find(Pauli::Z, Pauli::X)
    }

    fn find(x_to: Pauli, z_to: Pauli) -> Self {
        let want_x = PauliString::from_ops(&[x_to]);
        let want_z = PauliString::from_ops(&[z_to]);
        Self::all()
            .find(|u| u.image_of_x() == want_x && u.image_of_z() == want_z)
            .expect("element exists")
    }

    /// Uniform sample over the 24 elements.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self {
            index: rng.random_range(0..Self::COUNT as u8),
        }
    }

    /// `u X u^dag`.
    pub fn image_of_x(&self) -> PauliString {
        single_table().images[self.index()].0
    }

    /// `u Z u^dag`.
    pub fn image_of_z(&self) -> PauliString {
        single_table().images[self.index()].1
    }

    /// `u P u^dag` for a single-qubit Pauli factor, as a signed one-qubit string.
    pub fn image_of(&self, op: Pauli) -> PauliString {
        match op {
            Pauli::I => PauliString::identity(1),
            Pauli::X => self.image_of_x(),
            Pauli::Z => self.image_of_z(),
            Pauli::Y => single_table().image_y[self.index()],
        }
    }

    pub fn gate(&self) -> &'static Gate {
        &single_table().gates[self.index()]
    }

    pub fn to_matrix(&self) -> DenseOperator {
        let g = self.gate();
        DenseOperator::from_fn(2, |r, c| g[r][c])
    }

    pub fn to_tableau(&self) -> CliffordTableau {
        CliffordTableau {
            n: 1,
            rows: vec![self.image_of_x(), self.image_of_z()],
        }
    }
}

/// Applies a 2x2 gate to qubit `q` of an `n`-qubit statevector.
#[inline]
pub(crate) fn apply_gate_1q(v: &mut [Complex64], n: usize, q: usize, g: &Gate) {
    let stride = 1usize << (n - 1 - q);
    let len = v.len();
    let mut block = 0;
    while block < len {
        for i in block..block + stride {
            let a = v[i];
            let b = v[i + stride];
            v[i] = g[0][0] * a + g[0][1] * b;
            v[i + stride] = g[1][0] * a + g[1][1] * b;
        }
        block += 2 * stride;
    }
}

// ---------------------------------------------------------------------------
// Global Clifford tableaux

/// Symplectic vector `(x, z)`.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
struct Sym {
    x: u64,
    z: u64,
}

impl Sym {
    const ZERO: Sym = Sym { x: 0, z: 0 };

    #[inline]
    fn form(self, o: Sym) -> u32 {
        ((self.x & o.z).count_ones() + (self.z & o.x).count_ones()) & 1
    }

    #[inline]
    fn add(self, o: Sym) -> Sym {
        Sym {
            x: self.x ^ o.x,
            z: self.z ^ o.z,
        }
    }

    fn is_zero(self) -> bool {
        self.x == 0 && self.z == 0
    }
}

/// Supplies the discrete choices of the row-by-row construction.
trait ChoiceSource {
    /// A value in `0..bound`.
    fn choose(&mut self, bound: u64) -> u64;
}

struct RngChoices<'a, R: Rng + ?Sized>(&'a mut R);

impl<R: Rng + ?Sized> ChoiceSource for RngChoices<'_, R> {
    fn choose(&mut self, bound: u64) -> u64 {
        self.0.random_range(0..bound)
    }
}

/// Mixed-radix digits for exhaustive enumeration.
struct DigitChoices {
    code: u64,
}

impl ChoiceSource for DigitChoices {
    fn choose(&mut self, bound: u64) -> u64 {
        let d = self.code % bound;
        self.code /= bound;
        d
    }
}

/// Extracts a symplectic basis `[a0, b0, a1, b1, ...]` from spanning vectors
/// of a nondegenerate subspace.
fn symplectic_basis(mut pool: Vec<Sym>) -> Vec<Sym> {
    pool.retain(|v| !v.is_zero());
    let mut basis = Vec::with_capacity(pool.len());
    while !pool.is_empty() {
        let u = pool.remove(0);
        let Some(pos) = pool.iter().position(|&w| u.form(w) == 1) else {
            // u is spanned by the rest modulo the radical; drop it
            continue;
        };
        let w = pool.remove(pos);
        for v in pool.iter_mut() {
            let mut nv = *v;
            if v.form(w) == 1 {
                nv = nv.add(u);
            }
            if v.form(u) == 1 {
                nv = nv.add(w);
            }
            *v = nv;
        }
        pool.retain(|v| !v.is_zero());
        basis.push(u);
        basis.push(w);
    }
    basis
}

fn combine(basis: &[Sym], coeffs: u64) -> Sym {
    let mut acc = Sym::ZERO;
    for (i, &b) in basis.iter().enumerate() {
        if (coeffs >> i) & 1 == 1 {
            acc = acc.add(b);
        }
    }
    acc
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct CliffordTableau {
    n: usize,
    rows: Vec<PauliString>,
}

impl CliffordTableau {
    pub fn identity(n: usize) -> Self {
        let mut rows = Vec::with_capacity(2 * n);
        for q in 0..n {
            rows.push(PauliString::single(n, q, Pauli::X));
        }
        for q in 0..n {
            rows.push(PauliString::single(n, q, Pauli::Z));
        }
        Self { n, rows }
    }

    /// Builds a tableau from `2n` signed Hermitian rows, checking the symplectic condition.
    pub fn from_rows(n: usize, rows: Vec<PauliString>) -> Result<Self> {
        if rows.len() != 2 * n {
            return Err(Error::DimensionMismatch {
                expected: 2 * n,
                found: rows.len(),
            });
        }
        if let Some(r) = rows.iter().find(|r| r.num_qubits() != n || !r.is_hermitian()) {
            return Err(Error::invalid(format!(
                "tableau row {r} is not a signed {n}-qubit Pauli"
            )));
        }
        let tab = Self { n, rows };
        if !tab.is_symplectic() {
            return Err(Error::invalid("tableau rows violate the symplectic condition"));
        }
        Ok(tab)
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> &[PauliString] {
        &self.rows
    }

    /// `U X_q U^dag`.
    pub fn image_of_x(&self, q: usize) -> PauliString {
        self.rows[q]
    }

    /// `U Z_q U^dag`.
    pub fn image_of_z(&self, q: usize) -> PauliString {
        self.rows[self.n + q]
    }

    /// The `2n x 2n` binary matrix: row `r` is `[x bits of qubits 0..n | z bits of qubits 0..n]`.
    pub fn symplectic_matrix(&self) -> Vec<Vec<u8>> {
        let n = self.n;
        self.rows
            .iter()
            .map(|r| {
                let mut row = vec![0u8; 2 * n];
                for q in 0..n {
                    let bit = 1u64 << (n - 1 - q);
                    row[q] = (r.x_bits() & bit != 0) as u8;
                    row[n + q] = (r.z_bits() & bit != 0) as u8;
                }
                row
            })
            .collect()
    }

    /// Sign bits of the rows (`true` for a `-1` sign).
    pub fn signs(&self) -> Vec<bool> {
        self.rows.iter().map(|r| r.phase() == 2).collect()
    }

    /// `S Ω S^T = Ω` over GF(2).
    pub fn is_symplectic(&self) -> bool {
        let n = self.n;
        for i in 0..2 * n {
            for j in 0..2 * n {
                let expect = (i + n == j) || (j + n == i);
                let anticommute = !self.rows[i].commutes_with(&self.rows[j]);
                if anticommute != expect {
                    return false;
                }
            }
        }
        true
    }

    /// `U P U^dag` with exact sign.
    pub fn conjugate(&self, p: &PauliString) -> PauliString {
        assert_eq!(p.num_qubits(), self.n, "qubit count mismatch");
        let n = self.n;
        let mut acc = PauliString::identity(n).with_phase(p.phase());
        for q in 0..n {
            let bit = 1u64 << (n - 1 - q);
            let has_x = p.x_bits() & bit != 0;
            let has_z = p.z_bits() & bit != 0;
            match (has_x, has_z) {
                (false, false) => {}
                (true, false) => acc = acc * self.rows[q],
                (false, true) => acc = acc * self.rows[n + q],
                // Y = i X Z
                (true, true) => {
                    acc = acc * self.rows[q] * self.rows[n + q];
                    acc = acc.with_phase(acc.phase() + 1);
                }
            }
        }
        acc
    }

    /// Tableau of `self ∘ inner`, i.e. the unitary `U_self U_inner`.
    pub fn compose(&self, inner: &CliffordTableau) -> CliffordTableau {
        assert_eq!(self.n, inner.n);
        CliffordTableau {
            n: self.n,
            rows: inner.rows.iter().map(|r| self.conjugate(r)).collect(),
        }
    }

    fn build(n: usize, choices: &mut impl ChoiceSource) -> Self {
        let mut complement = Vec::with_capacity(2 * n);
        for q in 0..n {
            let bit = 1u64 << (n - 1 - q);
            complement.push(Sym { x: bit, z: 0 });
            complement.push(Sym { x: 0, z: bit });
        }
        let mut xs = Vec::with_capacity(n);
        let mut zs = Vec::with_capacity(n);
        for _ in 0..n {
            let dim = complement.len();
            // image of X: any nonzero vector of the complement
            let a = combine(&complement, 1 + choices.choose((1u64 << dim) - 1));
            // image of Z: any complement vector with <a, y> = 1
            let pivot = complement
                .iter()
                .position(|&e| a.form(e) == 1)
                .expect("complement is nondegenerate");
            let t = complement[pivot];
            let hyper: Vec<Sym> = complement
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != pivot)
                .map(|(_, &e)| if a.form(e) == 1 { e.add(t) } else { e })
                .collect();
            let y = t.add(combine(&hyper, choices.choose(1u64 << (dim - 1))));
            let projected: Vec<Sym> = complement
                .iter()
                .map(|&v| {
                    let mut nv = v;
                    if v.form(y) == 1 {
                        nv = nv.add(a);
                    }
                    if v.form(a) == 1 {
                        nv = nv.add(y);
                    }
                    nv
                })
                .collect();
            complement = symplectic_basis(projected);
            xs.push(a);
            zs.push(y);
        }
        let signs = choices.choose(1u64 << (2 * n));
        let rows = xs
            .into_iter()
            .chain(zs)
            .enumerate()
            .map(|(r, s)| PauliString::from_raw(n, s.x, s.z, if (signs >> r) & 1 == 1 { 2 } else { 0 }))
            .collect();
        Self { n, rows }
    }

    /// Uniform sample from the n-qubit Clifford group modulo global phase.
    pub fn sample<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        assert!(
            (1..=MAX_TABLEAU_QUBITS).contains(&n),
            "tableau sampling needs 1..=31 qubits"
        );
        Self::build(n, &mut RngChoices(rng))
    }

    /// `|C_n / U(1)| = 2^{n^2 + 2n} prod_j (4^j - 1)`.
    pub fn group_order(n: usize) -> u128 {
        let mut order: u128 = 1u128 << (n * n + 2 * n);
        for j in 1..=n {
            order *= (1u128 << (2 * j)) - 1;
        }
        order
    }

    /// Every element of the group, each exactly once (`n <= 2`).
    pub fn enumerate(n: usize) -> Result<Vec<CliffordTableau>> {
        if !(1..=2).contains(&n) {
            return Err(Error::DimensionTooLarge {
                what: "Clifford group enumeration",
                qubits: n,
                limit: 2,
            });
        }
        let order = Self::group_order(n) as u64;
        Ok((0..order)
            .map(|code| Self::build(n, &mut DigitChoices { code }))
            .collect())
    }

    /// Index `x` of a basis state in the support of the stabilizer state `U|0>`.
    fn support_point(&self) -> u64 {
        let n = self.n;
        let mut gens: Vec<PauliString> = self.rows[n..].to_vec();
        let mut rank = 0;
        for q in 0..n {
            let bit = 1u64 << (n - 1 - q);
            let Some(p) = (rank..n).find(|&r| gens[r].x_bits() & bit != 0) else {
                continue;
            };
            gens.swap(rank, p);
            for r in 0..n {
                if r != rank && gens[r].x_bits() & bit != 0 {
                    gens[r] = gens[r] * gens[rank];
                }
            }
            rank += 1;
        }
        // Remaining generators are ±Z^a: need a·x = [sign is -1]
        let mut eqs: Vec<(u64, u64)> = gens[rank..]
            .iter()
            .map(|g| (g.z_bits(), (g.phase() == 2) as u64))
            .collect();
        let mut x = 0u64;
        let mut pivots = Vec::new();
        let mut row = 0;
        for bitpos in (0..n).rev() {
            let bit = 1u64 << bitpos;
            let Some(p) = (row..eqs.len()).find(|&r| eqs[r].0 & bit != 0) else {
                continue;
            };
            eqs.swap(row, p);
            for r in 0..eqs.len() {
                if r != row && eqs[r].0 & bit != 0 {
                    eqs[r].0 ^= eqs[row].0;
                    eqs[r].1 ^= eqs[row].1;
                }
            }
            pivots.push((row, bit));
            row += 1;
        }
        for (r, bit) in pivots {
            // free variables are zero, so each pivot bit equals its right-hand side
            if eqs[r].1 == 1 {
                x |= bit;
            }
        }
        x
    }

    /// The stabilizer state `U|0...0>` (fixed global-phase convention).
    pub fn zero_state(&self) -> Vec<Complex64> {
        let dim = 1usize << self.n;
        let mut v = vec![C_ZERO; dim];
        v[self.support_point() as usize] = c(1.0, 0.0);
        let mut tmp = vec![C_ZERO; dim];
        for g in &self.rows[self.n..] {
            g.apply_into(&v, &mut tmp);
            for (a, b) in v.iter_mut().zip(tmp.iter()) {
                *a = (*a + *b) * 0.5;
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for a in v.iter_mut() {
            *a /= norm;
        }
        v
    }

    /// `U v` using `U|b> = (prod_q (U X_q U^dag)^{b_q}) U|0>`.
    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let dim = 1usize << self.n;
        assert_eq!(v.len(), dim);
        let psi0 = self.zero_state();
        let mut out = vec![C_ZERO; dim];
        for (b, &amp) in v.iter().enumerate() {
            if amp == C_ZERO {
                continue;
            }
            let op = self.x_product(b as u64);
            let base = op.phase() as u32 + (op.x_bits() & op.z_bits()).count_ones();
            let x = op.x_bits() as usize;
            for (cidx, &p) in psi0.iter().enumerate() {
                if p == C_ZERO {
                    continue;
                }
                let k = base + 2 * (op.z_bits() & cidx as u64).count_ones();
                out[cidx ^ x] += amp * p * i_pow(k);
            }
        }
        out
    }

    /// `prod_{q : b_q = 1} U X_q U^dag`.
    fn x_product(&self, b: u64) -> PauliString {
        let n = self.n;
        let mut op = PauliString::identity(n);
        for q in 0..n {
            if (b >> (n - 1 - q)) & 1 == 1 {
                op = op * self.rows[q];
            }
        }
        op
    }

    pub fn to_unitary(&self) -> Result<DenseOperator> {
        if self.n > MAX_GLOBAL_DENSE_QUBITS {
            return Err(Error::DimensionTooLarge {
                what: "dense global Clifford",
                qubits: self.n,
                limit: MAX_GLOBAL_DENSE_QUBITS,
            });
        }
        let dim = 1usize << self.n;
        let psi0 = self.zero_state();
        let mut mat = nalgebra::DMatrix::from_element(dim, dim, C_ZERO);
        let mut col = vec![C_ZERO; dim];
        for b in 0..dim {
            self.x_product(b as u64).apply_into(&psi0, &mut col);
            mat.column_mut(b).iter_mut().zip(col.iter()).for_each(|(m, v)| *m = *v);
        }
        DenseOperator::new(mat)
    }
}

impl fmt::Debug for CliffordTableau {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.rows.iter().map(|r| r.to_string())).finish()
    }
}

// ---------------------------------------------------------------------------
// Haar unitaries

/// Haar-random unitary on `dim` dimensions.
///
/// Columns of a complex Ginibre matrix are orthonormalized by modified
/// Gram-Schmidt. This is the QR factorization whose `R` has a positive real
/// diagonal, which is exactly the phase-fixed QR that yields Haar measure.
pub fn sample_haar<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<DenseOperator> {
    if dim == 0 || dim > MAX_HAAR_DIM {
        return Err(Error::DimensionTooLarge {
            what: "Haar unitary",
            qubits: dim.max(1).ilog2() as usize,
            limit: MAX_HAAR_DIM.ilog2() as usize,
        });
    }
    let mut cols: Vec<Vec<Complex64>> = (0..dim)
        .map(|_| {
            (0..dim)
                .map(|_| c(rng.sample(StandardNormal), rng.sample(StandardNormal)))
                .collect()
        })
        .collect();
    for j in 0..dim {
        // two passes keep the columns orthonormal to ~1e-15
        for _ in 0..2 {
            for k in 0..j {
                let (done, rest) = cols.split_at_mut(j);
                let qk = &done[k];
                let proj: Complex64 = qk.iter().zip(rest[0].iter()).map(|(a, b)| a.conj() * b).sum();
                for (v, q) in rest[0].iter_mut().zip(qk.iter()) {
                    *v -= proj * q;
                }
            }
        }
        let norm = cols[j].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for v in cols[j].iter_mut() {
            *v /= norm;
        }
    }
    DenseOperator::new(nalgebra::DMatrix::from_fn(dim, dim, |r, c| cols[c][r]))
}

// ---------------------------------------------------------------------------
// Descriptors

/// The unitary applied before a computational-basis measurement.
#[derive(Clone, PartialEq, Debug)]
pub enum UnitaryDescriptor {
    PauliLayer(Vec<SingleQubitClifford>),
    GlobalClifford(CliffordTableau),
    Haar(DenseOperator),
}

impl UnitaryDescriptor {
    pub fn sample<R: Rng + ?Sized>(ensemble: Ensemble, n: usize, rng: &mut R) -> Result<Self> {
        ensemble.check_qubits(n)?;
        Ok(match ensemble {
            Ensemble::Pauli => {
                UnitaryDescriptor::PauliLayer((0..n).map(|_| SingleQubitClifford::sample(rng)).collect())
            }
            Ensemble::Clifford => UnitaryDescriptor::GlobalClifford(CliffordTableau::sample(n, rng)),
            Ensemble::Haar => UnitaryDescriptor::Haar(sample_haar(1 << n, rng)?),
        })
    }

    pub fn identity(ensemble: Ensemble, n: usize) -> Self {
        match ensemble {
            Ensemble::Pauli => UnitaryDescriptor::PauliLayer(vec![SingleQubitClifford::identity(); n]),
            Ensemble::Clifford => UnitaryDescriptor::GlobalClifford(CliffordTableau::identity(n)),
            Ensemble::Haar => UnitaryDescriptor::Haar(DenseOperator::identity(1 << n)),
        }
    }

    pub fn ensemble(&self) -> Ensemble {
        match self {
            UnitaryDescriptor::PauliLayer(_) => Ensemble::Pauli,
            UnitaryDescriptor::GlobalClifford(_) => Ensemble::Clifford,
            UnitaryDescriptor::Haar(_) => Ensemble::Haar,
        }
    }

    pub fn num_qubits(&self) -> usize {
        match self {
            UnitaryDescriptor::PauliLayer(layer) => layer.len(),
            UnitaryDescriptor::GlobalClifford(t) => t.num_qubits(),
            UnitaryDescriptor::Haar(u) => u.dim().ilog2() as usize,
        }
    }

    pub fn to_unitary(&self) -> Result<DenseOperator> {
        match self {
            UnitaryDescriptor::PauliLayer(layer) => {
                if layer.len() > MAX_DENSE_QUBITS {
                    return Err(Error::DimensionTooLarge {
                        what: "dense Pauli-layer unitary",
                        qubits: layer.len(),
                        limit: MAX_DENSE_QUBITS,
                    });
                }
                let mats: Vec<DenseOperator> = layer.iter().map(|u| u.to_matrix()).collect();
                Ok(DenseOperator::kron_all(mats.iter()))
            }
            UnitaryDescriptor::GlobalClifford(t) => t.to_unitary(),
            UnitaryDescriptor::Haar(u) => Ok(u.clone()),
        }
    }

    /// `U v` for a statevector.
    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        match self {
            UnitaryDescriptor::PauliLayer(layer) => {
                let mut out = v.to_vec();
                self.apply_layer_in_place(layer, &mut out);
                out
            }
            UnitaryDescriptor::GlobalClifford(t) => t.apply(v),
            UnitaryDescriptor::Haar(u) => u.apply(v),
        }
    }

    fn apply_layer_in_place(&self, layer: &[SingleQubitClifford], v: &mut [Complex64]) {
        let n = layer.len();
        for (q, u) in layer.iter().enumerate() {
            apply_gate_1q(v, n, q, u.gate());
        }
    }

    /// `U P U^dag` as a signed Pauli string; `None` for Haar unitaries.
    pub fn conjugate_pauli(&self, p: &PauliString) -> Result<Option<PauliString>> {
        if p.num_qubits() != self.num_qubits() {
            return Err(Error::DimensionMismatch {
                expected: self.num_qubits(),
                found: p.num_qubits(),
            });
        }
        Ok(match self {
            UnitaryDescriptor::PauliLayer(layer) => Some(conjugate_layer(layer, p)),
            UnitaryDescriptor::GlobalClifford(t) => Some(t.conjugate(p)),
            UnitaryDescriptor::Haar(_) => None,
        })
    }

    /// Compact one-token text form; see [`FromStr`] for the grammar.
    pub fn serialize(&self) -> String {
        match self {
            UnitaryDescriptor::PauliLayer(layer) => {
                let idx: Vec<String> = layer.iter().map(|u| u.index().to_string()).collect();
                format!("P:{}", idx.join(","))
            }
            UnitaryDescriptor::GlobalClifford(t) => {
                let n = t.n;
                let width = n.div_ceil(4).max(1);
                let rows: Vec<String> = t
                    .rows
                    .iter()
                    .map(|r| format!("{:0w$x}/{:0w$x}", r.x_bits(), r.z_bits(), w = width))
                    .collect();
                let mut signs = 0u64;
                for (i, r) in t.rows.iter().enumerate() {
                    if r.phase() == 2 {
                        signs |= 1 << i;
                    }
                }
                format!("C:{}:{}:{:x}", n, rows.join(","), signs)
            }
            UnitaryDescriptor::Haar(u) => {
                let mut s = format!("H:{}:", u.dim());
                for r in 0..u.dim() {
                    for c in 0..u.dim() {
                        let z = u.get(r, c);
                        s.push_str(&format!("{:016x}{:016x}", z.re.to_bits(), z.im.to_bits()));
                    }
                }
                s
            }
        }
    }
}

/// `(⊗ u_q) P (⊗ u_q)^dag`.
pub(crate) fn conjugate_layer(layer: &[SingleQubitClifford], p: &PauliString) -> PauliString {
    let n = layer.len();
    let mut x = 0u64;
    let mut z = 0u64;
    let mut phase = p.phase() as u32;
    for (q, u) in layer.iter().enumerate() {
        let op = p.op(q);
        if op == Pauli::I {
            continue;
        }
        let img = u.image_of(op);
        let bit = 1u64 << (n - 1 - q);
        if img.x_bits() != 0 {
            x |= bit;
        }
        if img.z_bits() != 0 {
            z |= bit;
        }
        phase += img.phase() as u32;
    }
    PauliString::from_raw(n, x, z, (phase & 3) as u8)
}

fn bad_descriptor(msg: impl Into<String>) -> Error {
    Error::parse(1, 1, format!("unitary descriptor: {}", msg.into()))
}

impl FromStr for UnitaryDescriptor {
    type Err = Error;

    /// `P:i0,i1,...` | `C:n:x0/z0,...:signs` (hex) | `H:D:<32 hex digits per entry>`.
    fn from_str(s: &str) -> Result<Self> {
        if let Some(rest) = s.strip_prefix("P:") {
            let layer = rest
                .split(',')
                .map(|t| {
                    t.parse::<usize>()
                        .map_err(|_| bad_descriptor(format!("bad index {t:?}")))
                        .and_then(SingleQubitClifford::from_index)
                })
                .collect::<Result<Vec<_>>>()?;
            return Ok(UnitaryDescriptor::PauliLayer(layer));
        }
        if let Some(rest) = s.strip_prefix("C:") {
            let mut parts = rest.split(':');
            let (Some(ns), Some(rows), Some(signs), None) = (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(bad_descriptor("expected C:n:rows:signs"));
            };
            let n: usize = ns.parse().map_err(|_| bad_descriptor("bad qubit count"))?;
            if n == 0 || n > MAX_TABLEAU_QUBITS {
                return Err(bad_descriptor("qubit count out of range"));
            }
            let signs = u64::from_str_radix(signs, 16).map_err(|_| bad_descriptor("bad sign bits"))?;
            let rows = rows
                .split(',')
                .enumerate()
                .map(|(i, r)| {
                    let (xs, zs) = r.split_once('/').ok_or_else(|| bad_descriptor("row needs x/z"))?;
                    let x = u64::from_str_radix(xs, 16).map_err(|_| bad_descriptor("bad x bits"))?;
                    let z = u64::from_str_radix(zs, 16).map_err(|_| bad_descriptor("bad z bits"))?;
                    PauliString::new(n, x, z, if (signs >> i) & 1 == 1 { 2 } else { 0 })
                })
                .collect::<Result<Vec<_>>>()?;
            return Ok(UnitaryDescriptor::GlobalClifford(CliffordTableau::from_rows(n, rows)?));
        }
        if let Some(rest) = s.strip_prefix("H:") {
            let (ds, hex) = rest
                .split_once(':')
                .ok_or_else(|| bad_descriptor("expected H:D:data"))?;
            let dim: usize = ds.parse().map_err(|_| bad_descriptor("bad dimension"))?;
            if dim == 0 || !dim.is_power_of_two() || dim > MAX_HAAR_DIM || hex.len() != dim * dim * 32 {
                return Err(bad_descriptor("Haar payload has the wrong size"));
            }
            let word = |k: usize| -> Result<f64> {
                u64::from_str_radix(&hex[16 * k..16 * k + 16], 16)
                    .map(f64::from_bits)
                    .map_err(|_| bad_descriptor("bad float bits"))
            };
            let mut entries = Vec::with_capacity(dim * dim);
            for k in 0..dim * dim {
                entries.push(c(word(2 * k)?, word(2 * k + 1)?));
            }
            let mat = nalgebra::DMatrix::from_row_slice(dim, dim, &entries);
            return Ok(UnitaryDescriptor::Haar(DenseOperator::new(mat)?));
        }
        Err(bad_descriptor(format!(
            "unknown kind in {:?}",
            s.chars().take(8).collect::<String>()
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::EXACT_TOL;
    use crate::stats::chi_square_uniform;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::{HashMap, HashSet};

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn dense_conjugate(u: &DenseOperator, p: &PauliString) -> DenseOperator {
        &(u * &p.to_matrix().unwrap()) * &u.adjoint()
    }

    #[test]
    fn single_qubit_table_is_the_group() {
        let mut seen = HashSet::new();
        for u in SingleQubitClifford::all() {
            assert!(!u.image_of_x().commutes_with(&u.image_of_z()));
            assert!(seen.insert((u.image_of_x(), u.image_of_z())));
            let m = u.to_matrix();
            assert!(m.is_unitary(1e-12));
            for op in [Pauli::X, Pauli::Y, Pauli::Z] {
                let p = PauliString::from_ops(&[op]);
                let dense = dense_conjugate(&m, &p);
                let img = u.image_of(op).to_matrix().unwrap();
                assert!(dense.max_abs_diff(&img) < EXACT_TOL, "u={} op={op:?}", u.index());
            }
        }
        assert_eq!(seen.len(), 24);
    }

    #[test]
    fn images_of_z_cover_six_directions_four_times() {
        let mut counts: HashMap<PauliString, usize> = HashMap::new();
        for u in SingleQubitClifford::all() {
            *counts.entry(u.image_of_z()).or_default() += 1;
        }
        assert_eq!(counts.len(), 6);
        assert!(counts.values().all(|&c| c == 4));
    }

    #[test]
    fn hadamard_swaps_x_and_z() {
        let h = SingleQubitClifford::hadamard();
        let layer = UnitaryDescriptor::PauliLayer(vec![h]);
        let x = PauliString::from_ops(&[Pauli::X]);
        let z = PauliString::from_ops(&[Pauli::Z]);
        assert_eq!(layer.conjugate_pauli(&x).unwrap(), Some(z));
        let tab = UnitaryDescriptor::GlobalClifford(h.to_tableau());
        assert_eq!(tab.conjugate_pauli(&x).unwrap(), Some(z));
    }

    #[test]
    fn sample_single_uniform() {
        let mut r = rng(7);
        let mut counts = [0u64; 24];
        for _ in 0..24000 {
            counts[SingleQubitClifford::sample(&mut r).index()] += 1;
        }
        assert!(counts.iter().all(|&c| (850..=1150).contains(&c)), "{counts:?}");
        let (_, p) = chi_square_uniform(&counts);
        assert!(p > 0.001, "p = {p}");
    }

    #[test]
    fn identity_tableau_fixes_everything() {
        let id = CliffordTableau::identity(3);
        for p in PauliString::enumerate(3) {
            assert_eq!(id.conjugate(&p), p);
            assert_eq!(id.conjugate(&p.with_phase(2)), p.with_phase(2));
        }
        assert!(id.to_unitary().unwrap().max_abs_diff(&DenseOperator::identity(8)) < EXACT_TOL);
    }

    #[test]
    fn sampled_tableaux_are_symplectic_and_compose() {
        let mut r = rng(11);
        for n in 1..=6 {
            for _ in 0..20 {
                let a = CliffordTableau::sample(n, &mut r);
                let b = CliffordTableau::sample(n, &mut r);
                assert!(a.is_symplectic());
                assert!(a.compose(&b).is_symplectic());
                assert_eq!(a.conjugate(&PauliString::identity(n)), PauliString::identity(n));
            }
        }
    }

    #[test]
    fn conjugation_matches_dense_oracle() {
        let mut r = rng(5);
        for n in 1..=3 {
            for _ in 0..200 {
                let t = CliffordTableau::sample(n, &mut r);
                let u = t.to_unitary().unwrap();
                assert!(u.is_unitary(1e-10));
                let code = r.random_range(0..(1u64 << (2 * n)));
                let p = PauliString::new(n, code >> n, code & ((1 << n) - 1), 2 * r.random_range(0..2u8)).unwrap();
                let fast = t.conjugate(&p).to_matrix().unwrap();
                assert!(fast.max_abs_diff(&dense_conjugate(&u, &p)) < EXACT_TOL, "n={n} p={p}");
            }
        }
    }

    #[test]
    fn layer_conjugation_matches_dense_oracle() {
        let mut r = rng(6);
        for _ in 0..200 {
            let d = UnitaryDescriptor::sample(Ensemble::Pauli, 2, &mut r).unwrap();
            let u = d.to_unitary().unwrap();
            let code = r.random_range(0..16u64);
            let p = PauliString::new(2, code >> 2, code & 3, 0).unwrap();
            let fast = d.conjugate_pauli(&p).unwrap().unwrap().to_matrix().unwrap();
            assert!(fast.max_abs_diff(&dense_conjugate(&u, &p)) < EXACT_TOL);
        }
    }

    #[test]
    fn compose_matches_matrix_product() {
        let mut r = rng(8);
        for _ in 0..50 {
            let a = CliffordTableau::sample(2, &mut r);
            let b = CliffordTableau::sample(2, &mut r);
            let ab = a.compose(&b);
            let u = &a.to_unitary().unwrap() * &b.to_unitary().unwrap();
            for p in PauliString::enumerate(2) {
                let fast = ab.conjugate(&p).to_matrix().unwrap();
                assert!(fast.max_abs_diff(&dense_conjugate(&u, &p)) < EXACT_TOL);
            }
        }
    }

    #[test]
    fn apply_matches_dense_unitary() {
        let mut r = rng(9);
        for n in 1..=4 {
            let t = CliffordTableau::sample(n, &mut r);
            let u = t.to_unitary().unwrap();
            let v: Vec<Complex64> = (0..1 << n)
                .map(|_| c(r.random::<f64>() - 0.5, r.random::<f64>() - 0.5))
                .collect();
            let fast = t.apply(&v);
            let slow = u.apply(&v);
            for (a, b) in fast.iter().zip(slow.iter()) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn enumeration_orders() {
        assert_eq!(CliffordTableau::group_order(1), 24);
        assert_eq!(CliffordTableau::group_order(2), 11520);
        for n in 1..=2 {
            let all = CliffordTableau::enumerate(n).unwrap();
            let distinct: HashSet<_> = all.iter().collect();
            assert_eq!(distinct.len() as u128, CliffordTableau::group_order(n));
            assert!(all.iter().all(|t| t.is_symplectic()));
        }
        assert!(CliffordTableau::enumerate(3).is_err());
    }

    #[test]
    fn global_sampler_n1_matches_single_qubit_classes() {
        let lookup: HashMap<CliffordTableau, usize> = SingleQubitClifford::all()
            .map(|u| (u.to_tableau(), u.index()))
            .collect();
        assert_eq!(lookup.len(), 24);
        let mut r = rng(3);
        let mut counts = [0u64; 24];
        for _ in 0..24000 {
            counts[lookup[&CliffordTableau::sample(1, &mut r)]] += 1;
        }
        let (_, p) = chi_square_uniform(&counts);
        assert!(p > 0.001, "p = {p}, counts {counts:?}");
    }

    #[test]
    fn one_design_average() {
        let mut r = rng(21);
        let trials = 4000;
        let mut acc = DenseOperator::zeros(2);
        for _ in 0..trials {
            let u = CliffordTableau::sample(1, &mut r).to_unitary().unwrap();
            let col = u.apply(&[c(1.0, 0.0), C_ZERO]);
            acc = &acc + &DenseOperator::projector(&col);
        }
        let mean = acc.scale_real(1.0 / trials as f64);
        // entries of U|0><0|U^dag are bounded by 1, so 3σ <= 3 * 0.5 / sqrt(trials)
        assert!(mean.max_abs_diff(&DenseOperator::identity(2).scale_real(0.5)) < 1.5 / (trials as f64).sqrt());
    }

    #[test]
    fn haar_samples() {
        let mut r = rng(4);
        for dim in [2, 4, 8, 32] {
            assert!(sample_haar(dim, &mut r).unwrap().is_unitary(1e-10));
        }
        let trials = 10_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..trials {
            let u = sample_haar(2, &mut r).unwrap();
            let v = u.get(0, 0).norm_sqr();
            sum += v;
            sum_sq += v * v;
        }
        let mean = sum / trials as f64;
        let sd = ((sum_sq / trials as f64 - mean * mean) / trials as f64).sqrt();
        assert!((mean - 0.5).abs() < 3.0 * sd, "mean {mean} sd {sd}");
    }

    #[test]
    fn haar_first_moment_twirl() {
        let mut r = rng(12);
        let trials = 10_000;
        let dim = 4;
        let mut sum = vec![0.0f64; dim * dim];
        let mut sum_sq = vec![0.0f64; dim * dim];
        for _ in 0..trials {
            let u = sample_haar(dim, &mut r).unwrap();
            // U |0><0| U^dag has entries U_r0 conj(U_c0)
            for rr in 0..dim {
                for cc in 0..dim {
                    let v = (u.get(rr, 0) * u.get(cc, 0).conj()).re;
                    sum[rr * dim + cc] += v;
                    sum_sq[rr * dim + cc] += v * v;
                }
            }
        }
        for rr in 0..dim {
            for cc in 0..dim {
                let k = rr * dim + cc;
                let mean = sum[k] / trials as f64;
                let sd = ((sum_sq[k] / trials as f64 - mean * mean) / trials as f64).sqrt();
                let target = if rr == cc { 1.0 / dim as f64 } else { 0.0 };
                assert!((mean - target).abs() <= 3.0 * sd + 1e-12, "({rr},{cc}) {mean}");
            }
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let a: Vec<_> = {
            let mut r = rng(99);
            (0..10).map(|_| CliffordTableau::sample(3, &mut r)).collect()
        };
        let b: Vec<_> = {
            let mut r = rng(99);
            (0..10).map(|_| CliffordTableau::sample(3, &mut r)).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn descriptor_serialization_round_trip() {
        let mut r = rng(10);
        for ens in [Ensemble::Pauli, Ensemble::Clifford, Ensemble::Haar] {
            for n in 1..=3 {
                let d = UnitaryDescriptor::sample(ens, n, &mut r).unwrap();
                let text = d.serialize();
                assert!(!text.contains(char::is_whitespace));
                let back: UnitaryDescriptor = text.parse().unwrap();
                assert_eq!(back, d);
            }
        }
        assert!("Q:1".parse::<UnitaryDescriptor>().is_err());
        assert!("P:1,99".parse::<UnitaryDescriptor>().is_err());
        // rows that are not symplectic
        assert!("C:1:1/0,1/0:0".parse::<UnitaryDescriptor>().is_err());
    }

    #[test]
    fn dimension_limits() {
        assert!(UnitaryDescriptor::sample(Ensemble::Clifford, 11, &mut rng(1)).is_err());
        let big = CliffordTableau::identity(11);
        assert!(big.to_unitary().is_err());
        let p = PauliString::identity(3);
        let d = UnitaryDescriptor::identity(Ensemble::Pauli, 2);
        assert!(matches!(d.conjugate_pauli(&p), Err(Error::DimensionMismatch { .. })));
    }
}
