//! Multi-shot data collection and shadow estimators.
//!
//! A record is one sampled unitary `U` plus `K` computational-basis outcomes
//! measured after it. Snapshots are never stored as matrices: every estimator
//! goes through the snapshot value
//! `q(b|U) = tr(O M^{-1}(U^dag |b><b| U)) = <b|U M^{-1}(O) U^dag|b>`,
//! which is evaluated with a per-record kernel built once per unitary.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::clifford::{Ensemble, UnitaryDescriptor};
use crate::dense::{DenseOperator, C_ZERO};
use crate::error::{Error, Result};
use crate::exec::{try_map_indexed, Execution};
use crate::observable::Observable;
use crate::pauli::PauliString;
use crate::state::{apply_unitary_in_place, format_bitstring, parse_bitstring, QuantumState};
use crate::stats;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the `index`-th child stream of `parent`.
pub fn child_seed(parent: u64, index: u64) -> u64 {
    splitmix64(splitmix64(parent) ^ index.wrapping_mul(0xd6e8_feb8_6659_fd93))
}

#[derive(Clone, PartialEq, Debug)]
pub struct MeasurementRecord {
    pub unitary: UnitaryDescriptor,
    /// Outcome integers, qubit 0 in the most significant bit.
    pub outcomes: Vec<u64>,
}

/// Samples one unitary, then `k` outcomes from its Born distribution, all from `seed`.
pub fn draw_record(state: &QuantumState, ensemble: Ensemble, k: usize, seed: u64) -> Result<MeasurementRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unitary = UnitaryDescriptor::sample(ensemble, state.num_qubits(), &mut rng)?;
    let dist = state.born_distribution(&unitary)?;
    let outcomes = dist.sample_bitstrings(k, &mut rng);
    Ok(MeasurementRecord { unitary, outcomes })
}

fn check_shape(ensemble: Ensemble, n: usize, m: usize, k: usize) -> Result<()> {
    ensemble.check_qubits(n)?;
    if m == 0 || k == 0 {
        return Err(Error::invalid("M and K must be at least 1"));
    }
    Ok(())
}

/// Output of the multi-shot protocol: `M` records of `K` shots each.
#[derive(Clone, PartialEq, Debug)]
pub struct ShadowSet {
    ensemble: Ensemble,
    n: usize,
    k: usize,
    master_seed: u64,
    records: Vec<MeasurementRecord>,
}

impl ShadowSet {
    pub fn new(ensemble: Ensemble, n: usize, master_seed: u64, records: Vec<MeasurementRecord>) -> Result<Self> {
        let k = records.first().map(|r| r.outcomes.len()).unwrap_or(0);
        check_shape(ensemble, n, records.len(), k)?;
        for (i, r) in records.iter().enumerate() {
            if r.unitary.ensemble() != ensemble || r.unitary.num_qubits() != n {
                return Err(Error::invalid(format!(
                    "record {i} does not match ensemble {ensemble} on {n} qubits"
                )));
            }
            if r.outcomes.len() != k {
                return Err(Error::invalid(format!(
                    "record {i} has {} shots, expected {k}",
                    r.outcomes.len()
                )));
            }
            if r.outcomes.iter().any(|&b| b >> n != 0) {
                return Err(Error::invalid(format!("record {i} has an outcome wider than {n} bits")));
            }
        }
        Ok(Self {
            ensemble,
            n,
            k,
            master_seed,
            records,
        })
    }

    pub fn ensemble(&self) -> Ensemble {
        self.ensemble
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn num_records(&self) -> usize {
        self.records.len()
    }

    pub fn shots(&self) -> usize {
        self.k
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn records(&self) -> &[MeasurementRecord] {
        &self.records
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "shadowset v1 ensemble={} n={} M={} K={} seed={}",
            self.ensemble,
            self.n,
            self.records.len(),
            self.k,
            self.master_seed
        )?;
        let mut line = String::new();
        for r in &self.records {
            line.clear();
            line.push_str(&r.unitary.serialize());
            for &b in &r.outcomes {
                let _ = write!(line, " {}", format_bitstring(b, self.n));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(file)
    }

    pub fn read_from<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(1, 1, "empty shadow-set file"))?;
        let header = header?;
        let mut fields = tokens_with_columns(&header).into_iter();
        if fields.next().map(|t| t.1) != Some("shadowset") || fields.next().map(|t| t.1) != Some("v1") {
            return Err(Error::parse(1, 1, "expected header 'shadowset v1 ...'"));
        }
        let (mut ensemble, mut n, mut m, mut k, mut seed) = (None, None, None, None, None);
        for (col, f) in fields {
            let (key, value) = f
                .split_once('=')
                .ok_or_else(|| Error::parse(1, col, "expected key=value"))?;
            let bad = |_| Error::parse(1, col + key.len() + 1, format!("bad value for {key}"));
            match key {
                "ensemble" => ensemble = Some(value.parse::<Ensemble>().map_err(|_| bad(()))?),
                "n" => n = Some(value.parse::<usize>().map_err(|_| bad(()))?),
                "M" => m = Some(value.parse::<usize>().map_err(|_| bad(()))?),
                "K" => k = Some(value.parse::<usize>().map_err(|_| bad(()))?),
                "seed" => seed = Some(value.parse::<u64>().map_err(|_| bad(()))?),
                other => return Err(Error::parse(1, col, format!("unknown header field {other:?}"))),
            }
        }
        let missing = |name: &str| Error::parse(1, header.len() + 1, format!("header is missing {name}"));
        let ensemble = ensemble.ok_or_else(|| missing("ensemble"))?;
        let n = n.ok_or_else(|| missing("n"))?;
        let m = m.ok_or_else(|| missing("M"))?;
        let k = k.ok_or_else(|| missing("K"))?;
        let seed = seed.ok_or_else(|| missing("seed"))?;
        check_shape(ensemble, n, m, k).map_err(|e| Error::parse(1, 1, e.to_string()))?;

        let mut records = Vec::with_capacity(m);
        for (idx, line) in lines {
            let line_no = idx + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut tokens = tokens_with_columns(&line).into_iter();
            let (_, desc) = tokens.next().unwrap();
            let unitary: UnitaryDescriptor = desc.parse().map_err(|e: Error| match e {
                Error::Parse { message, .. } => Error::parse(line_no, 1, message),
                other => Error::parse(line_no, 1, other.to_string()),
            })?;
            let outcomes = tokens
                .map(|(col, t)| parse_bitstring(t, n).map_err(|e| Error::parse(line_no, col, e.to_string())))
                .collect::<Result<Vec<u64>>>()?;
            if outcomes.len() != k {
                return Err(Error::parse(
                    line_no,
                    1,
                    format!("expected {k} outcomes, found {}", outcomes.len()),
                ));
            }
            records.push(MeasurementRecord { unitary, outcomes });
        }
        if records.len() != m {
            return Err(Error::parse(
                1,
                1,
                format!("header says M={m} but the file has {} records", records.len()),
            ));
        }
        Self::new(ensemble, n, seed, records)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// Whitespace-separated tokens with their 1-based columns.
fn tokens_with_columns(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in line.char_indices() {
        match (ch.is_whitespace(), start) {
            (false, None) => start = Some(i),
            (true, Some(s)) => {
                out.push((s + 1, &line[s..i]));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s + 1, &line[s..]));
    }
    out
}

/// Runs the multi-shot protocol; record `i` uses the child stream `(master_seed, i)`.
pub fn run_multishot(
    state: &QuantumState,
    ensemble: Ensemble,
    m: usize,
    k: usize,
    master_seed: u64,
    exec: Execution,
) -> Result<ShadowSet> {
    let n = state.num_qubits();
    check_shape(ensemble, n, m, k)?;
    let records = try_map_indexed(exec, m, |i| {
        draw_record(state, ensemble, k, child_seed(master_seed, i as u64))
    })?;
    ShadowSet::new(ensemble, n, master_seed, records)
}

// ---------------------------------------------------------------------------
// Inverse channels

/// `M^{-1}(A)`: per-qubit `3A - tr_q(A) ⊗ I` for the Pauli ensemble,
/// `(D + 1) A - tr(A) I` for the global ensembles.
pub fn inverse_channel(ensemble: Ensemble, a: &DenseOperator) -> DenseOperator {
    let dim = a.dim();
    match ensemble {
        Ensemble::Clifford | Ensemble::Haar => {
            let tr = a.trace();
            let mut out = a.scale_real(dim as f64 + 1.0);
            let mut m = out.clone().into_matrix();
            for i in 0..dim {
                m[(i, i)] -= tr;
            }
            out = DenseOperator::new(m).expect("square");
            out
        }
        Ensemble::Pauli => {
            let n = dim.trailing_zeros() as usize;
            let mut cur = a.clone();
            for q in 0..n {
                let bit = 1usize << (n - 1 - q);
                let prev = cur.clone();
                cur = DenseOperator::from_fn(dim, |r, c| {
                    let mut v = prev.get(r, c) * 3.0;
                    if (r & bit) == (c & bit) {
                        // partial trace over qubit q, re-embedded with identity
                        let r0 = r & !bit;
                        let c0 = c & !bit;
                        v -= prev.get(r0, c0) + prev.get(r0 | bit, c0 | bit);
                    }
                    v
                });
            }
            cur
        }
    }
}

/// The snapshot `M^{-1}(U^dag |b><b| U)` as a dense matrix.
pub fn snapshot_operator(u: &UnitaryDescriptor, b: u64) -> Result<DenseOperator> {
    let uu = u.to_unitary()?;
    let dim = uu.dim();
    // U^dag |b> is the conjugated row b of U
    let v: Vec<Complex64> = (0..dim).map(|c| uu.get(b as usize, c).conj()).collect();
    Ok(inverse_channel(u.ensemble(), &DenseOperator::projector(&v)))
}

// ---------------------------------------------------------------------------
// Prepared observables and per-record kernels

/// Snapshot values for one record: `q(b) = scale * (-1)^{|b & zmask|} + offset`, or a table.
#[derive(Clone, Debug, PartialEq)]
pub enum RecordKernel {
    Pauli { zmask: u64, scale: f64, offset: f64 },
    Table(Vec<f64>),
}

impl RecordKernel {
    #[inline]
    pub fn value(&self, b: u64) -> f64 {
        match self {
            RecordKernel::Pauli { zmask, scale, offset } => {
                if (b & zmask).count_ones() & 1 == 1 {
                    offset - scale
                } else {
                    offset + scale
                }
            }
            RecordKernel::Table(t) => t[b as usize],
        }
    }

    /// Mean snapshot value over a record's outcomes.
    pub fn mean_over(&self, outcomes: &[u64]) -> f64 {
        outcomes.iter().map(|&b| self.value(b)).sum::<f64>() / outcomes.len() as f64
    }
}

#[derive(Clone, Debug)]
enum Prepared {
    /// Pauli observable with a Clifford-type ensemble: conjugate symbolically.
    Pauli(PauliString),
    /// Pauli ensemble, dense observable: `M^{-1}(O)` precomputed.
    LocalDense(DenseOperator),
    /// Global ensemble, dense observable: `O = shift I + sum_k w_k |v_k><v_k|`.
    Spectral {
        trace: f64,
        shift: f64,
        weights: Vec<f64>,
        vectors: Vec<Vec<Complex64>>,
    },
}

/// An observable pre-processed for fast snapshot evaluation under one ensemble.
#[derive(Clone, Debug)]
pub struct PreparedObservable {
    ensemble: Ensemble,
    n: usize,
    inner: Prepared,
}

const EIGEN_CLUSTER_TOL: f64 = 1e-10;

impl PreparedObservable {
    pub fn new(observable: &Observable, ensemble: Ensemble) -> Result<Self> {
        let n = observable.num_qubits();
        ensemble.check_qubits(n)?;
        let inner = match (observable, ensemble) {
            (Observable::Pauli(p), Ensemble::Pauli | Ensemble::Clifford) => Prepared::Pauli(*p),
            (obs, Ensemble::Pauli) => Prepared::LocalDense(inverse_channel(Ensemble::Pauli, &obs.to_dense()?)),
            (obs, _) => {
                let dense = obs.to_dense()?;
                let (vals, vecs) = dense.hermitian_eigen();
                let shift = most_repeated(&vals);
                let (weights, vectors) = vals
                    .iter()
                    .zip(vecs)
                    .filter(|(v, _)| (*v - shift).abs() > EIGEN_CLUSTER_TOL)
                    .map(|(v, vec)| (v - shift, vec))
                    .unzip();
                Prepared::Spectral {
                    trace: dense.trace().re,
                    shift,
                    weights,
                    vectors,
                }
            }
        };
        Ok(Self { ensemble, n, inner })
    }

    pub fn ensemble(&self) -> Ensemble {
        self.ensemble
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    /// Kernel giving `q(b|U)` for every outcome `b` of a record measured after `u`.
    pub fn kernel(&self, u: &UnitaryDescriptor) -> Result<RecordKernel> {
        if u.num_qubits() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: u.num_qubits(),
            });
        }
        if u.ensemble() != self.ensemble {
            return Err(Error::invalid(format!(
                "observable prepared for the {} ensemble, record is {}",
                self.ensemble,
                u.ensemble()
            )));
        }
        let dim = 1usize << self.n;
        Ok(match &self.inner {
            Prepared::Pauli(p) => {
                let q = u.conjugate_pauli(p)?.expect("Clifford-type descriptor");
                let factor = match self.ensemble {
                    Ensemble::Pauli => 3f64.powi(p.weight() as i32),
                    _ => dim as f64 + 1.0,
                };
                let offset = match self.ensemble {
                    Ensemble::Pauli => 0.0,
                    // -tr(P), nonzero only for a signed identity
                    _ if p.is_identity() => -p.sign() * dim as f64,
                    _ => 0.0,
                };
                let scale = if q.x_bits() == 0 { factor * q.sign() } else { 0.0 };
                RecordKernel::Pauli {
                    zmask: q.z_bits(),
                    scale,
                    offset,
                }
            }
            Prepared::LocalDense(m_inv) => RecordKernel::Table(diagonal_of_conjugation(u, m_inv)),
            Prepared::Spectral {
                trace,
                shift,
                weights,
                vectors,
            } => {
                let mut diag = vec![*shift; dim];
                let mut buf = vec![C_ZERO; dim];
                for (w, v) in weights.iter().zip(vectors) {
                    buf.copy_from_slice(v);
                    apply_unitary_in_place(u, &mut buf);
                    for (d, z) in diag.iter_mut().zip(&buf) {
                        *d += w * z.norm_sqr();
                    }
                }
                let scale = dim as f64 + 1.0;
                RecordKernel::Table(diag.into_iter().map(|d| scale * d - trace).collect())
            }
        })
    }
}

/// Value shared by the most eigenvalues (within tolerance); ties go to the smallest.
fn most_repeated(sorted: &[f64]) -> f64 {
    let mut best = (sorted[0], 0usize);
    let mut start = 0;
    for i in 1..=sorted.len() {
        if i == sorted.len() || sorted[i] - sorted[start] > EIGEN_CLUSTER_TOL {
            if i - start > best.1 {
                best = (sorted[start], i - start);
            }
            start = i;
        }
    }
    best.0
}

/// `diag(U A U^dag)` for a Hermitian `A`.
fn diagonal_of_conjugation(u: &UnitaryDescriptor, a: &DenseOperator) -> Vec<f64> {
    let dim = a.dim();
    // B = U A column by column; diag(U A U^dag) = diag(U B^dag)
    let mut ua = vec![vec![C_ZERO; dim]; dim];
    for (j, col) in ua.iter_mut().enumerate() {
        for (i, z) in col.iter_mut().enumerate() {
            *z = a.get(i, j);
        }
        apply_unitary_in_place(u, col);
    }
    let mut diag = vec![0.0; dim];
    let mut col = vec![C_ZERO; dim];
    for (b, d) in diag.iter_mut().enumerate() {
        // column b of B^dag is the conjugated row b of B
        for (j, z) in col.iter_mut().enumerate() {
            *z = ua[j][b].conj();
        }
        apply_unitary_in_place(u, &mut col);
        *d = col[b].re;
    }
    diag
}

/// `q(b|U) = tr(O M^{-1}(U^dag |b><b| U))`.
pub fn snapshot_expectation(ensemble: Ensemble, u: &UnitaryDescriptor, b: u64, o: &Observable) -> Result<f64> {
    if u.ensemble() != ensemble {
        return Err(Error::invalid("descriptor does not belong to the ensemble"));
    }
    Ok(PreparedObservable::new(o, ensemble)?.kernel(u)?.value(b))
}

// ---------------------------------------------------------------------------
// Estimators

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub value: f64,
    pub m: usize,
    pub k: usize,
    pub per_record_means: Vec<f64>,
}

impl EstimateReport {
    /// Median of the means of `groups` contiguous equal batches of records; the remainder is dropped.
    pub fn median_of_means(&self, groups: usize) -> Result<f64> {
        median_of_batch_means(&self.per_record_means, groups)
    }
}

pub fn median_of_batch_means(values: &[f64], groups: usize) -> Result<f64> {
    if groups == 0 || groups > values.len() {
        return Err(Error::invalid(format!(
            "groups must be between 1 and M = {}, got {groups}",
            values.len()
        )));
    }
    let size = values.len() / groups;
    let means: Vec<f64> = values[..size * groups].chunks(size).map(stats::mean).collect();
    Ok(stats::median(&means))
}

/// `tr(O rho_hat)`: per-record shot averages, then the average over records.
pub fn estimate(shadows: &ShadowSet, o: &Observable) -> Result<EstimateReport> {
    if o.num_qubits() != shadows.num_qubits() {
        return Err(Error::DimensionMismatch {
            expected: shadows.num_qubits(),
            found: o.num_qubits(),
        });
    }
    let prepared = PreparedObservable::new(o, shadows.ensemble())?;
    let per_record_means = shadows
        .records()
        .iter()
        .map(|r| Ok(prepared.kernel(&r.unitary)?.mean_over(&r.outcomes)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(EstimateReport {
        value: stats::mean(&per_record_means),
        m: shadows.num_records(),
        k: shadows.shots(),
        per_record_means,
    })
}

pub fn median_of_means(shadows: &ShadowSet, o: &Observable, groups: usize) -> Result<f64> {
    estimate(shadows, o)?.median_of_means(groups)
}

/// Estimates of several observables from one simulated shadow set, without storing it.
///
/// Produces exactly what [`run_multishot`] followed by [`estimate`] would for the same seed.
pub fn simulate_estimates(
    state: &QuantumState,
    ensemble: Ensemble,
    m: usize,
    k: usize,
    master_seed: u64,
    observables: &[PreparedObservable],
) -> Result<Vec<f64>> {
    check_shape(ensemble, state.num_qubits(), m, k)?;
    let mut sums = vec![0.0; observables.len()];
    for i in 0..m {
        let record = draw_record(state, ensemble, k, child_seed(master_seed, i as u64))?;
        for (sum, obs) in sums.iter_mut().zip(observables) {
            *sum += obs.kernel(&record.unitary)?.mean_over(&record.outcomes);
        }
    }
    Ok(sums.into_iter().map(|s| s / m as f64).collect())
}
