//! Observables and the text specs used to name observables and states.
//!
//! ```text
//! observable := "pauli:" PAULI | "ghz_proj:" "n=" INT ["," "theta=" ANGLE] | "file:" PATH
//! state      := "ghz:" "n=" INT ["," "theta=" ANGLE] | "basis:" BITS
//!             | "random_pure:" "n=" INT "," "seed=" INT
//!             | "random_mixed:" "n=" INT "," "seed=" INT
//!             | "maximally_mixed:" "n=" INT | "file:" PATH
//! ANGLE      := FLOAT | [FLOAT ["*"]] "pi" ["/" FLOAT]
//! ```
//!
//! Matrix files are plain text: the dimension `D` on the first line, then `D`
//! rows of `2D` numbers holding `re im` pairs in row-major order. Lines
//! starting with `#` are ignored. A `file:` state is read as a density matrix.

use std::fmt;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dense::{c, DenseOperator};
use crate::error::{Error, Result};
use crate::pauli::PauliString;
use crate::state::{parse_bitstring, QuantumState};

/// A Hermitian observable, kept as a Pauli string whenever possible.
#[derive(Clone, PartialEq, Debug)]
pub enum Observable {
    Pauli(PauliString),
    Dense(DenseOperator),
}

impl Observable {
    pub fn pauli(p: PauliString) -> Result<Self> {
        if !p.is_hermitian() {
            return Err(Error::NotHermitian(2.0));
        }
        Ok(Observable::Pauli(p))
    }

    pub fn dense(o: DenseOperator) -> Result<Self> {
        if !o.dim().is_power_of_two() || o.dim() < 2 {
            return Err(Error::invalid(format!("operator dimension {} is not 2^n", o.dim())));
        }
        let residual = o.hermitian_residual();
        if residual > crate::dense::EXACT_TOL {
            return Err(Error::NotHermitian(residual));
        }
        Ok(Observable::Dense(o))
    }

    pub fn num_qubits(&self) -> usize {
        match self {
            Observable::Pauli(p) => p.num_qubits(),
            Observable::Dense(o) => o.dim().trailing_zeros() as usize,
        }
    }

    pub fn as_pauli(&self) -> Option<&PauliString> {
        match self {
            Observable::Pauli(p) => Some(p),
            Observable::Dense(_) => None,
        }
    }

    pub fn to_dense(&self) -> Result<DenseOperator> {
        match self {
            Observable::Pauli(p) => p.to_matrix(),
            Observable::Dense(o) => Ok(o.clone()),
        }
    }

    /// `tr(O rho)`.
    pub fn expectation(&self, state: &QuantumState) -> Result<f64> {
        match self {
            Observable::Pauli(p) => state.expectation_pauli(p),
            Observable::Dense(o) => state.expectation(o),
        }
    }

    pub fn trace(&self) -> f64 {
        match self {
            Observable::Pauli(p) if p.is_identity() => p.sign() * (1u64 << p.num_qubits()) as f64,
            Observable::Pauli(_) => 0.0,
            Observable::Dense(o) => o.trace().re,
        }
    }

    /// `tr(O_0^2)` for the traceless part `O_0`.
    pub fn traceless_norm_sq(&self) -> Result<f64> {
        Ok(match self {
            Observable::Pauli(p) if p.is_identity() => 0.0,
            Observable::Pauli(p) => (1u64 << p.num_qubits()) as f64,
            Observable::Dense(o) => o.traceless_part().frobenius_norm().powi(2),
        })
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Observable::Pauli(p) => write!(f, "pauli:{p}"),
            Observable::Dense(o) => write!(f, "dense:D={}", o.dim()),
        }
    }
}

/// Parses an angle such as `0.3`, `pi`, `-pi/2`, `3pi/4` or `0.5*pi`.
pub fn parse_angle(s: &str) -> Result<f64> {
    let t = s.trim();
    if let Ok(v) = t.parse::<f64>() {
        return Ok(v);
    }
    let bad = || Error::invalid(format!("cannot read {s:?} as a number"));
    let pos = t.find("pi").ok_or_else(bad)?;
    let (coef, rest) = t.split_at(pos);
    let coef = coef.trim().trim_end_matches('*').trim();
    let coef = match coef {
        "" | "+" => 1.0,
        "-" => -1.0,
        other => other.parse::<f64>().map_err(|_| bad())?,
    };
    let rest = rest[2..].trim();
    let den = if rest.is_empty() {
        1.0
    } else {
        rest.strip_prefix('/')
            .ok_or_else(bad)?
            .trim()
            .parse::<f64>()
            .map_err(|_| bad())?
    };
    Ok(coef * std::f64::consts::PI / den)
}

/// `key=value` pairs after the `kind:` prefix; `offset` is the column of `body`.
fn key_values<'a>(body: &'a str, offset: usize, allowed: &[&str]) -> Result<Vec<(&'a str, &'a str, usize)>> {
    let mut out = Vec::new();
    let mut col = offset;
    for part in body.split(',') {
        let Some((k, v)) = part.split_once('=') else {
            return Err(Error::parse(1, col, format!("expected key=value, found {part:?}")));
        };
        let k = k.trim();
        if !allowed.contains(&k) {
            return Err(Error::parse(1, col, format!("unknown key {k:?}")));
        }
        if out.iter().any(|(seen, _, _)| *seen == k) {
            return Err(Error::parse(1, col, format!("duplicate key {k:?}")));
        }
        out.push((k, v.trim(), col + part.find('=').unwrap() + 1));
        col += part.len() + 1;
    }
    Ok(out)
}

fn lookup<'a>(kv: &[(&str, &'a str, usize)], key: &str) -> Option<(&'a str, usize)> {
    kv.iter().find(|(k, _, _)| *k == key).map(|&(_, v, c)| (v, c))
}

fn required_int(kv: &[(&str, &str, usize)], key: &str, end_col: usize) -> Result<u64> {
    let (v, col) = lookup(kv, key).ok_or_else(|| Error::parse(1, end_col, format!("missing {key}=")))?;
    v.parse::<u64>()
        .map_err(|_| Error::parse(1, col, format!("{key} must be a non-negative integer, found {v:?}")))
}

fn optional_angle(kv: &[(&str, &str, usize)], key: &str) -> Result<f64> {
    match lookup(kv, key) {
        None => Ok(0.0),
        Some((v, col)) => parse_angle(v).map_err(|_| Error::parse(1, col, format!("bad {key} value {v:?}"))),
    }
}

fn split_kind(spec: &str) -> Result<(&str, &str)> {
    spec.split_once(':')
        .ok_or_else(|| Error::parse(1, 1, format!("expected kind:arguments, found {spec:?}")))
}

fn check_n(n: usize, expected: usize) -> Result<()> {
    if n != expected {
        return Err(Error::DimensionMismatch { expected, found: n });
    }
    Ok(())
}

fn ghz_projector(n: usize, theta: f64) -> Result<DenseOperator> {
    if n == 0 || n > crate::pauli::MAX_DENSE_QUBITS {
        return Err(Error::DimensionTooLarge {
            what: "GHZ projector",
            qubits: n,
            limit: crate::pauli::MAX_DENSE_QUBITS,
        });
    }
    let ghz = QuantumState::ghz_theta(n, theta);
    Ok(DenseOperator::projector(ghz.amplitudes().expect("pure")))
}

/// Parses an observable spec for an `n`-qubit system.
pub fn parse_observable(spec: &str, n: usize) -> Result<Observable> {
    let spec = spec.trim();
    let (kind, body) = split_kind(spec)?;
    let offset = kind.len() + 2;
    match kind {
        "pauli" => {
            let p: PauliString = body.trim().parse().map_err(|e| match e {
                Error::Parse { column, message, .. } => Error::parse(1, column + offset - 1, message),
                other => other,
            })?;
            check_n(p.num_qubits(), n)?;
            Observable::pauli(p)
        }
        "ghz_proj" => {
            let kv = key_values(body, offset, &["n", "theta"])?;
            let m = required_int(&kv, "n", spec.len() + 1)? as usize;
            let theta = optional_angle(&kv, "theta")?;
            check_n(m, n)?;
            Observable::dense(ghz_projector(m, theta)?)
        }
        "file" => {
            let op = read_matrix_file(Path::new(body.trim()))?;
            let obs = Observable::dense(op)?;
            check_n(obs.num_qubits(), n)?;
            Ok(obs)
        }
        other => Err(Error::parse(1, 1, format!("unknown observable kind {other:?}"))),
    }
}

/// Parses a state spec.
pub fn parse_state(spec: &str) -> Result<QuantumState> {
    let spec = spec.trim();
    let (kind, body) = split_kind(spec)?;
    let offset = kind.len() + 2;
    let end = spec.len() + 1;
    let qubits = |kv: &[(&str, &str, usize)]| -> Result<usize> {
        let n = required_int(kv, "n", end)? as usize;
        if n == 0 || n > crate::pauli::MAX_DENSE_QUBITS {
            return Err(Error::DimensionTooLarge {
                what: "quantum state",
                qubits: n,
                limit: crate::pauli::MAX_DENSE_QUBITS,
            });
        }
        Ok(n)
    };
    match kind {
        "ghz" => {
            let kv = key_values(body, offset, &["n", "theta"])?;
            Ok(QuantumState::ghz_theta(qubits(&kv)?, optional_angle(&kv, "theta")?))
        }
        "basis" => {
            let bits = body.trim();
            let b = parse_bitstring(bits, bits.len()).map_err(|e| Error::parse(1, offset, e.to_string()))?;
            QuantumState::basis(bits.len(), b)
        }
        "random_pure" | "random_mixed" => {
            let kv = key_values(body, offset, &["n", "seed"])?;
            let n = qubits(&kv)?;
            let mut rng = ChaCha8Rng::seed_from_u64(required_int(&kv, "seed", end)?);
            Ok(if kind == "random_pure" {
                QuantumState::random_pure(n, &mut rng)
            } else {
                QuantumState::random_mixed(n, &mut rng)
            })
        }
        "maximally_mixed" => {
            let kv = key_values(body, offset, &["n"])?;
            Ok(QuantumState::maximally_mixed(qubits(&kv)?))
        }
        "file" => QuantumState::from_density(read_matrix_file(Path::new(body.trim()))?),
        other => Err(Error::parse(1, 1, format!("unknown state kind {other:?}"))),
    }
}

/// Reads a matrix in the text layout described in the module docs.
pub fn read_matrix_file(path: &Path) -> Result<DenseOperator> {
    parse_matrix_text(&std::fs::read_to_string(path)?)
}

pub fn parse_matrix_text(text: &str) -> Result<DenseOperator> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (first_no, first) = lines.next().ok_or_else(|| Error::parse(1, 1, "empty matrix file"))?;
    let dim: usize = first
        .parse()
        .map_err(|_| Error::parse(first_no, 1, format!("expected the dimension, found {first:?}")))?;
    if dim < 2 || !dim.is_power_of_two() || dim > 1 << crate::pauli::MAX_DENSE_QUBITS {
        return Err(Error::parse(
            first_no,
            1,
            format!("dimension {dim} is not 2^n with 1 <= n <= 14"),
        ));
    }
    let mut entries = Vec::with_capacity(dim * dim);
    let mut last_line = first_no;
    for row in 0..dim {
        let (line_no, line) = lines
            .next()
            .ok_or_else(|| Error::parse(last_line + 1, 1, format!("missing matrix row {}", row + 1)))?;
        last_line = line_no;
        let mut col = 1;
        let mut values = Vec::with_capacity(2 * dim);
        for tok in line.split_whitespace() {
            let start = line[col - 1..].find(tok).unwrap() + col;
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::parse(line_no, start, format!("bad number {tok:?}")))?;
            values.push(v);
            col = start + tok.len();
        }
        if values.len() != 2 * dim {
            return Err(Error::parse(
                line_no,
                1,
                format!("row has {} numbers, expected {}", values.len(), 2 * dim),
            ));
        }
        entries.extend(values.chunks(2).map(|p| c(p[0], p[1])));
    }
    if let Some((line_no, _)) = lines.next() {
        return Err(Error::parse(line_no, 1, "trailing data after the matrix"));
    }
    DenseOperator::new(nalgebra::DMatrix::from_row_slice(dim, dim, &entries))
}

/// Writes a matrix in the text layout read by [`read_matrix_file`].
pub fn format_matrix_text(op: &DenseOperator) -> String {
    let mut s = format!("{}\n", op.dim());
    for r in 0..op.dim() {
        let row: Vec<String> = (0..op.dim())
            .map(|c| {
                let z = op.get(r, c);
                format!("{:e} {:e}", z.re, z.im)
            })
            .collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}
