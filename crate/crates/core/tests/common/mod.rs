//! Dense-matrix oracles shared by the integration tests.
//!
//! Nothing here goes through the crate's tableaux, kernels or inverse
//! channels: single-qubit Cliffords come from closing `{H, S}` under
//! multiplication and the inverse channel from a Pauli-basis expansion.

#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type Mat = DMatrix<Complex64>;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn pauli_1q(letter: char) -> Mat {
    let z = c(0.0, 0.0);
    let one = c(1.0, 0.0);
    let i = c(0.0, 1.0);
    let entries = match letter {
        'I' => [one, z, z, one],
        'X' => [z, one, one, z],
        'Y' => [z, -i, i, z],
        'Z' => [one, z, z, -one],
        other => panic!("not a Pauli letter: {other}"),
    };
    Mat::from_row_slice(2, 2, &entries)
}

pub fn kron(a: &Mat, b: &Mat) -> Mat {
    a.kronecker(b)
}

pub fn kron_all(ms: &[Mat]) -> Mat {
    ms.iter().skip(1).fold(ms[0].clone(), |acc, m| kron(&acc, m))
}

/// Dense matrix of a Pauli label such as `"XZI"`.
pub fn pauli_dense(label: &str) -> Mat {
    let ms: Vec<Mat> = label.chars().map(pauli_1q).collect();
    kron_all(&ms)
}

/// `(|0...0> + e^{i theta} |1...1>) / sqrt 2`.
pub fn ghz_vector(n: usize, theta: f64) -> Vec<Complex64> {
    let d = 1usize << n;
    let mut v = vec![c(0.0, 0.0); d];
    let h = std::f64::consts::FRAC_1_SQRT_2;
    v[0] = c(h, 0.0);
    v[d - 1] = Complex64::from_polar(h, theta);
    v
}

pub fn expectation_vec(v: &[Complex64], o: &Mat) -> f64 {
    let col = DMatrix::from_column_slice(v.len(), 1, v);
    (col.adjoint() * o * &col)[(0, 0)].re
}

/// Removes the global phase by making the first entry of largest modulus real and positive.
fn normalize_phase(u: &Mat) -> Mat {
    let pivot = u.iter().copied().find(|z| z.norm() > 0.3).expect("nonzero");
    u * (pivot.conj() / pivot.norm())
}

fn close(a: &Mat, b: &Mat) -> bool {
    (a - b).iter().all(|z| z.norm() < 1e-9)
}

/// The 24 single-qubit Cliffords modulo phase, generated from `H` and `S`.
pub fn single_qubit_cliffords() -> Vec<Mat> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let had = Mat::from_row_slice(2, 2, &[c(h, 0.0), c(h, 0.0), c(h, 0.0), c(-h, 0.0)]);
    let s = Mat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 1.0)]);
    let mut group = vec![Mat::identity(2, 2)];
    let mut frontier = group.clone();
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for g in &frontier {
            for gen in [&had, &s] {
                let cand = normalize_phase(&(gen * g));
                if !group.iter().any(|e| close(e, &cand)) {
                    group.push(cand.clone());
                    next.push(cand);
                }
            }
        }
        frontier = next;
    }
    assert_eq!(group.len(), 24);
    group
}

/// Every Pauli label on `n` qubits.
pub fn pauli_labels(n: usize) -> Vec<String> {
    (0..4usize.pow(n as u32))
        .map(|mut code| {
            let mut s = String::new();
            for _ in 0..n {
                s.insert(0, ['I', 'X', 'Y', 'Z'][code % 4]);
                code /= 4;
            }
            s
        })
        .collect()
}

/// Inverse of the local Pauli measurement channel: each Pauli component scaled by `3^weight`.
pub fn local_inverse(o: &Mat, n: usize) -> Mat {
    let d = (1usize << n) as f64;
    let mut acc = Mat::zeros(o.nrows(), o.ncols());
    for label in pauli_labels(n) {
        let p = pauli_dense(&label);
        let coef = (&p * o).trace() / d;
        let w = label.chars().filter(|&ch| ch != 'I').count() as i32;
        acc += p * (coef * 3f64.powi(w));
    }
    acc
}

pub fn traceless(o: &Mat) -> Mat {
    let d = o.nrows();
    o - Mat::identity(d, d) * (o.trace() / d as f64)
}

/// Exact `(Gamma1, Gamma2)` of the local Pauli ensemble by summing over all `24^n` layers.
pub fn pauli_ensemble_gammas(sigma: &Mat, o: &Mat, n: usize) -> (f64, f64) {
    let cliffords = single_qubit_cliffords();
    let m_inv = local_inverse(o, n);
    let d = 1usize << n;
    let (mut g1, mut g2) = (0.0, 0.0);
    let total = 24usize.pow(n as u32);
    for mut code in 0..total {
        let mut factors = Vec::with_capacity(n);
        for _ in 0..n {
            factors.insert(0, cliffords[code % 24].clone());
            code /= 24;
        }
        let u = kron_all(&factors);
        let p_mat = &u * sigma * u.adjoint();
        let q_mat = &u * &m_inv * u.adjoint();
        let (mut s1, mut s) = (0.0, 0.0);
        for b in 0..d {
            let p = p_mat[(b, b)].re;
            let q = q_mat[(b, b)].re;
            s1 += p * q * q;
            s += p * q;
        }
        g1 += s1;
        g2 += s * s;
    }
    (g1 / total as f64, g2 / total as f64)
}

/// Least-squares slope of `y` against `x`.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let num: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    num / den
}
