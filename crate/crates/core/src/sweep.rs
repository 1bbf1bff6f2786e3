//! Variance sweeps over `(n, theta, M, K)` grids and their CSV / JSONL output.
//!
//! Grid points are visited in the order `n`, `theta`, `M`, `K` (outermost
//! first). Point `j` in that order uses the seed `child_seed(config.seed, j)`
//! and trial `t` at that point uses `child_seed(point_seed, t)`. Every
//! observable at a point is estimated from the same simulated shadow sets.

use std::io::Write;

use serde::Serialize;

use crate::clifford::Ensemble;
use crate::config::{resolve_template, OutputFormat, SweepConfig};
use crate::error::Result;
use crate::exec::{try_map_indexed, Execution};
use crate::observable::Observable;
use crate::shadow::{child_seed, simulate_estimates, PreparedObservable};
use crate::state::QuantumState;
use crate::stats::VarianceSummary;
use crate::variance::variance_pauli_exact;

pub const CSV_HEADER: &str =
    "ensemble,n,M,K,w,theta,observable,trials,mean_estimate,empirical_variance,predicted_variance,stderr_variance,seed";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub ensemble: Ensemble,
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub w: Option<usize>,
    pub theta: f64,
    pub observable: String,
    pub trials: usize,
    pub mean_estimate: f64,
    pub empirical_variance: f64,
    /// Closed-form variance; present for Pauli observables under the Pauli ensemble.
    pub predicted_variance: Option<f64>,
    pub stderr_variance: f64,
    pub seed: u64,
}

/// One concrete observable of a sweep, with its label and weight.
#[derive(Clone, Debug)]
pub struct SweepObservable {
    pub label: String,
    pub w: Option<usize>,
    pub observable: Observable,
}

/// Expands the config's templates for `n` qubits.
pub fn sweep_observables(config: &SweepConfig, n: usize) -> Result<Vec<SweepObservable>> {
    let mut out = Vec::new();
    for template in &config.observables {
        let weights: Vec<Option<usize>> = if template.trim().starts_with("pauli_power:") {
            config.w_values.iter().map(|&w| Some(w)).collect()
        } else {
            vec![None]
        };
        for w in weights {
            let observable = resolve_template(template, n, w)?;
            let label = match &observable {
                Observable::Pauli(p) => format!("pauli:{p}"),
                Observable::Dense(_) => template.trim().to_string(),
            };
            out.push(SweepObservable { label, w, observable });
        }
    }
    Ok(out)
}

/// Estimates over `trials` independent shadow sets, summarised per observable.
#[allow(clippy::too_many_arguments)]
pub fn run_point(
    state: &QuantumState,
    ensemble: Ensemble,
    observables: &[PreparedObservable],
    m: usize,
    k: usize,
    trials: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<VarianceSummary>> {
    let per_trial = try_map_indexed(exec, trials, |t| {
        simulate_estimates(state, ensemble, m, k, child_seed(seed, t as u64), observables)
    })?;
    Ok((0..observables.len())
        .map(|j| {
            let xs: Vec<f64> = per_trial.iter().map(|v| v[j]).collect();
            VarianceSummary::from_samples(&xs)
        })
        .collect())
}

/// Runs every grid point of the config on the GHZ family of states.
pub fn run_sweep(config: &SweepConfig, exec: Execution) -> Result<Vec<SweepRow>> {
    config.validate()?;
    let mut rows = Vec::new();
    let mut point = 0u64;
    for &n in &config.n_values {
        let observables = sweep_observables(config, n)?;
        let prepared = observables
            .iter()
            .map(|o| PreparedObservable::new(&o.observable, config.ensemble))
            .collect::<Result<Vec<_>>>()?;
        for &theta in &config.theta_values {
            let state = QuantumState::ghz_theta(n, theta);
            for &m in &config.m_values {
                for &k in &config.k_values {
                    let seed = child_seed(config.seed, point);
                    point += 1;
                    let summaries = run_point(&state, config.ensemble, &prepared, m, k, config.trials, seed, exec)?;
                    for (o, s) in observables.iter().zip(summaries) {
                        let predicted = match (config.ensemble, &o.observable) {
                            (Ensemble::Pauli, Observable::Pauli(p)) => Some(variance_pauli_exact(p, &state, m, k)?),
                            _ => None,
                        };
                        rows.push(SweepRow {
                            ensemble: config.ensemble,
                            n,
                            m,
                            k,
                            w: o.w,
                            theta,
                            observable: o.label.clone(),
                            trials: config.trials,
                            mean_estimate: s.mean,
                            empirical_variance: s.variance,
                            predicted_variance: predicted,
                            stderr_variance: s.stderr_variance,
                            seed,
                        });
                    }
                }
            }
        }
    }
    Ok(rows)
}

fn fmt_float(x: f64) -> String {
    format!("{x:.11e}")
}

pub fn write_csv<W: Write>(rows: &[SweepRow], mut out: W) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.ensemble,
            r.n,
            r.m,
            r.k,
            r.w.map(|w| w.to_string()).unwrap_or_default(),
            fmt_float(r.theta),
            r.observable,
            r.trials,
            fmt_float(r.mean_estimate),
            fmt_float(r.empirical_variance),
            r.predicted_variance.map(fmt_float).unwrap_or_default(),
            fmt_float(r.stderr_variance),
            r.seed
        )?;
    }
    Ok(())
}

pub fn write_jsonl<W: Write>(rows: &[SweepRow], mut out: W) -> Result<()> {
    for r in rows {
        serde_json::to_writer(&mut out, r).map_err(std::io::Error::from)?;
        writeln!(out)?;
    }
    Ok(())
}

pub fn write_rows<W: Write>(rows: &[SweepRow], format: OutputFormat, out: W) -> Result<()> {
    match format {
        OutputFormat::Csv => write_csv(rows, out),
        OutputFormat::Jsonl => write_jsonl(rows, out),
    }
}
