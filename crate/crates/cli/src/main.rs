use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use shadowlab::config::{ExperimentKind, OutputFormat, SweepConfig};
use shadowlab::observable::{parse_observable, parse_state};
use shadowlab::shadow::{estimate, run_multishot};
use shadowlab::sweep::{run_sweep, write_rows};
use shadowlab::variance::{gamma_brute, GammaMethod};
use shadowlab::verify::{run_checks, Level};
use shadowlab::{Ensemble, Execution, ShadowSet};

#[derive(Parser)]
#[command(name = "shadowlab", version, about = "Multi-shot classical shadow experiments")]
struct Cli {
    /// Master seed (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output path (overrides the config file; stdout otherwise).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for the parallel backend.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Run single-threaded regardless of the build features.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Jsonl,
}

#[derive(Clone, Copy, ValueEnum)]
enum PauliPreset {
    Grid,
    Weight,
}

#[derive(Clone, Copy, ValueEnum)]
enum CliffordPreset {
    Grid,
    Scaling,
}

#[derive(Clone, Copy, ValueEnum)]
enum VerifyLevel {
    Fast,
    Full,
}

#[derive(Subcommand)]
enum Command {
    /// Variance sweep with local Pauli measurements.
    PauliSweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "grid")]
        preset: PauliPreset,
        /// Trials per grid point (overrides the config).
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Variance sweep with global Clifford measurements.
    CliffordSweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "grid")]
        preset: CliffordPreset,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Identity and inequality checks.
    Verify {
        #[arg(long, value_enum, default_value = "fast")]
        level: VerifyLevel,
    },
    /// Second-moment functionals of a state and observable.
    Gamma {
        #[arg(long)]
        sigma: String,
        #[arg(long)]
        obs: String,
        #[arg(long)]
        ensemble: Ensemble,
        /// Sampled unitaries when exact enumeration is out of reach.
        #[arg(long, default_value_t = 10_000)]
        budget: usize,
    },
    /// Estimate an observable from a stored shadow set.
    Estimate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        obs: String,
        /// Median-of-means batches.
        #[arg(long)]
        groups: Option<usize>,
    },
    /// Simulate a multi-shot experiment and store the shadow set.
    Collect {
        #[arg(long)]
        state: String,
        #[arg(long)]
        ensemble: Ensemble,
        #[arg(short = 'm', long = "settings")]
        m: usize,
        #[arg(short = 'k', long = "shots")]
        k: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    configure_threads(cli.threads)?;
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    match &cli.command {
        Command::PauliSweep { config, preset, trials } => {
            let kind = match preset {
                PauliPreset::Grid => ExperimentKind::PauliGrid,
                PauliPreset::Weight => ExperimentKind::PauliWeight,
            };
            let cfg = load_config(config.as_deref(), kind, *trials, &cli)?;
            if !matches!(cfg.experiment, ExperimentKind::PauliGrid | ExperimentKind::PauliWeight) {
                bail!(
                    "pauli-sweep runs pauli_grid or pauli_weight experiments, not {}",
                    cfg.experiment
                );
            }
            sweep(&cfg, exec)?;
        }
        Command::CliffordSweep { config, preset, trials } => {
            let kind = match preset {
                CliffordPreset::Grid => ExperimentKind::CliffordGrid,
                CliffordPreset::Scaling => ExperimentKind::CliffordScaling,
            };
            let cfg = load_config(config.as_deref(), kind, *trials, &cli)?;
            if !matches!(
                cfg.experiment,
                ExperimentKind::CliffordGrid | ExperimentKind::CliffordScaling
            ) {
                bail!(
                    "clifford-sweep runs clifford_grid or clifford_scaling experiments, not {}",
                    cfg.experiment
                );
            }
            sweep(&cfg, exec)?;
        }
        Command::Verify { level } => {
            let level = match level {
                VerifyLevel::Fast => Level::Fast,
                VerifyLevel::Full => Level::Full,
            };
            let results = run_checks(level, cli.seed.unwrap_or(1), exec)?;
            let mut out = output(cli.out.as_deref())?;
            for r in &results {
                writeln!(out, "{r}")?;
            }
            out.flush()?;
            if results.iter().any(|r| !r.passed) {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Gamma {
            sigma,
            obs,
            ensemble,
            budget,
        } => {
            let state = parse_state(sigma).context("--sigma")?;
            let o = parse_observable(obs, state.num_qubits()).context("--obs")?;
            let g = gamma_brute(&state, &o, *ensemble, *budget, cli.seed.unwrap_or(1), exec)?;
            let mut out = output(cli.out.as_deref())?;
            writeln!(out, "gamma1 {:.12e}", g.gamma1)?;
            writeln!(out, "gamma2 {:.12e}", g.gamma2)?;
            match (g.method, g.mc_error) {
                (GammaMethod::MonteCarlo, Some((e1, e2))) => {
                    writeln!(out, "method monte_carlo samples={budget}")?;
                    writeln!(out, "stderr {e1:.3e} {e2:.3e}")?;
                }
                _ => writeln!(out, "method exact_enumeration")?,
            }
            out.flush()?;
        }
        Command::Estimate { input, obs, groups } => {
            let shadows = ShadowSet::load(input).with_context(|| format!("reading {}", input.display()))?;
            let o = parse_observable(obs, shadows.num_qubits()).context("--obs")?;
            let report = estimate(&shadows, &o)?;
            let mut out = output(cli.out.as_deref())?;
            writeln!(out, "estimate {:.12e} M={} K={}", report.value, report.m, report.k)?;
            if let Some(g) = groups {
                writeln!(out, "median_of_means {:.12e} groups={g}", report.median_of_means(*g)?)?;
            }
            out.flush()?;
        }
        Command::Collect { state, ensemble, m, k } => {
            let Some(path) = cli.out.as_deref() else {
                bail!("collect needs --out");
            };
            let rho = parse_state(state).context("--state")?;
            let shadows = run_multishot(&rho, *ensemble, *m, *k, cli.seed.unwrap_or(1), exec)?;
            shadows
                .save(path)
                .with_context(|| format!("writing {}", path.display()))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn configure_threads(threads: Option<usize>) -> Result<()> {
    let Some(t) = threads else {
        return Ok(());
    };
    if t == 0 {
        bail!("--threads must be at least 1");
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    Ok(())
}

fn load_config(path: Option<&Path>, kind: ExperimentKind, trials: Option<usize>, cli: &Cli) -> Result<SweepConfig> {
    let mut cfg = match path {
        Some(p) => SweepConfig::from_file(p).with_context(|| format!("config {}", p.display()))?,
        None => SweepConfig::preset(kind),
    };
    if let Some(t) = trials {
        cfg.trials = t;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output = Some(o.clone());
    }
    if let Some(f) = cli.format {
        cfg.format = match f {
            Format::Csv => OutputFormat::Csv,
            Format::Jsonl => OutputFormat::Jsonl,
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

fn sweep(cfg: &SweepConfig, exec: Execution) -> Result<()> {
    let rows = run_sweep(cfg, exec)?;
    let mut out = output(cfg.output.as_deref())?;
    write_rows(&rows, cfg.format, &mut out)?;
    out.flush()?;
    Ok(())
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}
