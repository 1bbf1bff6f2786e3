//! Sweep configuration files.
//!
//! A config is a flat list of `key = value` lines; `#` starts a comment.
//!
//! | key            | value                                                        |
//! |----------------|--------------------------------------------------------------|
//! | `experiment`   | `pauli_grid`, `pauli_weight`, `clifford_grid`, `clifford_scaling` |
//! | `ensemble`     | `pauli`, `clifford` or `haar` (default from the experiment)  |
//! | `n` / `n_values` | qubit count(s), comma separated                            |
//! | `theta` / `theta_values` | GHZ phase(s); accepts `pi`, `pi/2`, `3pi/4`, ...   |
//! | `w_values`     | weights for `pauli_power:` observables                       |
//! | `observables`  | observable templates separated by `;`                        |
//! | `m_values`, `k_values` | measurement settings and shots per setting           |
//! | `trials`       | independent shadow sets per grid point (>= 100)              |
//! | `seed`         | master seed                                                  |
//! | `output`       | output path (stdout when absent)                             |
//! | `format`       | `csv` or `jsonl`                                             |
//!
//! Observable templates extend the observable grammar so one template can
//! serve every `n` and `w` in a sweep: `ghz_proj` (the `theta = 0` GHZ
//! projector on `n` qubits), `pauli_prefix:ZZ` (padded with identities to `n`
//! qubits) and `pauli_power:X` (`X` on the first `w` qubits). Any concrete
//! observable spec is also accepted.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::clifford::Ensemble;
use crate::error::{Error, Result};
use crate::observable::{parse_angle, parse_observable, Observable};

pub const MIN_TRIALS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentKind {
    PauliGrid,
    PauliWeight,
    CliffordGrid,
    CliffordScaling,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::PauliGrid => "pauli_grid",
            ExperimentKind::PauliWeight => "pauli_weight",
            ExperimentKind::CliffordGrid => "clifford_grid",
            ExperimentKind::CliffordScaling => "clifford_scaling",
        }
    }

    pub fn default_ensemble(&self) -> Ensemble {
        match self {
            ExperimentKind::PauliGrid | ExperimentKind::PauliWeight => Ensemble::Pauli,
            ExperimentKind::CliffordGrid | ExperimentKind::CliffordScaling => Ensemble::Clifford,
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "pauli_grid" => ExperimentKind::PauliGrid,
            "pauli_weight" => ExperimentKind::PauliWeight,
            "clifford_grid" => ExperimentKind::CliffordGrid,
            "clifford_scaling" => ExperimentKind::CliffordScaling,
            other => return Err(Error::invalid(format!("unknown experiment {other:?}"))),
        })
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Csv,
    Jsonl,
}

impl FromStr for OutputFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "jsonl" => Ok(OutputFormat::Jsonl),
            other => Err(Error::invalid(format!("unknown output format {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub experiment: ExperimentKind,
    pub ensemble: Ensemble,
    pub n_values: Vec<usize>,
    pub theta_values: Vec<f64>,
    pub w_values: Vec<usize>,
    pub observables: Vec<String>,
    pub m_values: Vec<usize>,
    pub k_values: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub format: OutputFormat,
}

fn powers_of_two(lo: usize, hi: usize) -> Vec<usize> {
    std::iter::successors(Some(lo), |&v| Some(v * 2))
        .take_while(|&v| v <= hi)
        .collect()
}

impl SweepConfig {
    /// Defaults for each experiment: the GHZ sweeps of the reference figures.
    pub fn preset(experiment: ExperimentKind) -> Self {
        use std::f64::consts::PI;
        let base = SweepConfig {
            experiment,
            ensemble: experiment.default_ensemble(),
            n_values: vec![5],
            theta_values: vec![0.0],
            w_values: Vec::new(),
            observables: Vec::new(),
            m_values: powers_of_two(8, 1024),
            k_values: powers_of_two(1, 64),
            trials: 10_000,
            seed: 20_240_601,
            output: None,
            format: OutputFormat::Csv,
        };
        match experiment {
            ExperimentKind::PauliGrid => SweepConfig {
                observables: vec!["pauli_prefix:ZZ".into(), "pauli_prefix:XX".into()],
                ..base
            },
            ExperimentKind::PauliWeight => SweepConfig {
                n_values: vec![8],
                w_values: vec![2, 4, 6, 8],
                observables: vec!["pauli_power:Z".into(), "pauli_power:X".into()],
                m_values: vec![64],
                k_values: vec![64],
                ..base
            },
            ExperimentKind::CliffordGrid => SweepConfig {
                theta_values: vec![0.0, PI / 2.0, PI],
                observables: vec!["ghz_proj".into()],
                m_values: powers_of_two(8, 256),
                trials: 2_000,
                ..base
            },
            ExperimentKind::CliffordScaling => SweepConfig {
                n_values: (2..=8).collect(),
                observables: vec!["ghz_proj".into(), "pauli_prefix:ZZ".into()],
                m_values: vec![32],
                k_values: vec![32],
                trials: 2_000,
                ..base
            },
        }
    }

    /// Parses a config file's text; keys not given keep the experiment's preset.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: Vec<(usize, usize, &str, &str)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("");
            if line.trim().is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                let col = raw.len() - raw.trim_start().len() + 1;
                return Err(Error::parse(line_no, col, "expected key = value"));
            };
            let key = k.trim();
            let vcol = k.len() + 2 + (v.len() - v.trim_start().len());
            if entries.iter().any(|e| e.2 == key) {
                return Err(Error::parse(line_no, 1, format!("duplicate key {key:?}")));
            }
            entries.push((line_no, vcol, key, v.trim()));
        }

        let experiment = match entries.iter().find(|e| e.2 == "experiment") {
            Some(&(line, col, _, v)) => v.parse().map_err(|e: Error| Error::parse(line, col, strip(e)))?,
            None => ExperimentKind::PauliGrid,
        };
        let mut cfg = SweepConfig::preset(experiment);
        for &(line, col, key, value) in &entries {
            let at = |e: Error| Error::parse(line, col, strip(e));
            match key {
                "experiment" => {}
                "ensemble" => cfg.ensemble = value.parse().map_err(at)?,
                "n" | "n_values" => cfg.n_values = int_list(value, line, col)?,
                "theta" | "theta_values" => cfg.theta_values = angle_list(value, line, col)?,
                "w_values" => cfg.w_values = int_list(value, line, col)?,
                "m_values" => cfg.m_values = int_list(value, line, col)?,
                "k_values" => cfg.k_values = int_list(value, line, col)?,
                "observables" => {
                    cfg.observables = value
                        .split(';')
                        .map(|s| s.trim().to_string())
                        .filter(|s| !s.is_empty())
                        .collect()
                }
                "trials" => cfg.trials = single_int(value, line, col)? as usize,
                "seed" => cfg.seed = single_int(value, line, col)?,
                "output" => cfg.output = Some(PathBuf::from(value)),
                "format" => cfg.format = value.parse().map_err(at)?,
                other => return Err(Error::parse(line, 1, format!("unknown key {other:?}"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let grids: [(&str, bool); 5] = [
            ("n_values", self.n_values.is_empty()),
            ("theta_values", self.theta_values.is_empty()),
            ("observables", self.observables.is_empty()),
            ("m_values", self.m_values.is_empty()),
            ("k_values", self.k_values.is_empty()),
        ];
        if let Some((name, _)) = grids.iter().find(|g| g.1) {
            return Err(Error::invalid(format!("{name} must not be empty")));
        }
        if self.trials < MIN_TRIALS {
            return Err(Error::invalid(format!("trials must be at least {MIN_TRIALS}")));
        }
        if self.m_values.contains(&0) || self.k_values.contains(&0) {
            return Err(Error::invalid("M and K must be positive"));
        }
        for &n in &self.n_values {
            self.ensemble.check_qubits(n)?;
            for w in &self.w_values {
                if *w > n {
                    return Err(Error::invalid(format!("weight {w} exceeds n = {n}")));
                }
            }
            self.observables_for(n)?;
        }
        Ok(())
    }

    /// Concrete observables for `n` qubits, with template expansion over `w_values`.
    pub fn observables_for(&self, n: usize) -> Result<Vec<Observable>> {
        let mut out = Vec::new();
        for template in &self.observables {
            if uses_weight(template) {
                if self.w_values.is_empty() {
                    return Err(Error::invalid(format!("{template} needs w_values")));
                }
                for &w in &self.w_values {
                    out.push(resolve_template(template, n, Some(w))?);
                }
            } else {
                out.push(resolve_template(template, n, None)?);
            }
        }
        Ok(out)
    }
}

fn strip(e: Error) -> String {
    match e {
        Error::InvalidArgument(m) => m,
        other => other.to_string(),
    }
}

fn uses_weight(template: &str) -> bool {
    template.starts_with("pauli_power:")
}

/// Expands one observable template for `n` qubits (and weight `w`).
pub fn resolve_template(template: &str, n: usize, w: Option<usize>) -> Result<Observable> {
    let t = template.trim();
    if t == "ghz_proj" {
        return parse_observable(&format!("ghz_proj:n={n}"), n);
    }
    if let Some(prefix) = t.strip_prefix("pauli_prefix:") {
        let len = prefix.trim_start_matches(['+', '-']).trim_start_matches('i').len();
        if len > n {
            return Err(Error::invalid(format!("{t} is longer than {n} qubits")));
        }
        return parse_observable(&format!("pauli:{prefix}{}", "I".repeat(n - len)), n);
    }
    if let Some(letter) = t.strip_prefix("pauli_power:") {
        if !matches!(letter, "X" | "Y" | "Z") {
            return Err(Error::invalid(format!("pauli_power needs X, Y or Z, found {letter:?}")));
        }
        let w = w.ok_or_else(|| Error::invalid(format!("{t} needs a weight")))?;
        if w == 0 || w > n {
            return Err(Error::invalid(format!("weight {w} out of range for {n} qubits")));
        }
        return parse_observable(&format!("pauli:{}{}", letter.repeat(w), "I".repeat(n - w)), n);
    }
    parse_observable(t, n)
}

fn list_items(value: &str, col: usize) -> impl Iterator<Item = (&str, usize)> {
    let mut offset = col;
    value.split(',').map(move |item| {
        let here = offset + (item.len() - item.trim_start().len());
        offset += item.len() + 1;
        (item.trim(), here)
    })
}

fn int_list(value: &str, line: usize, col: usize) -> Result<Vec<usize>> {
    list_items(value, col)
        .map(|(item, c)| {
            item.parse::<usize>()
                .map_err(|_| Error::parse(line, c, format!("expected a non-negative integer, found {item:?}")))
        })
        .collect()
}

fn angle_list(value: &str, line: usize, col: usize) -> Result<Vec<f64>> {
    list_items(value, col)
        .map(|(item, c)| parse_angle(item).map_err(|_| Error::parse(line, c, format!("bad angle {item:?}"))))
        .collect()
}

fn single_int(value: &str, line: usize, col: usize) -> Result<u64> {
    value
        .parse::<u64>()
        .map_err(|_| Error::parse(line, col, format!("expected a non-negative integer, found {value:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn presets_are_valid() {
        for kind in [
            ExperimentKind::PauliGrid,
            ExperimentKind::PauliWeight,
            ExperimentKind::CliffordGrid,
            ExperimentKind::CliffordScaling,
        ] {
            SweepConfig::preset(kind).validate().unwrap();
        }
        let grid = SweepConfig::preset(ExperimentKind::PauliGrid);
        assert_eq!(grid.m_values, vec![8, 16, 32, 64, 128, 256, 512, 1024]);
        assert_eq!(grid.k_values, vec![1, 2, 4, 8, 16, 32, 64]);
    }

    #[test]
    fn parse_full_config() {
        let text = "\
# weight sweep
experiment = pauli_weight
n = 6
w_values = 2, 4
observables = pauli_power:Z; pauli:XXXXXX
m_values = 16
k_values = 4,8
theta_values = 0, pi/2
trials = 500
seed = 7
format = jsonl
";
        let cfg = SweepConfig::parse(text).unwrap();
        assert_eq!(cfg.experiment, ExperimentKind::PauliWeight);
        assert_eq!(cfg.ensemble, Ensemble::Pauli);
        assert_eq!(cfg.n_values, vec![6]);
        assert_eq!(cfg.k_values, vec![4, 8]);
        assert!((cfg.theta_values[1] - PI / 2.0).abs() < 1e-15);
        assert_eq!(cfg.format, OutputFormat::Jsonl);
        let obs = cfg.observables_for(6).unwrap();
        let labels: Vec<String> = obs.iter().map(|o| o.to_string()).collect();
        assert_eq!(labels, ["pauli:ZZIIII", "pauli:ZZZZII", "pauli:XXXXXX"]);
    }

    #[test]
    fn parse_errors_have_positions() {
        match SweepConfig::parse("trials = 200\nm_values = 8, x\n") {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (2, 15)),
            other => panic!("{other:?}"),
        }
        match SweepConfig::parse("colour = red\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("{other:?}"),
        }
        match SweepConfig::parse("\n\nnonsense\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        match SweepConfig::parse("ensemble = qutrit\n") {
            Err(Error::Parse { column, .. }) => assert_eq!(column, 12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_invalid_grids() {
        assert!(SweepConfig::parse("trials = 10\n").is_err());
        assert!(SweepConfig::parse("m_values = 0\n").is_err());
        assert!(SweepConfig::parse("observables = pauli:ZZ\n").is_err());
        assert!(SweepConfig::parse("experiment = clifford_grid\nn = 12\n").is_err());
        assert!(SweepConfig::parse("experiment = pauli_weight\nw_values = 9\n").is_err());
    }

    #[test]
    fn templates() {
        let o = resolve_template("pauli_prefix:ZZ", 5, None).unwrap();
        assert_eq!(o.to_string(), "pauli:ZZIII");
        let o = resolve_template("pauli_power:X", 8, Some(8)).unwrap();
        assert_eq!(o.as_pauli().unwrap().weight(), 8);
        assert!(resolve_template("pauli_power:Q", 4, Some(2)).is_err());
        assert!(resolve_template("ghz_proj", 3, None).unwrap().as_pauli().is_none());
    }
}
