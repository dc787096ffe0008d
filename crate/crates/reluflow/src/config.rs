//! The on-disk run configuration. Every run writes its fully resolved
//! [`RunConfig`] to `manifest.json`; `reluflow run manifest.json` replays it.

use std::path::{Path, PathBuf};

use reluflow_core::dynamics::StopRule;
use reluflow_core::experiments::TeacherMode;
use reluflow_core::model::{Convention, RegKind, Regularizer};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    #[default]
    Empirical,
    Expected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    pub output_dir: PathBuf,
    pub format: Format,
    pub master_seed: u64,
    pub convention: Convention,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Command {
    Simulate(SimulateParams),
    Solve(SolveParams),
    Bounds(SolveParams),
    Table1(Table1Params),
    Phase(PhaseParams),
    DemoFour(DemoParams),
    LyapunovScan(ScanParams),
    Prob(ProbParams),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Solve(_) => "solve",
            Command::Bounds(_) => "bounds",
            Command::Table1(_) => "table1",
            Command::Phase(_) => "phase",
            Command::DemoFour(_) => "demo-four",
            Command::LyapunovScan(_) => "lyapunov-scan",
            Command::Prob(_) => "prob",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateParams {
    #[serde(rename = "N")]
    pub n_samples: usize,
    pub d: usize,
    pub reg: RegKind,
    pub lambda: f64,
    pub eta: f64,
    pub epsilon: f64,
    pub teacher: Vec<f64>,
    pub source: Source,
    pub stop: StopRule,
    pub record_stride: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveParams {
    #[serde(rename = "N")]
    pub n_samples: usize,
    pub d: usize,
    pub reg: RegKind,
    pub lambda: f64,
    pub teacher: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Table1Params {
    pub d_values: Vec<usize>,
    pub n_values: Vec<usize>,
    pub lambda_values: Vec<f64>,
    pub reg_kinds: Vec<RegKind>,
    pub trials: usize,
    pub eta: f64,
    pub epsilon: f64,
    pub teacher: TeacherMode,
    pub stop: StopRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseParams {
    #[serde(rename = "N")]
    pub n_samples: usize,
    pub reg: RegKind,
    pub lambda: f64,
    pub teacher: Vec<f64>,
    pub source: Source,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub resolution: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemoParams {
    pub eta: f64,
    pub seeds: [u64; 4],
    #[serde(rename = "N")]
    pub n_samples: usize,
    pub epsilon: f64,
    pub stop: StopRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanParams {
    pub d: usize,
    pub lambdas: Vec<f64>,
    pub reg: RegKind,
    pub instances: usize,
    pub samples: usize,
    pub bands: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbParams {
    pub n_values: Vec<usize>,
    pub d_values: Vec<usize>,
    pub epsilon: f64,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("invalid config {}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    /// Parameter checks that do not need any computation.
    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.format == Format::Svg && !matches!(self.command, Command::Phase(_)) {
            return bad(format!("svg output is only available for phase, not {}", self.command.name()));
        }
        match &self.command {
            Command::Simulate(p) => {
                check_shape(p.n_samples, p.d)?;
                check_teacher(&p.teacher, p.d)?;
                self.regularizer(p.reg, p.lambda)?;
                check_positive("eta", p.eta)?;
                check_epsilon(p.epsilon)?;
                p.stop.validate().map_err(CliError::from)?;
            }
            Command::Solve(p) | Command::Bounds(p) => {
                check_shape(p.n_samples, p.d)?;
                check_teacher(&p.teacher, p.d)?;
                self.regularizer(p.reg, p.lambda)?;
            }
            Command::Table1(_) => {
                self.grid_config()?.validate().map_err(CliError::from)?;
            }
            Command::Phase(p) => {
                check_shape(p.n_samples, 2)?;
                check_teacher(&p.teacher, 2)?;
                self.regularizer(p.reg, p.lambda)?;
                if p.resolution < 2 {
                    return bad("resolution must be at least 2".into());
                }
                let finite = [p.x_range.0, p.x_range.1, p.y_range.0, p.y_range.1].iter().all(|v| v.is_finite());
                if !finite || p.x_range.0 >= p.x_range.1 || p.y_range.0 >= p.y_range.1 {
                    return bad("phase ranges must be finite with lo < hi".into());
                }
            }
            Command::DemoFour(p) => {
                check_shape(p.n_samples, 2)?;
                check_positive("eta", p.eta)?;
                check_epsilon(p.epsilon)?;
                p.stop.validate().map_err(CliError::from)?;
            }
            Command::LyapunovScan(p) => {
                if p.d < 2 || p.instances == 0 || p.samples == 0 || p.bands == 0 || p.lambdas.is_empty() {
                    return bad("lyapunov-scan needs d >= 2 and positive instances, samples, bands, lambdas".into());
                }
                for &l in &p.lambdas {
                    self.regularizer(p.reg, l)?;
                }
            }
            Command::Prob(p) => {
                check_epsilon(p.epsilon)?;
                if p.n_values.is_empty() || p.d_values.is_empty() {
                    return bad("prob needs at least one N and one d".into());
                }
                for &n in &p.n_values {
                    for &d in &p.d_values {
                        if d >= n {
                            return bad(format!("d ({d}) must be smaller than N ({n})"));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn regularizer(&self, kind: RegKind, lambda: f64) -> CliResult<Regularizer> {
        Regularizer::new(kind, lambda, self.convention).map_err(CliError::from)
    }

    pub fn grid_config(&self) -> CliResult<reluflow_core::experiments::GridConfig> {
        let Command::Table1(p) = &self.command else {
            return Err(CliError::Config("not a table1 config".into()));
        };
        Ok(reluflow_core::experiments::GridConfig {
            d_values: p.d_values.clone(),
            n_values: p.n_values.clone(),
            lambda_values: p.lambda_values.clone(),
            reg_kinds: p.reg_kinds.clone(),
            trials: p.trials,
            eta: p.eta,
            epsilon: p.epsilon,
            master_seed: self.master_seed,
            convention: self.convention,
            stop: p.stop,
            teacher: p.teacher,
        })
    }
}

fn check_shape(n: usize, d: usize) -> CliResult<()> {
    if d == 0 || n <= d {
        return Err(CliError::Config(format!("need 1 <= d < N, got N = {n}, d = {d}")));
    }
    Ok(())
}

fn check_teacher(t: &[f64], d: usize) -> CliResult<()> {
    if t.len() != d {
        return Err(CliError::Config(format!("teacher has {} components, expected d = {d}", t.len())));
    }
    if t.iter().any(|v| !v.is_finite()) || t.iter().all(|v| *v == 0.0) {
        return Err(CliError::Config("teacher must be finite and nonzero".into()));
    }
    Ok(())
}

fn check_positive(name: &str, v: f64) -> CliResult<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(CliError::Config(format!("{name} must be positive and finite, got {v}")));
    }
    Ok(())
}

fn check_epsilon(e: f64) -> CliResult<()> {
    if !(e > 0.0 && e < 1.0) {
        return Err(CliError::Config(format!("epsilon must lie in (0, 1), got {e}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::Cli;
    use clap::Parser;

    #[test]
    fn every_command_round_trips_through_json() {
        for args in [
            &["simulate"][..],
            &["solve"],
            &["bounds"],
            &["table1"],
            &["phase"],
            &["demo-four"],
            &["lyapunov-scan"],
            &["prob"],
        ] {
            let argv: Vec<&str> = ["reluflow"].iter().chain(args).copied().collect();
            let cfg = Cli::try_parse_from(argv).unwrap().resolve().unwrap();
            cfg.validate().unwrap();
            let back: RunConfig = serde_json::from_str(&cfg.to_json()).unwrap();
            assert_eq!(back.to_json(), cfg.to_json());
        }
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let cfg = Cli::try_parse_from(["reluflow", "prob"]).unwrap().resolve().unwrap();
        let mut value = serde_json::to_value(&cfg).unwrap();
        value["threads"] = 4.into();
        let text = value.to_string();
        assert!(serde_json::from_str::<RunConfig>(&text).is_err());
    }
}
