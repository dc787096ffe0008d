//! Flag parsing and resolution of flags into a [`RunConfig`].

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use reluflow_core::dynamics::StopRule;
use reluflow_core::experiments::{GridConfig, PhaseGrid, TeacherMode};
use reluflow_core::model::{Convention, RegKind, WeightVector};
use reluflow_core::seed::derive_seed;

use crate::config::{
    Command, DemoParams, Format, PhaseParams, ProbParams, RunConfig, ScanParams, SimulateParams, SolveParams, Source,
    Table1Params,
};
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "reluflow", version, about = "Gradient dynamics of a regularized one-neuron ReLU network")]
pub struct Cli {
    /// Master seed; every random stream is split from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Sign of the regularization term in the step. Defaults to `paper` for
    /// table1 and `corrected` elsewhere.
    #[arg(long, global = true, value_enum)]
    pub convention: Option<ConventionArg>,
    /// Worker threads, 0 for one per core. Never changes results.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ConventionArg {
    Paper,
    Corrected,
}

impl From<ConventionArg> for Convention {
    fn from(c: ConventionArg) -> Self {
        match c {
            ConventionArg::Paper => Convention::Paper,
            ConventionArg::Corrected => Convention::Corrected,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RegArg {
    None,
    L1,
    L2,
}

impl From<RegArg> for RegKind {
    fn from(r: RegArg) -> Self {
        match r {
            RegArg::None => RegKind::None,
            RegArg::L1 => RegKind::L1,
            RegArg::L2 => RegKind::L2,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TeacherArg {
    UnitOnes,
    RandomUnit,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Run gradient descent (or the expected flow) from a random start.
    Simulate(SimulateArgs),
    /// Solve for the regularized optimum and report both λ bounds.
    Solve(SolveArgs),
    /// Report the λ admissibility bounds of a seeded instance.
    Bounds(SolveArgs),
    /// Convergence-ratio grid.
    Table1(Table1Args),
    /// Normalized step field on a planar grid.
    Phase(PhaseArgs),
    /// The four reference dynamics with teacher (1, 1).
    DemoFour(DemoArgs),
    /// Largest V̇ per θ-band over sampled points.
    LyapunovScan(ScanArgs),
    /// Rank-tail and theoretical convergence probabilities.
    Prob(ProbArgs),
    /// Replay a manifest or hand-written config file.
    Run { config: PathBuf },
}

#[derive(Debug, Args)]
pub struct StopArgs {
    #[arg(long, default_value_t = 10_000)]
    pub max_steps: u64,
    #[arg(long, default_value_t = 1e-8)]
    pub step_tol: f64,
    #[arg(long, default_value_t = 1e-2)]
    pub distance_tol: f64,
    #[arg(long, default_value_t = 10.0)]
    pub divergence_radius: f64,
}

impl StopArgs {
    fn rule(&self) -> StopRule {
        StopRule {
            max_steps: self.max_steps,
            step_norm_tol: self.step_tol,
            distance_tol: self.distance_tol,
            divergence_radius: self.divergence_radius,
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long = "N", default_value_t = 10)]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    #[arg(long, value_enum, default_value = "none")]
    pub reg: RegArg,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.05, allow_negative_numbers = true)]
    pub eta: f64,
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    pub epsilon: f64,
    /// Comma-separated teacher; defaults to all ones.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub teacher: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value = "empirical")]
    pub source: Source,
    /// Keep every k-th step (0 keeps only the last).
    #[arg(long, default_value_t = 1)]
    pub stride: u64,
    #[command(flatten)]
    pub stop: StopArgs,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long = "N", default_value_t = 20)]
    pub n: usize,
    #[arg(long, default_value_t = 3)]
    pub d: usize,
    #[arg(long, value_enum, default_value = "l2")]
    pub reg: RegArg,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub lambda: f64,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub teacher: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct Table1Args {
    #[arg(long, default_value_t = 500)]
    pub trials: usize,
    #[arg(long, value_delimiter = ',')]
    pub d_values: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub n_values: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub lambdas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', value_enum)]
    pub regs: Option<Vec<RegArg>>,
    #[arg(long, default_value_t = 0.05, allow_negative_numbers = true)]
    pub eta: f64,
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    pub epsilon: f64,
    #[arg(long, value_enum, default_value = "unit-ones")]
    pub teacher: TeacherArg,
    #[command(flatten)]
    pub stop: StopArgs,
}

#[derive(Debug, Args)]
pub struct PhaseArgs {
    #[arg(long = "N", default_value_t = 10)]
    pub n: usize,
    #[arg(long, value_enum, default_value = "l2")]
    pub reg: RegArg,
    #[arg(long, default_value_t = 0.01, allow_negative_numbers = true)]
    pub lambda: f64,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub teacher: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value = "empirical")]
    pub source: Source,
    /// `lo,hi`; defaults to ±2 times the largest teacher component.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, num_args = 2)]
    pub x_range: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, num_args = 2)]
    pub y_range: Option<Vec<f64>>,
    #[arg(long, default_value_t = 25)]
    pub resolution: usize,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    #[arg(long, default_value_t = 0.05, allow_negative_numbers = true)]
    pub eta: f64,
    /// Four comma-separated case seeds; derived from --seed when absent.
    #[arg(long, value_delimiter = ',', num_args = 4)]
    pub seeds: Option<Vec<u64>>,
    #[arg(long = "N", default_value_t = 10)]
    pub n: usize,
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    pub epsilon: f64,
    #[command(flatten)]
    pub stop: StopArgs,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[arg(long, default_value_t = 3)]
    pub d: usize,
    #[arg(long = "lambda", value_delimiter = ',', allow_negative_numbers = true, default_value = "0.01")]
    pub lambdas: Vec<f64>,
    #[arg(long, value_enum, default_value = "l2")]
    pub reg: RegArg,
    #[arg(long, default_value_t = 20)]
    pub instances: usize,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value_t = 10)]
    pub bands: usize,
}

#[derive(Debug, Args)]
pub struct ProbArgs {
    #[arg(long = "N", value_delimiter = ',', default_value = "10,20,100")]
    pub n_values: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "2,3,5")]
    pub d: Vec<usize>,
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    pub epsilon: f64,
}

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_OUT: &str = "out";

impl Cli {
    /// Resolves flags, or loads and overrides a config file for `run`.
    pub fn resolve(self) -> CliResult<RunConfig> {
        if let Sub::Run { config } = &self.command {
            let mut cfg = RunConfig::load(config)?;
            if let Some(out) = self.out {
                cfg.output_dir = out;
            }
            if self.seed.is_some() || self.format.is_some() || self.convention.is_some() {
                return Err(CliError::Config("run takes its seed, format and convention from the config file".into()));
            }
            return Ok(cfg);
        }
        let master_seed = self.seed.unwrap_or(DEFAULT_SEED);
        let default_convention = match self.command {
            Sub::Table1(_) => GridConfig::table1(0).convention,
            _ => Convention::Corrected,
        };
        let convention = self.convention.map(Convention::from).unwrap_or(default_convention);
        let command = match self.command {
            Sub::Simulate(a) => Command::Simulate(SimulateParams {
                n_samples: a.n,
                d: a.d,
                reg: a.reg.into(),
                lambda: a.lambda,
                eta: a.eta,
                epsilon: a.epsilon,
                teacher: a.teacher.unwrap_or_else(|| vec![1.0; a.d]),
                source: a.source,
                stop: a.stop.rule(),
                record_stride: a.stride,
            }),
            Sub::Solve(a) => Command::Solve(solve_params(a)),
            Sub::Bounds(a) => Command::Bounds(solve_params(a)),
            Sub::Table1(a) => {
                let preset = GridConfig::table1(master_seed);
                Command::Table1(Table1Params {
                    d_values: a.d_values.unwrap_or(preset.d_values),
                    n_values: a.n_values.unwrap_or(preset.n_values),
                    lambda_values: a.lambdas.unwrap_or(preset.lambda_values),
                    reg_kinds: a.regs.map(|r| r.into_iter().map(RegKind::from).collect()).unwrap_or(preset.reg_kinds),
                    trials: a.trials,
                    eta: a.eta,
                    epsilon: a.epsilon,
                    teacher: match a.teacher {
                        TeacherArg::UnitOnes => TeacherMode::UnitOnes,
                        TeacherArg::RandomUnit => TeacherMode::RandomUnit,
                    },
                    stop: a.stop.rule(),
                })
            }
            Sub::Phase(a) => {
                let teacher = a.teacher.unwrap_or_else(|| vec![1.0, 1.0]);
                let default = WeightVector::teacher(teacher.clone())
                    .ok()
                    .map(|t| PhaseGrid::default_for(&t))
                    .unwrap_or(PhaseGrid { x_range: (-2.0, 2.0), y_range: (-2.0, 2.0), resolution: 25 });
                let pair = |v: Option<Vec<f64>>, d: (f64, f64)| v.map(|v| (v[0], v[1])).unwrap_or(d);
                Command::Phase(PhaseParams {
                    n_samples: a.n,
                    reg: a.reg.into(),
                    lambda: a.lambda,
                    teacher,
                    source: a.source,
                    x_range: pair(a.x_range, default.x_range),
                    y_range: pair(a.y_range, default.y_range),
                    resolution: a.resolution,
                })
            }
            Sub::DemoFour(a) => {
                let seeds = match a.seeds {
                    Some(s) => [s[0], s[1], s[2], s[3]],
                    None => core::array::from_fn(|i| derive_seed(master_seed, &[i as u64])),
                };
                Command::DemoFour(DemoParams { eta: a.eta, seeds, n_samples: a.n, epsilon: a.epsilon, stop: a.stop.rule() })
            }
            Sub::LyapunovScan(a) => Command::LyapunovScan(ScanParams {
                d: a.d,
                lambdas: a.lambdas,
                reg: a.reg.into(),
                instances: a.instances,
                samples: a.samples,
                bands: a.bands,
            }),
            Sub::Prob(a) => Command::Prob(ProbParams { n_values: a.n_values, d_values: a.d, epsilon: a.epsilon }),
            Sub::Run { .. } => unreachable!(),
        };
        Ok(RunConfig {
            command,
            output_dir: self.out.unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
            format: self.format.unwrap_or_default(),
            master_seed,
            convention,
        })
    }
}

fn solve_params(a: SolveArgs) -> SolveParams {
    SolveParams {
        n_samples: a.n,
        d: a.d,
        reg: a.reg.into(),
        lambda: a.lambda,
        teacher: a.teacher.unwrap_or_else(|| vec![1.0; a.d]),
    }
}
