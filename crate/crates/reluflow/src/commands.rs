//! One function per subcommand. Each stages its files and commits them
//! together with `manifest.json`.

use std::path::PathBuf;

use rayon::prelude::*;
use reluflow_core::analytic::{self, BoundReport, SolverReport};
use reluflow_core::dynamics::{classify_outcome, run_expected_flow, run_gd, sample_init, Outcome, RunSettings, TerminalReason};
use reluflow_core::experiments::{
    self, demo_four, lyapunov_scan, phase_field, solve_optimum, summarize_cell, DemoConfig, FieldSource, GridConfig,
    LyapunovScanConfig, PhaseGrid, TableReport,
};
use reluflow_core::model::{Design, RegKind, WeightVector};
use reluflow_core::seed::{derive_seed, TAG_DESIGN, TAG_INIT};
use reluflow_core::Error;
use serde::Serialize;

use crate::config::{Command, Format, RunConfig, Source};
use crate::error::{CliError, CliResult};
use crate::output::{self, Staging};

/// Runs `config` on a pool of `threads` workers (0 picks the rayon default)
/// and returns the committed files.
pub fn execute(config: &RunConfig, threads: usize) -> CliResult<Vec<PathBuf>> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("cannot build thread pool: {e}")))?;
    let mut staging = Staging::new(&config.output_dir)?;
    pool.install(|| match &config.command {
        Command::Simulate(_) => simulate(config, &mut staging),
        Command::Solve(_) => solve(config, &mut staging, "solve.json"),
        Command::Bounds(_) => solve(config, &mut staging, "bounds.json"),
        Command::Table1(_) => table1(config, &mut staging),
        Command::Phase(_) => phase(config, &mut staging),
        Command::DemoFour(_) => demo(config, &mut staging),
        Command::LyapunovScan(_) => scan(config, &mut staging),
        Command::Prob(_) => prob(config, &mut staging),
    })?;
    staging.write("manifest.json", config.to_json())?;
    staging.commit()
}

/// Seeds used by `simulate`, `solve` and `bounds`: the same master seed
/// gives the same design in all three.
pub fn design_seed(master: u64) -> u64 {
    derive_seed(master, &[TAG_DESIGN])
}

pub fn init_seed(master: u64) -> u64 {
    derive_seed(master, &[TAG_INIT])
}

#[derive(Serialize)]
struct OptimumRecord {
    optimum: Vec<f64>,
    residual: f64,
    linearized_residual: f64,
    mask_consistent: bool,
    iterations: usize,
}

impl From<&SolverReport> for OptimumRecord {
    fn from(r: &SolverReport) -> Self {
        Self {
            optimum: r.optimum.values().to_vec(),
            residual: r.residual,
            linearized_residual: r.linearized_residual,
            mask_consistent: r.mask_consistent,
            iterations: r.iterations,
        }
    }
}

#[derive(Serialize)]
struct TrajectoryDoc<'a> {
    command: &'a Command,
    convention: reluflow_core::model::Convention,
    master_seed: u64,
    design_seed: Option<u64>,
    init_seed: u64,
    init: Vec<f64>,
    terminal_reason: TerminalReason,
    touched_zero: bool,
    diverged_at: Option<u64>,
    outcome: Outcome,
    optimum: Option<OptimumRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    steps: Option<&'a [reluflow_core::dynamics::StepRecord]>,
}

fn simulate(config: &RunConfig, staging: &mut Staging) -> CliResult<()> {
    let Command::Simulate(p) = &config.command else { unreachable!() };
    let reg = config.regularizer(p.reg, p.lambda)?;
    let teacher = WeightVector::teacher(p.teacher.clone())?;
    let w1 = sample_init(&teacher, p.epsilon, init_seed(config.master_seed))?;
    let settings = RunSettings::new(p.eta, reg).with_stop(p.stop).with_stride(p.record_stride);
    let (traj, solved, dseed) = match p.source {
        Source::Empirical => {
            let dseed = design_seed(config.master_seed);
            let design = Design::sample(p.n_samples, p.d, dseed)?;
            let solved = solve_optimum(&design, &teacher, &reg).ok();
            let target = solved.as_ref().filter(|s| s.mask_consistent).map(|s| s.optimum.clone());
            (run_gd(&design, &teacher, &w1, &settings, target.as_ref())?, solved, Some(dseed))
        }
        Source::Expected => {
            let target = analytic::expected_optimum(&teacher, &reg).ok();
            let traj = run_expected_flow(&teacher, &w1, &settings, target.as_ref())?;
            let solved = target.map(|o| SolverReport {
                residual: 0.0,
                linearized_residual: 0.0,
                mask_consistent: true,
                iterations: 0,
                lambda_used: reg.lambda(),
                kind: reg.kind(),
                convention: reg.convention(),
                optimum: o,
            });
            (traj, solved, None)
        }
    };
    let outcome = classify_outcome(&traj, solved.as_ref(), &p.stop);
    let json_only = config.format == Format::Json;
    let doc = TrajectoryDoc {
        command: &config.command,
        convention: config.convention,
        master_seed: config.master_seed,
        design_seed: dseed,
        init_seed: init_seed(config.master_seed),
        init: w1.values().to_vec(),
        terminal_reason: traj.terminal_reason,
        touched_zero: traj.touched_zero,
        diverged_at: traj.diverged_at,
        outcome,
        optimum: solved.as_ref().map(OptimumRecord::from),
        steps: json_only.then_some(traj.steps.as_slice()),
    };
    if !json_only {
        staging.write("trajectory.csv", output::trajectory_csv(&traj))?;
    }
    staging.write_json("trajectory.json", &doc)
}

#[derive(Serialize)]
struct SolveDoc {
    degenerate: bool,
    error: Option<String>,
    reg: RegKind,
    lambda: f64,
    convention: reluflow_core::model::Convention,
    #[serde(rename = "N")]
    n_samples: usize,
    d: usize,
    master_seed: u64,
    design_seed: u64,
    teacher: Vec<f64>,
    active_rows: usize,
    #[serde(flatten)]
    optimum: Option<OptimumRecord>,
    lambda_bound_l2: Option<f64>,
    lambda_bound_l1: Option<f64>,
    lambda_bound_l1_explicit: Option<f64>,
    u_estimate: Option<Vec<f64>>,
}

fn solve(config: &RunConfig, staging: &mut Staging, file: &str) -> CliResult<()> {
    let (Command::Solve(p) | Command::Bounds(p)) = &config.command else { unreachable!() };
    let reg = config.regularizer(p.reg, p.lambda)?;
    let teacher = WeightVector::teacher(p.teacher.clone())?;
    let dseed = design_seed(config.master_seed);
    let design = Design::sample(p.n_samples, p.d, dseed)?;
    let active_rows = reluflow_core::model::activation_mask(&design, &teacher)?.count();
    let report = match solve_optimum(&design, &teacher, &reg) {
        Ok(r) => Ok(r),
        Err(e @ (Error::RankDeficient { .. } | Error::Singular | Error::SignPatternChanged { .. } | Error::NotConverged { .. })) => Err(e),
        Err(e) => return Err(e.into()),
    };
    let degenerate = matches!(report, Err(Error::RankDeficient { .. }));
    let l2 = analytic::lambda_bound_l2(&design, &teacher).ok().map(|b| b.bound_primary);
    let l1: Option<BoundReport> = {
        let base = match &report {
            Ok(r) if r.kind == RegKind::L1 => Some(r.clone()),
            _ => analytic::solve_optimum_l1(&design, &teacher, 0.0, config.convention).ok(),
        };
        base.and_then(|b| analytic::lambda_bound_l1(&design, &teacher, &b).ok())
    };
    let doc = SolveDoc {
        degenerate,
        error: report.as_ref().err().map(|e| e.to_string()),
        reg: p.reg,
        lambda: p.lambda,
        convention: config.convention,
        n_samples: p.n_samples,
        d: p.d,
        master_seed: config.master_seed,
        design_seed: dseed,
        teacher: p.teacher.clone(),
        active_rows,
        optimum: report.as_ref().ok().map(OptimumRecord::from),
        lambda_bound_l2: l2,
        lambda_bound_l1: l1.as_ref().map(|b| b.bound_primary),
        lambda_bound_l1_explicit: l1.as_ref().and_then(|b| b.bound_explicit),
        u_estimate: l1.and_then(|b| b.u_estimate),
    };
    staging.write_json(file, &doc)
}

/// Every `(cell, trial)` pair runs as an independent task; results are
/// collected in grid order, so the report does not depend on scheduling.
pub fn run_grid_parallel(config: &GridConfig) -> CliResult<TableReport> {
    config.validate()?;
    let cells = config.cells();
    let jobs: Vec<(usize, usize)> = (0..cells.len()).flat_map(|c| (0..config.trials).map(move |t| (c, t))).collect();
    let results = jobs
        .par_iter()
        .map(|&(c, t)| experiments::run_trial(config, &cells[c], t))
        .collect::<Result<Vec<_>, _>>()?;
    let rows = cells
        .iter()
        .zip(results.chunks(config.trials))
        .map(|(cell, chunk)| summarize_cell(config, cell, chunk))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TableReport { rows })
}

#[derive(Serialize)]
struct TableDoc<'a> {
    config: &'a GridConfig,
    master_seed: u64,
    rows: &'a [experiments::TableRow],
}

fn table1(config: &RunConfig, staging: &mut Staging) -> CliResult<()> {
    let grid = config.grid_config()?;
    let report = run_grid_parallel(&grid)?;
    if config.format != Format::Json {
        staging.write("table1.csv", output::table_csv(&report))?;
    }
    staging.write_json("table1.json", &TableDoc { config: &grid, master_seed: grid.master_seed, rows: &report.rows })
}

fn phase(config: &RunConfig, staging: &mut Staging) -> CliResult<()> {
    let Command::Phase(p) = &config.command else { unreachable!() };
    let reg = config.regularizer(p.reg, p.lambda)?;
    let teacher = WeightVector::teacher(p.teacher.clone())?;
    let grid = PhaseGrid { x_range: p.x_range, y_range: p.y_range, resolution: p.resolution };
    let design;
    let source = match p.source {
        Source::Empirical => {
            design = Design::sample(p.n_samples, 2, design_seed(config.master_seed))?;
            FieldSource::Empirical(&design)
        }
        Source::Expected => FieldSource::Expected,
    };
    let field = phase_field(&grid, &reg, &teacher, source)?;
    match config.format {
        Format::Json => staging.write_json("phase.json", &field),
        Format::Csv => staging.write("phase.csv", output::phase_csv(&field)),
        Format::Svg => {
            staging.write("phase.csv", output::phase_csv(&field))?;
            staging.write("phase.svg", output::phase_svg(&field, &teacher))
        }
    }
}

#[derive(Serialize)]
struct DemoCaseDoc {
    label: String,
    reg: RegKind,
    lambda: f64,
    design_seed: u64,
    init_seed: u64,
    terminal_reason: TerminalReason,
    touched_zero: bool,
    outcome: Outcome,
    optimum: Option<OptimumRecord>,
    file: Option<String>,
}

fn demo(config: &RunConfig, staging: &mut Staging) -> CliResult<()> {
    let Command::DemoFour(p) = &config.command else { unreachable!() };
    let cfg = DemoConfig {
        eta: p.eta,
        seeds: p.seeds,
        n_samples: p.n_samples,
        epsilon: p.epsilon,
        convention: config.convention,
        stop: p.stop,
    };
    let cases = demo_four(&cfg)?;
    let mut docs = Vec::new();
    for (i, c) in cases.iter().enumerate() {
        let file = (config.format != Format::Json).then(|| format!("demo_{}_{}.csv", i + 1, c.label));
        if let Some(f) = &file {
            staging.write(f, output::trajectory_csv(&c.trajectory))?;
        }
        docs.push(DemoCaseDoc {
            label: c.label.clone(),
            reg: c.reg.kind(),
            lambda: c.reg.lambda(),
            design_seed: c.design_seed,
            init_seed: c.init_seed,
            terminal_reason: c.trajectory.terminal_reason,
            touched_zero: c.trajectory.touched_zero,
            outcome: c.outcome,
            optimum: c.optimum.as_ref().map(OptimumRecord::from),
            file,
        });
    }
    staging.write_json("demo_four.json", &docs)
}

#[derive(Serialize)]
struct ScanDoc<'a> {
    config: &'a LyapunovScanConfig,
    skipped_teachers: usize,
    rows: &'a [experiments::ScanRow],
}

fn scan(config: &RunConfig, staging: &mut Staging) -> CliResult<()> {
    let Command::LyapunovScan(p) = &config.command else { unreachable!() };
    let cfg = LyapunovScanConfig {
        n_features: p.d,
        lambdas: p.lambdas.clone(),
        reg: p.reg,
        convention: config.convention,
        instances: p.instances,
        samples: p.samples,
        bands: p.bands,
        master_seed: config.master_seed,
    };
    let report = lyapunov_scan(&cfg)?;
    if config.format != Format::Json {
        staging.write("lyapunov_scan.csv", output::scan_csv(&report.rows))?;
    }
    staging.write_json("lyapunov_scan.json", &ScanDoc { config: &cfg, skipped_teachers: report.skipped_teachers, rows: &report.rows })
}

fn prob(config: &RunConfig, staging: &mut Staging) -> CliResult<()> {
    let Command::Prob(p) = &config.command else { unreachable!() };
    let rows = output::prob_rows(&p.n_values, &p.d_values, p.epsilon)?;
    if config.format != Format::Json {
        staging.write("prob.csv", output::prob_csv(&rows))?;
    }
    staging.write_json("prob.json", &rows)
}
