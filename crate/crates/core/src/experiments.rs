//! Convergence-ratio grid, phase fields, the four-dynamics demonstration and
//! the Lyapunov scan.
//!
//! Trial seeds depend on `(master_seed, d, N, trial)` only, so every
//! regularizer and λ of a `(d, N)` pair sees the same designs and initial
//! points. Results never depend on evaluation order.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand_distr::{Distribution, StandardNormal};

use crate::analytic::{self, expected_optimum, theoretical_probability, SolverReport};
use crate::dynamics::{self, classify_outcome, run_gd, sample_init, Outcome, OutcomeKind, RunSettings, StopRule, Trajectory};
use crate::math::{norm, sqrt};
use crate::model::{self, Convention, Design, RegKind, Regularizer, WeightVector};
use crate::seed::{self, derive_seed, TAG_DESIGN, TAG_INIT, TAG_PROBE, TAG_TEACHER};
use crate::{Error, Result};

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// How the teacher of each trial is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum TeacherMode {
    /// `(1, …, 1)/√d` for every trial.
    #[default]
    UnitOnes,
    /// A fresh uniformly random unit direction per trial.
    RandomUnit,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GridConfig {
    pub d_values: Vec<usize>,
    pub n_values: Vec<usize>,
    pub lambda_values: Vec<f64>,
    pub reg_kinds: Vec<RegKind>,
    pub trials: usize,
    pub eta: f64,
    pub epsilon: f64,
    pub master_seed: u64,
    pub convention: Convention,
    pub stop: StopRule,
    pub teacher: TeacherMode,
}

impl GridConfig {
    /// d ∈ {2,3,5}, N ∈ {10,20,100}, λ ∈ {0.001,0.01,0.1}, ℓ2 and ℓ1, 500
    /// trials, η = 0.05, ε = 0.1, [`Convention::Paper`].
    pub fn table1(master_seed: u64) -> Self {
        Self {
            d_values: vec![2, 3, 5],
            n_values: vec![10, 20, 100],
            lambda_values: vec![0.001, 0.01, 0.1],
            reg_kinds: vec![RegKind::L2, RegKind::L1],
            trials: 500,
            eta: 0.05,
            epsilon: 0.1,
            master_seed,
            convention: Convention::Paper,
            stop: StopRule::default(),
            teacher: TeacherMode::UnitOnes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if self.d_values.is_empty() || self.n_values.is_empty() || self.lambda_values.is_empty() || self.reg_kinds.is_empty() {
            return bad("grid lists must be nonempty");
        }
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        let min_n = *self.n_values.iter().min().unwrap_or(&0);
        if self.d_values.iter().any(|d| *d == 0 || *d >= min_n) {
            return bad("every d must satisfy 1 <= d < min(N)");
        }
        if self.reg_kinds.contains(&RegKind::None) {
            return bad("grid regularizers must be l1 or l2");
        }
        for &lambda in &self.lambda_values {
            Regularizer::new(RegKind::L2, lambda, self.convention)?;
        }
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return bad("eta must be positive");
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad("epsilon must lie in (0, 1)");
        }
        self.stop.validate()
    }

    /// Cells in report order: d, then N, then regularizer, then λ.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &d in &self.d_values {
            for &n in &self.n_values {
                for &reg in &self.reg_kinds {
                    for &lambda in &self.lambda_values {
                        out.push(Cell { d, n, reg, lambda });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub d: usize,
    pub n: usize,
    pub reg: RegKind,
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialResult {
    pub kind: OutcomeKind,
    /// The teacher mask had at most `d` active rows.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TableRow {
    pub d: usize,
    #[cfg_attr(feature = "serde", serde(rename = "N"))]
    pub n: usize,
    pub reg: RegKind,
    pub lambda: f64,
    pub theoretical: f64,
    pub empirical: f64,
    pub empirical_stationary: f64,
    pub trials: usize,
    pub wilson_halfwidth: f64,
    pub degenerate_trials: usize,
    /// Every trial of the cell hit the rank-deficient event.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TableReport {
    pub rows: Vec<TableRow>,
}

impl TableReport {
    pub fn find(&self, d: usize, n: usize, reg: RegKind, lambda: f64) -> Option<&TableRow> {
        self.rows.iter().find(|r| r.d == d && r.n == n && r.reg == reg && r.lambda == lambda)
    }
}

/// Half-width of the 95% Wilson score interval for `successes` out of `n`.
pub fn wilson_halfwidth(successes: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = Z_95 * Z_95;
    Z_95 / (1.0 + z2 / nf) * sqrt(p * (1.0 - p) / nf + z2 / (4.0 * nf * nf))
}

/// A uniformly random unit direction.
pub fn random_unit_teacher(d: usize, seed: u64) -> Result<WeightVector> {
    let mut rng = seed::rng(seed);
    loop {
        let g: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let n = norm(&g);
        if n > 0.0 {
            return WeightVector::teacher(g.into_iter().map(|v| v / n).collect());
        }
    }
}

/// Solves for `ŵ` with the solver matching the regularizer.
pub fn solve_optimum(design: &Design, teacher: &WeightVector, reg: &Regularizer) -> Result<SolverReport> {
    match reg.kind() {
        RegKind::L1 => analytic::solve_optimum_l1(design, teacher, reg.lambda(), reg.convention()),
        RegKind::L2 | RegKind::None => analytic::solve_optimum_l2(design, teacher, reg.lambda(), reg.convention()),
    }
}

/// Seeds of one trial: `(design, init, teacher)`.
pub fn trial_seeds(master_seed: u64, d: usize, n: usize, trial: usize) -> (u64, u64, u64) {
    let key = |tag| derive_seed(master_seed, &[tag, d as u64, n as u64, trial as u64]);
    (key(TAG_DESIGN), key(TAG_INIT), key(TAG_TEACHER))
}

/// One trial: fresh design, fresh `w¹` in the initialization ball, full-batch
/// gradient descent, classification against `ŵ`.
pub fn run_trial(config: &GridConfig, cell: &Cell, trial: usize) -> Result<TrialResult> {
    let (design_seed, init_seed, teacher_seed) = trial_seeds(config.master_seed, cell.d, cell.n, trial);
    let teacher = match config.teacher {
        TeacherMode::UnitOnes => WeightVector::ones_teacher(cell.d, true)?,
        TeacherMode::RandomUnit => random_unit_teacher(cell.d, teacher_seed)?,
    };
    let design = Design::sample(cell.n, cell.d, design_seed)?;
    let reg = Regularizer::new(cell.reg, cell.lambda, config.convention)?;
    let solved = solve_optimum(&design, &teacher, &reg);
    let degenerate = matches!(solved, Err(Error::RankDeficient { .. }));
    let solved = solved.ok();
    let target = solved.as_ref().filter(|s| s.mask_consistent).map(|s| &s.optimum);
    let w1 = sample_init(&teacher, config.epsilon, init_seed)?;
    let settings = RunSettings::new(config.eta, reg).with_stop(config.stop).with_stride(0);
    let traj = run_gd(&design, &teacher, &w1, &settings, target)?;
    let outcome = classify_outcome(&traj, solved.as_ref(), &config.stop);
    Ok(TrialResult { kind: outcome.kind, degenerate })
}

/// Aggregates trial results of one cell into a table row.
pub fn summarize_cell(config: &GridConfig, cell: &Cell, results: &[TrialResult]) -> Result<TableRow> {
    let trials = results.len();
    let hits = results.iter().filter(|r| r.kind == OutcomeKind::ConvergedToOptimum).count();
    let stationary = results.iter().filter(|r| r.kind == OutcomeKind::ConvergedToStationary).count();
    let degenerate_trials = results.iter().filter(|r| r.degenerate).count();
    let frac = |k: usize| if trials == 0 { 0.0 } else { k as f64 / trials as f64 };
    Ok(TableRow {
        d: cell.d,
        n: cell.n,
        reg: cell.reg,
        lambda: cell.lambda,
        theoretical: theoretical_probability(cell.n, cell.d, config.epsilon)?,
        empirical: frac(hits),
        empirical_stationary: frac(stationary),
        trials,
        wilson_halfwidth: wilson_halfwidth(hits, trials),
        degenerate_trials,
        degenerate: trials > 0 && degenerate_trials == trials,
    })
}

/// Runs every cell sequentially. The `reluflow` crate has a parallel
/// driver producing identical reports.
pub fn run_grid(config: &GridConfig) -> Result<TableReport> {
    config.validate()?;
    let rows = config
        .cells()
        .iter()
        .map(|cell| {
            let results = (0..config.trials)
                .map(|t| run_trial(config, cell, t))
                .collect::<Result<Vec<_>>>()?;
            summarize_cell(config, cell, &results)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TableReport { rows })
}

/// Extent and resolution of a planar grid.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PhaseGrid {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub resolution: usize,
}

impl PhaseGrid {
    /// `[−2m, 2m]²` with `m` the largest teacher component, 25×25 points.
    pub fn default_for(teacher: &WeightVector) -> Self {
        let m = teacher.values().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        Self { x_range: (-2.0 * m, 2.0 * m), y_range: (-2.0 * m, 2.0 * m), resolution: 25 }
    }

    fn coord(range: (f64, f64), i: usize, res: usize) -> f64 {
        range.0 + (range.1 - range.0) * i as f64 / (res - 1) as f64
    }
}

/// Which step field a phase portrait samples.
#[derive(Debug, Clone, Copy)]
pub enum FieldSource<'a> {
    Empirical(&'a Design),
    Expected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case", tag = "kind"))]
pub enum PhaseSource {
    Empirical { design_seed: Option<u64> },
    Expected,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PhasePoint {
    pub x: f64,
    pub y: f64,
    pub dx: f64,
    pub dy: f64,
    pub defined: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PhaseField {
    pub points: Vec<PhasePoint>,
    pub grid: PhaseGrid,
    pub source: PhaseSource,
}

/// Normalized step directions on a planar grid, `y` outer and `x` inner.
///
/// A point is undefined at `w = 0` for ℓ1 or the expected source (the step
/// does not exist there) and wherever the step vanishes, so every defined
/// arrow has unit length.
pub fn phase_field(grid: &PhaseGrid, reg: &Regularizer, teacher: &WeightVector, source: FieldSource<'_>) -> Result<PhaseField> {
    if teacher.dim() != 2 {
        return Err(Error::InvalidParameter("phase fields need a planar (d = 2) teacher".into()));
    }
    if grid.resolution < 2 {
        return Err(Error::InvalidParameter("phase grid resolution must be at least 2".into()));
    }
    let target = match source {
        FieldSource::Empirical(design) => {
            if design.n_features() != 2 {
                return Err(Error::DimensionMismatch { expected: 2, found: design.n_features() });
            }
            Some(model::relu_outputs(design, teacher.values()))
        }
        FieldSource::Expected => None,
    };
    let res = grid.resolution;
    let mut points = Vec::with_capacity(res * res);
    for iy in 0..res {
        for ix in 0..res {
            let x = PhaseGrid::coord(grid.x_range, ix, res);
            let y = PhaseGrid::coord(grid.y_range, iy, res);
            let w = [x, y];
            let at_origin = x == 0.0 && y == 0.0;
            let pole = at_origin && (reg.kind() == RegKind::L1 && reg.lambda() > 0.0 || target.is_none());
            let step = if pole {
                None
            } else {
                match (source, &target) {
                    (FieldSource::Empirical(design), Some(t)) => Some(model::empirical_step_with_target(design, t, &w, reg)),
                    _ => model::expected_step_raw(teacher.values(), &w, reg).ok(),
                }
            };
            let point = match step {
                Some(s) if s.iter().all(|v| v.is_finite()) && norm(&s) > 0.0 => {
                    let n = norm(&s);
                    PhasePoint { x, y, dx: s[0] / n, dy: s[1] / n, defined: true }
                }
                _ => PhasePoint { x, y, dx: 0.0, dy: 0.0, defined: false },
            };
            points.push(point);
        }
    }
    let source = match source {
        FieldSource::Empirical(design) => PhaseSource::Empirical { design_seed: design.seed() },
        FieldSource::Expected => PhaseSource::Expected,
    };
    Ok(PhaseField { points, grid: *grid, source })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DemoConfig {
    pub eta: f64,
    pub seeds: [u64; 4],
    pub n_samples: usize,
    pub epsilon: f64,
    pub convention: Convention,
    pub stop: StopRule,
}

impl DemoConfig {
    /// N = 10, d = 2, η = 0.05, ε = 0.1 with the given seeds.
    pub fn new(seeds: [u64; 4]) -> Self {
        Self { eta: 0.05, seeds, n_samples: 10, epsilon: 0.1, convention: Convention::Corrected, stop: StopRule::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemoCase {
    pub label: String,
    pub reg: Regularizer,
    pub design_seed: u64,
    pub init_seed: u64,
    pub optimum: Option<SolverReport>,
    pub trajectory: Trajectory,
    pub outcome: Outcome,
}

/// The four cases (ℓ1, 0.01), (ℓ2, 0.01), (ℓ1, 0.1), (ℓ2, 0.1) with teacher
/// `(1, 1)`; case `i` draws its design and `w¹` from `seeds[i]`.
pub fn demo_four(config: &DemoConfig) -> Result<Vec<DemoCase>> {
    let teacher = WeightVector::teacher(vec![1.0, 1.0])?;
    let cases = [(RegKind::L1, 0.01), (RegKind::L2, 0.01), (RegKind::L1, 0.1), (RegKind::L2, 0.1)];
    cases
        .iter()
        .zip(config.seeds)
        .map(|(&(kind, lambda), case_seed)| {
            let reg = Regularizer::new(kind, lambda, config.convention)?;
            let design_seed = derive_seed(case_seed, &[TAG_DESIGN]);
            let init_seed = derive_seed(case_seed, &[TAG_INIT]);
            let design = Design::sample(config.n_samples, 2, design_seed)?;
            let optimum = solve_optimum(&design, &teacher, &reg).ok();
            let target = optimum.as_ref().filter(|o| o.mask_consistent).map(|o| &o.optimum);
            let w1 = sample_init(&teacher, config.epsilon, init_seed)?;
            let settings = RunSettings::new(config.eta, reg).with_stop(config.stop);
            let trajectory = run_gd(&design, &teacher, &w1, &settings, target)?;
            let outcome = classify_outcome(&trajectory, optimum.as_ref(), &config.stop);
            Ok(DemoCase {
                label: alloc::format!("{}-lambda-{}", kind.as_str(), lambda),
                reg,
                design_seed,
                init_seed,
                optimum,
                trajectory,
                outcome,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LyapunovScanConfig {
    pub n_features: usize,
    pub lambdas: Vec<f64>,
    pub reg: RegKind,
    pub convention: Convention,
    pub instances: usize,
    pub samples: usize,
    pub bands: usize,
    pub master_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScanRow {
    pub theta_lo: f64,
    pub theta_hi: f64,
    pub lambda: f64,
    pub samples: usize,
    /// Largest `V̇` seen in the band; `None` when the band got no samples.
    pub vdot_max: Option<f64>,
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScanReport {
    pub rows: Vec<ScanRow>,
    /// Teachers redrawn because the population dynamics had no fixed point
    /// (ℓ1 with a component below the shrinkage threshold).
    pub skipped_teachers: usize,
}

const MAX_TEACHER_DRAWS: u64 = 1000;

/// Samples `w` uniformly in the punctured ball `B̂_{‖w*‖}(w*)` for random
/// unit teachers and records the largest `V̇` per θ-band of `(0, π/2]`.
///
/// `ŵ` is the fixed point of the expected dynamics ([`expected_optimum`]),
/// the point `V̇` is measured against. A teacher without such a fixed point
/// is redrawn.
pub fn lyapunov_scan(config: &LyapunovScanConfig) -> Result<ScanReport> {
    if config.bands == 0 || config.instances == 0 || config.samples == 0 || config.n_features < 2 {
        return Err(Error::InvalidParameter("scan needs d >= 2 and positive bands, instances, samples".into()));
    }
    let band_width = PI / 2.0 / config.bands as f64;
    let d = config.n_features;
    let mut rows = Vec::new();
    let mut skipped_teachers = 0;
    for &lambda in &config.lambdas {
        let reg = Regularizer::new(config.reg, lambda, config.convention)?;
        let mut maxima: Vec<Option<f64>> = vec![None; config.bands];
        let mut counts = vec![0usize; config.bands];
        let mut violations = vec![0usize; config.bands];
        for instance in 0..config.instances {
            let key = [d as u64, instance as u64];
            let mut draw = 0;
            let (teacher, optimum) = loop {
                if draw == MAX_TEACHER_DRAWS {
                    return Err(Error::InvalidParameter("no teacher with a population fixed point".into()));
                }
                let s = derive_seed(config.master_seed, &[TAG_TEACHER, key[0], key[1], draw]);
                let teacher = random_unit_teacher(d, s)?;
                match expected_optimum(&teacher, &reg) {
                    Ok(o) => break (teacher, o),
                    Err(Error::NotConverged { .. }) => {
                        skipped_teachers += 1;
                        draw += 1;
                    }
                    Err(e) => return Err(e),
                }
            };
            let mut rng = seed::rng(derive_seed(config.master_seed, &[TAG_PROBE, key[0], key[1]]));
            let radius = teacher.norm();
            let mut taken = 0;
            while taken < config.samples {
                let offset = dynamics::ball_point(&mut rng, d, radius);
                let w: Vec<f64> = teacher.values().iter().zip(&offset).map(|(a, b)| a + b).collect();
                let Ok(p) = model::polar_raw(&w, teacher.values()) else { continue };
                if p.theta == 0.0 {
                    continue;
                }
                taken += 1;
                let band = ((p.theta / band_width) as usize).min(config.bands - 1);
                let v = analytic::vdot_raw(&w, optimum.values(), teacher.values(), &reg)?;
                counts[band] += 1;
                if v >= 0.0 {
                    violations[band] += 1;
                }
                maxima[band] = Some(maxima[band].map_or(v, |m: f64| m.max(v)));
            }
        }
        for b in 0..config.bands {
            rows.push(ScanRow {
                theta_lo: b as f64 * band_width,
                theta_hi: (b + 1) as f64 * band_width,
                lambda,
                samples: counts[b],
                vdot_max: maxima[b],
                violations: violations[b],
            });
        }
    }
    Ok(ScanReport { rows, skipped_teachers })
}
