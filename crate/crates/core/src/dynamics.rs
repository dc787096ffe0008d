//! Discrete gradient descent `w^{t+1} = w^t + ηΔw^t`, its population
//! (expected) counterpart, initialization in a small ball and outcome
//! classification.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::analytic::SolverReport;
use crate::math::{all_finite, distance, norm, pow, sqrt};
use crate::model::{self, Design, Regularizer, WeightVector};
use crate::{seed, Error, Result};

/// When a run stops. Distances and radii are in units of `‖w*‖`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StopRule {
    pub max_steps: u64,
    pub step_norm_tol: f64,
    pub distance_tol: f64,
    pub divergence_radius: f64,
}

impl Default for StopRule {
    fn default() -> Self {
        Self { max_steps: 10_000, step_norm_tol: 1e-8, distance_tol: 1e-2, divergence_radius: 10.0 }
    }
}

impl StopRule {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_steps >= 1
            && [self.step_norm_tol, self.distance_tol, self.divergence_radius]
                .iter()
                .all(|v| v.is_finite() && *v > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter("stop rule needs max_steps >= 1 and positive finite tolerances".into()))
        }
    }
}

/// Learning rate, regularizer, stop rule and record stride of a run.
///
/// `record_stride = k` keeps every k-th step plus the last one; `0` keeps
/// only the last.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RunSettings {
    pub eta: f64,
    pub reg: Regularizer,
    pub stop: StopRule,
    pub record_stride: u64,
}

impl RunSettings {
    pub fn new(eta: f64, reg: Regularizer) -> Self {
        Self { eta, reg, stop: StopRule::default(), record_stride: 1 }
    }

    pub fn with_stop(mut self, stop: StopRule) -> Self {
        self.stop = stop;
        self
    }

    pub fn with_stride(mut self, stride: u64) -> Self {
        self.record_stride = stride;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(Error::InvalidParameter(alloc::format!("eta must be positive, got {}", self.eta)));
        }
        self.stop.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum TerminalReason {
    Stationary,
    ReachedOptimum,
    Diverged,
    BudgetExhausted,
    /// The expected flow reached `w = 0`, where `α` has a pole.
    HitOrigin,
}

impl TerminalReason {
    pub fn as_str(self) -> &'static str {
        match self {
            TerminalReason::Stationary => "stationary",
            TerminalReason::ReachedOptimum => "reached_optimum",
            TerminalReason::Diverged => "diverged",
            TerminalReason::BudgetExhausted => "budget_exhausted",
            TerminalReason::HitOrigin => "hit_origin",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StepRecord {
    pub t: u64,
    pub w: Vec<f64>,
    pub loss: f64,
    pub step_norm: f64,
    /// `½‖w − ŵ‖²`, when `ŵ` was supplied.
    pub lyapunov_v: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Trajectory {
    pub steps: Vec<StepRecord>,
    pub terminal_reason: TerminalReason,
    /// An ℓ1 step was taken at a point with a zero component.
    pub touched_zero: bool,
    /// Step index whose update would have left the finite range.
    pub diverged_at: Option<u64>,
    pub teacher_norm: f64,
}

impl Trajectory {
    pub fn last(&self) -> &StepRecord {
        self.steps.last().expect("trajectories are nonempty")
    }

    pub fn final_w(&self) -> &[f64] {
        &self.last().w
    }

    pub fn steps_taken(&self) -> u64 {
        self.last().t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum OutcomeKind {
    ConvergedToOptimum,
    ConvergedToStationary,
    NotConverged,
}

impl OutcomeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OutcomeKind::ConvergedToOptimum => "converged_to_optimum",
            OutcomeKind::ConvergedToStationary => "converged_to_stationary",
            OutcomeKind::NotConverged => "not_converged",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Outcome {
    pub kind: OutcomeKind,
    /// `‖w − ŵ‖/‖w*‖` at the end, or `None` without a usable `ŵ`.
    pub final_distance: Option<f64>,
    pub steps_taken: u64,
}

/// Radius `ε·√(2π/(d+1))·‖w*‖` of the initialization ball.
pub fn init_radius(teacher: &WeightVector, epsilon: f64) -> f64 {
    epsilon * sqrt(2.0 * core::f64::consts::PI / (teacher.dim() as f64 + 1.0)) * teacher.norm()
}

/// Uniform draw from the origin-centred ball of radius [`init_radius`]:
/// a normalized Gaussian direction times `r·U^{1/d}`.
pub fn sample_init(teacher: &WeightVector, epsilon: f64, seed: u64) -> Result<WeightVector> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter(alloc::format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    let r = init_radius(teacher, epsilon);
    let mut rng = seed::rng(seed);
    WeightVector::student(ball_point(&mut rng, teacher.dim(), r))
}

/// Uniform point in the origin-centred `d`-ball of the given radius.
pub(crate) fn ball_point<R: Rng + ?Sized>(rng: &mut R, d: usize, radius: f64) -> Vec<f64> {
    let dir = loop {
        let g: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let n = norm(&g);
        if n > 0.0 {
            break g.into_iter().map(|v| v / n).collect::<Vec<_>>();
        }
    };
    let u: f64 = rng.random();
    let scale = radius * pow(u, 1.0 / d as f64);
    dir.into_iter().map(|v| v * scale).collect()
}

/// Gradient descent with [`model::empirical_step`].
pub fn run_gd(
    design: &Design,
    teacher: &WeightVector,
    w1: &WeightVector,
    settings: &RunSettings,
    optimum: Option<&WeightVector>,
) -> Result<Trajectory> {
    settings.validate()?;
    let d = design.n_features();
    for v in [teacher.dim(), w1.dim()].into_iter().chain(optimum.map(|o| o.dim())) {
        if v != d {
            return Err(Error::DimensionMismatch { expected: d, found: v });
        }
    }
    let target = model::relu_outputs(design, teacher.values());
    let reg = settings.reg;
    iterate(teacher, w1, settings, optimum, |w| {
        Ok(Eval {
            step: model::empirical_step_with_target(design, &target, w, &reg),
            loss: model::loss_with_target(design, &target, w, &reg),
        })
    })
}

/// Explicit Euler on the population flow `ẇ = EΔw(w)` with step `η`.
///
/// Reaching `w = 0` ends the run with [`TerminalReason::HitOrigin`].
pub fn run_expected_flow(
    teacher: &WeightVector,
    w1: &WeightVector,
    settings: &RunSettings,
    optimum: Option<&WeightVector>,
) -> Result<Trajectory> {
    settings.validate()?;
    if w1.is_zero() {
        return Err(Error::ZeroVector("initial weight"));
    }
    let d = teacher.dim();
    for v in [w1.dim()].into_iter().chain(optimum.map(|o| o.dim())) {
        if v != d {
            return Err(Error::DimensionMismatch { expected: d, found: v });
        }
    }
    let reg = settings.reg;
    iterate(teacher, w1, settings, optimum, |w| {
        Ok(Eval {
            step: model::expected_step_raw(teacher.values(), w, &reg)?,
            loss: model::expected_loss_raw(teacher.values(), w, &reg),
        })
    })
}

struct Eval {
    step: Vec<f64>,
    loss: f64,
}

fn iterate<F>(
    teacher: &WeightVector,
    w1: &WeightVector,
    settings: &RunSettings,
    optimum: Option<&WeightVector>,
    mut eval: F,
) -> Result<Trajectory>
where
    F: FnMut(&[f64]) -> Result<Eval>,
{
    let stop = settings.stop;
    let scale = teacher.norm();
    let mut steps = Vec::new();
    let mut w = w1.values().to_vec();
    let mut touched_zero = false;
    let mut diverged_at = None;
    let mut t: u64 = 1;

    let terminal = loop {
        let Eval { step, loss } = match eval(&w) {
            Ok(e) => e,
            Err(Error::ZeroVector(_)) => break TerminalReason::HitOrigin,
            Err(e) => return Err(e),
        };
        touched_zero |= settings.reg.hits_subgradient(&w);
        let step_norm = norm(&step);
        if !all_finite(&step) || !loss.is_finite() {
            diverged_at = Some(t);
            break TerminalReason::Diverged;
        }
        let lyapunov_v = optimum.map(|o| {
            let dist = distance(&w, o.values());
            0.5 * dist * dist
        });
        let record = StepRecord { t, w: w.clone(), loss, step_norm, lyapunov_v };

        let reason = if norm(&w) > stop.divergence_radius * scale {
            Some(TerminalReason::Diverged)
        } else if step_norm <= stop.step_norm_tol {
            Some(TerminalReason::Stationary)
        } else if optimum.is_some_and(|o| distance(&w, o.values()) <= stop.distance_tol * scale) {
            Some(TerminalReason::ReachedOptimum)
        } else if t >= stop.max_steps {
            Some(TerminalReason::BudgetExhausted)
        } else {
            None
        };

        let keep = reason.is_some()
            || (settings.record_stride > 0 && (t - 1).is_multiple_of(settings.record_stride));
        if keep {
            steps.push(record);
        }
        if let Some(r) = reason {
            break r;
        }

        let next: Vec<f64> = w.iter().zip(&step).map(|(a, s)| a + settings.eta * s).collect();
        if !all_finite(&next) {
            steps.push(StepRecord { t, w: w.clone(), loss, step_norm, lyapunov_v });
            diverged_at = Some(t);
            break TerminalReason::Diverged;
        }
        w = next;
        t += 1;
    };

    if steps.is_empty() {
        // The first evaluation already failed; keep the starting point so
        // trajectories are never empty.
        steps.push(StepRecord { t: 1, w, loss: 0.0, step_norm: 0.0, lyapunov_v: None });
    }
    dedup_last(&mut steps);
    Ok(Trajectory { steps, terminal_reason: terminal, touched_zero, diverged_at, teacher_norm: scale })
}

fn dedup_last(steps: &mut Vec<StepRecord>) {
    let n = steps.len();
    if n >= 2 && steps[n - 1].t == steps[n - 2].t {
        steps.remove(n - 2);
    }
}

/// Classifies the end state of a run.
///
/// `ConvergedToOptimum` needs a mask-consistent `ŵ` and a final distance
/// within `distance_tol·‖w*‖`; `ConvergedToStationary` a final step norm
/// within `step_norm_tol` otherwise. Diverged runs are `NotConverged`.
pub fn classify_outcome(trajectory: &Trajectory, optimum: Option<&SolverReport>, stop: &StopRule) -> Outcome {
    let last = trajectory.last();
    let scale = trajectory.teacher_norm;
    let final_distance = optimum.map(|o| distance(&last.w, o.optimum.values()) / scale);
    let steps_taken = last.t;
    let diverged = matches!(trajectory.terminal_reason, TerminalReason::Diverged | TerminalReason::HitOrigin);
    let kind = if diverged {
        OutcomeKind::NotConverged
    } else if optimum.is_some_and(|o| o.mask_consistent) && final_distance.is_some_and(|d| d <= stop.distance_tol) {
        OutcomeKind::ConvergedToOptimum
    } else if last.step_norm <= stop.step_norm_tol {
        OutcomeKind::ConvergedToStationary
    } else {
        OutcomeKind::NotConverged
    };
    Outcome { kind, final_distance, steps_taken }
}
