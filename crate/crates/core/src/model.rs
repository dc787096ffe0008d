//! Data model, ReLU forward map, loss and gradient steps.
//!
//! The network is `g(x, w) = max(xᵀw, 0)`. Labels come from a teacher `w*`,
//! and the loss on a design `X` is
//!
//! ```text
//! E(w) = 1/(2N) ‖g(X, w*) − g(X, w)‖² + (λ/2) R(w)
//! ```
//!
//! with `R(w) = ‖w‖₂²` or `R(w) = ‖w‖₁²`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand_distr::{Distribution, StandardNormal};

use crate::math::{self, abs, cos, dot, norm, norm1, signum0, sin};
use crate::{seed, Error, Result};

/// An `N×d` design with rows `x_i ~ N(0, I_d)`.
///
/// Sampled entries come from [`seed::rng`] (ChaCha8 seeded through
/// `SeedableRng::seed_from_u64`) and are drawn row-major with
/// `rand_distr::StandardNormal`.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    entries: Vec<f64>,
    n_samples: usize,
    n_features: usize,
    seed: Option<u64>,
}

impl Design {
    /// Draws a fresh Gaussian design.
    pub fn sample(n_samples: usize, n_features: usize, seed: u64) -> Result<Self> {
        check_shape(n_samples, n_features)?;
        let mut rng = seed::rng(seed);
        let entries = (0..n_samples * n_features)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        Ok(Self { entries, n_samples, n_features, seed: Some(seed) })
    }

    /// Wraps explicit row-major entries.
    pub fn from_row_major(n_samples: usize, n_features: usize, entries: Vec<f64>) -> Result<Self> {
        check_shape(n_samples, n_features)?;
        if entries.len() != n_samples * n_features {
            return Err(Error::DimensionMismatch {
                expected: n_samples * n_features,
                found: entries.len(),
            });
        }
        if !math::all_finite(&entries) {
            return Err(Error::InvalidParameter("design entries must be finite".into()));
        }
        Ok(Self { entries, n_samples, n_features, seed: None })
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Seed the design was sampled from, if any.
    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.entries.chunks_exact(self.n_features)
    }

    /// `Xw`.
    pub fn project(&self, w: &[f64]) -> Vec<f64> {
        self.rows().map(|x| dot(x, w)).collect()
    }

    fn check_dim(&self, w: &[f64]) -> Result<()> {
        if w.len() != self.n_features {
            return Err(Error::DimensionMismatch { expected: self.n_features, found: w.len() });
        }
        Ok(())
    }
}

fn check_shape(n_samples: usize, n_features: usize) -> Result<()> {
    if n_features == 0 || n_samples <= n_features {
        return Err(Error::InvalidShape { n_samples, n_features });
    }
    Ok(())
}

/// Which part a weight vector plays.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Role {
    Student,
    Teacher,
    Optimum,
}

/// A finite `d`-vector tagged with its role. Teachers are never zero.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    values: Vec<f64>,
    role: Role,
}

impl WeightVector {
    pub fn new(values: Vec<f64>, role: Role) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("weight vector must have at least one entry".into()));
        }
        if !math::all_finite(&values) {
            return Err(Error::InvalidParameter("weight entries must be finite".into()));
        }
        if role == Role::Teacher && values.iter().all(|v| *v == 0.0) {
            return Err(Error::ZeroVector("teacher"));
        }
        Ok(Self { values, role })
    }

    pub fn student(values: Vec<f64>) -> Result<Self> {
        Self::new(values, Role::Student)
    }

    pub fn teacher(values: Vec<f64>) -> Result<Self> {
        Self::new(values, Role::Teacher)
    }

    pub fn optimum(values: Vec<f64>) -> Result<Self> {
        Self::new(values, Role::Optimum)
    }

    /// The all-ones teacher of dimension `d`, optionally scaled to unit norm.
    pub fn ones_teacher(d: usize, unit: bool) -> Result<Self> {
        let v = if unit { 1.0 / math::sqrt(d as f64) } else { 1.0 };
        Self::teacher(vec![v; d])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.values)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    /// Same values under another role.
    pub fn with_role(&self, role: Role) -> Result<Self> {
        Self::new(self.values.clone(), role)
    }

    /// `c·w`, keeping the role.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.values.iter().map(|v| v * c).collect(), self.role)
    }

    /// FNV-1a over the IEEE bit patterns; used for mask provenance.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for v in &self.values {
            for b in v.to_bits().to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        h
    }
}

impl AsRef<[f64]> for WeightVector {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

/// The diagonal of `D(w)`: `bits[i]` is set iff `(Xw)_i > 0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivationMask {
    bits: Vec<bool>,
    derived_from: (Option<u64>, u64),
}

impl ActivationMask {
    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self { bits, derived_from: (None, 0) }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Number of active rows, i.e. `rank(D)`.
    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    /// `(design seed, weight fingerprint)` the mask was computed from.
    pub fn derived_from(&self) -> (Option<u64>, u64) {
        self.derived_from
    }

    /// Equality of the bit patterns, ignoring provenance.
    pub fn same_bits(&self, other: &ActivationMask) -> bool {
        self.bits == other.bits
    }
}

/// Kind of regularization term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum RegKind {
    None,
    L1,
    L2,
}

impl RegKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RegKind::None => "none",
            RegKind::L1 => "l1",
            RegKind::L2 => "l2",
        }
    }
}

/// Sign of the regularization term inside the gradient step.
///
/// `Paper` uses `Δw = fit + (λ/2)∂R/∂w`. `Corrected`
/// uses `Δw = fit − (λ/2)∂R/∂w`, the true negative gradient of the loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Convention {
    Paper,
    #[default]
    Corrected,
}

impl Convention {
    /// `+1` for `Paper`, `-1` for `Corrected`.
    pub fn sign(self) -> f64 {
        match self {
            Convention::Paper => 1.0,
            Convention::Corrected => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Convention::Paper => "paper",
            Convention::Corrected => "corrected",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Regularizer {
    kind: RegKind,
    lambda: f64,
    convention: Convention,
}

impl Regularizer {
    pub fn new(kind: RegKind, lambda: f64, convention: Convention) -> Result<Self> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::InvalidParameter(alloc::format!(
                "lambda must be finite and nonnegative, got {lambda}"
            )));
        }
        if kind == RegKind::None && lambda != 0.0 {
            return Err(Error::InvalidParameter("kind none requires lambda = 0".into()));
        }
        Ok(Self { kind, lambda, convention })
    }

    pub fn none() -> Self {
        Self { kind: RegKind::None, lambda: 0.0, convention: Convention::Corrected }
    }

    pub fn l1(lambda: f64) -> Result<Self> {
        Self::new(RegKind::L1, lambda, Convention::Corrected)
    }

    pub fn l2(lambda: f64) -> Result<Self> {
        Self::new(RegKind::L2, lambda, Convention::Corrected)
    }

    pub fn with_convention(mut self, convention: Convention) -> Self {
        self.convention = convention;
        self
    }

    pub fn kind(&self) -> RegKind {
        self.kind
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    /// `R(w)`.
    pub fn penalty(&self, w: &[f64]) -> f64 {
        match self.kind {
            RegKind::None => 0.0,
            RegKind::L1 => {
                let s = norm1(w);
                s * s
            }
            RegKind::L2 => dot(w, w),
        }
    }

    /// `∂R/∂w`, with `sign(0) = 0` for ℓ1.
    pub fn gradient(&self, w: &[f64]) -> Vec<f64> {
        match self.kind {
            RegKind::None => vec![0.0; w.len()],
            RegKind::L1 => {
                let s = norm1(w);
                w.iter().map(|v| 2.0 * s * signum0(*v)).collect()
            }
            RegKind::L2 => w.iter().map(|v| 2.0 * v).collect(),
        }
    }

    /// Adds `s·(λ/2)·∂R/∂w` to `out`.
    pub(crate) fn add_step_term(&self, w: &[f64], out: &mut [f64]) {
        if self.kind == RegKind::None || self.lambda == 0.0 {
            return;
        }
        let c = self.convention.sign() * self.lambda / 2.0;
        for (o, g) in out.iter_mut().zip(self.gradient(w)) {
            *o += c * g;
        }
    }

    /// True when an ℓ1 step is evaluated at a point with a zero component.
    pub(crate) fn hits_subgradient(&self, w: &[f64]) -> bool {
        self.kind == RegKind::L1 && self.lambda > 0.0 && w.contains(&0.0)
    }
}

/// `α = ‖w*‖/‖w‖` and the angle `θ ∈ [0, π]` between `w` and `w*`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PolarPair {
    pub alpha: f64,
    pub theta: f64,
}

pub fn sample_design(n_samples: usize, n_features: usize, seed: u64) -> Result<Design> {
    Design::sample(n_samples, n_features, seed)
}

pub fn activation_mask(design: &Design, w: &WeightVector) -> Result<ActivationMask> {
    design.check_dim(w.values())?;
    let bits = design.rows().map(|x| dot(x, w.values()) > 0.0).collect();
    Ok(ActivationMask { bits, derived_from: (design.seed(), w.fingerprint()) })
}

/// `g(X, w) = D(w)Xw`.
pub fn forward(design: &Design, w: &WeightVector) -> Result<Vec<f64>> {
    design.check_dim(w.values())?;
    Ok(relu_outputs(design, w.values()))
}

pub(crate) fn relu_outputs(design: &Design, w: &[f64]) -> Vec<f64> {
    design.rows().map(|x| relu(dot(x, w))).collect()
}

fn relu(z: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        0.0
    }
}

pub fn loss(design: &Design, teacher: &WeightVector, w: &WeightVector, reg: &Regularizer) -> Result<f64> {
    design.check_dim(teacher.values())?;
    design.check_dim(w.values())?;
    let target = relu_outputs(design, teacher.values());
    Ok(loss_with_target(design, &target, w.values(), reg))
}

pub(crate) fn loss_with_target(design: &Design, target: &[f64], w: &[f64], reg: &Regularizer) -> f64 {
    let fit: f64 = design
        .rows()
        .zip(target)
        .map(|(x, t)| {
            let r = t - relu(dot(x, w));
            r * r
        })
        .sum();
    fit / (2.0 * design.n_samples() as f64) + reg.lambda() / 2.0 * reg.penalty(w)
}

/// The discrete step `Δw = (1/N) XᵀD(w)(D*Xw* − D(w)Xw) + s·(λ/2)∂R/∂w`,
/// `s` set by the regularizer's convention.
pub fn empirical_step(
    design: &Design,
    teacher: &WeightVector,
    w: &WeightVector,
    reg: &Regularizer,
) -> Result<Vec<f64>> {
    design.check_dim(teacher.values())?;
    design.check_dim(w.values())?;
    let target = relu_outputs(design, teacher.values());
    Ok(empirical_step_with_target(design, &target, w.values(), reg))
}

pub(crate) fn empirical_step_with_target(
    design: &Design,
    target: &[f64],
    w: &[f64],
    reg: &Regularizer,
) -> Vec<f64> {
    let mut step = vec![0.0; w.len()];
    for (x, t) in design.rows().zip(target) {
        let z = dot(x, w);
        if z > 0.0 {
            let r = t - z;
            for (s, xi) in step.iter_mut().zip(x) {
                *s += r * xi;
            }
        }
    }
    let inv_n = 1.0 / design.n_samples() as f64;
    step.iter_mut().for_each(|s| *s *= inv_n);
    reg.add_step_term(w, &mut step);
    step
}

/// Expectation of [`empirical_step`] over Gaussian designs:
///
/// ```text
/// EΔw = ½(w* − w) + (1/2π)((α sinθ) w − θ w*) + s·(λ/2)∂R/∂w
/// ```
pub fn expected_step(teacher: &WeightVector, w: &WeightVector, reg: &Regularizer) -> Result<Vec<f64>> {
    expected_step_raw(teacher.values(), w.values(), reg)
}

pub(crate) fn expected_step_raw(teacher: &[f64], w: &[f64], reg: &Regularizer) -> Result<Vec<f64>> {
    let p = polar_raw(w, teacher)?;
    let a = p.alpha * sin(p.theta) / (2.0 * PI);
    let b = p.theta / (2.0 * PI);
    let mut step: Vec<f64> = w
        .iter()
        .zip(teacher)
        .map(|(wi, ti)| 0.5 * (ti - wi) + a * wi - b * ti)
        .collect();
    reg.add_step_term(w, &mut step);
    Ok(step)
}

/// Population loss `E_x[½(g(x,w*) − g(x,w))²] + (λ/2)R(w)`.
///
/// Uses `E[g(x,u) g(x,v)] = ‖u‖‖v‖(sinθ + (π−θ)cosθ)/2π`; defined at `w = 0`.
pub fn expected_loss(teacher: &WeightVector, w: &WeightVector, reg: &Regularizer) -> Result<f64> {
    if teacher.dim() != w.dim() {
        return Err(Error::DimensionMismatch { expected: teacher.dim(), found: w.dim() });
    }
    Ok(expected_loss_raw(teacher.values(), w.values(), reg))
}

pub(crate) fn expected_loss_raw(teacher: &[f64], w: &[f64], reg: &Regularizer) -> f64 {
    let a = norm(w);
    let b = norm(teacher);
    let cross = if a == 0.0 {
        0.0
    } else {
        let theta = angle(w, teacher, a, b);
        a * b * (sin(theta) + (PI - theta) * cos(theta)) / PI
    };
    0.5 * (0.5 * (a * a + b * b) - cross) + reg.lambda() / 2.0 * reg.penalty(w)
}

pub fn polar(w: &WeightVector, teacher: &WeightVector) -> Result<PolarPair> {
    polar_raw(w.values(), teacher.values())
}

pub(crate) fn polar_raw(w: &[f64], teacher: &[f64]) -> Result<PolarPair> {
    if w.len() != teacher.len() {
        return Err(Error::DimensionMismatch { expected: teacher.len(), found: w.len() });
    }
    let a = norm(w);
    let b = norm(teacher);
    if a == 0.0 {
        return Err(Error::ZeroVector("student"));
    }
    if b == 0.0 {
        return Err(Error::ZeroVector("teacher"));
    }
    Ok(PolarPair { alpha: b / a, theta: angle(w, teacher, a, b) })
}

/// Angle between two nonzero vectors as `2·atan2(‖u−v‖, ‖u+v‖)` on the unit
/// directions; exact at the collinear and antipodal ends where the clamped
/// arccosine loses ~1e-8 rad.
fn angle(w: &[f64], teacher: &[f64], a: f64, b: f64) -> f64 {
    let (mut minus, mut plus) = (0.0, 0.0);
    for (wi, ti) in w.iter().zip(teacher) {
        let u = wi / a;
        let v = ti / b;
        minus += (u - v) * (u - v);
        plus += (u + v) * (u + v);
    }
    let theta = 2.0 * libm::atan2(math::sqrt(minus), math::sqrt(plus));
    theta.clamp(0.0, PI)
}

/// Smallest `|(Xw)_i|` relative to `‖x_i‖`; distance of `w` to the nearest
/// activation boundary in angle-free units.
pub fn kink_margin(design: &Design, w: &[f64]) -> f64 {
    design
        .rows()
        .map(|x| {
            let n = norm(x);
            if n == 0.0 {
                f64::INFINITY
            } else {
                abs(dot(x, w)) / n
            }
        })
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(v: &[f64]) -> WeightVector {
        WeightVector::teacher(v.to_vec()).unwrap()
    }

    fn s(v: &[f64]) -> WeightVector {
        WeightVector::student(v.to_vec()).unwrap()
    }

    #[test]
    fn design_is_deterministic() {
        let a = sample_design(10, 2, 7).unwrap();
        let b = sample_design(10, 2, 7).unwrap();
        assert_eq!(a.entries(), b.entries());
        assert_eq!(a.entries().len(), 20);
        assert_ne!(a.entries(), sample_design(10, 2, 8).unwrap().entries());
    }

    #[test]
    fn design_shape_is_checked() {
        assert!(matches!(sample_design(2, 2, 0), Err(Error::InvalidShape { .. })));
        assert!(matches!(sample_design(5, 0, 0), Err(Error::InvalidShape { .. })));
    }

    #[test]
    fn column_means_are_near_zero() {
        let x = sample_design(10_000, 2, 1).unwrap();
        for j in 0..2 {
            let mean: f64 = x.rows().map(|r| r[j]).sum::<f64>() / 10_000.0;
            assert!(abs(mean) < 0.05, "column {j} mean {mean}");
        }
    }

    #[test]
    fn zero_weights_give_empty_mask() {
        let x = sample_design(10, 3, 3).unwrap();
        let m = activation_mask(&x, &s(&[0.0, 0.0, 0.0])).unwrap();
        assert_eq!(m.count(), 0);
    }

    #[test]
    fn hand_forward() {
        let x = Design::from_row_major(2, 1, vec![1.0, -1.0]).unwrap();
        assert_eq!(forward(&x, &s(&[3.0])).unwrap(), vec![3.0, 0.0]);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let x = sample_design(10, 3, 3).unwrap();
        assert!(matches!(
            forward(&x, &s(&[1.0, 2.0])),
            Err(Error::DimensionMismatch { expected: 3, found: 2 })
        ));
    }

    #[test]
    fn loss_examples() {
        let x = sample_design(20, 2, 11).unwrap();
        let w_star = t(&[1.0, 1.0]);
        let at_teacher = w_star.with_role(Role::Student).unwrap();
        assert_eq!(loss(&x, &w_star, &at_teacher, &Regularizer::none()).unwrap(), 0.0);
        let l2 = Regularizer::l2(0.01).unwrap();
        let v = loss(&x, &w_star, &at_teacher, &l2).unwrap();
        assert!(abs(v - 0.005 * 2.0) < 1e-15);

        let w = s(&[1.0, -1.0]);
        let fit = loss(&x, &w_star, &w, &Regularizer::none()).unwrap();
        let l1 = Regularizer::l1(2.0).unwrap();
        let with_pen = loss(&x, &w_star, &w, &l1).unwrap();
        assert!(abs(with_pen - (fit + 4.0)) < 1e-12);
    }

    #[test]
    fn step_vanishes_at_teacher() {
        let x = sample_design(30, 3, 5).unwrap();
        let w_star = t(&[0.3, -1.0, 0.7]);
        let w = w_star.with_role(Role::Student).unwrap();
        let step = empirical_step(&x, &w_star, &w, &Regularizer::none()).unwrap();
        assert!(step.iter().all(|v| *v == 0.0));
        let e = expected_step(&w_star, &w, &Regularizer::none()).unwrap();
        assert!(e.iter().all(|v| abs(*v) < 1e-15));
    }

    #[test]
    fn conventions_differ_by_lambda_gradient() {
        let x = sample_design(25, 3, 9).unwrap();
        let w_star = t(&[1.0, 0.5, -0.2]);
        let w = s(&[0.4, -0.3, 0.9]);
        for reg in [Regularizer::l1(0.07).unwrap(), Regularizer::l2(0.07).unwrap()] {
            let paper = empirical_step(&x, &w_star, &w, &reg.with_convention(Convention::Paper)).unwrap();
            let fixed = empirical_step(&x, &w_star, &w, &reg).unwrap();
            let g = reg.gradient(w.values());
            for j in 0..3 {
                assert!(abs(paper[j] - fixed[j] - 0.07 * g[j]) < 1e-14);
            }
        }
    }

    #[test]
    fn expected_step_at_right_angle() {
        let w_star = t(&[1.0, 0.0]);
        let w = s(&[0.0, 1.0]);
        let e = expected_step(&w_star, &w, &Regularizer::none()).unwrap();
        let c = 1.0 / (2.0 * PI) - 0.5;
        assert!(abs(e[0] - 0.25) < 1e-15);
        assert!(abs(e[1] - c) < 1e-15);
    }

    #[test]
    fn expected_step_rejects_origin() {
        let w_star = t(&[1.0, 1.0]);
        assert!(matches!(
            expected_step(&w_star, &s(&[0.0, 0.0]), &Regularizer::none()),
            Err(Error::ZeroVector(_))
        ));
    }

    #[test]
    fn polar_examples() {
        let w_star = t(&[1.0, 1.0]);
        let p = polar(&s(&[2.0, 2.0]), &w_star).unwrap();
        assert_eq!(p.alpha, 0.5);
        assert_eq!(p.theta, 0.0);
        let p = polar(&s(&[1.0, -1.0]), &w_star).unwrap();
        assert!(abs(p.alpha - 1.0) < 1e-15);
        assert!(abs(p.theta - PI / 2.0) < 1e-15);
        let p = polar(&s(&[-1.0, -1.0]), &w_star).unwrap();
        assert_eq!(p.theta, PI);
        assert!(polar(&s(&[0.0, 0.0]), &w_star).is_err());
    }

    #[test]
    fn regularizer_validation() {
        assert!(Regularizer::l2(-1.0).is_err());
        assert!(Regularizer::l1(f64::NAN).is_err());
        assert!(Regularizer::new(RegKind::None, 0.1, Convention::Paper).is_err());
        assert!(WeightVector::teacher(vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn l1_subgradient_at_zero() {
        let reg = Regularizer::l1(0.5).unwrap();
        assert_eq!(reg.gradient(&[0.0, 2.0, -1.0]), vec![0.0, 6.0, -6.0]);
        assert!(reg.hits_subgradient(&[0.0, 1.0]));
        assert!(!Regularizer::l2(0.5).unwrap().hits_subgradient(&[0.0, 1.0]));
    }

    #[test]
    fn expected_loss_at_teacher_is_penalty_only() {
        let w_star = t(&[0.6, -0.8]);
        let w = w_star.with_role(Role::Student).unwrap();
        let v = expected_loss(&w_star, &w, &Regularizer::none()).unwrap();
        assert!(abs(v) < 1e-15);
        let at_zero = expected_loss(&w_star, &s(&[0.0, 0.0]), &Regularizer::none()).unwrap();
        assert!(abs(at_zero - 0.25) < 1e-15);
    }
}
