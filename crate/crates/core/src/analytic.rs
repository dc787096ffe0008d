//! Closed-form and Newton solvers for the regularized optimum `ŵ`, λ
//! admissibility bounds, rank-tail probabilities and Lyapunov quantities.
//!
//! Everything here conditions on the teacher mask `D* = D(w*)` having more
//! than `d` active rows. When it does not, the gram `XᵀD*X` is singular and
//! the solvers return [`Error::RankDeficient`]; that event has probability
//! `A_d` (see [`rank_tail_probability`]).
//!
//! Higher-order remainders (`o(λ)`, `o(ε)`, `o(1)`) are dropped wherever a
//! first-order expansion is evaluated. Reports that rely on such an
//! expansion carry `drops_higher_order = true`.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::linalg::{Cholesky, Lu, Matrix};
use crate::math::{abs, cos, dot, ln, norm, norm1, signum0, sin};
use crate::model::{
    self, activation_mask, ActivationMask, Convention, Design, RegKind, Regularizer, Role, WeightVector,
};
use crate::{Error, Result};

/// Outcome of solving the stationarity equation for `ŵ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport {
    pub optimum: WeightVector,
    /// `N·‖∂E/∂w(ŵ)‖` with the mask `D(ŵ)` recomputed at `ŵ`.
    pub residual: f64,
    /// Norm of the linearized equation, which assumes `D(ŵ) = D*`.
    pub linearized_residual: f64,
    /// Whether `D(ŵ) = D*`, recomputed from the returned `ŵ`.
    pub mask_consistent: bool,
    pub iterations: usize,
    pub lambda_used: f64,
    pub kind: RegKind,
    pub convention: Convention,
}

/// λ thresholds below which the theory keeps `D(ŵ) = D*`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    /// The ℓ2 bound, or the ℓ1 bound built from the estimated `u`.
    pub bound_primary: f64,
    /// The ℓ1 bound that only uses known quantities.
    pub bound_explicit: Option<f64>,
    /// First-order shift `u` with `ŵ ≈ w* + λu` (ℓ1 only).
    pub u_estimate: Option<Vec<f64>>,
    pub drops_higher_order: bool,
}

/// A symmetric 2×2 matrix.
pub type Mat2 = [[f64; 2]; 2];

/// Lyapunov quantities at one point `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovEval {
    pub m_matrix: Mat2,
    /// ℓ2 first-order term, signed for the regularizer's convention.
    /// `None` for other kinds.
    pub p1_matrix: Option<Mat2>,
    pub vdot: f64,
    pub theta: f64,
    /// `(‖w‖, ‖w*‖)`.
    pub y: (f64, f64),
}

/// `XᵀDX` for a mask `D`, with a positive-definiteness flag.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedGram {
    pub matrix: Matrix,
    pub positive_definite: bool,
    pub active_rows: usize,
}

/// `A_k = Prob{rank(D*) ≤ k} = 2^{-N} Σ_{i≤k} C(N, i)`.
///
/// Exact integer arithmetic for `N ≤ 64`, log-sum-exp beyond.
pub fn rank_tail_probability(n_samples: usize, k: usize) -> Result<f64> {
    if k > n_samples {
        return Err(Error::InvalidParameter(alloc::format!(
            "k ({k}) must not exceed n_samples ({n_samples})"
        )));
    }
    if k == n_samples {
        return Ok(1.0);
    }
    if n_samples <= 64 {
        let n = n_samples as u128;
        let mut c: u128 = 1;
        let mut sum: u128 = 0;
        for i in 0..=k as u128 {
            sum += c;
            c = c * (n - i) / (i + 1);
        }
        return Ok(sum as f64 / (1u128 << n_samples) as f64);
    }
    let mut log_c = 0.0;
    let mut terms = Vec::with_capacity(k + 1);
    for i in 0..=k {
        terms.push(log_c);
        log_c += ln((n_samples - i) as f64 / (i + 1) as f64);
    }
    let top = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = terms.iter().map(|t| libm::exp(t - top)).sum();
    let log_p = top + ln(sum) - n_samples as f64 * core::f64::consts::LN_2;
    Ok(libm::exp(log_p).min(1.0))
}

/// Lower bound on the convergence probability from a small initial ball:
/// `(1−ε)/2 · (1 − A_d)`.
pub fn theoretical_probability(n_samples: usize, n_features: usize, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter(alloc::format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    if n_features > n_samples {
        return Err(Error::InvalidParameter(alloc::format!(
            "n_features ({n_features}) must not exceed n_samples ({n_samples})"
        )));
    }
    Ok((1.0 - epsilon) / 2.0 * (1.0 - rank_tail_probability(n_samples, n_features)?))
}

/// `XᵀDX` plus a Cholesky-based definiteness flag. The flag is set iff the
/// mask has at least `d` active rows and every pivot exceeds
/// `1e-12·trace/d`.
pub fn masked_gram(design: &Design, mask: &ActivationMask) -> Result<MaskedGram> {
    if mask.len() != design.n_samples() {
        return Err(Error::DimensionMismatch { expected: design.n_samples(), found: mask.len() });
    }
    let d = design.n_features();
    let mut g = Matrix::zeros(d, d);
    for (x, _) in design.rows().zip(mask.bits()).filter(|(_, b)| **b) {
        for i in 0..d {
            for j in 0..=i {
                g[(i, j)] += x[i] * x[j];
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            g[(j, i)] = g[(i, j)];
        }
    }
    let floor = 1e-12 * g.trace() / d as f64;
    let positive_definite = mask.count() >= d && Cholesky::factor(&g, floor).is_some();
    Ok(MaskedGram { matrix: g, positive_definite, active_rows: mask.count() })
}

/// Max-norm of `(B − εI)⁻¹ − (I + εB⁻¹)B⁻¹`, the second-order remainder of
/// the first-order perturbed inverse.
pub fn neumann_residual(b_matrix: &Matrix, epsilon: f64) -> Result<f64> {
    if !epsilon.is_finite() || epsilon < 0.0 {
        return Err(Error::InvalidParameter(alloc::format!("epsilon must be finite and >= 0, got {epsilon}")));
    }
    let b = Cholesky::factor(b_matrix, 0.0).ok_or(Error::NotPositiveDefinite)?;
    let shifted = Cholesky::factor(&b_matrix.shifted(-epsilon), 0.0).ok_or(Error::NotPositiveDefinite)?;
    let inv_b = b.inverse();
    let approx = {
        let sq = inv_b.mul(&inv_b).scaled(epsilon);
        let mut out = inv_b.clone();
        for i in 0..out.rows() {
            for j in 0..out.cols() {
                out[(i, j)] += sq[(i, j)];
            }
        }
        out
    };
    Ok(shifted.inverse().sub(&approx).max_abs())
}

/// Teacher mask and its gram, failing on the rank-deficient event.
fn teacher_system(design: &Design, teacher: &WeightVector) -> Result<(ActivationMask, MaskedGram)> {
    let mask = activation_mask(design, teacher)?;
    let gram = masked_gram(design, &mask)?;
    if !gram.positive_definite {
        return Err(Error::RankDeficient { active: gram.active_rows, n_features: design.n_features() });
    }
    Ok((mask, gram))
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::InvalidParameter(alloc::format!(
            "lambda must be finite and nonnegative, got {lambda}"
        )));
    }
    Ok(())
}

/// `N·‖Δw(ŵ)‖`: the full stationarity equation with `D(ŵ)` recomputed.
pub fn stationarity_residual(
    design: &Design,
    teacher: &WeightVector,
    optimum: &WeightVector,
    reg: &Regularizer,
) -> Result<f64> {
    let step = model::empirical_step(design, teacher, optimum, reg)?;
    Ok(design.n_samples() as f64 * norm(&step))
}

fn finish_report(
    design: &Design,
    teacher: &WeightVector,
    teacher_mask: &ActivationMask,
    values: Vec<f64>,
    linearized_residual: f64,
    iterations: usize,
    reg: Regularizer,
) -> Result<SolverReport> {
    let optimum = WeightVector::optimum(values).map_err(|_| Error::Singular)?;
    let residual = stationarity_residual(design, teacher, &optimum, &reg)?;
    let mask_consistent = activation_mask(design, &optimum)?.same_bits(teacher_mask);
    Ok(SolverReport {
        optimum,
        residual,
        linearized_residual,
        mask_consistent,
        iterations,
        lambda_used: reg.lambda(),
        kind: reg.kind(),
        convention: reg.convention(),
    })
}

/// ℓ2 optimum assuming `D(ŵ) = D*`.
///
/// `Paper`: `ŵ = (XᵀD*X − λN I)⁻¹ XᵀD*X w*`.
/// `Corrected`: `ŵ = (XᵀD*X + λN I)⁻¹ XᵀD*X w*`.
pub fn solve_optimum_l2(
    design: &Design,
    teacher: &WeightVector,
    lambda: f64,
    convention: Convention,
) -> Result<SolverReport> {
    check_lambda(lambda)?;
    let (mask, gram) = teacher_system(design, teacher)?;
    let n = design.n_samples() as f64;
    let g = &gram.matrix;
    let rhs = g.mul_vec(teacher.values());
    let system = g.shifted(-convention.sign() * lambda * n);
    let w_hat = if lambda == 0.0 {
        teacher.values().to_vec()
    } else {
        Lu::factor(&system).ok_or(Error::Singular)?.solve(&rhs)
    };
    let lin = system.mul_vec(&w_hat);
    let linearized = norm(&lin.iter().zip(&rhs).map(|(a, b)| a - b).collect::<Vec<_>>());
    let reg = Regularizer::new(RegKind::L2, lambda, convention)?;
    finish_report(design, teacher, &mask, w_hat, linearized, 1, reg)
}

/// ℓ2 admissibility bound
/// `λ ≤ 1/(2N) · min_i |(Xw*)_i| / |(X(XᵀD*X)⁻¹w*)_i|`.
pub fn lambda_bound_l2(design: &Design, teacher: &WeightVector) -> Result<BoundReport> {
    let (_, gram) = teacher_system(design, teacher)?;
    let chol = Cholesky::factor(&gram.matrix, 0.0).ok_or(Error::Singular)?;
    let margins = design.project(teacher.values());
    if let Some(row) = margins.iter().position(|z| abs(*z) <= 1e-12) {
        return Err(Error::ZeroMargin { row });
    }
    let shift = design.project(&chol.solve(teacher.values()));
    let ratio = margins
        .iter()
        .zip(&shift)
        .filter(|(_, v)| **v != 0.0)
        .map(|(z, v)| abs(*z) / abs(*v))
        .fold(f64::INFINITY, f64::min);
    Ok(BoundReport {
        bound_primary: ratio / (2.0 * design.n_samples() as f64),
        bound_explicit: None,
        u_estimate: None,
        drops_higher_order: true,
    })
}

const NEWTON_MAX_ITER: usize = 50;
const NEWTON_REL_TOL: f64 = 1e-10;

/// ℓ1 optimum assuming `D(ŵ) = D*`, by Newton's method on
///
/// ```text
/// f(ŵ) = XᵀD*X w* − XᵀD*X ŵ + s·λN‖ŵ‖₁ sign(ŵ) = 0
/// J(i,j) = −(XᵀD*X)_ij + s·λN sign(ŵ_i) sign(ŵ_j)
/// ```
///
/// started at `w*`. Stops when `‖f‖ ≤ 1e-10·‖XᵀD*Xw*‖` or after 50
/// iterations. A sign change of `ŵ` is an error.
pub fn solve_optimum_l1(
    design: &Design,
    teacher: &WeightVector,
    lambda: f64,
    convention: Convention,
) -> Result<SolverReport> {
    check_lambda(lambda)?;
    let (mask, gram) = teacher_system(design, teacher)?;
    let g = &gram.matrix;
    let d = design.n_features();
    let c = convention.sign() * lambda * design.n_samples() as f64;
    let rhs = g.mul_vec(teacher.values());
    let tol = NEWTON_REL_TOL * norm(&rhs);
    let pattern: Vec<f64> = teacher.values().iter().map(|v| signum0(*v)).collect();

    let residual_at = |w: &[f64]| -> Vec<f64> {
        let gw = g.mul_vec(w);
        let l1 = norm1(w);
        (0..d).map(|i| rhs[i] - gw[i] + c * l1 * signum0(w[i])).collect()
    };

    let mut w_hat = teacher.values().to_vec();
    for iteration in 1..=NEWTON_MAX_ITER {
        let f = residual_at(&w_hat);
        let f_norm = norm(&f);
        if f_norm <= tol {
            let reg = Regularizer::new(RegKind::L1, lambda, convention)?;
            return finish_report(design, teacher, &mask, w_hat, f_norm, iteration, reg);
        }
        let mut jac = g.scaled(-1.0);
        for i in 0..d {
            for j in 0..d {
                jac[(i, j)] += c * pattern[i] * pattern[j];
            }
        }
        let delta = Lu::factor(&jac).ok_or(Error::Singular)?.solve(&f);
        for (w, dlt) in w_hat.iter_mut().zip(&delta) {
            *w -= dlt;
        }
        if w_hat.iter().zip(&pattern).any(|(w, p)| signum0(*w) != *p) {
            return Err(Error::SignPatternChanged { iteration });
        }
    }
    Err(Error::NotConverged { iterations: NEWTON_MAX_ITER, residual: norm(&residual_at(&w_hat)) })
}

/// ℓ1 admissibility bounds.
///
/// With `X_δ` the rows where the teacher mask is active (original order),
/// `u = N‖ŵ‖₁ (X_δᵀX_δ)⁻¹ sign(ŵ)` and
///
/// ```text
/// primary:  λ ≤ ½ min_{(Xw*)_i>0} (Xw*)_i / |(Xu)_i|
/// explicit: λ ≤ min_{(Xw*)_i>0} (Xw*)_i / (4N‖w*‖₁ ‖X(X_δᵀX_δ)⁻¹‖_∞)
/// ```
///
/// where `‖·‖_∞` is the maximum absolute row sum.
pub fn lambda_bound_l1(design: &Design, teacher: &WeightVector, optimum: &SolverReport) -> Result<BoundReport> {
    let mask = activation_mask(design, teacher)?;
    let delta = mask.count();
    let d = design.n_features();
    if delta <= d {
        return Err(Error::RankDeficient { active: delta, n_features: d });
    }
    let gram = masked_gram(design, &mask)?;
    let chol = Cholesky::factor(&gram.matrix, 0.0).ok_or(Error::Singular)?;
    let n = design.n_samples() as f64;
    let w_hat = optimum.optimum.values();
    let signs: Vec<f64> = w_hat.iter().map(|v| signum0(*v)).collect();
    let scale = n * norm1(w_hat);
    let u: Vec<f64> = chol.solve(&signs).into_iter().map(|v| v * scale).collect();

    let margins = design.project(teacher.values());
    let xu = design.project(&u);
    let primary = margins
        .iter()
        .zip(&xu)
        .filter(|(z, v)| **z > 0.0 && **v != 0.0)
        .map(|(z, v)| z / abs(*v))
        .fold(f64::INFINITY, f64::min)
        / 2.0;

    let inv = chol.inverse();
    let mut x_inv = Matrix::zeros(design.n_samples(), d);
    for (i, x) in design.rows().enumerate() {
        for j in 0..d {
            x_inv[(i, j)] = (0..d).map(|k| x[k] * inv[(k, j)]).sum();
        }
    }
    let min_margin = margins.iter().cloned().filter(|z| *z > 0.0).fold(f64::INFINITY, f64::min);
    let explicit = min_margin / (4.0 * n * norm1(teacher.values()) * x_inv.inf_norm());

    Ok(BoundReport {
        bound_primary: primary,
        bound_explicit: Some(explicit),
        u_estimate: Some(u),
        drops_higher_order: true,
    })
}

/// `M(θ)` and `P1(θ)` for `θ ∈ (0, π]`:
///
/// ```text
/// M  = 1/4π [[2π, −(2π−θ)cosθ − sinθ], [·, sin2θ + 2π − 2θ]]
/// P1 = −[[1, −cosθ/2], [−cosθ/2, 0]]
/// ```
///
/// `P1` is the ℓ2 contribution under `Paper`.
pub fn lyapunov_matrices(theta: f64) -> Result<(Mat2, Mat2)> {
    if !(theta > 0.0 && theta <= PI) {
        return Err(Error::InvalidParameter(alloc::format!("theta must lie in (0, π], got {theta}")));
    }
    let (s, c) = (sin(theta), cos(theta));
    let off = -(2.0 * PI - theta) * c - s;
    let k = 1.0 / (4.0 * PI);
    let m = [[k * 2.0 * PI, k * off], [k * off, k * (sin(2.0 * theta) + 2.0 * PI - 2.0 * theta)]];
    let p1 = [[-1.0, c / 2.0], [c / 2.0, 0.0]];
    Ok((m, p1))
}

/// Positive definiteness of a symmetric 2×2 matrix.
pub fn is_positive_definite2(m: &Mat2) -> bool {
    m[0][0] > 0.0 && m[0][0] * m[1][1] - m[0][1] * m[1][0] > 0.0
}

/// `yᵀAy` for `y = (y0, y1)`.
pub fn quadratic_form2(m: &Mat2, y: (f64, f64)) -> f64 {
    m[0][0] * y.0 * y.0 + (m[0][1] + m[1][0]) * y.0 * y.1 + m[1][1] * y.1 * y.1
}

/// `V̇ = (w − ŵ)ᵀ EΔw(w)` for `V(w) = ½‖w − ŵ‖²`.
pub fn vdot(w: &WeightVector, optimum: &WeightVector, teacher: &WeightVector, reg: &Regularizer) -> Result<f64> {
    vdot_raw(w.values(), optimum.values(), teacher.values(), reg)
}

pub(crate) fn vdot_raw(w: &[f64], optimum: &[f64], teacher: &[f64], reg: &Regularizer) -> Result<f64> {
    if optimum.len() != w.len() {
        return Err(Error::DimensionMismatch { expected: w.len(), found: optimum.len() });
    }
    let step = model::expected_step_raw(teacher, w, reg)?;
    let diff: Vec<f64> = w.iter().zip(optimum).map(|(a, b)| a - b).collect();
    Ok(dot(&diff, &step))
}

/// [`vdot`] together with `M(θ)`, the signed `P1(θ)` and `y` at `w`.
pub fn lyapunov_eval(
    w: &WeightVector,
    optimum: &WeightVector,
    teacher: &WeightVector,
    reg: &Regularizer,
) -> Result<LyapunovEval> {
    let theta = model::polar(w, teacher)?.theta;
    let (m, p1) = lyapunov_matrices(theta)?;
    let p1_matrix = (reg.kind() == RegKind::L2).then(|| {
        let s = reg.convention().sign();
        [[s * p1[0][0], s * p1[0][1]], [s * p1[1][0], s * p1[1][1]]]
    });
    Ok(LyapunovEval {
        m_matrix: m,
        p1_matrix,
        vdot: vdot(w, optimum, teacher, reg)?,
        theta,
        y: (w.norm(), teacher.norm()),
    })
}

/// Fixed point of the population dynamics, `EΔw(ŵ) = 0`.
///
/// ℓ2 has the closed form `ŵ = w*/(1 − 2sλ)`. ℓ1 is solved by the
/// damped iteration `w ← w + EΔw(w)` from `w*`, a contraction with rate
/// about ½ near `w*` for small λ.
pub fn expected_optimum(teacher: &WeightVector, reg: &Regularizer) -> Result<WeightVector> {
    let w_star = teacher.values();
    if reg.kind() == RegKind::None || reg.lambda() == 0.0 {
        return teacher.with_role(Role::Optimum);
    }
    if reg.kind() == RegKind::L2 {
        let denom = 1.0 - 2.0 * reg.convention().sign() * reg.lambda();
        if !(denom > 0.0) {
            return Err(Error::InvalidParameter("population dynamics has no fixed point for this lambda".into()));
        }
        return WeightVector::optimum(w_star.iter().map(|v| v / denom).collect());
    }
    let tol = 1e-13 * teacher.norm();
    let mut w = w_star.to_vec();
    const MAX_ITER: usize = 10_000;
    for _ in 0..MAX_ITER {
        let f = model::expected_step_raw(w_star, &w, reg)?;
        if norm(&f) <= tol {
            return WeightVector::optimum(w);
        }
        for (wi, fi) in w.iter_mut().zip(&f) {
            *wi += fi;
        }
    }
    let residual = norm(&model::expected_step_raw(w_star, &w, reg)?);
    Err(Error::NotConverged { iterations: MAX_ITER, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::sample_design;
    use alloc::vec;

    #[test]
    fn rank_tail_small_cases() {
        assert_eq!(rank_tail_probability(10, 0).unwrap(), 1.0 / 1024.0);
        assert_eq!(rank_tail_probability(10, 2).unwrap(), 56.0 / 1024.0);
        assert_eq!(rank_tail_probability(10, 5).unwrap(), 638.0 / 1024.0);
        assert_eq!(rank_tail_probability(10, 10).unwrap(), 1.0);
        assert_eq!(rank_tail_probability(200, 200).unwrap(), 1.0);
        assert!(rank_tail_probability(10, 11).is_err());
    }

    #[test]
    fn rank_tail_log_domain_matches_exact_at_boundary() {
        // N = 64 takes the exact path; N = 65 the log path. Pascal's rule
        // links them: A_k(65) = (A_k(64) + A_{k-1}(64)) / 2.
        for k in 1..20 {
            let lhs = rank_tail_probability(65, k).unwrap();
            let rhs = 0.5 * (rank_tail_probability(64, k).unwrap() + rank_tail_probability(64, k - 1).unwrap());
            assert!(abs(lhs - rhs) <= 1e-12 * rhs, "k={k}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn theoretical_probability_validates() {
        assert!(theoretical_probability(10, 2, 0.0).is_err());
        assert!(theoretical_probability(10, 2, 1.0).is_err());
        assert!(theoretical_probability(2, 3, 0.1).is_err());
    }

    #[test]
    fn empty_mask_gram() {
        let x = sample_design(10, 3, 1).unwrap();
        let g = masked_gram(&x, &ActivationMask::from_bits(vec![false; 10])).unwrap();
        assert_eq!(g.matrix.max_abs(), 0.0);
        assert!(!g.positive_definite);
    }

    #[test]
    fn neumann_scalar_case() {
        let r = neumann_residual(&Matrix::identity(1), 0.01).unwrap();
        let expected = 0.01 * 0.01 / 0.99;
        assert!(abs(r - expected) < 1e-15, "{r} vs {expected}");
        assert_eq!(neumann_residual(&Matrix::identity(3), 0.0).unwrap(), 0.0);
        assert!(matches!(neumann_residual(&Matrix::identity(2), 1.5), Err(Error::NotPositiveDefinite)));
        assert!(neumann_residual(&Matrix::identity(2), -0.1).is_err());
    }

    #[test]
    fn l2_at_zero_lambda_returns_teacher() {
        let x = sample_design(20, 3, 4).unwrap();
        let w_star = WeightVector::teacher(vec![1.0, -0.5, 0.25]).unwrap();
        let rep = solve_optimum_l2(&x, &w_star, 0.0, Convention::Corrected).unwrap();
        for (a, b) in rep.optimum.values().iter().zip(w_star.values()) {
            assert!(abs(a - b) < 1e-12);
        }
        assert!(rep.mask_consistent);
        assert!(rep.residual < 1e-10);
        assert_eq!(rep.optimum.role(), Role::Optimum);
    }

    #[test]
    fn scalar_closed_forms() {
        let x = Design::from_row_major(4, 1, vec![1.5, -0.5, 0.7, -2.0]).unwrap();
        let w_star = WeightVector::teacher(vec![2.0]).unwrap();
        let s = 1.5f64 * 1.5 + 0.7 * 0.7;
        let (lambda, n) = (0.01, 4.0);
        let rep = solve_optimum_l2(&x, &w_star, lambda, Convention::Corrected).unwrap();
        assert!(abs(rep.optimum.values()[0] - s / (s + lambda * n) * 2.0) < 1e-14);
        let rep = solve_optimum_l1(&x, &w_star, lambda, Convention::Paper).unwrap();
        assert!(abs(rep.optimum.values()[0] - s * 2.0 / (s - lambda * n)) < 1e-12);
        let b = lambda_bound_l2(&x, &w_star).unwrap();
        assert!(abs(b.bound_primary - s / (2.0 * n)) < 1e-14);
    }

    #[test]
    fn l1_zero_lambda_is_one_iteration() {
        let x = sample_design(20, 3, 12).unwrap();
        let w_star = WeightVector::ones_teacher(3, true).unwrap();
        let rep = solve_optimum_l1(&x, &w_star, 0.0, Convention::Corrected).unwrap();
        assert_eq!(rep.iterations, 1);
        assert_eq!(rep.optimum.values(), w_star.values());
    }

    #[test]
    fn rank_deficient_is_typed() {
        // Every row has a negative teacher margin.
        let x = Design::from_row_major(3, 1, vec![-1.0, -2.0, -0.5]).unwrap();
        let w_star = WeightVector::teacher(vec![1.0]).unwrap();
        assert!(matches!(
            solve_optimum_l2(&x, &w_star, 0.01, Convention::Corrected),
            Err(Error::RankDeficient { active: 0, n_features: 1 })
        ));
        assert!(matches!(lambda_bound_l2(&x, &w_star), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn lyapunov_matrices_at_right_angle() {
        let (m, p1) = lyapunov_matrices(PI / 2.0).unwrap();
        let k = 1.0 / (4.0 * PI);
        assert!(abs(m[0][0] - 0.5) < 1e-15);
        assert!(abs(m[0][1] + k) < 1e-15);
        assert!(abs(m[1][1] - 0.25) < 1e-15);
        assert_eq!(p1[0][0], -1.0);
        assert!(abs(p1[0][1]) < 1e-16 && p1[1][1] == 0.0);
        assert!(lyapunov_matrices(0.0).is_err());
        assert!(lyapunov_matrices(3.5).is_err());
    }

    #[test]
    fn lyapunov_matrices_near_zero_angle() {
        let (m, _) = lyapunov_matrices(1e-6).unwrap();
        for (a, b) in [(m[0][0], 0.5), (m[0][1], -0.5), (m[1][1], 0.5)] {
            assert!(abs(a - b) < 1e-5);
        }
        let det = m[0][0] * m[1][1] - m[0][1] * m[0][1];
        assert!(det > 0.0 && det < 1e-10);
    }

    #[test]
    fn vdot_vanishes_at_optimum() {
        let w_star = WeightVector::teacher(vec![1.0, 1.0]).unwrap();
        let reg = Regularizer::l2(0.01).unwrap();
        let opt = expected_optimum(&w_star, &reg).unwrap();
        let w = opt.with_role(Role::Student).unwrap();
        assert_eq!(vdot(&w, &opt, &w_star, &reg).unwrap(), 0.0);
    }

    #[test]
    fn expected_optimum_is_stationary() {
        let w_star = WeightVector::teacher(vec![0.8, -0.3, 0.5]).unwrap();
        for reg in [
            Regularizer::l1(0.01).unwrap(),
            Regularizer::l2(0.01).unwrap(),
            Regularizer::l1(0.01).unwrap().with_convention(Convention::Paper),
            Regularizer::l2(0.01).unwrap().with_convention(Convention::Paper),
        ] {
            let opt = expected_optimum(&w_star, &reg).unwrap();
            let f = model::expected_step_raw(w_star.values(), opt.values(), &reg).unwrap();
            assert!(norm(&f) < 1e-12, "{reg:?}: {}", norm(&f));
        }
    }
}
