//! Optimal step lengths for moving weight between two design points.
//!
//! For a pair `(u, v)` the exchange `w + alpha (e_v - e_u)` is feasible for
//! `alpha` in `[-w_v, w_u]`. D- and A-optimal steps have closed forms in the
//! cross terms of the pair; [`numeric_step`] handles any concave objective.

use crate::criteria::Criterion;
use crate::design::{CrossTerms, Design, DesignSpace, SolverState};
use crate::error::{Error, Result};

/// Pairs with `d_u d_v - d_uv^2` below this fraction of `d_u d_v` are treated
/// as linearly dependent.
pub const DEPENDENCE_TOL: f64 = 1e-12;
/// Relative tolerance on `AD + BC = 0`.
pub const G_ZERO_TOL: f64 = 1e-12;
/// Relative tolerance on `A = 0`.
pub const A_ZERO_TOL: f64 = 1e-14;
/// Largest relative violation of the discriminant lemma attributed to rounding.
pub const DISCRIMINANT_TOL: f64 = 1e-9;

const GOLDEN_WIDTH: f64 = 1e-12;
const GOLDEN_SNAP: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StepBranch {
    /// Both weights are zero, or `u == v`.
    Degenerate,
    DIndependent,
    DDependent,
    /// Stationary point `-A / 2B` when `AD + BC = 0`.
    AStationaryG0,
    /// Stationary point of the quadratic numerator when `AD + BC != 0`.
    AStationary,
    /// No interior stationary point; the end selected by the sign of `A`.
    ABoundary,
    /// No interior stationary point and `A = 0`.
    AFlat,
    Numeric,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult {
    pub alpha: f64,
    /// The step lands exactly on an end of `[-w_v, w_u]`.
    pub nullifying: bool,
    pub branch: StepBranch,
}

impl StepResult {
    fn new(alpha: f64, wu: f64, wv: f64, branch: StepBranch) -> Self {
        Self {
            alpha,
            nullifying: alpha == wu || alpha == -wv,
            branch,
        }
    }

    fn degenerate() -> Self {
        Self {
            alpha: 0.0,
            nullifying: true,
            branch: StepBranch::Degenerate,
        }
    }
}

/// Constants of the A-optimal exchange:
/// `-tr M_alpha^-1 = -tr V + (alpha A + alpha^2 B) / (1 + alpha C - alpha^2 D)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AStepConstants {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub g: f64,
    b_scale: f64,
    g_scale: f64,
}

impl AStepConstants {
    pub fn new(ct: &CrossTerms) -> Self {
        let a = ct.a_v - ct.a_u;
        let b = 2.0 * ct.d_uv * ct.a_uv - ct.d_u * ct.a_v - ct.d_v * ct.a_u;
        let c = ct.d_v - ct.d_u;
        let d = ct.d_u * ct.d_v - ct.d_uv * ct.d_uv;
        // Magnitudes before cancellation; G, B and D can all be pure
        // rounding noise (e.g. every pair is dependent when m = 1).
        let a_scale = ct.a_u + ct.a_v;
        let b_scale = (2.0 * ct.d_uv * ct.a_uv).abs() + ct.d_u * ct.a_v + ct.d_v * ct.a_u;
        Self {
            a,
            b,
            c,
            d,
            g: a * d + b * c,
            b_scale,
            g_scale: a_scale * (ct.d_u * ct.d_v + ct.d_uv * ct.d_uv) + b_scale * (ct.d_u + ct.d_v),
        }
    }

    /// `B^2 - A (AD + BC)`, non-negative up to rounding.
    pub fn discriminant(&self) -> f64 {
        self.b * self.b - self.a * self.g
    }

    /// Magnitude against which the discriminant's rounding error is measured.
    pub fn discriminant_scale(&self) -> f64 {
        self.b_scale * self.b_scale + self.a.abs() * self.g_scale
    }

    /// Numerator of `dh/dalpha`: `A + 2 alpha B + alpha^2 G`.
    pub fn derivative_numerator(&self, alpha: f64) -> f64 {
        self.a + 2.0 * alpha * self.b + alpha * alpha * self.g
    }

    /// `h(alpha) + tr V`, or `-inf` outside the positive definite range.
    pub fn objective(&self, alpha: f64) -> f64 {
        let denom = 1.0 + alpha * self.c - alpha * alpha * self.d;
        if denom > 0.0 {
            (alpha * self.a + alpha * alpha * self.b) / denom
        } else {
            f64::NEG_INFINITY
        }
    }
}

/// D-optimal step from precomputed cross terms.
pub fn d_step_from(ct: &CrossTerms, wu: f64, wv: f64) -> StepResult {
    if wu == 0.0 && wv == 0.0 {
        return StepResult::degenerate();
    }
    let dd = ct.d_u * ct.d_v - ct.d_uv * ct.d_uv;
    if dd <= DEPENDENCE_TOL * ct.d_u * ct.d_v {
        let alpha = if ct.d_u < ct.d_v {
            wu
        } else if ct.d_u > ct.d_v {
            -wv
        } else {
            0.0
        };
        return StepResult::new(alpha, wu, wv, StepBranch::DDependent);
    }
    let raw = (ct.d_v - ct.d_u) / (2.0 * dd);
    StepResult::new(wu.min((-wv).max(raw)), wu, wv, StepBranch::DIndependent)
}

pub fn d_step(
    state: &SolverState,
    space: &DesignSpace,
    design: &Design,
    u: usize,
    v: usize,
) -> StepResult {
    let (wu, wv) = (design.weight(u), design.weight(v));
    if (wu == 0.0 && wv == 0.0) || u == v {
        return StepResult::degenerate();
    }
    d_step_from(&state.cross_terms(space, u, v), wu, wv)
}

/// A-optimal step from precomputed cross terms, following the four-step
/// maximizer: stationary point for `G = 0`, stationary point for `G != 0`,
/// then the end chosen by the sign of `A`.
pub fn a_step_from(ct: &CrossTerms, wu: f64, wv: f64) -> Result<StepResult> {
    if wu == 0.0 && wv == 0.0 {
        return Ok(StepResult::degenerate());
    }
    let k = AStepConstants::new(ct);
    let interior = |r: f64| -wv < r && r < wu;

    if k.g.abs() <= G_ZERO_TOL * k.g_scale {
        if k.b != 0.0 {
            let r = -k.a / (2.0 * k.b);
            if interior(r) {
                return Ok(StepResult::new(r, wu, wv, StepBranch::AStationaryG0));
            }
        }
    } else {
        let disc = k.discriminant();
        if disc < -DISCRIMINANT_TOL * k.discriminant_scale() {
            return Err(Error::NumericalAnomaly(format!(
                "negative discriminant {disc:.3e} in A-optimal exchange"
            )));
        }
        let s = disc.max(0.0).sqrt();
        // -(B + s) / G, rewritten as A / (s - B) when B < 0 to avoid cancellation.
        let r = if k.b < 0.0 {
            k.a / (s - k.b)
        } else {
            -(k.b + s) / k.g
        };
        if interior(r) {
            return Ok(StepResult::new(r, wu, wv, StepBranch::AStationary));
        }
    }

    let res = if k.a.abs() <= A_ZERO_TOL * (ct.a_u + ct.a_v) {
        StepResult::new(0.0, wu, wv, StepBranch::AFlat)
    } else if k.a > 0.0 {
        StepResult::new(wu, wu, wv, StepBranch::ABoundary)
    } else {
        StepResult::new(-wv, wu, wv, StepBranch::ABoundary)
    };
    Ok(res)
}

pub fn a_step(
    state: &SolverState,
    space: &DesignSpace,
    design: &Design,
    u: usize,
    v: usize,
) -> Result<StepResult> {
    let (wu, wv) = (design.weight(u), design.weight(v));
    if (wu == 0.0 && wv == 0.0) || u == v {
        return Ok(StepResult::degenerate());
    }
    a_step_from(&state.cross_terms(space, u, v), wu, wv)
}

/// Closed-form optimal step for the criterion.
pub fn optimal_step(
    criterion: Criterion,
    state: &SolverState,
    space: &DesignSpace,
    design: &Design,
    u: usize,
    v: usize,
) -> Result<StepResult> {
    match criterion {
        Criterion::D => Ok(d_step(state, space, design, u, v)),
        Criterion::A => a_step(state, space, design, u, v),
    }
}

/// `log det M_alpha - log det M` along the exchange, `-inf` where singular.
pub fn d_objective(ct: &CrossTerms) -> impl Fn(f64) -> f64 {
    let CrossTerms { d_u, d_v, d_uv, .. } = *ct;
    move |alpha| {
        let factor = (1.0 + alpha * d_v) * (1.0 - alpha * d_u) + alpha * alpha * d_uv * d_uv;
        if factor > 0.0 {
            factor.ln()
        } else {
            f64::NEG_INFINITY
        }
    }
}

/// `tr M^-1 - tr M_alpha^-1` along the exchange, `-inf` where singular.
pub fn a_objective(ct: &CrossTerms) -> impl Fn(f64) -> f64 {
    let k = AStepConstants::new(ct);
    move |alpha| k.objective(alpha)
}

/// Golden-section maximization of a concave `objective(alpha)` over
/// `[-w_v, w_u]`. Ties go to `alpha = 0`; results within `1e-10` of an end
/// snap onto it.
pub fn numeric_step<F: Fn(f64) -> f64>(
    design: &Design,
    u: usize,
    v: usize,
    objective: F,
) -> StepResult {
    let (wu, wv) = (design.weight(u), design.weight(v));
    if (wu == 0.0 && wv == 0.0) || u == v {
        return StepResult::degenerate();
    }
    let (lo, hi) = (-wv, wu);
    let tol = GOLDEN_WIDTH * (wu + wv);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;

    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut f1, mut f2) = (objective(x1), objective(x2));
    while b - a > tol {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = objective(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = objective(x1);
        }
    }
    let mid = 0.5 * (a + b);

    let mut best = (0.0, objective(0.0));
    for x in [mid, lo, hi] {
        let fx = objective(x);
        if fx > best.1 {
            best = (x, fx);
        }
    }
    let (mut alpha, f_alpha) = best;
    for end in [lo, hi] {
        if alpha != end && (alpha - end).abs() <= GOLDEN_SNAP {
            let f_end = objective(end);
            if f_end.is_finite() && f_end >= f_alpha - 1e-12 * (1.0 + f_alpha.abs()) {
                alpha = end;
            }
        }
    }
    StepResult::new(alpha, wu, wv, StepBranch::Numeric)
}
