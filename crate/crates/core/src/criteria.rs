//! Optimality criteria, equivalence-theorem efficiency bounds, and the
//! reduction of I-optimality to A-optimality.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::design::{DesignSpace, SolverState};
use crate::error::{Error, Result};

/// Log-efficiency reported for a design whose certified efficiency is 1.
pub const LOG_EFF_CAP: f64 = 16.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Criterion {
    /// `det(M)^(1/m)`
    D,
    /// `1 / tr(M^-1)`
    A,
}

impl Criterion {
    pub fn name(self) -> &'static str {
        match self {
            Criterion::D => "d",
            Criterion::A => "a",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "d" => Ok(Criterion::D),
            "a" => Ok(Criterion::A),
            other => Err(Error::InvalidConfig(format!("unknown criterion `{other}`"))),
        }
    }
}

/// Certified lower bound on the efficiency of a design.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffBound {
    pub value: f64,
    pub criterion: Criterion,
    /// `max_x g_x(w)` the bound was computed from.
    pub max_g: f64,
}

/// Criterion value of a regular state. Singular information matrices score 0,
/// which a [`SolverState`] never holds, so [`phi_of_matrix`] covers that case.
pub fn phi(criterion: Criterion, state: &SolverState) -> f64 {
    match criterion {
        Criterion::D => (state.logdet() / state.info().nrows() as f64).exp(),
        Criterion::A => 1.0 / state.trace_inverse(),
    }
}

/// Criterion value of an arbitrary non-negative definite matrix; 0 when singular.
pub fn phi_of_matrix(criterion: Criterion, info: &DMatrix<f64>) -> f64 {
    let m = info.nrows();
    let Some(chol) = info.clone().cholesky() else {
        return 0.0;
    };
    match criterion {
        Criterion::D => {
            let logdet = 2.0
                * chol
                    .l_dirty()
                    .diagonal()
                    .iter()
                    .map(|v| v.ln())
                    .sum::<f64>();
            (logdet / m as f64).exp()
        }
        Criterion::A => {
            let tr = chol.inverse().trace();
            if tr.is_finite() && tr > 0.0 {
                1.0 / tr
            } else {
                0.0
            }
        }
    }
}

/// The variance-function vector `g(w)` used by the criterion: `d` for D, `a` for A.
pub fn g_vector(criterion: Criterion, state: &SolverState, space: &DesignSpace) -> Vec<f64> {
    match criterion {
        Criterion::D => state.variances_d(space),
        Criterion::A => state.variances_a(space),
    }
}

/// Efficiency bound from a precomputed `g(w)`.
pub fn bound_from_g(criterion: Criterion, state: &SolverState, g: &[f64]) -> EffBound {
    let max_g = g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let numer = match criterion {
        Criterion::D => state.info().nrows() as f64,
        Criterion::A => state.trace_inverse(),
    };
    EffBound {
        value: (numer / max_g).min(1.0),
        criterion,
        max_g,
    }
}

/// `m / max_x d_x(w)` for D, `tr(M^-1) / max_x a_x(w)` for A.
pub fn efficiency_bound(
    criterion: Criterion,
    state: &SolverState,
    space: &DesignSpace,
) -> EffBound {
    bound_from_g(criterion, state, &g_vector(criterion, state, space))
}

/// Transforms regressors so that the A-criterion of the new space equals
/// the I-criterion `tr(M^-1 L)` of the original one.
///
/// With `L = C C'` the new regressors are `C^-1 f(x)`.
pub fn i_to_a_transform(space: &DesignSpace, moment: &DMatrix<f64>) -> Result<DesignSpace> {
    let m = space.m();
    if moment.nrows() != m || moment.ncols() != m {
        return Err(Error::InvalidConfig(format!(
            "moment matrix is {}x{}, expected {m}x{m}",
            moment.nrows(),
            moment.ncols()
        )));
    }
    let asym = (moment - moment.transpose()).abs().max();
    if asym > 1e-12 * moment.abs().max() {
        return Err(Error::NotSpd);
    }
    let chol = moment.clone().cholesky().ok_or(Error::NotSpd)?;
    let mut rows = Vec::with_capacity(space.rows().len());
    for x in 0..space.n() {
        let h = chol
            .l_dirty()
            .lower_triangle()
            .solve_lower_triangular(&space.regressor(x))
            .ok_or(Error::NotSpd)?;
        rows.extend(h.iter());
    }
    let out = DesignSpace::new(rows, m)?;
    match space.labels() {
        Some(l) => out.with_labels(l.to_vec()),
        None => Ok(out),
    }
}

/// `-log10(1 - eff)`, capped at [`LOG_EFF_CAP`].
pub fn log_efficiency(eff: f64) -> f64 {
    log_efficiency_capped(eff, LOG_EFF_CAP)
}

pub fn log_efficiency_capped(eff: f64, cap: f64) -> f64 {
    if eff >= 1.0 {
        return cap;
    }
    (-(1.0 - eff).log10()).min(cap)
}
