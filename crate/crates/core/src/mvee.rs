//! Minimum-volume enclosing ellipsoid centred at the origin.
//!
//! The ellipsoid `{f : f' H f <= 1}` of least volume containing the points is
//! dual to the D-optimal design on them. Solving the design problem to
//! `max_x d_x(w) <= m (1 + eps)` and setting `H = M(w)^-1 / max_x d_x(w)`
//! gives an ellipsoid that contains every point and whose volume is within
//! a factor `(1 + eps)^(m/2)` of the optimum.

use nalgebra::DMatrix;

use crate::criteria::Criterion;
use crate::design::{dot, Design, DesignSpace};
use crate::error::{Error, Result};
use crate::solvers::{solve, SolverConfig, TerminationReason};

#[derive(Debug, Clone, PartialEq)]
pub struct Ellipsoid {
    /// Symmetric positive definite shape matrix `H`.
    pub shape: DMatrix<f64>,
}

impl Ellipsoid {
    pub fn dim(&self) -> usize {
        self.shape.nrows()
    }

    /// `f' H f`.
    pub fn gauge(&self, point: &[f64]) -> f64 {
        let m = self.dim();
        let mut acc = 0.0;
        for j in 0..m {
            acc += point[j] * dot(self.shape.column(j).as_slice(), point);
        }
        acc
    }

    pub fn logdet(&self) -> f64 {
        self.shape
            .clone()
            .cholesky()
            .map_or(f64::NEG_INFINITY, |c| {
                2.0 * c.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>()
            })
    }
}

/// `f' H f <= 1 + tol`.
pub fn contains(ellipsoid: &Ellipsoid, point: &[f64], tol: f64) -> bool {
    ellipsoid.gauge(point) <= 1.0 + tol
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MveeCertificate {
    /// `max_x d_x(w)` at the returned design.
    pub max_variance: f64,
    /// `m / max_x d_x(w)`.
    pub eff_bound: f64,
    /// `log det M(w)` of the returned design.
    pub design_logdet: f64,
    pub reason: TerminationReason,
}

#[derive(Debug, Clone)]
pub struct MveeSolution {
    pub ellipsoid: Ellipsoid,
    /// Weights over all input points, zero at points equal to the origin.
    pub design: Design,
    pub certificate: MveeCertificate,
}

/// Solves the MVEE of `points` (row-major, `m` columns) to relative accuracy
/// `eps`. Only `seed`, `gamma`, `algorithm`, `t_max` and cadence are taken
/// from `config`; the criterion is D and the efficiency target `1 / (1 + eps)`.
pub fn mvee_solve(
    points: &[f64],
    m: usize,
    eps: f64,
    config: &SolverConfig,
) -> Result<MveeSolution> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidConfig(format!("eps = {eps} not in (0, 1)")));
    }
    if m == 0 || !points.len().is_multiple_of(m) {
        return Err(Error::InvalidSpace(format!(
            "{} values do not form rows of length {m}",
            points.len()
        )));
    }
    let n = points.len() / m;
    let kept: Vec<usize> = (0..n)
        .filter(|&x| points[x * m..(x + 1) * m].iter().any(|&v| v != 0.0))
        .collect();
    let rows: Vec<f64> = kept
        .iter()
        .flat_map(|&x| points[x * m..(x + 1) * m].iter().copied())
        .collect();
    let space = DesignSpace::new(rows, m).map_err(|e| match e {
        Error::RankDeficient { .. } => Error::SpanFailure(m),
        Error::InvalidSpace(ref msg) if msg.contains("smaller than") => Error::SpanFailure(m),
        other => other,
    })?;

    let cfg = SolverConfig {
        criterion: Criterion::D,
        eff_target: 1.0 / (1.0 + eps),
        ..config.clone()
    };
    let out = solve(&space, &cfg)?;

    let max_variance = out
        .state
        .variances_d(&space)
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    let shape = out.state.inverse() / max_variance;

    let mut weights = vec![0.0; n];
    for (&x, &w) in kept.iter().zip(out.design.weights()) {
        weights[x] = w;
    }
    Ok(MveeSolution {
        ellipsoid: Ellipsoid { shape },
        design: Design::from_weights(weights)?,
        certificate: MveeCertificate {
            max_variance,
            eff_bound: (m as f64 / max_variance).min(1.0),
            design_logdet: out.state.logdet(),
            reason: out.reason,
        },
    })
}
