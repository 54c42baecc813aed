//! Design spaces, designs, and the cached information-matrix state.
//!
//! A [`DesignSpace`] is the immutable table of regressors `f(1..n)`; a
//! [`Design`] is a probability vector over it. [`SolverState`] keeps
//! `M(w)`, its inverse and `log det M(w)` in sync with a design while the
//! solvers move weight between pairs of points by rank-two corrections.

use nalgebra::{DMatrix, DMatrixView, DVector, SymmetricEigen, SVD};

use crate::error::{Error, Result};

/// Singular-value ratio below which a regressor table is treated as rank deficient.
pub const RANK_TOL: f64 = 1e-10;
/// Smallest admissible eigenvalue of `M`, relative to the largest.
pub const CONDITION_TOL: f64 = 1e-12;
/// Tolerance on `sum(w) = 1` for designs built from user weights.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;
/// Distance from an interval end at which a step snaps onto the end.
pub const BOUNDARY_SNAP: f64 = 1e-14;
/// Determinant-lemma factors at or below this are rejected.
pub const MIN_DET_FACTOR: f64 = 1e-14;

/// Immutable table of `n` regressors of dimension `m`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSpace {
    n: usize,
    m: usize,
    rows: Vec<f64>,
    labels: Option<Vec<String>>,
}

impl DesignSpace {
    /// Builds a space from a row-major buffer of `n * m` values.
    pub fn new(rows: Vec<f64>, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidSpace(
                "regressor dimension must be positive".into(),
            ));
        }
        if !rows.len().is_multiple_of(m) {
            return Err(Error::InvalidSpace(format!(
                "buffer of length {} is not a multiple of m = {m}",
                rows.len()
            )));
        }
        let n = rows.len() / m;
        if n < m {
            return Err(Error::InvalidSpace(format!(
                "n = {n} is smaller than m = {m}"
            )));
        }
        if let Some(i) = rows.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSpace(format!(
                "non-finite entry in row {}",
                i / m + 1
            )));
        }
        if let Some(x) = rows
            .chunks_exact(m)
            .position(|r| r.iter().all(|&v| v == 0.0))
        {
            return Err(Error::InvalidSpace(format!(
                "row {} is the zero vector",
                x + 1
            )));
        }
        let space = Self {
            n,
            m,
            rows,
            labels: None,
        };
        let ratio = space.singular_value_ratio();
        if !(ratio > RANK_TOL) {
            return Err(Error::RankDeficient { m, ratio });
        }
        Ok(space)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != m) {
            return Err(Error::InvalidSpace(format!(
                "row {} has {} entries, expected {m}",
                i + 1,
                rows[i].len()
            )));
        }
        Self::new(rows.concat(), m)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(Error::InvalidSpace(format!(
                "{} labels for {} points",
                labels.len(),
                self.n
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    #[inline]
    pub fn row(&self, x: usize) -> &[f64] {
        &self.rows[x * self.m..(x + 1) * self.m]
    }

    pub fn rows(&self) -> &[f64] {
        &self.rows
    }

    /// The transposed regressor matrix (`m x n`, column `x` is `f(x)`), borrowed.
    pub fn columns(&self) -> DMatrixView<'_, f64> {
        DMatrixView::from_slice(&self.rows, self.m, self.n)
    }

    pub fn regressor(&self, x: usize) -> DVector<f64> {
        DVector::from_column_slice(self.row(x))
    }

    /// Returns a space whose row `i` is row `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::InvalidSpace("permutation length mismatch".into()));
        }
        let mut rows = Vec::with_capacity(self.rows.len());
        for &x in perm {
            rows.extend_from_slice(self.row(x));
        }
        let labels = self
            .labels
            .as_ref()
            .map(|l| perm.iter().map(|&x| l[x].clone()).collect());
        Ok(Self {
            n: self.n,
            m: self.m,
            rows,
            labels,
        })
    }

    fn singular_value_ratio(&self) -> f64 {
        let f = DMatrix::from_row_slice(self.n, self.m, &self.rows);
        let sv = SVD::new(f, false, false).singular_values;
        let max = sv.max();
        if max <= 0.0 {
            return 0.0;
        }
        sv.min() / max
    }
}

/// A probability vector over the points of a design space.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    weights: Vec<f64>,
    support: Vec<usize>,
}

impl Design {
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidDesign("empty weight vector".into()));
        }
        if let Some(x) = weights.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidDesign(format!(
                "weight {x} is negative or not finite"
            )));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidDesign(format!("weights sum to {sum}, not 1")));
        }
        let support = (0..weights.len()).filter(|&x| weights[x] > 0.0).collect();
        Ok(Self { weights, support })
    }

    /// Uniform weights on the given points, zero elsewhere.
    pub fn uniform_on(n: usize, points: &[usize]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidDesign("no support points".into()));
        }
        let mut weights = vec![0.0; n];
        let w = 1.0 / points.len() as f64;
        for &x in points {
            if x >= n {
                return Err(Error::InvalidDesign(format!("point {x} out of range")));
            }
            weights[x] = w;
        }
        Self::from_weights(weights)
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            weights: vec![1.0 / n as f64; n],
            support: (0..n).collect(),
        }
    }

    /// The singular design putting all mass on `x`.
    pub fn vertex(n: usize, x: usize) -> Self {
        let mut weights = vec![0.0; n];
        weights[x] = 1.0;
        Self {
            weights,
            support: vec![x],
        }
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn weight(&self, x: usize) -> f64 {
        self.weights[x]
    }

    /// Indices with strictly positive weight, ascending.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn support_size(&self) -> usize {
        self.support.len()
    }

    /// Moves `alpha` from `u` to `v`; `alpha` must already lie in `[-w_v, w_u]`.
    /// Steps that land on an end of the interval write an exact zero.
    fn transfer(&mut self, u: usize, v: usize, alpha: f64) {
        let (wu, wv) = (self.weights[u], self.weights[v]);
        if alpha == wu {
            self.weights[u] = 0.0;
            self.weights[v] = wv + wu;
        } else if alpha == -wv {
            self.weights[v] = 0.0;
            self.weights[u] = wu + wv;
        } else {
            self.weights[u] = wu - alpha;
            self.weights[v] = wv + alpha;
        }
        self.sync_support(u);
        self.sync_support(v);
    }

    fn sync_support(&mut self, x: usize) {
        match (self.support.binary_search(&x), self.weights[x] > 0.0) {
            (Ok(i), false) => {
                self.support.remove(i);
            }
            (Err(i), true) => self.support.insert(i, x),
            _ => {}
        }
    }

    /// Replaces every weight at once, e.g. after a multiplicative update.
    pub(crate) fn set_weights(&mut self, weights: Vec<f64>) {
        debug_assert_eq!(weights.len(), self.weights.len());
        self.support = (0..weights.len()).filter(|&x| weights[x] > 0.0).collect();
        self.weights = weights;
    }
}

/// Bilinear forms of a pair of points under the current `V = M^-1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossTerms {
    pub d_u: f64,
    pub d_v: f64,
    pub d_uv: f64,
    pub a_u: f64,
    pub a_v: f64,
    pub a_uv: f64,
}

/// `M(w)`, `V = M(w)^-1` and `log det M(w)` for a tracked design.
#[derive(Debug, Clone)]
pub struct SolverState {
    info: DMatrix<f64>,
    inv: DMatrix<f64>,
    logdet: f64,
    exchanges_since_refresh: usize,
}

impl SolverState {
    pub fn build(space: &DesignSpace, design: &Design) -> Result<Self> {
        if design.n() != space.n() {
            return Err(Error::InvalidDesign(format!(
                "design has {} weights for {} points",
                design.n(),
                space.n()
            )));
        }
        let info = information_matrix(space, design);
        let (inv, logdet) = factorize(&info)?;
        Ok(Self {
            info,
            inv,
            logdet,
            exchanges_since_refresh: 0,
        })
    }

    /// Recomputes everything from the design, discarding accumulated drift.
    pub fn refresh(&mut self, space: &DesignSpace, design: &Design) -> Result<()> {
        *self = Self::build(space, design)?;
        Ok(())
    }

    pub fn info(&self) -> &DMatrix<f64> {
        &self.info
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inv
    }

    pub fn logdet(&self) -> f64 {
        self.logdet
    }

    pub fn trace_inverse(&self) -> f64 {
        self.inv.trace()
    }

    pub fn exchanges_since_refresh(&self) -> usize {
        self.exchanges_since_refresh
    }

    #[inline]
    fn apply_inverse(&self, f: &[f64]) -> DVector<f64> {
        let m = f.len();
        let mut y = DVector::zeros(m);
        for (j, &fj) in f.iter().enumerate() {
            if fj != 0.0 {
                y.axpy(fj, &self.inv.column(j), 1.0);
            }
        }
        y
    }

    /// `d_x(w) = f(x)' V f(x)`.
    pub fn variance_d(&self, space: &DesignSpace, x: usize) -> f64 {
        let f = space.row(x);
        dot(f, self.apply_inverse(f).as_slice())
    }

    /// `a_x(w) = f(x)' V^2 f(x) = |V f(x)|^2`.
    pub fn variance_a(&self, space: &DesignSpace, x: usize) -> f64 {
        self.apply_inverse(space.row(x)).norm_squared()
    }

    pub fn cross_terms(&self, space: &DesignSpace, u: usize, v: usize) -> CrossTerms {
        let (fu, fv) = (space.row(u), space.row(v));
        let yu = self.apply_inverse(fu);
        let yv = self.apply_inverse(fv);
        CrossTerms {
            d_u: dot(fu, yu.as_slice()),
            d_v: dot(fv, yv.as_slice()),
            d_uv: dot(fu, yv.as_slice()),
            a_u: yu.norm_squared(),
            a_v: yv.norm_squared(),
            a_uv: yu.dot(&yv),
        }
    }

    /// Both variance functions over the whole space, in one pass.
    pub fn variances(&self, space: &DesignSpace) -> (Vec<f64>, Vec<f64>) {
        let f = space.columns();
        let y = &self.inv * f;
        let mut d = Vec::with_capacity(space.n());
        let mut a = Vec::with_capacity(space.n());
        for (fx, yx) in f.column_iter().zip(y.column_iter()) {
            d.push(fx.dot(&yx));
            a.push(yx.norm_squared());
        }
        (d, a)
    }

    pub fn variances_d(&self, space: &DesignSpace) -> Vec<f64> {
        let f = space.columns();
        let y = &self.inv * f;
        f.column_iter()
            .zip(y.column_iter())
            .map(|(fx, yx)| fx.dot(&yx))
            .collect()
    }

    pub fn variances_a(&self, space: &DesignSpace) -> Vec<f64> {
        let y = &self.inv * space.columns();
        y.column_iter().map(|yx| yx.norm_squared()).collect()
    }

    /// Moves `alpha` of weight from `u` to `v` and updates `M`, `V` and
    /// `log det M` by the determinant lemma and a rank-two Woodbury step.
    /// Returns the change in `log det M`.
    ///
    /// On [`Error::NumericalBreakdown`] the design is left untouched and the
    /// state is refreshed from it.
    pub fn apply_exchange(
        &mut self,
        space: &DesignSpace,
        design: &mut Design,
        u: usize,
        v: usize,
        alpha: f64,
    ) -> Result<f64> {
        let (wu, wv) = (design.weight(u), design.weight(v));
        let alpha = snap_step(alpha, wu, wv)?;
        if alpha == 0.0 || u == v {
            return Ok(0.0);
        }

        let (fu, fv) = (space.row(u), space.row(v));
        let yu = self.apply_inverse(fu);
        let yv = self.apply_inverse(fv);
        let d_u = dot(fu, yu.as_slice());
        let d_v = dot(fv, yv.as_slice());
        let d_uv = dot(fu, yv.as_slice());

        let factor = (1.0 + alpha * d_v) * (1.0 - alpha * d_u) + alpha * alpha * d_uv * d_uv;
        if !(factor > MIN_DET_FACTOR) {
            self.refresh(space, design)?;
            return Err(Error::NumericalBreakdown { factor });
        }

        // V_new = V + [c_uu yu yu' + c_vv yv yv' + c_uv (yu yv' + yv yu')] / factor
        let c_uu = alpha * (1.0 + alpha * d_v) / factor;
        let c_vv = -alpha * (1.0 - alpha * d_u) / factor;
        let c_uv = -alpha * alpha * d_uv / factor;
        let m = space.m();
        for j in 0..m {
            let (fuj, fvj) = (fu[j], fv[j]);
            let (yuj, yvj) = (yu[j], yv[j]);
            for i in 0..m {
                self.info[(i, j)] += alpha * (fv[i] * fvj - fu[i] * fuj);
                self.inv[(i, j)] +=
                    c_uu * yu[i] * yuj + c_vv * yv[i] * yvj + c_uv * (yu[i] * yvj + yv[i] * yuj);
            }
        }

        let delta = factor.ln();
        self.logdet += delta;
        self.exchanges_since_refresh += 1;
        design.transfer(u, v, alpha);
        Ok(delta)
    }
}

/// Validates `alpha` against `[-w_v, w_u]`, snapping it onto an end that is
/// within [`BOUNDARY_SNAP`].
pub(crate) fn snap_step(alpha: f64, wu: f64, wv: f64) -> Result<f64> {
    if !alpha.is_finite() || alpha > wu + BOUNDARY_SNAP || alpha < -wv - BOUNDARY_SNAP {
        return Err(Error::StepOutOfRange {
            alpha,
            lo: -wv,
            hi: wu,
        });
    }
    if (alpha - wu).abs() <= BOUNDARY_SNAP && wu > 0.0 {
        Ok(wu)
    } else if (alpha + wv).abs() <= BOUNDARY_SNAP && wv > 0.0 {
        Ok(-wv)
    } else {
        Ok(alpha.clamp(-wv, wu))
    }
}

/// `M(w) = sum_x w_x f(x) f(x)'`, summed over the support only.
pub fn information_matrix(space: &DesignSpace, design: &Design) -> DMatrix<f64> {
    let m = space.m();
    let mut info = DMatrix::zeros(m, m);
    for &x in design.support() {
        let w = design.weight(x);
        let f = space.row(x);
        for j in 0..m {
            let wf = w * f[j];
            for i in j..m {
                info[(i, j)] += wf * f[i];
            }
        }
    }
    info.fill_upper_triangle_with_lower_triangle();
    info
}

/// Inverse and log-determinant of a symmetric positive definite matrix,
/// rejecting matrices whose eigenvalue ratio falls below [`CONDITION_TOL`].
fn factorize(info: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let eig = SymmetricEigen::new(info.clone()).eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    if !(hi > 0.0 && lo > CONDITION_TOL * hi) {
        return Err(Error::SingularDesign);
    }
    let chol = info.clone().cholesky().ok_or(Error::SingularDesign)?;
    let logdet = 2.0
        * chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|v| v.ln())
            .sum::<f64>();
    let mut inv = chol.inverse();
    symmetrize(&mut inv);
    Ok((inv, logdet))
}

fn symmetrize(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for j in 0..n {
        for i in j + 1..n {
            let s = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = s;
            a[(j, i)] = s;
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
