//! Independent reference computations used by the integration tests.
//!
//! Nothing here calls into the solver's update formulas: information
//! matrices are summed directly, determinants come from an LU factorization,
//! inverses from Gauss-Jordan elimination, and line searches are brute force.

#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// A random regressor matrix together with a strictly positive design.
#[derive(Debug, Clone)]
pub struct Instance {
    pub n: usize,
    pub m: usize,
    pub rows: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Instance {
    pub fn row(&self, x: usize) -> &[f64] {
        &self.rows[x * self.m..(x + 1) * self.m]
    }
}

pub fn gaussian_rows(rng: &mut Rng, n: usize, m: usize) -> Vec<f64> {
    (0..n * m).map(|_| StandardNormal.sample(rng)).collect()
}

/// Normalized exponential draws, i.e. a flat Dirichlet sample.
pub fn random_simplex(rng: &mut Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n)
        .map(|_| -(1.0 - rng.random::<f64>()).ln() + 1e-3)
        .collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

/// `n` in `m + 1..=n_max`, Gaussian rows and a positive Dirichlet design.
pub fn random_instance(rng: &mut Rng, m_max: usize, n_max: usize) -> Instance {
    let m = rng.random_range(1..=m_max);
    let n = rng.random_range(m + 1..=n_max.max(m + 1));
    let rows = gaussian_rows(rng, n, m);
    let weights = random_simplex(rng, n);
    Instance {
        n,
        m,
        rows,
        weights,
    }
}

pub fn dense_info(rows: &[f64], m: usize, w: &[f64]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m, m);
    for (x, &wx) in w.iter().enumerate() {
        let f = &rows[x * m..(x + 1) * m];
        for i in 0..m {
            for j in 0..m {
                out[(i, j)] += wx * f[i] * f[j];
            }
        }
    }
    out
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn gj_inverse(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let m = a.nrows();
    let mut aug = DMatrix::zeros(m, 2 * m);
    for i in 0..m {
        for j in 0..m {
            aug[(i, j)] = a[(i, j)];
        }
        aug[(i, m + i)] = 1.0;
    }
    for c in 0..m {
        let p = (c..m).max_by(|&i, &j| aug[(i, c)].abs().total_cmp(&aug[(j, c)].abs()))?;
        if aug[(p, c)].abs() < 1e-300 {
            return None;
        }
        aug.swap_rows(p, c);
        let piv = aug[(c, c)];
        for j in 0..2 * m {
            aug[(c, j)] /= piv;
        }
        for i in 0..m {
            if i != c {
                let f = aug[(i, c)];
                if f != 0.0 {
                    for j in 0..2 * m {
                        aug[(i, j)] -= f * aug[(c, j)];
                    }
                }
            }
        }
    }
    Some(aug.columns(m, m).into_owned())
}

/// `log det` via LU; `-inf` when the determinant is not positive.
pub fn dense_logdet(a: &DMatrix<f64>) -> f64 {
    let det = a.clone().lu().determinant();
    if det > 0.0 {
        det.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// `-tr M^-1`, `-inf` when `M` is singular or indefinite.
pub fn dense_neg_trace_inv(a: &DMatrix<f64>) -> f64 {
    if a.clone().cholesky().is_none() {
        return f64::NEG_INFINITY;
    }
    gj_inverse(a).map_or(f64::NEG_INFINITY, |v| -v.trace())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Crit {
    D,
    A,
}

/// Concave criterion used for comparisons: `log det M` or `-tr M^-1`.
pub fn dense_value(crit: Crit, rows: &[f64], m: usize, w: &[f64]) -> f64 {
    let info = dense_info(rows, m, w);
    match crit {
        Crit::D => dense_logdet(&info),
        Crit::A => dense_neg_trace_inv(&info),
    }
}

/// Weights after moving `alpha` from `u` to `v`.
pub fn moved(w: &[f64], u: usize, v: usize, alpha: f64) -> Vec<f64> {
    let mut out = w.to_vec();
    out[u] -= alpha;
    out[v] += alpha;
    out
}

/// Golden-section search for the maximum of a concave `f` on `[lo, hi]`,
/// stopping when the bracket is shorter than `resolution`. The ends are
/// compared against the interior result so boundary optima are found.
pub fn golden_max(f: impl Fn(f64) -> f64, lo: f64, hi: f64, resolution: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > resolution {
        if fc < fd {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        } else {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        }
    }
    let mid = 0.5 * (a + b);
    let mut best = (mid, f(mid));
    for x in [lo, hi, 0.0] {
        let fx = f(x);
        if fx > best.1 {
            best = (x, fx);
        }
    }
    best
}

/// Best post-exchange criterion value for the pair `(u, v)` of `inst`.
pub fn pair_oracle(crit: Crit, inst: &Instance, u: usize, v: usize) -> (f64, f64) {
    let (wu, wv) = (inst.weights[u], inst.weights[v]);
    golden_max(
        |alpha| dense_value(crit, &inst.rows, inst.m, &moved(&inst.weights, u, v, alpha)),
        -wv,
        wu,
        1e-10,
    )
}

/// The quadratic model `(1, t, t^2)` on `{-1, 0, 1}`.
pub fn quadratic3_rows() -> Vec<Vec<f64>> {
    vec![
        vec![1.0, -1.0, 1.0],
        vec![1.0, 0.0, 0.0],
        vec![1.0, 1.0, 1.0],
    ]
}

/// D-optimum on the quadratic three-point model by grid search over the
/// symmetric designs `(a, 1 - 2a, a)`, step `1e-3`.
pub fn quadratic3_d_grid() -> f64 {
    let rows: Vec<f64> = quadratic3_rows().concat();
    let mut best = (0.0, f64::NEG_INFINITY);
    for k in 1..500 {
        let a = k as f64 * 1e-3;
        let val = dense_value(Crit::D, &rows, 3, &[a, 1.0 - 2.0 * a, a]);
        if val > best.1 {
            best = (a, val);
        }
    }
    best.0
}

/// A-optimum of the same model: `tr M^-1 = 1 / (a (1 - 2a))` for the
/// symmetric design `(a, 1 - 2a, a)`, minimized by scanning `a`.
pub fn quadratic3_a_closed_form() -> (f64, f64) {
    let trace = |a: f64| 1.0 / (a * (1.0 - 2.0 * a));
    let mut best = (0.0, f64::INFINITY);
    for k in 1..500_000 {
        let a = k as f64 * 1e-6;
        if trace(a) < best.1 {
            best = (a, trace(a));
        }
    }
    best
}

/// How a step-test instance was built.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairKind {
    /// Gaussian rows, random distinct pair.
    Random,
    /// Unit-vector rows, so `M` is diagonal and the pair is orthogonal.
    Orthogonal,
    /// `f(v) = f(u)`.
    Duplicate,
    /// `f(v) = c f(u)` with `c != 1`.
    Parallel,
}

/// Instances for the step-formula checks: `m <= 6`, `n <= 20`, mostly
/// Gaussian, with every 50th instance of each structured kind mixed in.
pub fn step_suite(seed: u64, count: usize) -> Vec<(PairKind, Instance, usize, usize)> {
    let mut rng = rng(seed);
    (0..count)
        .map(|i| {
            let kind = match i % 50 {
                0 => PairKind::Orthogonal,
                1 => PairKind::Duplicate,
                2 => PairKind::Parallel,
                _ => PairKind::Random,
            };
            let mut inst = match kind {
                PairKind::Orthogonal => {
                    let m = rng.random_range(2..=6);
                    let n = m;
                    let mut rows = vec![0.0; n * m];
                    for x in 0..n {
                        rows[x * m + x] = 1.0;
                    }
                    let weights = random_simplex(&mut rng, n);
                    Instance {
                        n,
                        m,
                        rows,
                        weights,
                    }
                }
                _ => loop {
                    let inst = random_instance(&mut rng, 6, 20);
                    if inst.n >= 3 {
                        break inst;
                    }
                },
            };
            let u = rng.random_range(0..inst.n);
            let v = (u + rng.random_range(1..inst.n)) % inst.n;
            let m = inst.m;
            let scale = match kind {
                PairKind::Duplicate => Some(1.0),
                PairKind::Parallel => Some(rng.random_range(-3.0..3.0_f64).max(0.1) + 0.5),
                _ => None,
            };
            if let Some(c) = scale {
                let fu = inst.row(u).to_vec();
                for (dst, src) in inst.rows[v * m..(v + 1) * m].iter_mut().zip(&fu) {
                    *dst = c * src;
                }
            }
            (kind, inst, u, v)
        })
        .collect()
}
