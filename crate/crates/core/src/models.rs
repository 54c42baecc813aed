//! Benchmark design spaces and a timed comparison harness.

use std::io::{self, Write};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::criteria::log_efficiency;
use crate::design::DesignSpace;
use crate::error::{Error, Result};
use crate::solvers::{solve, Algorithm, SolverConfig, TerminationReason, Trajectory};

pub const DEFAULT_SIZE_CAP: usize = 10_000_000;
const RANDOM_TRIES: usize = 10;

pub const TRAJECTORY_HEADER: &str =
    "instance,algorithm,repeat,iter,seconds,criterion,eff_bound,log_eff,support_size";

/// Full quadratic regression on an equispaced grid over `[-1, 1]^d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadraticModelSpec {
    pub d: usize,
    pub points_per_axis: usize,
}

impl QuadraticModelSpec {
    pub fn n(&self) -> u128 {
        (self.points_per_axis as u128).pow(self.d as u32)
    }

    /// `(d + 1)(d + 2) / 2`
    pub fn m(&self) -> usize {
        (self.d + 1) * (self.d + 2) / 2
    }
}

pub fn quadratic_space(spec: QuadraticModelSpec) -> Result<DesignSpace> {
    quadratic_space_capped(spec, DEFAULT_SIZE_CAP)
}

/// Rows `(1, t_1..t_d, t_j t_k for j <= k)` with grid points in lexicographic
/// order (first coordinate varies slowest).
pub fn quadratic_space_capped(spec: QuadraticModelSpec, cap: usize) -> Result<DesignSpace> {
    let QuadraticModelSpec {
        d,
        points_per_axis: p,
    } = spec;
    if d == 0 || p < 2 {
        return Err(Error::InvalidSpace(format!(
            "quadratic model needs d >= 1 and at least 2 points per axis (got d = {d}, {p})"
        )));
    }
    let n = spec.n();
    if n > cap as u128 {
        return Err(Error::SizeOverflow { n, cap });
    }
    let n = n as usize;
    let m = spec.m();
    let axis: Vec<f64> = (0..p)
        .map(|i| -1.0 + 2.0 * i as f64 / (p - 1) as f64)
        .collect();

    let mut rows = Vec::with_capacity(n * m);
    let mut idx = vec![0usize; d];
    let mut t = vec![0.0; d];
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        for (tj, &ij) in t.iter_mut().zip(&idx) {
            *tj = axis[ij];
        }
        rows.push(1.0);
        rows.extend_from_slice(&t);
        for j in 0..d {
            for k in j..d {
                rows.push(t[j] * t[k]);
            }
        }
        labels.push(
            t.iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(" "),
        );
        for j in (0..d).rev() {
            idx[j] += 1;
            if idx[j] < p {
                break;
            }
            idx[j] = 0;
        }
    }
    DesignSpace::new(rows, m)?.with_labels(labels)
}

/// Regressors drawn independently from `N(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomModelSpec {
    pub n: usize,
    pub m: usize,
    pub seed: u64,
}

pub fn random_space(spec: RandomModelSpec) -> Result<DesignSpace> {
    let RandomModelSpec { n, m, seed } = spec;
    if m == 0 || n < m {
        return Err(Error::InvalidSpace(format!(
            "random model needs n >= m >= 1 (n = {n}, m = {m})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut last = Error::InvalidSpace("no draw".into());
    for _ in 0..RANDOM_TRIES {
        let rows: Vec<f64> = (0..n * m)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        match DesignSpace::new(rows, m) {
            Ok(space) => return Ok(space),
            Err(e @ (Error::RankDeficient { .. } | Error::InvalidSpace(_))) => last = e,
            Err(e) => return Err(e),
        }
    }
    Err(last)
}

#[derive(Debug, Clone)]
pub struct BenchInstance {
    pub name: String,
    pub space: DesignSpace,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub trajectory: Trajectory,
    pub reason: TerminationReason,
    pub value: f64,
    pub eff_bound: f64,
    pub support_size: usize,
}

#[derive(Debug, Clone)]
pub struct BenchRun {
    pub instance: String,
    pub algorithm: Algorithm,
    pub repeat: usize,
    pub seed: u64,
    /// Failed runs keep their error message; they do not abort the benchmark.
    pub result: std::result::Result<RunSummary, String>,
}

#[derive(Debug, Clone, Default)]
pub struct BenchReport {
    pub repeats: usize,
    /// Ordered by instance, then algorithm, then repeat.
    pub runs: Vec<BenchRun>,
}

/// Runs every (instance, algorithm, repeat) cell. Repeat `r` uses seed
/// `config.seed + r`. Cells run on up to `workers` threads; the report order
/// does not depend on scheduling.
pub fn run_benchmark(
    instances: &[BenchInstance],
    algorithms: &[Algorithm],
    config: &SolverConfig,
    repeats: usize,
    workers: usize,
) -> BenchReport {
    let mut cells = Vec::new();
    for (i, _) in instances.iter().enumerate() {
        for &algorithm in algorithms {
            for repeat in 0..repeats {
                cells.push((i, algorithm, repeat));
            }
        }
    }

    let next = AtomicUsize::new(0);
    let done = Mutex::new(Vec::with_capacity(cells.len()));
    let run_cell = |&(i, algorithm, repeat): &(usize, Algorithm, usize)| {
        let seed = config.seed.wrapping_add(repeat as u64);
        let cfg = SolverConfig {
            algorithm,
            seed,
            ..config.clone()
        };
        let result = solve(&instances[i].space, &cfg)
            .map(|out| RunSummary {
                support_size: out.design.support_size(),
                trajectory: out.trajectory,
                reason: out.reason,
                value: out.value,
                eff_bound: out.bound.value,
            })
            .map_err(|e| e.to_string());
        BenchRun {
            instance: instances[i].name.clone(),
            algorithm,
            repeat,
            seed,
            result,
        }
    };
    std::thread::scope(|scope| {
        for _ in 0..workers.clamp(1, cells.len().max(1)) {
            scope.spawn(|| loop {
                let c = next.fetch_add(1, Ordering::Relaxed);
                let Some(cell) = cells.get(c) else { break };
                let run = run_cell(cell);
                done.lock().unwrap().push((c, run));
            });
        }
    });

    let mut runs = done.into_inner().unwrap();
    runs.sort_by_key(|(c, _)| *c);
    BenchReport {
        repeats,
        runs: runs.into_iter().map(|(_, r)| r).collect(),
    }
}

impl BenchReport {
    pub fn failures(&self) -> impl Iterator<Item = &BenchRun> {
        self.runs.iter().filter(|r| r.result.is_err())
    }

    /// All trajectories in one CSV with [`TRAJECTORY_HEADER`].
    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "{TRAJECTORY_HEADER}")?;
        for run in &self.runs {
            if let Ok(summary) = &run.result {
                write_trajectory_rows(
                    out,
                    &run.instance,
                    run.algorithm.name(),
                    run.repeat,
                    &summary.trajectory,
                    true,
                )?;
            }
        }
        Ok(())
    }
}

/// A standalone trajectory file (header included).
pub fn write_trajectory_csv<W: Write>(
    out: &mut W,
    instance: &str,
    algorithm: &str,
    repeat: usize,
    trajectory: &Trajectory,
    with_seconds: bool,
) -> io::Result<()> {
    writeln!(out, "{TRAJECTORY_HEADER}")?;
    write_trajectory_rows(out, instance, algorithm, repeat, trajectory, with_seconds)
}

/// Rows only. `log_eff` is derived from the certified bound. Without
/// `with_seconds` the timing column is left empty so the file depends only
/// on the inputs.
pub fn write_trajectory_rows<W: Write>(
    out: &mut W,
    instance: &str,
    algorithm: &str,
    repeat: usize,
    trajectory: &Trajectory,
    with_seconds: bool,
) -> io::Result<()> {
    for r in &trajectory.records {
        let seconds = if with_seconds {
            format!("{:.6}", r.seconds)
        } else {
            String::new()
        };
        writeln!(
            out,
            "{instance},{algorithm},{repeat},{},{seconds},{:e},{:e},{:e},{}",
            r.iter,
            r.criterion,
            r.eff_bound,
            log_efficiency(r.eff_bound),
            r.support_size
        )?;
    }
    Ok(())
}
