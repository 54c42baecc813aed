//! Iterative design algorithms.
//!
//! All three algorithms share one outer loop: refresh the cached state,
//! compute `g(w)` once, record the trajectory point, test the stopping rules,
//! then run one algorithm-specific iteration. Each iteration only ever
//! increases the criterion.

mod mul;
mod rex;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::criteria::{bound_from_g, g_vector, phi, Criterion, EffBound};
use crate::design::{Design, DesignSpace, SolverState};
use crate::error::{Error, Result};
use crate::steps::{optimal_step, StepResult};

pub use mul::mul_iterate;
pub use rex::{greedy_size, rex_iterate, select_subspace, RexIterStats, SubspaceSelection};

/// The RNG behind every randomized choice; seeded from [`SolverConfig::seed`].
pub type SolverRng = ChaCha8Rng;

/// Attempts at drawing a regular random starting design.
pub const INIT_TRIES: usize = 100;
/// Consecutive non-improving iterations after which a run is declared stalled.
pub const STALL_WINDOW: usize = 50;
/// Relative improvement below which an iteration counts towards a stall.
pub const STALL_TOL: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Rex,
    Vem,
    Mul,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Rex, Algorithm::Vem, Algorithm::Mul];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Rex => "rex",
            Algorithm::Vem => "vem",
            Algorithm::Mul => "mul",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rex" => Ok(Algorithm::Rex),
            "vem" => Ok(Algorithm::Vem),
            "mul" => Ok(Algorithm::Mul),
            other => Err(Error::InvalidConfig(format!(
                "unknown algorithm `{other}` (expected one of rex, vem, mul)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub criterion: Criterion,
    pub algorithm: Algorithm,
    /// Greedy batch size factor; REX uses `min(ceil(gamma m), n)` greedy points.
    pub gamma: f64,
    /// Stop once the certified efficiency bound reaches this value.
    pub eff_target: f64,
    /// Wall-clock budget in seconds.
    pub t_max: f64,
    pub seed: u64,
    /// Exchanges between full refactorizations of `M(w)`.
    pub refresh_cadence: usize,
    /// Optional cap on outer iterations.
    pub max_iterations: Option<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            criterion: Criterion::D,
            algorithm: Algorithm::Rex,
            gamma: 4.0,
            eff_target: 1.0 - 1e-6,
            t_max: 60.0,
            seed: 0,
            refresh_cadence: 64,
            max_iterations: None,
        }
    }
}

impl SolverConfig {
    pub fn new(criterion: Criterion, algorithm: Algorithm) -> Self {
        Self {
            criterion,
            algorithm,
            ..Self::default()
        }
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma * m as f64 >= 1.0 - 1e-12) {
            return Err(Error::InvalidConfig(format!(
                "gamma = {} is below 1/m",
                self.gamma
            )));
        }
        if !(self.eff_target > 0.0 && self.eff_target < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "efficiency target {} not in (0, 1)",
                self.eff_target
            )));
        }
        if !(self.t_max > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "t_max = {} must be positive",
                self.t_max
            )));
        }
        if self.refresh_cadence == 0 {
            return Err(Error::InvalidConfig(
                "refresh cadence must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRecord {
    pub iter: usize,
    pub seconds: f64,
    pub criterion: f64,
    pub eff_bound: f64,
    pub support_size: usize,
}

/// One record per outer iteration, taken before the iteration runs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub records: Vec<TrajectoryRecord>,
}

impl Trajectory {
    pub fn last(&self) -> Option<&TrajectoryRecord> {
        self.records.last()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// True if the criterion never drops by more than `rel_tol` relative.
    pub fn is_monotone(&self, rel_tol: f64) -> bool {
        self.records
            .windows(2)
            .all(|p| p[1].criterion >= p[0].criterion - rel_tol * p[0].criterion.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TerminationReason {
    EffReached,
    TimeOut,
    Stalled,
    IterationLimit,
}

impl TerminationReason {
    pub fn name(self) -> &'static str {
        match self {
            TerminationReason::EffReached => "eff_reached",
            TerminationReason::TimeOut => "time_out",
            TerminationReason::Stalled => "stalled",
            TerminationReason::IterationLimit => "iteration_limit",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub design: Design,
    pub state: SolverState,
    pub trajectory: Trajectory,
    pub reason: TerminationReason,
    pub bound: EffBound,
    /// Criterion value of the returned design.
    pub value: f64,
}

/// Uniform weights on `m` distinct random points, redrawn until regular.
pub fn random_regular_design(space: &DesignSpace, rng: &mut SolverRng) -> Result<Design> {
    let (n, m) = (space.n(), space.m());
    for _ in 0..INIT_TRIES {
        let mut points = rand::seq::index::sample(rng, n, m).into_vec();
        points.sort_unstable();
        let design = Design::uniform_on(n, &points)?;
        if SolverState::build(space, &design).is_ok() {
            return Ok(design);
        }
    }
    Err(Error::NoRegularStart { tries: INIT_TRIES })
}

/// Böhning pair and the optimal exchange between it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbeOutcome {
    /// Support point with the smallest `g`.
    pub k: usize,
    /// Point with the largest `g`.
    pub l: usize,
    pub step: StepResult,
}

/// Leading Böhning exchange computed from a given `g(w)`. Ties go to the
/// lowest index.
pub fn lbe_with_g(
    criterion: Criterion,
    state: &mut SolverState,
    space: &DesignSpace,
    design: &mut Design,
    g: &[f64],
) -> Result<LbeOutcome> {
    let k = design
        .support()
        .iter()
        .copied()
        .fold(None, |best: Option<usize>, x| match best {
            Some(b) if g[b] <= g[x] => Some(b),
            _ => Some(x),
        })
        .ok_or_else(|| Error::InvalidDesign("empty support".into()))?;
    let l = (0..g.len()).fold(0, |b, x| if g[x] > g[b] { x } else { b });
    let step = exchange(criterion, state, space, design, k, l)?;
    Ok(LbeOutcome { k, l, step })
}

/// Computes `g(w)` and performs the leading Böhning exchange.
pub fn lbe_step(
    criterion: Criterion,
    state: &mut SolverState,
    space: &DesignSpace,
    design: &mut Design,
) -> Result<LbeOutcome> {
    let g = g_vector(criterion, state, space);
    lbe_with_g(criterion, state, space, design, &g)
}

/// Computes the optimal step for `(u, v)` from the live state and applies it.
pub(crate) fn exchange(
    criterion: Criterion,
    state: &mut SolverState,
    space: &DesignSpace,
    design: &mut Design,
    u: usize,
    v: usize,
) -> Result<StepResult> {
    let step = checked_step(criterion, state, space, design, u, v)?;
    apply_step(state, space, design, u, v, step)
}

/// The step for `(u, v)`, retried once from a refreshed state if the
/// closed form reports corrupted cross terms.
pub(crate) fn checked_step(
    criterion: Criterion,
    state: &mut SolverState,
    space: &DesignSpace,
    design: &Design,
    u: usize,
    v: usize,
) -> Result<StepResult> {
    match optimal_step(criterion, state, space, design, u, v) {
        Err(Error::NumericalAnomaly(_)) => {
            state.refresh(space, design)?;
            optimal_step(criterion, state, space, design, u, v)
        }
        other => other,
    }
}

/// Applies a computed step; a rejected update is reported as a zero step.
pub(crate) fn apply_step(
    state: &mut SolverState,
    space: &DesignSpace,
    design: &mut Design,
    u: usize,
    v: usize,
    step: StepResult,
) -> Result<StepResult> {
    match state.apply_exchange(space, design, u, v, step.alpha) {
        Ok(_) => Ok(step),
        Err(Error::NumericalBreakdown { .. }) => Ok(StepResult {
            alpha: 0.0,
            nullifying: false,
            ..step
        }),
        Err(e) => Err(e),
    }
}

/// Runs the configured algorithm from its default starting design.
pub fn solve(space: &DesignSpace, config: &SolverConfig) -> Result<SolveOutcome> {
    config.validate(space.m())?;
    let mut rng = SolverRng::seed_from_u64(config.seed);
    let start = match config.algorithm {
        Algorithm::Rex | Algorithm::Vem => random_regular_design(space, &mut rng)?,
        Algorithm::Mul => Design::uniform(space.n()),
    };
    solve_from(space, config, start, &mut rng)
}

/// REX regardless of `config.algorithm`.
pub fn rex_solve(space: &DesignSpace, config: &SolverConfig) -> Result<SolveOutcome> {
    solve(
        space,
        &SolverConfig {
            algorithm: Algorithm::Rex,
            ..config.clone()
        },
    )
}

pub fn vem_solve(space: &DesignSpace, config: &SolverConfig) -> Result<SolveOutcome> {
    solve(
        space,
        &SolverConfig {
            algorithm: Algorithm::Vem,
            ..config.clone()
        },
    )
}

pub fn mul_solve(space: &DesignSpace, config: &SolverConfig) -> Result<SolveOutcome> {
    solve(
        space,
        &SolverConfig {
            algorithm: Algorithm::Mul,
            ..config.clone()
        },
    )
}

/// Runs the configured algorithm from a given regular design.
pub fn solve_from(
    space: &DesignSpace,
    config: &SolverConfig,
    mut design: Design,
    rng: &mut SolverRng,
) -> Result<SolveOutcome> {
    config.validate(space.m())?;
    let clock = Instant::now();
    let criterion = config.criterion;
    let mut state = SolverState::build(space, &design)?;
    let mut trajectory = Trajectory::default();
    let mut stalled_for = 0;
    let mut prev_value = f64::NEG_INFINITY;
    let mut iter = 0;

    loop {
        if config.algorithm == Algorithm::Rex || state.exchanges_since_refresh() > 0 {
            state.refresh(space, &design)?;
        }
        let g = g_vector(criterion, &state, space);
        let bound = bound_from_g(criterion, &state, &g);
        let value = phi(criterion, &state);
        trajectory.records.push(TrajectoryRecord {
            iter,
            seconds: clock.elapsed().as_secs_f64(),
            criterion: value,
            eff_bound: bound.value,
            support_size: design.support_size(),
        });

        if iter > 0 && value - prev_value < STALL_TOL * prev_value.abs() {
            stalled_for += 1;
        } else {
            stalled_for = 0;
        }
        prev_value = value;

        let reason = if bound.value >= config.eff_target {
            Some(TerminationReason::EffReached)
        } else if stalled_for >= STALL_WINDOW {
            Some(TerminationReason::Stalled)
        } else if clock.elapsed().as_secs_f64() >= config.t_max {
            Some(TerminationReason::TimeOut)
        } else if config.max_iterations.is_some_and(|cap| iter >= cap) {
            Some(TerminationReason::IterationLimit)
        } else {
            None
        };
        if let Some(reason) = reason {
            return Ok(SolveOutcome {
                design,
                state,
                trajectory,
                reason,
                bound,
                value,
            });
        }

        match config.algorithm {
            Algorithm::Rex => {
                rex_iterate(space, &mut design, &mut state, &g, config, rng)?;
            }
            Algorithm::Vem => {
                lbe_with_g(criterion, &mut state, space, &mut design, &g)?;
                if state.exchanges_since_refresh() >= config.refresh_cadence {
                    state.refresh(space, &design)?;
                }
            }
            Algorithm::Mul => mul_iterate(criterion, space, &mut design, &mut state, &g)?,
        }
        iter += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic3() -> DesignSpace {
        DesignSpace::from_rows(&[
            vec![1.0, -1.0, 1.0],
            vec![1.0, 0.0, 0.0],
            vec![1.0, 1.0, 1.0],
        ])
        .unwrap()
    }

    #[test]
    fn config_validation() {
        let mut c = SolverConfig::default();
        assert!(c.validate(3).is_ok());
        c.gamma = 0.2;
        assert!(c.validate(3).is_err());
        c.gamma = 4.0;
        c.eff_target = 1.0;
        assert!(c.validate(3).is_err());
        c.eff_target = 0.9;
        c.t_max = 0.0;
        assert!(c.validate(3).is_err());
    }

    #[test]
    fn lbe_at_optimum_is_zero() {
        let s = quadratic3();
        let mut w = Design::uniform(3);
        let mut st = SolverState::build(&s, &w).unwrap();
        let out = lbe_step(Criterion::D, &mut st, &s, &mut w).unwrap();
        assert!(out.step.alpha.abs() < 1e-14);
        assert!(!out.step.nullifying);
    }

    #[test]
    fn lbe_orthonormal_hand_example() {
        let s = DesignSpace::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let mut w = Design::from_weights(vec![0.75, 0.25]).unwrap();
        let mut st = SolverState::build(&s, &w).unwrap();
        let out = lbe_step(Criterion::D, &mut st, &s, &mut w).unwrap();
        assert_eq!((out.k, out.l), (0, 1));
        assert!((out.step.alpha - 0.25).abs() < 1e-15);
        assert_eq!(w.weights(), &[0.5, 0.5]);
    }

    #[test]
    fn lbe_single_point() {
        let s = DesignSpace::from_rows(&[vec![2.0]]).unwrap();
        let mut w = Design::uniform(1);
        let mut st = SolverState::build(&s, &w).unwrap();
        let out = lbe_step(Criterion::D, &mut st, &s, &mut w).unwrap();
        assert_eq!((out.k, out.l), (0, 0));
        assert_eq!(out.step.alpha, 0.0);
    }

    #[test]
    fn orthonormal_basis_is_optimal_at_start() {
        let s = DesignSpace::from_rows(&[
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        let out = solve(&s, &SolverConfig::default()).unwrap();
        assert_eq!(out.reason, TerminationReason::EffReached);
        assert_eq!(out.trajectory.len(), 1);
        assert!((out.bound.value - 1.0).abs() < 1e-15);
        for &w in out.design.weights() {
            assert!((w - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("cocktail".parse::<Algorithm>().is_err());
    }
}
