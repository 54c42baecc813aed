mod common;

use common::*;
use rand::seq::SliceRandom;
use rand::{RngExt, SeedableRng};
use rexdesign::criteria::{g_vector, phi, Criterion};
use rexdesign::models::{quadratic_space, random_space, QuadraticModelSpec, RandomModelSpec};
use rexdesign::solvers::{mul_iterate, rex_iterate, solve, solve_from, SolverRng};
use rexdesign::{
    Algorithm, Design, DesignSpace, Error, SolverConfig, SolverState, TerminationReason,
};

fn quadratic3() -> DesignSpace {
    DesignSpace::from_rows(&quadratic3_rows()).unwrap()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[test]
fn d_optimum_on_three_points() {
    let a = quadratic3_d_grid();
    assert!((a - 1.0 / 3.0).abs() <= 1e-3);
    let target = [1.0 / 3.0; 3];
    for alg in Algorithm::ALL {
        let out = solve(&quadratic3(), &SolverConfig::new(Criterion::D, alg)).unwrap();
        assert_eq!(out.reason, TerminationReason::EffReached, "{alg}");
        assert!(out.bound.value >= 0.999999);
        assert!(
            max_abs_diff(out.design.weights(), &target) < 1e-4,
            "{alg}: {:?}",
            out.design.weights()
        );
    }
}

#[test]
fn a_optimum_on_three_points() {
    let (a, trace) = quadratic3_a_closed_form();
    assert!((a - 0.25).abs() < 1e-5 && (trace - 8.0).abs() < 1e-9);
    for alg in Algorithm::ALL {
        let out = solve(&quadratic3(), &SolverConfig::new(Criterion::A, alg)).unwrap();
        assert_eq!(out.reason, TerminationReason::EffReached, "{alg}");
        assert!(
            max_abs_diff(out.design.weights(), &[a, 1.0 - 2.0 * a, a]) < 1e-4,
            "{alg}"
        );
        assert!((out.state.trace_inverse() - trace).abs() < 1e-3);
    }
}

/// On a fine grid over [-1, 1] the quadratic D-optimum still sits on {-1, 0, 1}.
#[test]
fn d_optimum_on_fine_grid() {
    let space = quadratic_space(QuadraticModelSpec {
        d: 1,
        points_per_axis: 21,
    })
    .unwrap();
    let ends = [0, 10, 20];
    for alg in Algorithm::ALL {
        let out = solve(&space, &SolverConfig::new(Criterion::D, alg)).unwrap();
        assert_eq!(out.reason, TerminationReason::EffReached, "{alg}");
        for &x in &ends {
            assert!(
                (out.design.weight(x) - 1.0 / 3.0).abs() < 2e-3,
                "{alg}: {:?}",
                out.design.weights()
            );
        }
    }
}

fn random_problem(rng: &mut Rng) -> DesignSpace {
    let m = rng.random_range(1..=6);
    let n = rng.random_range(m + 1..=60);
    DesignSpace::new(gaussian_rows(rng, n, m), m).unwrap()
}

#[test]
fn trajectories_are_monotone() {
    let mut rng = rng(51);
    for _ in 0..30 {
        let space = random_problem(&mut rng);
        for alg in Algorithm::ALL {
            for crit in [Criterion::D, Criterion::A] {
                let config = SolverConfig {
                    seed: rng.random(),
                    max_iterations: Some(2000),
                    ..SolverConfig::new(crit, alg)
                };
                let out = solve(&space, &config).unwrap();
                assert!(out.trajectory.is_monotone(1e-12), "{alg} {crit}");
            }
        }
    }
}

#[test]
fn same_seed_same_run() {
    let space = random_space(RandomModelSpec {
        n: 300,
        m: 6,
        seed: 5,
    })
    .unwrap();
    for alg in Algorithm::ALL {
        for crit in [Criterion::D, Criterion::A] {
            let config = SolverConfig {
                seed: 77,
                ..SolverConfig::new(crit, alg)
            };
            let a = solve(&space, &config).unwrap();
            let b = solve(&space, &config).unwrap();
            assert_eq!(a.design, b.design);
            let crits = |o: &rexdesign::SolveOutcome| -> Vec<(f64, f64, usize)> {
                o.trajectory
                    .records
                    .iter()
                    .map(|r| (r.criterion, r.eff_bound, r.support_size))
                    .collect()
            };
            assert_eq!(crits(&a), crits(&b));
        }
    }
}

/// The optimal information matrix is unique, so reordering the candidate
/// points or changing the seed moves the optimum value by no more than the
/// certified gap.
#[test]
fn optimum_independent_of_order_and_seed() {
    let mut rng = rng(52);
    for _ in 0..10 {
        let space = random_problem(&mut rng);
        let mut perm: Vec<usize> = (0..space.n()).collect();
        perm.shuffle(&mut rng);
        let shuffled = space.permuted(&perm).unwrap();
        for crit in [Criterion::D, Criterion::A] {
            let a = solve(
                &space,
                &SolverConfig {
                    seed: 1,
                    ..SolverConfig::new(crit, Algorithm::Rex)
                },
            )
            .unwrap();
            let b = solve(
                &shuffled,
                &SolverConfig {
                    seed: 2,
                    ..SolverConfig::new(crit, Algorithm::Rex)
                },
            )
            .unwrap();
            let rel = (a.value - b.value).abs() / a.value;
            assert!(rel < 2e-6, "{crit}: {} vs {}", a.value, b.value);
        }
    }
}

/// After a nullifying leading exchange REX only accepts nullifying sweep steps.
#[test]
fn rex_gates_sweep_after_nullifying_lbe() {
    let mut rng = rng(53);
    let mut gated_iterations = 0;
    for _ in 0..20 {
        let space = random_problem(&mut rng);
        for crit in [Criterion::D, Criterion::A] {
            let config = SolverConfig::new(crit, Algorithm::Rex);
            let mut srng = SolverRng::seed_from_u64(rng.random());
            let mut design = rexdesign::solvers::random_regular_design(&space, &mut srng).unwrap();
            let mut state = SolverState::build(&space, &design).unwrap();
            for _ in 0..30 {
                state.refresh(&space, &design).unwrap();
                let before = phi(crit, &state);
                let g = g_vector(crit, &state, &space);
                let stats =
                    rex_iterate(&space, &mut design, &mut state, &g, &config, &mut srng).unwrap();
                state.refresh(&space, &design).unwrap();
                assert!(phi(crit, &state) >= before * (1.0 - 1e-12));
                if stats.lbe_nullifying {
                    gated_iterations += 1;
                    assert!(stats.applied_all_nullifying);
                }
            }
        }
    }
    assert!(gated_iterations > 0);
}

#[test]
fn certified_bound_holds_at_termination() {
    let mut rng = rng(54);
    for _ in 0..10 {
        let space = random_problem(&mut rng);
        for crit in [Criterion::D, Criterion::A] {
            let loose = SolverConfig {
                eff_target: 0.99,
                ..SolverConfig::new(crit, Algorithm::Rex)
            };
            let tight = SolverConfig {
                eff_target: 1.0 - 1e-9,
                ..loose.clone()
            };
            let a = solve(&space, &loose).unwrap();
            let best = solve(&space, &tight).unwrap();
            assert_eq!(a.reason, TerminationReason::EffReached);
            assert!(a.bound.value >= 0.99);
            assert!(a.bound.value <= a.value / best.value * (1.0 + 1e-9));
        }
    }
}

#[test]
fn mul_keeps_an_optimum_fixed() {
    let space = DesignSpace::new(vec![2.0, 0.0, 0.0, 2.0, 1.0, 1.0], 2).unwrap();
    let mut design = Design::uniform_on(3, &[0, 1]).unwrap();
    let mut state = SolverState::build(&space, &design).unwrap();
    for crit in [Criterion::D, Criterion::A] {
        let g = g_vector(crit, &state, &space);
        mul_iterate(crit, &space, &mut design, &mut state, &g).unwrap();
        assert!(max_abs_diff(design.weights(), &[0.5, 0.5, 0.0]) < 1e-15);
    }
}

#[test]
fn mul_converges_from_uniform() {
    let space = quadratic_space(QuadraticModelSpec {
        d: 1,
        points_per_axis: 5,
    })
    .unwrap();
    let config = SolverConfig {
        max_iterations: Some(10_000),
        ..SolverConfig::new(Criterion::D, Algorithm::Mul)
    };
    let out = solve(&space, &config).unwrap();
    assert_eq!(out.reason, TerminationReason::EffReached);
    assert!(out.trajectory.len() <= 10_001);
}

#[test]
fn vem_improves_every_iteration_until_optimal() {
    let mut rng = rng(55);
    for _ in 0..10 {
        let space = random_problem(&mut rng);
        let config = SolverConfig {
            max_iterations: Some(500),
            ..SolverConfig::new(Criterion::D, Algorithm::Vem)
        };
        let out = solve(&space, &config).unwrap();
        for pair in out.trajectory.records.windows(2) {
            assert!(pair[1].criterion > pair[0].criterion || pair[0].eff_bound > 1.0 - 1e-9);
        }
    }
}

#[test]
fn rex_finds_sparse_designs() {
    for (d, p) in [(1, 31), (2, 11), (2, 15)] {
        let space = quadratic_space(QuadraticModelSpec {
            d,
            points_per_axis: p,
        })
        .unwrap();
        let m = space.m();
        for crit in [Criterion::D, Criterion::A] {
            let out = solve(&space, &SolverConfig::new(crit, Algorithm::Rex)).unwrap();
            assert_eq!(out.reason, TerminationReason::EffReached);
            assert!(
                out.design.support_size() <= 1 + m * (m + 1) / 2,
                "{crit} d={d}: {}",
                out.design.support_size()
            );
        }
    }
}

#[test]
fn timeout_and_iteration_limits() {
    let space = random_space(RandomModelSpec {
        n: 2000,
        m: 10,
        seed: 3,
    })
    .unwrap();
    let config = SolverConfig {
        t_max: 1e-9,
        ..SolverConfig::default()
    };
    let out = solve(&space, &config).unwrap();
    assert_eq!(out.reason, TerminationReason::TimeOut);
    assert_eq!(out.trajectory.len(), 1);

    let config = SolverConfig {
        max_iterations: Some(2),
        eff_target: 1.0 - 1e-15,
        ..SolverConfig::default()
    };
    let out = solve(&space, &config).unwrap();
    assert_eq!(out.reason, TerminationReason::IterationLimit);
    assert_eq!(out.trajectory.len(), 3);
    let total: f64 = out.design.weights().iter().sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn singular_start_is_rejected() {
    let space = quadratic3();
    let mut rng = SolverRng::seed_from_u64(0);
    let err = solve_from(
        &space,
        &SolverConfig::default(),
        Design::vertex(3, 0),
        &mut rng,
    )
    .unwrap_err();
    assert_eq!(err, Error::SingularDesign);
}
