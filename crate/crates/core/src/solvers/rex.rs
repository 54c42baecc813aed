use rand::seq::SliceRandom;

use super::{apply_step, checked_step, lbe_with_g, SolverConfig, SolverRng};
use crate::design::{Design, DesignSpace, SolverState};
use crate::error::Result;

/// Active point set of one REX iteration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubspaceSelection {
    /// The `L = min(ceil(gamma m), n)` points with the largest `g`, ascending.
    pub greedy: Vec<usize>,
    /// Support of the design, ascending.
    pub support: Vec<usize>,
    /// Union of the two, ascending.
    pub active: Vec<usize>,
}

/// Greedy set size `min(ceil(gamma m), n)`.
pub fn greedy_size(gamma: f64, m: usize, n: usize) -> usize {
    let l = (gamma * m as f64 - 1e-9).ceil().max(1.0);
    if l >= n as f64 {
        n
    } else {
        l as usize
    }
}

/// Picks the greedy set from `g` (ties to the lowest index) and unites it with the support.
pub fn select_subspace(g: &[f64], design: &Design, gamma: f64, m: usize) -> SubspaceSelection {
    let n = g.len();
    let l = greedy_size(gamma, m, n);
    let mut order: Vec<usize> = (0..n).collect();
    let by_g_desc = |a: &usize, b: &usize| g[*b].total_cmp(&g[*a]).then(a.cmp(b));
    if l < n {
        order.select_nth_unstable_by(l, by_g_desc);
        order.truncate(l);
    }
    order.sort_unstable();
    let greedy = order;

    let support = design.support().to_vec();
    let mut active = Vec::with_capacity(greedy.len() + support.len());
    let (mut i, mut j) = (0, 0);
    while i < greedy.len() || j < support.len() {
        let next = match (greedy.get(i), support.get(j)) {
            (Some(&a), Some(&b)) if a == b => {
                i += 1;
                j += 1;
                a
            }
            (Some(&a), Some(&b)) if a < b => {
                i += 1;
                a
            }
            (Some(&a), None) => {
                i += 1;
                a
            }
            (_, Some(&b)) => {
                j += 1;
                b
            }
            (None, None) => unreachable!(),
        };
        active.push(next);
    }
    SubspaceSelection {
        greedy,
        support,
        active,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RexIterStats {
    pub lbe_nullifying: bool,
    /// Pairs visited in the sweep (`K * L`).
    pub pairs: usize,
    /// Sweep exchanges that moved weight.
    pub applied: usize,
    /// Sweep exchanges skipped by the nullifying gate.
    pub gated: usize,
    /// Every applied sweep exchange landed on an interval end.
    pub applied_all_nullifying: bool,
}

/// One outer REX iteration given `g(w)` of the current design: the leading
/// Böhning exchange, then a sweep over the randomly ordered pairs
/// `(k_1, l_1), ..., (k_K, l_1), ..., (k_K, l_L)` of support and greedy points.
/// After a nullifying LBE only nullifying sweep exchanges are applied.
pub fn rex_iterate(
    space: &DesignSpace,
    design: &mut Design,
    state: &mut SolverState,
    g: &[f64],
    config: &SolverConfig,
    rng: &mut SolverRng,
) -> Result<RexIterStats> {
    let criterion = config.criterion;
    let lbe = lbe_with_g(criterion, state, space, design, g)?;

    let sel = select_subspace(g, design, config.gamma, space.m());
    let mut ks = sel.support;
    let mut ls = sel.greedy;
    ks.shuffle(rng);
    ls.shuffle(rng);

    let mut stats = RexIterStats {
        lbe_nullifying: lbe.step.nullifying,
        pairs: ks.len() * ls.len(),
        applied_all_nullifying: true,
        ..Default::default()
    };
    for &l in &ls {
        for &k in &ks {
            let step = checked_step(criterion, state, space, design, k, l)?;
            if stats.lbe_nullifying && !step.nullifying {
                stats.gated += 1;
                continue;
            }
            let done = apply_step(state, space, design, k, l, step)?;
            if done.alpha != 0.0 {
                stats.applied += 1;
                stats.applied_all_nullifying &= done.nullifying;
            }
            if state.exchanges_since_refresh() >= config.refresh_cadence {
                state.refresh(space, design)?;
            }
        }
    }
    Ok(stats)
}
