use crate::criteria::Criterion;
use crate::design::{Design, DesignSpace, SolverState};
use crate::error::{Error, Result};

/// Multiplicative update `w_x <- w_x g_x^p / sum_y w_y g_y^p`, followed by a
/// full rebuild of the state. Points outside the support stay at zero.
///
/// `p = 1` for D. For A the exponent is `1/2`: with `p = 1` the update can
/// cycle forever (e.g. between `(1/3, 1/3, 1/3)` and `(1/6, 2/3, 1/6)` on the
/// quadratic model over `{-1, 0, 1}`), while `p = 1/2` ascends monotonically.
pub fn mul_iterate(
    criterion: Criterion,
    space: &DesignSpace,
    design: &mut Design,
    state: &mut SolverState,
    g: &[f64],
) -> Result<()> {
    let scale = |gx: f64| match criterion {
        Criterion::D => gx,
        Criterion::A => gx.sqrt(),
    };
    let mut weights: Vec<f64> = design
        .weights()
        .iter()
        .zip(g)
        .map(|(w, &gx)| w * scale(gx))
        .collect();
    let total: f64 = weights.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::NumericalAnomaly(format!(
            "multiplicative normalizer {total}"
        )));
    }
    for w in &mut weights {
        *w /= total;
    }
    design.set_weights(weights);
    state.refresh(space, design)
}
