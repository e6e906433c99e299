//! Central finite-difference gradient checks.

use rand::Rng;

use super::{Grads, Parameterized};
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub probes: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
}

/// `|a - n| / max(|a| + |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// Compares `grads` against central differences of `loss` at `probes`
/// parameters drawn uniformly over all parameter entries (every entry when
/// the model has no more than `probes` of them).
pub fn check<M, F>(
    model: &mut M,
    grads: &Grads,
    loss: F,
    eps: f64,
    probes: usize,
    probe_seed: u64,
) -> GradCheckReport
where
    M: Parameterized,
    F: Fn(&M) -> f64,
{
    let shapes = model.param_shapes();
    let total: usize = shapes.iter().sum();
    let locate = |mut flat: usize| {
        for (t, &n) in shapes.iter().enumerate() {
            if flat < n {
                return (t, flat);
            }
            flat -= n;
        }
        unreachable!("flat index within total")
    };
    let picks: Vec<usize> = if total <= probes {
        (0..total).collect()
    } else {
        let mut rng = seed::rng(probe_seed);
        (0..probes).map(|_| rng.gen_range(0..total)).collect()
    };

    let mut report = GradCheckReport {
        probes: picks.len(),
        max_rel_error: 0.0,
        max_abs_error: 0.0,
    };
    for flat in picks {
        let (t, i) = locate(flat);
        let original = model.params()[t][i];
        model.params_mut()[t][i] = original + eps;
        let up = loss(model);
        model.params_mut()[t][i] = original - eps;
        let down = loss(model);
        model.params_mut()[t][i] = original;
        let numeric = (up - down) / (2.0 * eps);
        let analytic = grads.0[t][i];
        report.max_rel_error = report.max_rel_error.max(relative_error(analytic, numeric));
        report.max_abs_error = report.max_abs_error.max((analytic - numeric).abs());
    }
    report
}
