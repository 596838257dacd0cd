//! Finite-difference consistency checks for analytic derivative evaluators.

use crate::error::{Error, Result};

/// Step used by the consistency checks.
pub const FD_STEP: f64 = 1e-5;
/// Accepted relative error (floored at unit scale) between analytic and
/// central-difference derivatives.
pub const FD_TOLERANCE: f64 = 1e-5;

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(1.0)
}

/// Compares `gradient` against central differences of `value`, and `hessian`
/// (row-major `n x n`) against central differences of `gradient`.
pub(crate) fn check_scalar_field<V, G, H>(
    what: &'static str,
    n: usize,
    point: &[f64],
    value: V,
    gradient: G,
    hessian: H,
) -> Result<()>
where
    V: Fn(&[f64]) -> f64,
    G: Fn(&[f64], &mut [f64]),
    H: Fn(&[f64], &mut [f64]),
{
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n * n];
    gradient(point, &mut grad);
    hessian(point, &mut hess);

    let mut probe = point.to_vec();
    let mut gp = vec![0.0; n];
    let mut gm = vec![0.0; n];
    let mut worst = 0.0_f64;
    for k in 0..n {
        probe[k] = point[k] + FD_STEP;
        let vp = value(&probe);
        gradient(&probe, &mut gp);
        probe[k] = point[k] - FD_STEP;
        let vm = value(&probe);
        gradient(&probe, &mut gm);
        probe[k] = point[k];

        worst = worst.max(rel_err(grad[k], (vp - vm) / (2.0 * FD_STEP)));
        for i in 0..n {
            let fd = (gp[i] - gm[i]) / (2.0 * FD_STEP);
            worst = worst.max(rel_err(hess[i * n + k], fd));
        }
    }
    if worst > FD_TOLERANCE || !worst.is_finite() {
        return Err(Error::InconsistentDerivative {
            what,
            point: point.to_vec(),
            rel_err: worst,
        });
    }
    Ok(())
}
