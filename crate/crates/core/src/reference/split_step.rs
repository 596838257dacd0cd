use num_complex::Complex64;

use super::{shell_fraction, Axis, GridFft, WaveField, CONTAMINATION_TOL};
use crate::error::{Error, Result};
use crate::phase_space::{step_count, PotentialModel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitStepOptions {
    /// Fail with `BoundaryContamination` when more than
    /// [`CONTAMINATION_TOL`] of the mass enters the outer shell.
    pub monitor_boundary: bool,
    /// Steps between two boundary checks; the final state is always checked.
    pub check_every: usize,
}

impl Default for SplitStepOptions {
    fn default() -> Self {
        Self {
            monitor_boundary: true,
            check_every: 8,
        }
    }
}

/// Strang splitting with the boundary monitor enabled.
pub fn evolve_split_step(potential: &PotentialModel, field: &WaveField, t_final: f64, dt: f64) -> Result<WaveField> {
    evolve_split_step_with(potential, field, t_final, dt, SplitStepOptions::default())
}

/// Advances `field` to `t_final` with steps of at most `dt`:
/// `exp(-i V h / 2 eps)`, then the Fourier multiplier `exp(-i eps |k|^2 h / 2)`,
/// then `exp(-i V h / 2 eps)` again.
pub fn evolve_split_step_with(
    potential: &PotentialModel,
    field: &WaveField,
    t_final: f64,
    dt: f64,
    options: SplitStepOptions,
) -> Result<WaveField> {
    let grid = &field.grid;
    if potential.dim() != grid.dim() {
        return Err(Error::InvalidInput(format!(
            "potential dimension {} differs from grid dimension {}",
            potential.dim(),
            grid.dim()
        )));
    }
    if !(dt > 0.0) || !(t_final >= field.t) || !t_final.is_finite() {
        return Err(Error::InvalidInput(format!(
            "split-step needs dt > 0 and t_final >= t, got dt = {dt}, t_final = {t_final}, t = {}",
            field.t
        )));
    }
    let eps = field.eps;
    let duration = t_final - field.t;
    let mut out = field.clone();
    out.t = t_final;
    if duration == 0.0 {
        return Ok(out);
    }
    let steps = step_count(duration, dt);
    let h = duration / steps as f64;

    let half_v: Vec<Complex64> = (0..grid.len())
        .map(|i| Complex64::from_polar(1.0, -potential.value(&grid.node(i)) * h / (2.0 * eps)))
        .collect();
    let ks: Vec<Vec<f64>> = grid.axes.iter().map(Axis::wavenumbers).collect();
    let kinetic: Vec<Complex64> = (0..grid.len())
        .map(|i| {
            let k2: f64 = grid.multi_index(i).iter().zip(&ks).map(|(&j, k)| k[j] * k[j]).sum();
            Complex64::from_polar(1.0, -eps * k2 * h / 2.0)
        })
        .collect();

    let mask = if options.monitor_boundary {
        grid.shell_mask()
    } else {
        Vec::new()
    };
    let mut fft = GridFft::new(grid);
    let psi = &mut out.values;
    for step in 0..steps {
        for (v, p) in psi.iter_mut().zip(&half_v) {
            *v *= p;
        }
        fft.forward(psi);
        for (v, m) in psi.iter_mut().zip(&kinetic) {
            *v *= m;
        }
        fft.inverse(psi);
        for (v, p) in psi.iter_mut().zip(&half_v) {
            *v *= p;
        }
        if psi.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite {
                t: field.t + (step + 1) as f64 * h,
            });
        }
        let last = step + 1 == steps;
        if options.monitor_boundary && (last || (step + 1) % options.check_every.max(1) == 0) {
            let fraction = shell_fraction(&mask, psi);
            if fraction > CONTAMINATION_TOL {
                return Err(Error::BoundaryContamination {
                    t: field.t + (step + 1) as f64 * h,
                    fraction,
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::reference::SpatialGrid;

    #[test]
    fn plane_wave_is_an_eigenfunction() {
        let g = SpatialGrid::uniform(1, 0.0, 2.0 * PI, 256).unwrap();
        let (k, eps, t) = (5.0, 0.1, 1.7);
        let f = WaveField::from_fn(g, eps, |x| Complex64::from_polar(1.0, k * x[0])).unwrap();
        let opts = SplitStepOptions {
            monitor_boundary: false,
            ..Default::default()
        };
        let out = evolve_split_step_with(&PotentialModel::zero(1), &f, t, 0.01, opts).unwrap();
        for (i, v) in out.values.iter().enumerate() {
            let x = out.grid.node(i)[0];
            let exact = Complex64::from_polar(1.0, k * x - eps * k * k * t / 2.0);
            assert!((v - exact).norm() < 1e-10);
        }
    }

    #[test]
    fn boundary_contamination_is_reported() {
        let g = SpatialGrid::uniform(1, -5.0, 10.0, 512).unwrap();
        let f = WaveField::from_fn(g, 0.1, |x| {
            Complex64::from_polar((-(x[0] * x[0]) / 0.1).exp(), 20.0 * x[0])
        })
        .unwrap();
        let err = evolve_split_step(&PotentialModel::zero(1), &f, 2.0, 0.01).unwrap_err();
        assert!(matches!(err, Error::BoundaryContamination { .. }));
    }

    #[test]
    fn zero_duration_is_identity() {
        let g = SpatialGrid::uniform(1, -5.0, 10.0, 256).unwrap();
        let f = WaveField::from_fn(g, 0.1, |x| Complex64::new((-x[0] * x[0]).exp(), 0.0)).unwrap();
        let out = evolve_split_step(&PotentialModel::harmonic(1, 1.0), &f, 0.0, 0.01).unwrap();
        assert_eq!(out, f);
    }

    #[test]
    fn rejects_mismatched_potential() {
        let g = SpatialGrid::uniform(1, -5.0, 10.0, 256).unwrap();
        let f = WaveField::from_fn(g, 0.1, |_| Complex64::new(0.0, 0.0)).unwrap();
        assert!(evolve_split_step(&PotentialModel::zero(2), &f, 1.0, 0.01).is_err());
        assert!(evolve_split_step(&PotentialModel::zero(1), &f, -1.0, 0.01).is_err());
    }
}
