//! The ray map `F_t(y) = X_t(y, grad S_in(y))`, its Jacobian, caustic
//! crossings along a single ray, and the preimages `y_j(t, x)` of a point.

mod branches;
mod initial_phase;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::phase_space::{step_count, PhaseFlow, PotentialModel, DEFAULT_DT};

pub use branches::{Branch, BranchSearch, SearchBox};
pub use initial_phase::{InitialPhase, PhaseFunction};

/// Jacobians below this value mark a preimage as caustic-proximal.
pub const DEFAULT_CAUSTIC_THRESHOLD: f64 = 1e-6;
/// Resolution of the bisection that refines caustic crossing times.
pub const CROSSING_RESOLUTION: f64 = 1e-10;
/// `|d/ds det DF_s|` above this value counts as a transversal crossing.
pub const TRANSVERSALITY_THRESHOLD: f64 = 1e-6;

/// Value of the ray map at one launch point.
#[derive(Debug, Clone)]
pub struct RayMapValue {
    /// `F_t(y)`.
    pub x: Vec<f64>,
    /// `DF_t(y)`.
    pub df: DMatrix<f64>,
    /// `J_t(y) = |det DF_t(y)|`.
    pub jacobian: f64,
    /// `Xi_t(y, grad S_in(y))`, the ray momentum on arrival.
    pub momentum: Vec<f64>,
    /// Action accumulated along the ray.
    pub action: f64,
}

impl RayMapValue {
    /// Signed determinant of `DF_t(y)`.
    pub fn det(&self) -> f64 {
        self.df.determinant()
    }
}

/// A caustic crossing `s_k` of `s -> det DF_s(y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CausticCrossing {
    pub s: f64,
    pub transversal: bool,
    /// Central-difference estimate of `d/ds det DF_s(y)` at `s`.
    pub slope: f64,
}

/// Rays launched from the Lagrangian manifold `xi = grad S_in(y)` under a
/// potential.
#[derive(Debug, Clone, Copy)]
pub struct RayMap<'a> {
    pub potential: &'a PotentialModel,
    pub phase: &'a InitialPhase,
    /// Integrator step for the underlying flow.
    pub dt: f64,
    pub caustic_threshold: f64,
}

fn df_from_flow(flow: &PhaseFlow<'_>, hess_s: &DMatrix<f64>) -> DMatrix<f64> {
    let n = flow.dim();
    DMatrix::from_fn(n, n, |i, j| {
        let mut v = flow.jac_entry(i, j);
        for k in 0..n {
            v += flow.jac_entry(i, n + k) * hess_s[(k, j)];
        }
        v
    })
}

impl<'a> RayMap<'a> {
    pub fn new(potential: &'a PotentialModel, phase: &'a InitialPhase) -> Result<Self> {
        if potential.dim() != phase.dim() {
            return Err(Error::InvalidInput(format!(
                "potential has dimension {} but the initial phase has dimension {}",
                potential.dim(),
                phase.dim()
            )));
        }
        Ok(Self {
            potential,
            phase,
            dt: DEFAULT_DT,
            caustic_threshold: DEFAULT_CAUSTIC_THRESHOLD,
        })
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_caustic_threshold(mut self, threshold: f64) -> Self {
        self.caustic_threshold = threshold;
        self
    }

    pub fn dim(&self) -> usize {
        self.potential.dim()
    }

    fn launch(&self, y: &[f64]) -> Result<PhaseFlow<'a>> {
        if y.len() != self.dim() {
            return Err(Error::InvalidInput(format!(
                "launch point has length {} but the problem has dimension {}",
                y.len(),
                self.dim()
            )));
        }
        PhaseFlow::new(self.potential, y, &self.phase.gradient_vec(y))
    }

    /// Evaluates `F_t(y)`, `DF_t(y)` and `J_t(y)`.
    pub fn ray_map(&self, y: &[f64], t: f64) -> Result<RayMapValue> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::InvalidInput(format!("ray map time must be >= 0, got {t}")));
        }
        let mut flow = self.launch(y)?;
        flow.advance(t, self.dt)?;
        let df = df_from_flow(&flow, &self.phase.hessian_matrix(y));
        let jacobian = df.determinant().abs();
        Ok(RayMapValue {
            x: flow.position().to_vec(),
            momentum: flow.momentum().to_vec(),
            action: flow.action(),
            df,
            jacobian,
        })
    }

    /// Scans `d(s) = det DF_s(y)` for `s` in `[0, t_max]` on a grid of step at
    /// most `scan_dt` and refines every sign change by bisection.
    ///
    /// A grid-level local minimum of `|d|` below the caustic threshold without
    /// a sign change is reported as a non-transversal touch. The caller must
    /// pick `scan_dt` small enough that `d` changes sign at most once per step.
    pub fn caustic_times(&self, y: &[f64], t_max: f64, scan_dt: f64) -> Result<Vec<CausticCrossing>> {
        if !(t_max >= 0.0) || !(scan_dt > 0.0) {
            return Err(Error::InvalidInput(format!(
                "caustic scan needs t_max >= 0 and scan_dt > 0, got {t_max} and {scan_dt}"
            )));
        }
        let hess_s = self.phase.hessian_matrix(y);
        let mut flow = self.launch(y)?;
        let mut crossings = Vec::new();
        if t_max == 0.0 {
            return Ok(crossings);
        }

        let steps = step_count(t_max, scan_dt.min(self.dt));
        let h = t_max / steps as f64;
        let det_at = |base: &PhaseFlow<'a>, offset: f64| -> Result<f64> {
            let mut f = base.clone();
            if offset > 0.0 {
                f.advance(offset, h)?;
            }
            Ok(df_from_flow(&f, &hess_s).determinant())
        };

        // last node where d was nonzero, with its flow state
        let mut anchor = flow.clone();
        let mut anchor_det = 1.0_f64;
        let mut prev_det = 1.0_f64;
        let mut prev_prev_det = f64::INFINITY;
        let mut crossed_at = None;

        for k in 1..=steps {
            flow.step(h)?;
            let s_k = if k == steps { t_max } else { k as f64 * h };
            let d = df_from_flow(&flow, &hess_s).determinant();

            if d != 0.0 && d.signum() != anchor_det.signum() {
                let (mut lo, mut hi) = (0.0, s_k - anchor.time());
                let lo_sign = anchor_det.signum();
                while hi - lo > CROSSING_RESOLUTION {
                    let mid = 0.5 * (lo + hi);
                    let dm = det_at(&anchor, mid)?;
                    if dm == 0.0 {
                        lo = mid;
                        hi = mid;
                    } else if dm.signum() == lo_sign {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let root = 0.5 * (lo + hi);
                let delta = 1e-6_f64.min(0.5 * root.max(1e-9));
                let slope = (det_at(&anchor, root + delta)? - det_at(&anchor, (root - delta).max(0.0))?)
                    / (root + delta - (root - delta).max(0.0));
                crossings.push(CausticCrossing {
                    s: anchor.time() + root,
                    transversal: slope.abs() > TRANSVERSALITY_THRESHOLD,
                    slope,
                });
                crossed_at = Some(k);
            } else if d != 0.0 && crossed_at != Some(k - 1) {
                // same sign as before: look for a grid-level touch at the previous node
                let touched = prev_det == 0.0
                    || (prev_det.abs() < self.caustic_threshold
                        && prev_det.abs() <= prev_prev_det.abs()
                        && prev_det.abs() <= d.abs());
                if touched && k >= 2 {
                    crossings.push(CausticCrossing {
                        s: (k - 1) as f64 * h,
                        transversal: false,
                        slope: (d - prev_prev_det) / (2.0 * h),
                    });
                }
            }

            if d != 0.0 {
                anchor = flow.clone();
                anchor_det = d;
            } else if k == steps {
                crossings.push(CausticCrossing {
                    s: t_max,
                    transversal: false,
                    slope: 0.0,
                });
            }
            prev_prev_det = prev_det;
            prev_det = d;
        }
        Ok(crossings)
    }
}
