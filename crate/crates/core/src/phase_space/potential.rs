use std::fmt;
use std::sync::Arc;

use crate::derivatives::check_scalar_field;
use crate::error::{Error, Result};

/// A smooth external potential `V` with analytic first and second derivatives.
///
/// The Hessian is written row-major into an `n x n` buffer.
pub trait Potential: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], out: &mut [f64]);
    fn hessian(&self, x: &[f64], out: &mut [f64]);
}

/// The potentials the toolkit knows about, plus an escape hatch for
/// user-supplied models.
#[derive(Debug, Clone)]
pub enum PotentialModel {
    /// `V = 0`.
    Zero {
        dim: usize,
    },
    /// `V = omega^2 |x|^2 / 2`.
    Harmonic {
        dim: usize,
        omega: f64,
    },
    /// `V = v0 * sum_i cos(k x_i)`.
    Cosine {
        dim: usize,
        v0: f64,
        k: f64,
    },
    Custom(Arc<dyn Potential>),
}

impl PotentialModel {
    pub fn zero(dim: usize) -> Self {
        PotentialModel::Zero { dim }
    }

    pub fn harmonic(dim: usize, omega: f64) -> Self {
        PotentialModel::Harmonic { dim, omega }
    }

    pub fn cosine(dim: usize, v0: f64, k: f64) -> Self {
        PotentialModel::Cosine { dim, v0, k }
    }

    pub fn dim(&self) -> usize {
        match self {
            PotentialModel::Zero { dim }
            | PotentialModel::Harmonic { dim, .. }
            | PotentialModel::Cosine { dim, .. } => *dim,
            PotentialModel::Custom(p) => p.dim(),
        }
    }

    /// True when the force vanishes identically, so rays are straight lines.
    pub fn is_free(&self) -> bool {
        match self {
            PotentialModel::Zero { .. } => true,
            PotentialModel::Cosine { v0, .. } => *v0 == 0.0,
            PotentialModel::Harmonic { omega, .. } => *omega == 0.0,
            PotentialModel::Custom(_) => false,
        }
    }

    pub fn tag(&self) -> String {
        match self {
            PotentialModel::Zero { .. } => "zero".into(),
            PotentialModel::Harmonic { omega, .. } => format!("harmonic({omega})"),
            PotentialModel::Cosine { v0, k, .. } => format!("cosine({v0},{k})"),
            PotentialModel::Custom(p) => format!("custom({p:?})"),
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            PotentialModel::Zero { .. } => 0.0,
            PotentialModel::Harmonic { omega, .. } => 0.5 * omega * omega * x.iter().map(|v| v * v).sum::<f64>(),
            PotentialModel::Cosine { v0, k, .. } => v0 * x.iter().map(|v| (k * v).cos()).sum::<f64>(),
            PotentialModel::Custom(p) => p.value(x),
        }
    }

    pub fn gradient(&self, x: &[f64], out: &mut [f64]) {
        match self {
            PotentialModel::Zero { .. } => out.fill(0.0),
            PotentialModel::Harmonic { omega, .. } => {
                let w2 = omega * omega;
                for (o, v) in out.iter_mut().zip(x) {
                    *o = w2 * v;
                }
            }
            PotentialModel::Cosine { v0, k, .. } => {
                for (o, v) in out.iter_mut().zip(x) {
                    *o = -v0 * k * (k * v).sin();
                }
            }
            PotentialModel::Custom(p) => p.gradient(x, out),
        }
    }

    pub fn hessian(&self, x: &[f64], out: &mut [f64]) {
        let n = x.len();
        match self {
            PotentialModel::Zero { .. } => out.fill(0.0),
            PotentialModel::Harmonic { omega, .. } => {
                out.fill(0.0);
                for i in 0..n {
                    out[i * n + i] = omega * omega;
                }
            }
            PotentialModel::Cosine { v0, k, .. } => {
                out.fill(0.0);
                for i in 0..n {
                    out[i * n + i] = -v0 * k * k * (k * x[i]).cos();
                }
            }
            PotentialModel::Custom(p) => p.hessian(x, out),
        }
    }

    /// Checks the gradient and Hessian against central differences at each
    /// of `points`.
    pub fn check_derivatives(&self, points: &[Vec<f64>]) -> Result<()> {
        let n = self.dim();
        for p in points {
            if p.len() != n {
                return Err(Error::InvalidInput(format!(
                    "probe point has length {} but the potential has dimension {n}",
                    p.len()
                )));
            }
            check_scalar_field(
                "potential",
                n,
                p,
                |x| self.value(x),
                |x, g| self.gradient(x, g),
                |x, h| self.hessian(x, h),
            )?;
        }
        Ok(())
    }
}
