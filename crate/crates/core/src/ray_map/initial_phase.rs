use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::derivatives::check_scalar_field;
use crate::error::{Error, Result};

/// User-supplied initial phase `S_in` with analytic derivatives.
pub trait PhaseFunction: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn value(&self, y: &[f64]) -> f64;
    fn gradient(&self, y: &[f64], out: &mut [f64]);
    fn hessian(&self, y: &[f64], out: &mut [f64]);
    /// Whether `|grad S_in(y)| / |y| -> 0` is known to hold.
    fn sublinear(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone)]
pub enum InitialPhase {
    /// `S_in(y) = y^T A y / 2` with symmetric `A`.
    Quadratic {
        matrix: DMatrix<f64>,
    },
    /// `S_in(y) = amplitude * sum_i cos(wavenumber * y_i)`.
    Cosine {
        dim: usize,
        amplitude: f64,
        wavenumber: f64,
    },
    /// `S_in(y) = p . y`, a plane wave.
    Linear {
        momentum: Vec<f64>,
    },
    Custom(Arc<dyn PhaseFunction>),
}

impl InitialPhase {
    pub fn quadratic(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::InvalidInput("quadratic phase matrix must be square".into()));
        }
        if (&matrix - matrix.transpose()).amax() > 1e-12 * matrix.amax().max(1.0) {
            return Err(Error::InvalidInput("quadratic phase matrix must be symmetric".into()));
        }
        Ok(InitialPhase::Quadratic { matrix })
    }

    /// `S_in(y) = c |y|^2 / 2`.
    pub fn isotropic_quadratic(dim: usize, c: f64) -> Self {
        InitialPhase::Quadratic {
            matrix: DMatrix::identity(dim, dim) * c,
        }
    }

    pub fn cosine(dim: usize) -> Self {
        InitialPhase::Cosine {
            dim,
            amplitude: 1.0,
            wavenumber: 1.0,
        }
    }

    pub fn linear(momentum: Vec<f64>) -> Self {
        InitialPhase::Linear { momentum }
    }

    pub fn dim(&self) -> usize {
        match self {
            InitialPhase::Quadratic { matrix } => matrix.nrows(),
            InitialPhase::Cosine { dim, .. } => *dim,
            InitialPhase::Linear { momentum } => momentum.len(),
            InitialPhase::Custom(f) => f.dim(),
        }
    }

    pub fn tag(&self) -> String {
        match self {
            InitialPhase::Quadratic { matrix } => format!("quadratic({:?})", matrix.as_slice()),
            InitialPhase::Cosine {
                amplitude, wavenumber, ..
            } => format!("cosine({amplitude},{wavenumber})"),
            InitialPhase::Linear { momentum } => format!("linear({momentum:?})"),
            InitialPhase::Custom(f) => format!("custom({f:?})"),
        }
    }

    /// Whether the sublinear growth condition on `grad S_in` is known to hold.
    pub fn is_sublinear(&self) -> bool {
        match self {
            InitialPhase::Quadratic { matrix } => matrix.amax() == 0.0,
            InitialPhase::Cosine { .. } | InitialPhase::Linear { .. } => true,
            InitialPhase::Custom(f) => f.sublinear(),
        }
    }

    pub fn value(&self, y: &[f64]) -> f64 {
        match self {
            InitialPhase::Quadratic { matrix } => {
                let n = y.len();
                let mut acc = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        acc += y[i] * matrix[(i, j)] * y[j];
                    }
                }
                0.5 * acc
            }
            InitialPhase::Cosine {
                amplitude, wavenumber, ..
            } => amplitude * y.iter().map(|v| (wavenumber * v).cos()).sum::<f64>(),
            InitialPhase::Linear { momentum } => momentum.iter().zip(y).map(|(p, v)| p * v).sum(),
            InitialPhase::Custom(f) => f.value(y),
        }
    }

    pub fn gradient(&self, y: &[f64], out: &mut [f64]) {
        match self {
            InitialPhase::Quadratic { matrix } => {
                let n = y.len();
                for i in 0..n {
                    out[i] = (0..n).map(|j| matrix[(i, j)] * y[j]).sum();
                }
            }
            InitialPhase::Cosine {
                amplitude, wavenumber, ..
            } => {
                for (o, v) in out.iter_mut().zip(y) {
                    *o = -amplitude * wavenumber * (wavenumber * v).sin();
                }
            }
            InitialPhase::Linear { momentum } => out.copy_from_slice(momentum),
            InitialPhase::Custom(f) => f.gradient(y, out),
        }
    }

    pub fn hessian(&self, y: &[f64], out: &mut [f64]) {
        let n = y.len();
        match self {
            InitialPhase::Quadratic { matrix } => {
                for i in 0..n {
                    for j in 0..n {
                        out[i * n + j] = matrix[(i, j)];
                    }
                }
            }
            InitialPhase::Cosine {
                amplitude, wavenumber, ..
            } => {
                out.fill(0.0);
                for i in 0..n {
                    out[i * n + i] = -amplitude * wavenumber * wavenumber * (wavenumber * y[i]).cos();
                }
            }
            InitialPhase::Linear { .. } => out.fill(0.0),
            InitialPhase::Custom(f) => f.hessian(y, out),
        }
    }

    pub fn gradient_vec(&self, y: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; y.len()];
        self.gradient(y, &mut g);
        g
    }

    pub fn hessian_matrix(&self, y: &[f64]) -> DMatrix<f64> {
        let n = y.len();
        let mut h = vec![0.0; n * n];
        self.hessian(y, &mut h);
        DMatrix::from_row_slice(n, n, &h)
    }

    pub fn check_derivatives(&self, points: &[Vec<f64>]) -> Result<()> {
        let n = self.dim();
        for p in points {
            if p.len() != n {
                return Err(Error::InvalidInput(format!(
                    "probe point has length {} but the phase has dimension {n}",
                    p.len()
                )));
            }
            check_scalar_field(
                "initial phase",
                n,
                p,
                |y| self.value(y),
                |y, g| self.gradient(y, g),
                |y, h| self.hessian(y, h),
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_are_consistent() {
        let pts = vec![vec![0.4, -0.7], vec![2.0, 3.1]];
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.3, 0.3, 0.5]);
        for s in [
            InitialPhase::quadratic(a).unwrap(),
            InitialPhase::cosine(2),
            InitialPhase::linear(vec![0.2, -1.0]),
        ] {
            s.check_derivatives(&pts).unwrap();
        }
    }

    #[test]
    fn sublinearity_flags() {
        assert!(InitialPhase::cosine(1).is_sublinear());
        assert!(!InitialPhase::isotropic_quadratic(1, -1.0).is_sublinear());
        assert!(InitialPhase::linear(vec![1.0]).is_sublinear());
    }

    #[test]
    fn rejects_asymmetric_matrix() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(InitialPhase::quadratic(a).is_err());
    }
}
