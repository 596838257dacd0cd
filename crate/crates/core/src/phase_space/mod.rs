//! Hamiltonian flow of `H(x, xi) = |xi|^2 / 2 + V(x)` integrated jointly with
//! its linearization and the action along the trajectory.
//!
//! The combined system
//!
//! ```text
//! x'  = xi
//! xi' = -grad V(x)
//! M'  = [[0, I], [-hess V(x), 0]] M
//! S'  = |xi|^2 / 2 - V(x)
//! ```
//!
//! is advanced with classical fourth-order Runge–Kutta, so the action picks up
//! the Simpson weighting of the stages and stays at integrator order.

mod potential;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub use potential::{Potential, PotentialModel};

/// Default integrator step.
pub const DEFAULT_DT: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
}

impl PhasePoint {
    pub fn new(x: Vec<f64>, xi: Vec<f64>) -> Self {
        Self { x, xi }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

/// Snapshot of the flow at time `t`.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub t: f64,
    pub point: PhasePoint,
    /// `2N x 2N` linearization `D Phi_t`, ordered `(x, xi)` in both rows and
    /// columns.
    pub jac: DMatrix<f64>,
    pub action: f64,
}

impl FlowState {
    /// `D_y X_t`, the upper-left block of the linearization.
    pub fn dx_dy(&self) -> DMatrix<f64> {
        let n = self.point.dim();
        self.jac.view((0, 0), (n, n)).into_owned()
    }

    /// `D_eta X_t`, the upper-right block of the linearization.
    pub fn dx_deta(&self) -> DMatrix<f64> {
        let n = self.point.dim();
        self.jac.view((0, n), (n, n)).into_owned()
    }
}

/// Incremental RK4 integrator for the combined state.
///
/// Cloning is cheap enough to branch off partial steps, which is how the
/// caustic scan refines crossing times.
#[derive(Debug, Clone)]
pub struct PhaseFlow<'a> {
    potential: &'a PotentialModel,
    n: usize,
    t: f64,
    state: Vec<f64>,
    stages: [Vec<f64>; 4],
    probe: Vec<f64>,
    grad: Vec<f64>,
    hess: Vec<f64>,
}

impl<'a> PhaseFlow<'a> {
    pub fn new(potential: &'a PotentialModel, y: &[f64], eta: &[f64]) -> Result<Self> {
        let n = potential.dim();
        if y.len() != n || eta.len() != n {
            return Err(Error::InvalidInput(format!(
                "initial point has lengths ({}, {}) but the potential has dimension {n}",
                y.len(),
                eta.len()
            )));
        }
        if !y.iter().chain(eta).all(|v| v.is_finite()) {
            return Err(Error::NonFinite { t: 0.0 });
        }
        let len = 2 * n + 4 * n * n + 1;
        let mut state = vec![0.0; len];
        state[..n].copy_from_slice(y);
        state[n..2 * n].copy_from_slice(eta);
        let m = 2 * n;
        for i in 0..m {
            state[2 * n + i * m + i] = 1.0;
        }
        Ok(Self {
            potential,
            n,
            t: 0.0,
            state,
            stages: std::array::from_fn(|_| vec![0.0; len]),
            probe: vec![0.0; len],
            grad: vec![0.0; n],
            hess: vec![0.0; n * n],
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn position(&self) -> &[f64] {
        &self.state[..self.n]
    }

    pub fn momentum(&self) -> &[f64] {
        &self.state[self.n..2 * self.n]
    }

    pub fn action(&self) -> f64 {
        self.state[self.state.len() - 1]
    }

    /// Entry `(row, col)` of the `2N x 2N` linearization.
    pub fn jac_entry(&self, row: usize, col: usize) -> f64 {
        self.state[2 * self.n + row * 2 * self.n + col]
    }

    pub fn snapshot(&self) -> FlowState {
        let n = self.n;
        let m = 2 * n;
        FlowState {
            t: self.t,
            point: PhasePoint::new(self.position().to_vec(), self.momentum().to_vec()),
            jac: DMatrix::from_row_slice(m, m, &self.state[2 * n..2 * n + m * m]),
            action: self.action(),
        }
    }

    fn rhs(potential: &PotentialModel, n: usize, grad: &mut [f64], hess: &mut [f64], s: &[f64], out: &mut [f64]) {
        let m = 2 * n;
        let (x, rest) = s.split_at(n);
        let (xi, rest) = rest.split_at(n);
        let jac = &rest[..m * m];

        potential.gradient(x, grad);
        potential.hessian(x, hess);

        out[..n].copy_from_slice(xi);
        for k in 0..n {
            out[n + k] = -grad[k];
        }
        let dj = &mut out[2 * n..2 * n + m * m];
        // top block rows of M' are the bottom block rows of M
        dj[..n * m].copy_from_slice(&jac[n * m..]);
        for i in 0..n {
            for c in 0..m {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += hess[i * n + k] * jac[k * m + c];
                }
                dj[(n + i) * m + c] = -acc;
            }
        }
        let kinetic: f64 = 0.5 * xi.iter().map(|v| v * v).sum::<f64>();
        out[2 * n + m * m] = kinetic - potential.value(x);
    }

    /// One RK4 step of size `h`.
    pub fn step(&mut self, h: f64) -> Result<()> {
        let Self {
            potential,
            n,
            state,
            stages,
            probe,
            grad,
            hess,
            ..
        } = self;
        let n = *n;
        let len = state.len();

        Self::rhs(potential, n, grad, hess, state, &mut stages[0]);
        for i in 0..len {
            probe[i] = state[i] + 0.5 * h * stages[0][i];
        }
        Self::rhs(potential, n, grad, hess, probe, &mut stages[1]);
        for i in 0..len {
            probe[i] = state[i] + 0.5 * h * stages[1][i];
        }
        Self::rhs(potential, n, grad, hess, probe, &mut stages[2]);
        for i in 0..len {
            probe[i] = state[i] + h * stages[2][i];
        }
        Self::rhs(potential, n, grad, hess, probe, &mut stages[3]);
        for i in 0..len {
            state[i] += h / 6.0 * (stages[0][i] + 2.0 * stages[1][i] + 2.0 * stages[2][i] + stages[3][i]);
        }
        self.t += h;
        if !self.state.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { t: self.t });
        }
        Ok(())
    }

    /// Advances by `duration` in equal steps no longer than `dt`.
    ///
    /// Under a free potential RK4 reproduces the straight-line flow exactly,
    /// so the whole interval is taken as a single step.
    pub fn advance(&mut self, duration: f64, dt: f64) -> Result<()> {
        if !(dt > 0.0) || !(duration >= 0.0) || !duration.is_finite() {
            return Err(Error::InvalidInput(format!(
                "cannot advance by {duration} with step {dt}"
            )));
        }
        if duration == 0.0 {
            return Ok(());
        }
        let steps = if self.potential.is_free() {
            1
        } else {
            step_count(duration, dt)
        };
        let h = duration / steps as f64;
        for _ in 0..steps {
            self.step(h)?;
        }
        Ok(())
    }
}

/// Number of equal steps of length at most `dt` covering `duration`.
pub(crate) fn step_count(duration: f64, dt: f64) -> usize {
    ((duration / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize
}

/// Integrates the flow from `(y, eta)` to time `t` with step at most `dt`.
pub fn flow(potential: &PotentialModel, y: &[f64], eta: &[f64], t: f64, dt: f64) -> Result<FlowState> {
    if t < 0.0 || !t.is_finite() {
        return Err(Error::InvalidInput(format!("flow time must be >= 0, got {t}")));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidInput(format!("step must be > 0, got {dt}")));
    }
    let mut f = PhaseFlow::new(potential, y, eta)?;
    f.advance(t, dt)?;
    Ok(f.snapshot())
}

pub fn hamiltonian(potential: &PotentialModel, p: &PhasePoint) -> f64 {
    0.5 * p.xi.iter().map(|v| v * v).sum::<f64>() + potential.value(&p.x)
}

/// The standard symplectic form `[[0, I], [-I, 0]]` of size `2n`.
pub fn symplectic_form(n: usize) -> DMatrix<f64> {
    let mut omega = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        omega[(i, n + i)] = 1.0;
        omega[(n + i, i)] = -1.0;
    }
    omega
}

/// `max |M^T Omega M - Omega|` over all entries.
pub fn symplectic_defect(jac: &DMatrix<f64>) -> f64 {
    let n = jac.nrows() / 2;
    let omega = symplectic_form(n);
    let d = jac.transpose() * &omega * jac - omega;
    d.amax()
}
