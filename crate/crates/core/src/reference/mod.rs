//! Ground-truth solvers: a periodic split-step Fourier integrator for the
//! scaled Schrödinger equation and an oscillatory quadrature of the free
//! propagator.

mod quadrature;
mod split_step;

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::wkb::Problem;

pub use quadrature::{free_quadrature, NODES_PER_WAVELENGTH, QUADRATURE_NODE_BUDGET};
pub use split_step::{evolve_split_step, evolve_split_step_with, SplitStepOptions};

/// Smallest admissible node count per axis.
pub const MIN_NODES: usize = 256;
/// Required nodes per de Broglie wavelength `2 pi eps / |xi|`.
pub const NODES_PER_DE_BROGLIE: f64 = 8.0;
/// Safety factor on the classical momentum bound for velocity growth.
pub const MOMENTUM_MARGIN: f64 = 1.25;
/// Fraction of each axis, at either end, forming the monitored outer shell.
pub const SHELL_FRACTION: f64 = 0.1;
/// Admissible share of the mass inside the outer shell.
pub const CONTAMINATION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub left: f64,
    pub length: f64,
    pub nodes: usize,
}

impl Axis {
    pub fn new(left: f64, length: f64, nodes: usize) -> Result<Self> {
        if !(length > 0.0) || !left.is_finite() || !length.is_finite() {
            return Err(Error::InvalidInput(format!(
                "axis needs a finite left end and length > 0, got {left}, {length}"
            )));
        }
        if nodes < MIN_NODES || !nodes.is_power_of_two() {
            return Err(Error::InvalidInput(format!(
                "axis node count must be a power of two >= {MIN_NODES}, got {nodes}"
            )));
        }
        Ok(Self { left, length, nodes })
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.nodes as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        self.left + i as f64 * self.spacing()
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.nodes).map(|i| self.coord(i)).collect()
    }

    /// Angular wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.nodes as i64;
        (0..n)
            .map(|j| {
                let j = if j < n / 2 { j } else { j - n };
                2.0 * PI * j as f64 / self.length
            })
            .collect()
    }

    /// Relative position of `x` along the axis, in `[0, 1)` inside the box.
    fn relative(&self, x: f64) -> f64 {
        (x - self.left) / self.length
    }
}

/// Periodic tensor grid in one or two dimensions; node `(i0, i1)` is stored
/// at `i0 * n1 + i1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGrid {
    pub axes: Vec<Axis>,
}

impl SpatialGrid {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(Error::InvalidInput(format!(
                "reference grids are 1- or 2-dimensional, got {} axes",
                axes.len()
            )));
        }
        Ok(Self { axes })
    }

    pub fn uniform(dim: usize, left: f64, length: f64, nodes: usize) -> Result<Self> {
        let axis = Axis::new(left, length, nodes)?;
        Self::new(vec![axis; dim])
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.nodes).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.nodes).collect()
    }

    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(Axis::spacing).product()
    }

    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        let mut rest = flat;
        for (k, a) in self.axes.iter().enumerate().rev() {
            idx[k] = rest % a.nodes;
            rest /= a.nodes;
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        self.axes.iter().zip(idx).fold(0, |acc, (a, &i)| acc * a.nodes + i)
    }

    pub fn node(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat)
            .iter()
            .zip(&self.axes)
            .map(|(&i, a)| a.coord(i))
            .collect()
    }

    /// Index of the node nearest to `x` on each axis (periodically wrapped).
    pub fn nearest(&self, x: &[f64]) -> Vec<usize> {
        self.axes
            .iter()
            .zip(x)
            .map(|(a, &v)| {
                let i = ((v - a.left) / a.spacing()).round() as i64;
                i.rem_euclid(a.nodes as i64) as usize
            })
            .collect()
    }

    /// Whether every coordinate of `x` lies in the inner part of the box that
    /// excludes the outer shell.
    pub fn in_guard_band(&self, x: &[f64]) -> bool {
        self.axes.iter().zip(x).all(|(a, &v)| {
            let r = a.relative(v);
            (SHELL_FRACTION..=1.0 - SHELL_FRACTION).contains(&r)
        })
    }

    /// `true` for nodes in the outer shell.
    pub fn shell_mask(&self) -> Vec<bool> {
        (0..self.len()).map(|i| !self.in_guard_band(&self.node(i))).collect()
    }

    /// Whether the spacing gives at least [`NODES_PER_DE_BROGLIE`] nodes per
    /// wavelength `2 pi eps / max_momentum`.
    pub fn resolves(&self, eps: f64, max_momentum: f64) -> bool {
        max_momentum <= 0.0
            || self
                .axes
                .iter()
                .all(|a| a.spacing() * NODES_PER_DE_BROGLIE * max_momentum <= 2.0 * PI * eps)
    }

    /// Same box with node counts doubled until [`SpatialGrid::resolves`] holds.
    pub fn refined_for(&self, eps: f64, max_momentum: f64) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(Error::InvalidInput(format!("eps must be > 0, got {eps}")));
        }
        let mut grid = self.clone();
        while !grid.resolves(eps, max_momentum) {
            for a in &mut grid.axes {
                a.nodes *= 2;
            }
            if grid.len() > 1 << 26 {
                return Err(Error::InvalidInput(format!(
                    "resolving momentum {max_momentum} at eps = {eps} needs more than 2^26 nodes"
                )));
            }
        }
        Ok(grid)
    }
}

/// Energy bound on the momentum reached by rays launched from the amplitude
/// support: `sqrt(max_supp(|grad S_in|^2 + 2V) - 2 min_box V)`, with the
/// maximum sampled on a lattice over the support and the minimum over the
/// grid nodes.
pub fn momentum_bound(problem: &Problem, grid: &SpatialGrid) -> f64 {
    let support = problem.amplitude.support();
    let n = problem.dim();
    let per_axis: usize = if n == 1 { 2001 } else { 201 };
    let total = per_axis.pow(n as u32);
    let mut top = f64::NEG_INFINITY;
    let mut y = vec![0.0; n];
    let mut g = vec![0.0; n];
    for flat in 0..total {
        let mut rest = flat;
        for k in (0..n).rev() {
            let frac = (rest % per_axis) as f64 / (per_axis - 1) as f64;
            y[k] = support.lower[k] + frac * (support.upper[k] - support.lower[k]);
            rest /= per_axis;
        }
        problem.phase.gradient(&y, &mut g);
        let e = g.iter().map(|v| v * v).sum::<f64>() + 2.0 * problem.potential.value(&y);
        top = top.max(e);
    }
    let bottom = (0..grid.len())
        .map(|i| problem.potential.value(&grid.node(i)))
        .fold(f64::INFINITY, f64::min);
    (top - 2.0 * bottom).max(0.0).sqrt()
}

/// `grid` refined until it resolves the problem at `eps` with
/// [`MOMENTUM_MARGIN`] on [`momentum_bound`].
pub fn resolved_grid(problem: &Problem, grid: &SpatialGrid, eps: f64) -> Result<SpatialGrid> {
    grid.refined_for(eps, MOMENTUM_MARGIN * momentum_bound(problem, grid))
}

/// Sampled wave function `psi_eps(t, .)` on a periodic grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveField {
    pub grid: SpatialGrid,
    pub t: f64,
    pub eps: f64,
    pub values: Vec<Complex64>,
}

impl WaveField {
    pub fn new(grid: SpatialGrid, t: f64, eps: f64, values: Vec<Complex64>) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(Error::InvalidInput(format!("eps must be > 0, got {eps}")));
        }
        if values.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, t, eps, values })
    }

    pub fn from_fn(grid: SpatialGrid, eps: f64, f: impl Fn(&[f64]) -> Complex64) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(&grid.node(i))).collect();
        Self::new(grid, 0.0, eps, values)
    }

    /// The WKB initial datum `a_in exp(i S_in / eps)` of a problem.
    pub fn initial_datum(grid: SpatialGrid, eps: f64, problem: &Problem) -> Result<Self> {
        if grid.dim() != problem.dim() {
            return Err(Error::InvalidInput(format!(
                "grid dimension {} differs from problem dimension {}",
                grid.dim(),
                problem.dim()
            )));
        }
        let support = problem.amplitude.support();
        if !grid.in_guard_band(&support.lower) || !grid.in_guard_band(&support.upper) {
            return Err(Error::InvalidInput(
                "the initial amplitude is not supported inside the guard band".into(),
            ));
        }
        Self::from_fn(grid, eps, |x| problem.initial_value(eps, x))
    }

    /// `||psi||^2`, the periodic trapezoid rule.
    pub fn mass(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn norm(&self) -> f64 {
        self.mass().sqrt()
    }

    /// Share of the mass lying in the outer shell of the box.
    pub fn shell_fraction(&self) -> f64 {
        shell_fraction(&self.grid.shell_mask(), &self.values)
    }

    /// Field translated so that node `i` holds `psi(x_i + shift)`, by exact
    /// band-limited (Fourier) interpolation.
    pub fn translated(&self, shift: &[f64]) -> Self {
        let mut fft = GridFft::new(&self.grid);
        let mut data = self.values.clone();
        fft.forward(&mut data);
        let ks: Vec<Vec<f64>> = self.grid.axes.iter().map(Axis::wavenumbers).collect();
        for (flat, v) in data.iter_mut().enumerate() {
            let idx = self.grid.multi_index(flat);
            let phase: f64 = idx.iter().zip(&ks).zip(shift).map(|((&i, k), s)| k[i] * s).sum();
            *v *= Complex64::from_polar(1.0, phase);
        }
        fft.inverse(&mut data);
        Self {
            values: data,
            ..self.clone()
        }
    }

    /// Band-limited interpolant of the field at arbitrary points.
    pub fn interpolant(&self) -> Interpolant {
        let mut fft = GridFft::new(&self.grid);
        let mut coeffs = self.values.clone();
        fft.forward(&mut coeffs);
        let n = self.grid.len() as f64;
        for c in &mut coeffs {
            *c /= n;
        }
        Interpolant {
            grid: self.grid.clone(),
            coeffs,
        }
    }
}

pub(crate) fn shell_fraction(mask: &[bool], values: &[Complex64]) -> f64 {
    let (mut shell, mut total) = (0.0, 0.0);
    for (v, &outer) in values.iter().zip(mask) {
        let m = v.norm_sqr();
        total += m;
        if outer {
            shell += m;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        shell / total
    }
}

/// Trigonometric interpolant `sum_k c_k exp(i k (x - left))`.
#[derive(Debug, Clone)]
pub struct Interpolant {
    grid: SpatialGrid,
    coeffs: Vec<Complex64>,
}

impl Interpolant {
    pub fn value(&self, x: &[f64]) -> Complex64 {
        // per-axis tables of exp(i k_j (x - left)), Nyquist mode symmetrized
        let tables: Vec<Vec<Complex64>> = self
            .grid
            .axes
            .iter()
            .zip(x)
            .map(|(a, &v)| {
                let n = a.nodes;
                a.wavenumbers()
                    .iter()
                    .enumerate()
                    .map(|(j, k)| {
                        let d = v - a.left;
                        if j == n / 2 {
                            Complex64::new((k * d).cos(), 0.0)
                        } else {
                            Complex64::from_polar(1.0, k * d)
                        }
                    })
                    .collect()
            })
            .collect();
        self.coeffs
            .iter()
            .enumerate()
            .map(|(flat, c)| {
                let idx = self.grid.multi_index(flat);
                idx.iter().zip(&tables).fold(*c, |acc, (&i, t)| acc * t[i])
            })
            .sum()
    }
}

/// Unnormalized forward and normalized inverse DFT over a 1- or 2-D grid.
pub(crate) struct GridFft {
    shape: Vec<usize>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
    column: Vec<Complex64>,
}

impl GridFft {
    pub(crate) fn new(grid: &SpatialGrid) -> Self {
        let mut planner = FftPlanner::new();
        let shape = grid.shape();
        Self {
            forward: shape.iter().map(|&n| planner.plan_fft_forward(n)).collect(),
            inverse: shape.iter().map(|&n| planner.plan_fft_inverse(n)).collect(),
            column: Vec::new(),
            shape,
        }
    }

    pub(crate) fn forward(&mut self, data: &mut [Complex64]) {
        let plans = self.forward.clone();
        self.apply(&plans, data);
    }

    pub(crate) fn inverse(&mut self, data: &mut [Complex64]) {
        let plans = self.inverse.clone();
        self.apply(&plans, data);
        let scale = 1.0 / data.len() as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }

    fn apply(&mut self, plans: &[Arc<dyn Fft<f64>>], data: &mut [Complex64]) {
        match self.shape[..] {
            [_] => plans[0].process(data),
            [n0, n1] => {
                plans[1].process(data);
                self.column.resize(n0, Complex64::new(0.0, 0.0));
                for j in 0..n1 {
                    for i in 0..n0 {
                        self.column[i] = data[i * n1 + j];
                    }
                    plans[0].process(&mut self.column);
                    for i in 0..n0 {
                        data[i * n1 + j] = self.column[i];
                    }
                }
            }
            _ => unreachable!("grids are 1- or 2-dimensional"),
        }
    }
}
