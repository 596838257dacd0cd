//! Discrete Wigner transform
//!
//! ```text
//! W_eps(x, xi) = (2 pi)^(-N) int exp(-i xi . y) psi(x + eps y / 2) conj(psi(x - eps y / 2)) dy
//! ```
//!
//! of a sampled wave field, and the momentum-window masses that approximate
//! its classical limit `sum_j |a_in(y_j)|^2 / J_t(y_j) delta(xi - grad S_j)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::reference::{GridFft, WaveField, SHELL_FRACTION};
use crate::wkb::Problem;

/// Relative size of the correlation at the lag-window edge that counts as
/// clipping.
pub const CLIP_TOL: f64 = 1e-8;
/// Admissible imaginary residue of the transform, relative to `max(1, max|W|)`.
pub const IMAG_TOL: f64 = 1e-8;
/// Default full width of the momentum windows.
pub const DEFAULT_WINDOW_WIDTH: f64 = 0.2;
/// Cross-term periods `2 pi eps / |xi_j - xi_k|` covered by the automatic
/// position average of [`concentration_weights`].
pub const CROSS_TERM_PERIODS: f64 = 3.0;

/// Uniform tensor grid of momenta.
#[derive(Debug, Clone, PartialEq)]
pub struct XiGrid {
    pub lower: Vec<f64>,
    pub spacing: Vec<f64>,
    pub counts: Vec<usize>,
}

impl XiGrid {
    pub fn new(lower: Vec<f64>, spacing: Vec<f64>, counts: Vec<usize>) -> Result<Self> {
        if lower.is_empty() || lower.len() != spacing.len() || lower.len() != counts.len() {
            return Err(Error::InvalidInput("xi grid axes have inconsistent lengths".into()));
        }
        if spacing.iter().any(|h| !(*h > 0.0)) || counts.contains(&0) {
            return Err(Error::InvalidInput("xi grid needs positive spacings and counts".into()));
        }
        Ok(Self { lower, spacing, counts })
    }

    /// `count` equispaced momenta from `lo` to `hi` inclusive.
    pub fn linspace(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if count < 2 || !(hi > lo) {
            return Err(Error::InvalidInput(format!(
                "bad momentum range [{lo}, {hi}] x {count}"
            )));
        }
        Self::new(vec![lo], vec![(hi - lo) / (count - 1) as f64], vec![count])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn node(&self, flat: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        let mut rest = flat;
        for k in (0..self.dim()).rev() {
            out[k] = self.lower[k] + (rest % self.counts[k]) as f64 * self.spacing[k];
            rest /= self.counts[k];
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WignerSlice {
    pub x: Vec<f64>,
    pub xi_grid: XiGrid,
    pub values: Vec<f64>,
}

impl WignerSlice {
    /// `sum W dxi`, which approximates `|psi(x)|^2`.
    pub fn marginal(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.xi_grid.cell_volume()
    }

    pub fn argmax(&self) -> Vec<f64> {
        let best = self
            .values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map_or(0, |(i, _)| i);
        self.xi_grid.node(best)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct WignerOptions {
    /// Truncate the lag sum at this many nodes per axis, wrapping
    /// periodically, instead of using the whole guard band. Needed for
    /// fields that are not localized, such as plane waves.
    pub max_lag: Option<usize>,
}

/// The momentum grid on which the transform is one FFT: spacing
/// `pi eps / L` per axis and one sample per spatial node.
pub fn natural_xi_grid(field: &WaveField) -> XiGrid {
    let spacing: Vec<f64> = field.grid.axes.iter().map(|a| PI * field.eps / a.length).collect();
    let counts = field.grid.shape();
    let lower = spacing.iter().zip(&counts).map(|(h, &n)| -h * (n / 2) as f64).collect();
    XiGrid { lower, spacing, counts }
}

pub fn wigner_transform(field: &WaveField, x: &[f64], xi_grid: &XiGrid) -> Result<WignerSlice> {
    wigner_transform_with(field, x, xi_grid, WignerOptions::default())
}

pub fn wigner_transform_with(
    field: &WaveField,
    x: &[f64],
    xi_grid: &XiGrid,
    options: WignerOptions,
) -> Result<WignerSlice> {
    let grid = &field.grid;
    let n = grid.dim();
    if x.len() != n || xi_grid.dim() != n {
        return Err(Error::InvalidInput(format!(
            "point of length {} and xi grid of dimension {} for a {n}-dimensional field",
            x.len(),
            xi_grid.dim()
        )));
    }
    let centre = grid.nearest(x);
    let node = grid.node(grid.flat_index(&centre));
    let offset: Vec<f64> = x.iter().zip(&node).map(|(a, b)| a - b).collect();
    let on_node = offset
        .iter()
        .zip(&grid.axes)
        .all(|(d, a)| d.abs() <= 1e-9 * a.spacing());
    let shifted;
    let field = if on_node {
        field
    } else {
        shifted = field.translated(&offset);
        &shifted
    };

    let corr = Correlation::sample(field, &centre, options.max_lag)?;
    let dy: Vec<f64> = grid.axes.iter().map(|a| 2.0 * a.spacing() / field.eps).collect();
    let prefactor = dy.iter().product::<f64>() / (2.0 * PI).powi(n as i32);

    let complex = if *xi_grid == natural_xi_grid(field) {
        corr.transform_fft(field, prefactor)
    } else {
        corr.transform_direct(xi_grid, &dy, prefactor)
    };
    let scale = complex.iter().map(|v| v.re.abs()).fold(1.0, f64::max);
    let imag = complex.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
    if imag > IMAG_TOL * scale {
        return Err(Error::InvalidInput(format!(
            "Wigner transform has imaginary residue {imag:.3e}"
        )));
    }
    Ok(WignerSlice {
        x: x.to_vec(),
        xi_grid: xi_grid.clone(),
        values: complex.iter().map(|v| v.re).collect(),
    })
}

/// `psi(x + m dx) conj(psi(x - m dx))` over a symmetric box of lags `m`.
struct Correlation {
    half: Vec<usize>,
    values: Vec<Complex64>,
}

impl Correlation {
    fn sample(field: &WaveField, centre: &[usize], max_lag: Option<usize>) -> Result<Self> {
        let grid = &field.grid;
        let mut half = Vec::with_capacity(grid.dim());
        for (a, &i) in grid.axes.iter().zip(centre) {
            let cap = a.nodes / 2 - 1;
            let m = match max_lag {
                Some(m) => m.min(cap),
                None => {
                    let lo = (SHELL_FRACTION * a.nodes as f64).ceil() as usize;
                    let hi = ((1.0 - SHELL_FRACTION) * a.nodes as f64).floor() as usize;
                    if i < lo || i > hi {
                        return Err(Error::InvalidInput("Wigner point lies outside the guard band".into()));
                    }
                    (i - lo).min(hi - i).min(cap)
                }
            };
            half.push(m);
        }
        let counts: Vec<usize> = half.iter().map(|m| 2 * m + 1).collect();
        let total: usize = counts.iter().product();
        let mut values = Vec::with_capacity(total);
        let mut plus = vec![0; centre.len()];
        let mut minus = vec![0; centre.len()];
        for flat in 0..total {
            let lag = lag_of(flat, &counts, &half);
            for (k, a) in grid.axes.iter().enumerate() {
                let nn = a.nodes as i64;
                plus[k] = (centre[k] as i64 + lag[k]).rem_euclid(nn) as usize;
                minus[k] = (centre[k] as i64 - lag[k]).rem_euclid(nn) as usize;
            }
            values.push(field.values[grid.flat_index(&plus)] * field.values[grid.flat_index(&minus)].conj());
        }
        let corr = Self { half, values };
        if max_lag.is_none() {
            let peak = corr.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
            if peak > 0.0 {
                let edge = (0..total)
                    .filter(|&f| {
                        lag_of(f, &counts, &corr.half)
                            .iter()
                            .zip(&corr.half)
                            .any(|(l, &m)| l.unsigned_abs() as usize == m)
                    })
                    .map(|f| corr.values[f].norm())
                    .fold(0.0, f64::max)
                    / peak;
                if edge > CLIP_TOL {
                    return Err(Error::WindowClipped { edge });
                }
            }
        }
        Ok(corr)
    }

    fn counts(&self) -> Vec<usize> {
        self.half.iter().map(|m| 2 * m + 1).collect()
    }

    fn transform_fft(&self, field: &WaveField, prefactor: f64) -> Vec<Complex64> {
        let grid = &field.grid;
        let shape = grid.shape();
        let counts = self.counts();
        let mut data = vec![Complex64::new(0.0, 0.0); grid.len()];
        let mut idx = vec![0; shape.len()];
        for (flat, c) in self.values.iter().enumerate() {
            let lag = lag_of(flat, &counts, &self.half);
            for k in 0..shape.len() {
                idx[k] = lag[k].rem_euclid(shape[k] as i64) as usize;
            }
            data[grid.flat_index(&idx)] = *c;
        }
        GridFft::new(grid).forward(&mut data);
        // reorder from FFT order to ascending momenta
        let mut out = vec![Complex64::new(0.0, 0.0); data.len()];
        for (flat, v) in data.iter().enumerate() {
            let src = grid.multi_index(flat);
            for k in 0..shape.len() {
                idx[k] = (src[k] + shape[k] / 2) % shape[k];
            }
            out[grid.flat_index(&idx)] = v * prefactor;
        }
        out
    }

    fn transform_direct(&self, xi_grid: &XiGrid, dy: &[f64], prefactor: f64) -> Vec<Complex64> {
        let counts = self.counts();
        let lags: Vec<Vec<f64>> = (0..self.values.len())
            .map(|f| {
                lag_of(f, &counts, &self.half)
                    .iter()
                    .zip(dy)
                    .map(|(&l, h)| l as f64 * h)
                    .collect()
            })
            .collect();
        (0..xi_grid.len())
            .into_par_iter()
            .map(|k| {
                let xi = xi_grid.node(k);
                let sum: Complex64 = self
                    .values
                    .iter()
                    .zip(&lags)
                    .filter(|(c, _)| c.norm_sqr() > 0.0)
                    .map(|(c, y)| {
                        let arg: f64 = xi.iter().zip(y).map(|(a, b)| a * b).sum();
                        c * Complex64::from_polar(1.0, -arg)
                    })
                    .sum();
                sum * prefactor
            })
            .collect()
    }
}

fn lag_of(flat: usize, counts: &[usize], half: &[usize]) -> Vec<i64> {
    let mut out = vec![0; counts.len()];
    let mut rest = flat;
    for k in (0..counts.len()).rev() {
        out[k] = (rest % counts[k]) as i64 - half[k] as i64;
        rest /= counts[k];
    }
    out
}

/// Plateau window: 1 for `|d| <= width / 2`, smoothly down to 0 at
/// `|d| = width`.
pub fn momentum_window(d: f64, width: f64) -> f64 {
    let s = (d.abs() - 0.5 * width) / (0.5 * width);
    if s <= 0.0 {
        1.0
    } else if s >= 1.0 {
        0.0
    } else {
        let f = |u: f64| (-1.0 / u).exp();
        f(1.0 - s) / (f(1.0 - s) + f(s))
    }
}

/// Window mass attributed to one branch.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchMass {
    /// `grad_x S_j(t, x)`.
    pub xi_center: f64,
    pub mass: f64,
    /// `|a_in(y_j)|^2 / J_t(y_j)`.
    pub limit: f64,
}

pub fn concentration_weights(
    field: &WaveField,
    problem: &Problem,
    t: f64,
    x: &[f64],
    window_width: f64,
) -> Result<Vec<BranchMass>> {
    concentration_weights_with(field, problem, t, x, window_width, None)
}

/// Integrates `W_eps` against a smooth momentum window that follows each
/// branch momentum `xi_j(x')`, averaged over `x'` with a smooth bump of radius
/// `x_radius` around `x`. The position average suppresses the cross terms
/// between branches, which oscillate in `x` at frequency
/// `|xi_j - xi_k| / eps` and vanish only in the sense of distributions.
///
/// Without an explicit radius a single branch is evaluated at `x` alone and
/// several branches are averaged over [`CROSS_TERM_PERIODS`] periods of the
/// slowest cross term, a radius proportional to `eps`.
pub fn concentration_weights_with(
    field: &WaveField,
    problem: &Problem,
    t: f64,
    x: &[f64],
    window_width: f64,
    x_radius: Option<f64>,
) -> Result<Vec<BranchMass>> {
    if field.grid.dim() != 1 || problem.dim() != 1 || x.len() != 1 {
        return Err(Error::InvalidInput("concentration weights are one-dimensional".into()));
    }
    if (field.t - t).abs() > 1e-12 * t.abs().max(1.0) {
        return Err(Error::InvalidInput(format!("field is at t = {}, not {t}", field.t)));
    }
    if !(window_width > 0.0) || x_radius.is_some_and(|r| !(r > 0.0)) {
        return Err(Error::InvalidInput("window width and radius must be > 0".into()));
    }
    let branches = problem.branches(t, x)?;
    let mut momenta: Vec<f64> = branches.iter().map(|b| b.momentum[0]).collect();
    momenta.sort_by(f64::total_cmp);
    for pair in momenta.windows(2) {
        if pair[1] - pair[0] <= 2.0 * window_width {
            return Err(Error::OverlappingBranches { a: pair[0], b: pair[1] });
        }
    }

    let min_gap = momenta.windows(2).map(|p| p[1] - p[0]).fold(f64::INFINITY, f64::min);
    let radius = x_radius.unwrap_or(if min_gap.is_finite() {
        CROSS_TERM_PERIODS * 2.0 * PI * field.eps / min_gap
    } else {
        0.0
    });
    let points = averaging_points(field, x[0], radius)?;
    let xi_grid = natural_xi_grid(field);
    let rays = problem.rays();
    let per_node: Vec<(f64, Vec<f64>)> = points
        .par_iter()
        .map(|&(xp, weight)| {
            let xp = [xp];
            let slice = wigner_transform(field, &xp, &xi_grid)?;
            let masses = branches
                .iter()
                .map(|b| {
                    let moved = rays.continue_branch(b, t, x, t, &xp, &problem.search)?;
                    let centre = moved.momentum[0];
                    Ok(slice
                        .values
                        .iter()
                        .enumerate()
                        .map(|(k, w)| momentum_window(xi_grid.node(k)[0] - centre, window_width) * w)
                        .sum::<f64>()
                        * xi_grid.cell_volume())
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok((weight, masses))
        })
        .collect::<Result<_>>()?;

    let total: f64 = per_node.iter().map(|(w, _)| w).sum();
    Ok(branches
        .iter()
        .enumerate()
        .map(|(j, b)| BranchMass {
            xi_center: b.momentum[0],
            mass: per_node.iter().map(|(w, m)| w * m[j]).sum::<f64>() / total,
            limit: problem.amplitude.value(&b.y).powi(2) / b.jacobian,
        })
        .collect())
}

/// Grid nodes within `radius` of `x` with smooth bump weights, or `x` alone
/// for a zero radius.
fn averaging_points(field: &WaveField, x: f64, radius: f64) -> Result<Vec<(f64, f64)>> {
    if radius == 0.0 {
        return Ok(vec![(x, 1.0)]);
    }
    let axis = &field.grid.axes[0];
    let h = axis.spacing();
    let lo = ((x - radius - axis.left) / h).ceil() as i64;
    let hi = ((x + radius - axis.left) / h).floor() as i64;
    let points: Vec<(f64, f64)> = (lo..=hi)
        .filter_map(|i| {
            let xp = axis.left + i as f64 * h;
            let r = (xp - x) / radius;
            (r.abs() < 1.0).then(|| (xp, (1.0 - 1.0 / (1.0 - r * r)).exp()))
        })
        .collect();
    if points.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "position window of radius {radius} holds fewer than 3 grid nodes"
        )));
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_space::PotentialModel;
    use crate::ray_map::{InitialPhase, SearchBox};
    use crate::reference::SpatialGrid;
    use crate::wkb::InitialAmplitude;

    fn packet(eps: f64, x0: f64, xi0: f64) -> WaveField {
        let g = SpatialGrid::uniform(1, -8.0, 16.0, 1024).unwrap();
        WaveField::from_fn(g, eps, |x| {
            let d = x[0] - x0;
            Complex64::from_polar((PI * eps).powf(-0.25) * (-d * d / (2.0 * eps)).exp(), xi0 * d / eps)
        })
        .unwrap()
    }

    #[test]
    fn gaussian_packet_matches_closed_form() {
        let (eps, x0, xi0) = (0.05, 0.3, -0.4);
        let f = packet(eps, x0, xi0);
        let grid = XiGrid::linspace(-1.5, 0.7, 45).unwrap();
        for x in [0.3, 0.41, 0.1] {
            let s = wigner_transform(&f, &[x], &grid).unwrap();
            for (k, w) in s.values.iter().enumerate() {
                let xi = grid.node(k)[0];
                let exact = ((-(x - x0).powi(2) - (xi - xi0).powi(2)) / eps).exp() / (PI * eps);
                assert!((w - exact).abs() < 1e-4, "x {x} xi {xi}: {w} vs {exact}");
            }
        }
    }

    #[test]
    fn marginal_identity_on_natural_grid() {
        let f = packet(0.05, 0.3, 0.4);
        let grid = natural_xi_grid(&f);
        for x in [0.3, 0.5, 0.123] {
            let s = wigner_transform(&f, &[x], &grid).unwrap();
            let density = f.interpolant().value(&[x]).norm_sqr();
            assert!((s.marginal() - density).abs() < 1e-6);
        }
    }

    #[test]
    fn fft_and_direct_paths_agree() {
        let f = packet(0.05, 0.0, 0.2);
        let natural = natural_xi_grid(&f);
        let fast = wigner_transform(&f, &[0.0], &natural).unwrap();
        let shifted = XiGrid::new(
            vec![natural.lower[0] + 1e-13],
            natural.spacing.clone(),
            natural.counts.clone(),
        )
        .unwrap();
        let slow = wigner_transform(&f, &[0.0], &shifted).unwrap();
        for (a, b) in fast.values.iter().zip(&slow.values) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn plane_wave_peaks_at_its_momentum() {
        let g = SpatialGrid::uniform(1, 0.0, 2.0 * PI, 512).unwrap();
        let eps = 0.1;
        let xi0 = 0.5;
        let f = WaveField::from_fn(g, eps, |x| Complex64::from_polar(1.0, xi0 * x[0] / eps)).unwrap();
        let grid = XiGrid::linspace(-1.0, 1.0, 41).unwrap();
        let opts = WignerOptions { max_lag: Some(64) };
        let s = wigner_transform_with(&f, &[1.0], &grid, opts).unwrap();
        assert!((s.argmax()[0] - xi0).abs() < 1e-12);
        assert!(matches!(
            wigner_transform(&f, &[PI], &grid),
            Err(Error::WindowClipped { .. })
        ));
    }

    #[test]
    fn two_dimensional_packet() {
        let eps = 0.1;
        let g = SpatialGrid::uniform(2, -5.0, 10.0, 256).unwrap();
        let f = WaveField::from_fn(g, eps, |x| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            Complex64::from_polar((-r2 / (2.0 * eps)).exp() / (PI * eps).sqrt(), 0.3 * x[0] / eps)
        })
        .unwrap();
        let grid = XiGrid::new(vec![-0.2, -0.5], vec![0.25, 0.25], vec![3, 5]).unwrap();
        let s = wigner_transform(&f, &[0.0, 0.0], &grid).unwrap();
        for (k, w) in s.values.iter().enumerate() {
            let xi = grid.node(k);
            let exact = (-((xi[0] - 0.3).powi(2) + xi[1] * xi[1]) / eps).exp() / (PI * eps).powi(2);
            assert!((w - exact).abs() < 1e-6, "{xi:?}: {w} vs {exact}");
        }
    }

    #[test]
    fn window_shape() {
        assert_eq!(momentum_window(0.05, 0.2), 1.0);
        assert_eq!(momentum_window(0.2, 0.2), 0.0);
        assert!((momentum_window(0.15, 0.2) - 0.5).abs() < 1e-15);
        assert!(momentum_window(0.12, 0.2) > momentum_window(0.18, 0.2));
    }

    #[test]
    fn initial_state_concentrates_on_initial_momentum() {
        let eps = 1.0 / 256.0;
        let p = Problem::new(
            PotentialModel::zero(1),
            InitialPhase::cosine(1),
            InitialAmplitude::bump(vec![0.0], 3.0).unwrap(),
            SearchBox::symmetric(1, 8.0).unwrap(),
        )
        .unwrap();
        let g = SpatialGrid::uniform(1, -10.0, 20.0, 1 << 13).unwrap();
        let f = WaveField::initial_datum(g, eps, &p).unwrap();
        let m = concentration_weights(&f, &p, 0.0, &[0.5], DEFAULT_WINDOW_WIDTH).unwrap();
        assert_eq!(m.len(), 1);
        assert!((m[0].xi_center + 0.5f64.sin()).abs() < 1e-12);
        assert!((m[0].mass - p.amplitude.value(&[0.5]).powi(2)).abs() < 1e-3, "{m:?}");

        let doubled = Problem {
            amplitude: p.amplitude.clone().scaled(2.0),
            ..p.clone()
        };
        let f2 = WaveField::initial_datum(f.grid.clone(), eps, &doubled).unwrap();
        let m2 = concentration_weights(&f2, &doubled, 0.0, &[0.5], DEFAULT_WINDOW_WIDTH).unwrap();
        assert!((m2[0].mass - 4.0 * m[0].mass).abs() < 1e-12);
        assert!(concentration_weights(&f, &p, 0.1, &[0.5], 0.2).is_err());
    }
}
