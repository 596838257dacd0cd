use std::cmp::Ordering;

use nalgebra::DVector;
use rayon::prelude::*;

use super::{RayMap, RayMapValue};
use crate::error::{Error, Result};

/// Axis-aligned search hyper-rectangle for preimages.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl SearchBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::InvalidInput(
                "search box bounds must have equal, nonzero length".into(),
            ));
        }
        if lower
            .iter()
            .zip(&upper)
            .any(|(l, u)| !(l < u) || !l.is_finite() || !u.is_finite())
        {
            return Err(Error::InvalidInput(
                "search box needs finite lower < upper on every axis".into(),
            ));
        }
        Ok(Self { lower, upper })
    }

    /// The box `[-half, half]^dim`.
    pub fn symmetric(dim: usize, half: f64) -> Result<Self> {
        Self::new(vec![-half; dim], vec![half; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, y: &[f64], slack: f64) -> bool {
        y.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (l, u))| *v >= l - slack && *v <= u + slack)
    }

    /// Cell-centred uniform grid with `density` nodes per axis, in
    /// row-major order (last axis fastest).
    pub fn grid(&self, density: usize) -> Vec<Vec<f64>> {
        let n = self.dim();
        let total = density.pow(n as u32);
        (0..total)
            .map(|mut flat| {
                let mut node = vec![0.0; n];
                for axis in (0..n).rev() {
                    let i = flat % density;
                    flat /= density;
                    let h = (self.upper[axis] - self.lower[axis]) / density as f64;
                    node[axis] = self.lower[axis] + (i as f64 + 0.5) * h;
                }
                node
            })
            .collect()
    }

    fn expanded(&self) -> SearchBox {
        let (lower, upper) = self
            .lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| {
                let w = u - l;
                (l - w, u + w)
            })
            .unzip();
        SearchBox { lower, upper }
    }
}

/// One preimage `y_j(t, x)` of a point under the ray map.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    /// Position in the lexicographic order of preimages.
    pub index: usize,
    pub y: Vec<f64>,
    /// Launch momentum `grad S_in(y)`.
    pub xi0: Vec<f64>,
    /// `J_t(y)`.
    pub jacobian: f64,
    /// Signed `det DF_t(y)`.
    pub det: f64,
    /// Arrival momentum `Xi_t(y, grad S_in(y))`, which equals `grad_x S_j(t, x)`.
    pub momentum: Vec<f64>,
    pub action: f64,
    pub caustic_proximal: bool,
}

/// Multi-start Newton settings for [`RayMap::find_branches`].
#[derive(Debug, Clone, PartialEq)]
pub struct BranchSearch {
    pub search_box: SearchBox,
    /// Newton starts per axis.
    pub grid_density: usize,
    /// Residual tolerance `|F_t(y) - x|`.
    pub tol: f64,
}

impl BranchSearch {
    pub const DEFAULT_DENSITY: usize = 64;
    pub const DEFAULT_TOL: f64 = 1e-9;

    pub fn new(search_box: SearchBox) -> Self {
        Self {
            search_box,
            grid_density: Self::DEFAULT_DENSITY,
            tol: Self::DEFAULT_TOL,
        }
    }

    pub fn with_density(mut self, density: usize) -> Self {
        self.grid_density = density;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }
}

const MAX_NEWTON_ITERS: usize = 80;
const MAX_POLISH_ITERS: usize = 60;
/// Bisection narrows a sign change to this fraction of a start cell before
/// Newton takes over.
const BRACKET_WIDTH: f64 = 1.0 / 64.0;

/// A converged preimage with the ray map evaluated there.
type Root = (Vec<f64>, RayMapValue);

enum SeedKind {
    Start(usize),
    Bracket(usize),
}

fn residual(value: &RayMapValue, x: &[f64]) -> DVector<f64> {
    DVector::from_iterator(x.len(), value.x.iter().zip(x).map(|(a, b)| a - b))
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (u, v) in a.iter().zip(b) {
        match u.partial_cmp(v) {
            Some(Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    Ordering::Equal
}

impl RayMap<'_> {
    /// Damped Newton iteration for `F_t(y) = x` from `start`. Returns the
    /// polished root, or `None` when the iteration stalls or leaves the
    /// (doubled) search box.
    pub fn newton(
        &self,
        t: f64,
        x: &[f64],
        start: &[f64],
        tol: f64,
        bounds: &SearchBox,
    ) -> Result<Option<(Vec<f64>, RayMapValue)>> {
        let outer = bounds.expanded();
        let mut y = start.to_vec();
        let mut value = self.ray_map(&y, t)?;
        let mut r = residual(&value, x);
        let mut norm = r.norm();

        for _ in 0..MAX_NEWTON_ITERS {
            if norm <= tol {
                // undamped steps until the residual stops shrinking; near a fold this
                // converges only linearly, which is what exposes small Jacobians
                for _ in 0..MAX_POLISH_ITERS {
                    let Some(step) = value.df.clone().lu().solve(&r) else {
                        break;
                    };
                    let cand: Vec<f64> = y.iter().zip(step.iter()).map(|(a, d)| a - d).collect();
                    let cv = self.ray_map(&cand, t)?;
                    let cr = residual(&cv, x);
                    if cr.norm() < norm {
                        y = cand;
                        value = cv;
                        norm = cr.norm();
                        r = cr;
                    } else {
                        break;
                    }
                }
                return Ok(Some((y, value)));
            }
            let Some(step) = value.df.clone().lu().solve(&r) else {
                return Ok(None);
            };
            if !step.iter().all(|v| v.is_finite()) {
                return Ok(None);
            }
            let mut lambda = 1.0;
            let mut accepted = false;
            while lambda > 1e-10 {
                let cand: Vec<f64> = y.iter().zip(step.iter()).map(|(a, d)| a - lambda * d).collect();
                if outer.contains(&cand, 0.0) {
                    let cv = self.ray_map(&cand, t)?;
                    let cr = residual(&cv, x);
                    let cn = cr.norm();
                    if cn < (1.0 - 1e-4 * lambda) * norm {
                        y = cand;
                        value = cv;
                        r = cr;
                        norm = cn;
                        accepted = true;
                        break;
                    }
                }
                lambda *= 0.5;
            }
            if !accepted {
                return Ok(None);
            }
        }
        Ok(None)
    }

    /// One-dimensional root search: `F_t - x` is sampled once at the start
    /// nodes, every sign change is narrowed by bisection before Newton, and
    /// every interior local minimum of `|F_t - x|` is also tried as a Newton
    /// start so that close root pairs inside one cell are not lost.
    fn bracketed_roots(&self, t: f64, x: f64, starts: &[Vec<f64>], search: &BranchSearch) -> Result<Vec<Option<Root>>> {
        let g: Vec<f64> = starts
            .par_iter()
            .map(|s| self.ray_map(s, t).map(|v| v.x[0] - x))
            .collect::<Result<_>>()?;
        let cell = starts.get(1).map_or(1.0, |s| s[0] - starts[0][0]);
        let mut seeds: Vec<SeedKind> = Vec::new();
        for k in 0..g.len() {
            if g[k] == 0.0 {
                seeds.push(SeedKind::Start(k));
            } else if k + 1 < g.len() && g[k].signum() != g[k + 1].signum() && g[k + 1] != 0.0 {
                seeds.push(SeedKind::Bracket(k));
            }
            if k > 0 && k + 1 < g.len() && g[k].abs() <= g[k - 1].abs() && g[k].abs() <= g[k + 1].abs() {
                seeds.push(SeedKind::Start(k));
            }
        }
        if g.len() == 1 {
            seeds.push(SeedKind::Start(0));
        }
        seeds
            .par_iter()
            .map(|seed| match *seed {
                SeedKind::Start(k) => self.newton(t, &[x], &starts[k], search.tol, &search.search_box),
                SeedKind::Bracket(k) => {
                    let (mut a, mut b, ga) = (starts[k][0], starts[k + 1][0], g[k]);
                    while b - a > BRACKET_WIDTH * cell {
                        let mid = 0.5 * (a + b);
                        let gm = self.ray_map(&[mid], t)?.x[0] - x;
                        if gm.signum() == ga.signum() {
                            a = mid;
                        } else {
                            b = mid;
                        }
                    }
                    self.newton(t, &[x], &[0.5 * (a + b)], search.tol, &search.search_box)
                }
            })
            .collect()
    }

    /// Every preimage of `x` under `F_t` inside the search box, including
    /// caustic-proximal ones (flagged rather than rejected).
    pub fn find_preimages(&self, t: f64, x: &[f64], search: &BranchSearch) -> Result<Vec<Branch>> {
        let n = self.dim();
        if x.len() != n || search.search_box.dim() != n {
            return Err(Error::InvalidInput(format!(
                "target has length {} and box dimension {} for a problem of dimension {n}",
                x.len(),
                search.search_box.dim()
            )));
        }
        if search.grid_density == 0 || !(search.tol > 0.0) {
            return Err(Error::InvalidInput(
                "grid density and tolerance must be positive".into(),
            ));
        }

        let starts = search.search_box.grid(search.grid_density);
        let found: Vec<Option<Root>> = if n == 1 {
            self.bracketed_roots(t, x[0], &starts, search)?
        } else {
            starts
                .par_iter()
                .map(|s| self.newton(t, x, s, search.tol, &search.search_box))
                .collect::<Result<_>>()?
        };

        let radius = 10.0 * search.tol;
        let mut roots: Vec<(Vec<f64>, RayMapValue)> = Vec::new();
        for (y, value) in found.into_iter().flatten() {
            if !search.search_box.contains(&y, radius) {
                continue;
            }
            let dup = roots
                .iter()
                .any(|(other, _)| other.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() <= radius);
            if !dup {
                roots.push((y, value));
            }
        }
        if roots.is_empty() {
            return Err(Error::NoRoot { x: x.to_vec() });
        }
        roots.sort_by(|a, b| lex_cmp(&a.0, &b.0));

        Ok(roots
            .into_iter()
            .enumerate()
            .map(|(index, (y, value))| {
                let det = value.det();
                Branch {
                    index,
                    xi0: self.phase.gradient_vec(&y),
                    y,
                    jacobian: value.jacobian,
                    det,
                    momentum: value.momentum,
                    action: value.action,
                    caustic_proximal: value.jacobian < self.caustic_threshold,
                }
            })
            .collect())
    }

    /// All branches `y_j(t, x)`, sorted lexicographically by `y`.
    ///
    /// Fails with `CausticProximity` when any preimage has a Jacobian below
    /// the caustic threshold, and with `NoRoot` when no start converges.
    pub fn find_branches(&self, t: f64, x: &[f64], search: &BranchSearch) -> Result<Vec<Branch>> {
        let branches = self.find_preimages(t, x, search)?;
        if let Some(b) = branches.iter().find(|b| b.caustic_proximal) {
            return Err(Error::CausticProximity {
                y: b.y.clone(),
                jacobian: b.jacobian,
            });
        }
        Ok(branches)
    }

    /// Follows one branch from `(t, x)` to `(t2, x2)` by Newton iteration
    /// warm-started at `branch.y`.
    ///
    /// The landing point must agree with the first-order prediction from the
    /// implicit function theorem and keep the sign of `det DF`; otherwise the
    /// iteration is taken to have jumped to another branch.
    pub fn continue_branch(
        &self,
        branch: &Branch,
        t: f64,
        x: &[f64],
        t2: f64,
        x2: &[f64],
        search: &BranchSearch,
    ) -> Result<Branch> {
        let here = self.ray_map(&branch.y, t)?;
        // d/dt F_t(y) is the ray velocity Xi_t
        let shift = DVector::from_iterator(
            x.len(),
            x2.iter()
                .zip(x)
                .zip(&here.momentum)
                .map(|((b, a), v)| (b - a) - (t2 - t) * v),
        );
        let jump = || Error::BranchJump { x: x2.to_vec() };
        let predicted = here.df.clone().lu().solve(&shift).ok_or_else(jump)?;
        let guess: Vec<f64> = branch.y.iter().zip(predicted.iter()).map(|(a, d)| a + d).collect();

        let (y, value) = self
            .newton(t2, x2, &guess, search.tol, &search.search_box)?
            .ok_or_else(jump)?;

        let moved: f64 = y
            .iter()
            .zip(&branch.y)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let off: f64 = y.iter().zip(&guess).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let det = value.det();
        if det.signum() != branch.det.signum() || off > 0.5 * moved.max(1e-7) + 10.0 * search.tol {
            return Err(jump());
        }
        Ok(Branch {
            index: branch.index,
            xi0: self.phase.gradient_vec(&y),
            y,
            jacobian: value.jacobian,
            det,
            momentum: value.momentum,
            action: value.action,
            caustic_proximal: value.jacobian < self.caustic_threshold,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_space::PotentialModel;
    use crate::ray_map::InitialPhase;

    /// Root of `y - 2 sin y` on `(1, 3)` by bisection.
    fn fold_root() -> f64 {
        let (mut lo, mut hi) = (1.0_f64, 3.0_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid - 2.0 * mid.sin() < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn cosine_phase_has_three_branches_at_origin() {
        let v = PotentialModel::zero(1);
        let s = InitialPhase::cosine(1);
        let rm = RayMap::new(&v, &s).unwrap();
        let search = BranchSearch::new(SearchBox::symmetric(1, 4.0).unwrap());
        let b = rm.find_branches(2.0, &[0.0], &search).unwrap();
        let r = fold_root();
        assert!((r - 1.89549).abs() < 1e-5);
        assert_eq!(b.len(), 3);
        assert!((b[0].y[0] + r).abs() < 1e-9);
        assert!(b[1].y[0].abs() < 1e-9);
        assert!((b[2].y[0] - r).abs() < 1e-9);
        assert_eq!(b.iter().map(|b| b.index).collect::<Vec<_>>(), vec![0, 1, 2]);
    }

    #[test]
    fn quadratic_phase_single_branch_after_focus() {
        let v = PotentialModel::zero(1);
        let s = InitialPhase::isotropic_quadratic(1, -1.0);
        let rm = RayMap::new(&v, &s).unwrap();
        let search = BranchSearch::new(SearchBox::symmetric(1, 4.0).unwrap());
        let b = rm.find_branches(2.0, &[1.0], &search).unwrap();
        assert_eq!(b.len(), 1);
        assert!((b[0].y[0] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn identity_at_time_zero() {
        let v = PotentialModel::cosine(2, 1.0, 1.0);
        let s = InitialPhase::cosine(2);
        let rm = RayMap::new(&v, &s).unwrap();
        let search = BranchSearch::new(SearchBox::symmetric(2, 3.0).unwrap()).with_density(8);
        let b = rm.find_branches(0.0, &[0.4, -1.1], &search).unwrap();
        assert_eq!(b.len(), 1);
        assert!((b[0].y[0] - 0.4).abs() < 1e-12 && (b[0].y[1] + 1.1).abs() < 1e-12);
    }

    #[test]
    fn caustic_point_is_reported() {
        let v = PotentialModel::zero(1);
        let s = InitialPhase::isotropic_quadratic(1, -1.0);
        let rm = RayMap::new(&v, &s).unwrap();
        let search = BranchSearch::new(SearchBox::symmetric(1, 4.0).unwrap());
        // at t = 1 every ray reaches x = 0 with DF = 0; nothing else is hit
        let err = rm.find_branches(1.0, &[0.5], &search).unwrap_err();
        assert!(matches!(err, Error::NoRoot { .. }));

        let s = InitialPhase::cosine(1);
        let rm = RayMap::new(&v, &s).unwrap();
        let fold = std::f64::consts::PI / 3.0 - 3f64.sqrt();
        let err = rm.find_branches(2.0, &[fold], &search).unwrap_err();
        assert!(matches!(err, Error::CausticProximity { .. }), "{err:?}");
    }

    #[test]
    fn continuation_stays_on_branch() {
        let v = PotentialModel::zero(1);
        let s = InitialPhase::cosine(1);
        let rm = RayMap::new(&v, &s).unwrap();
        let search = BranchSearch::new(SearchBox::symmetric(1, 4.0).unwrap());
        let b = rm.find_branches(2.0, &[0.0], &search).unwrap();
        for br in &b {
            let c = rm.continue_branch(br, 2.0, &[0.0], 2.001, &[0.002], &search).unwrap();
            assert!((c.y[0] - br.y[0]).abs() < 0.01);
            assert_eq!(c.det.signum(), br.det.signum());
        }
    }
}
