//! Assembly of the semiclassical wave
//!
//! ```text
//! Psi_eps(t, x) = sum_j a_in(y_j) J_t(y_j)^(-1/2) exp(i S_j / eps) i^(-M_j)
//! ```
//!
//! from the branches of the ray map, their phases and Maslov indices.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::maslov::{maslov_crossings, maslov_free, MaslovMethod};
use crate::phase_space::{flow, PotentialModel, DEFAULT_DT};
use crate::ray_map::{Branch, BranchSearch, InitialPhase, RayMap, SearchBox, DEFAULT_CAUSTIC_THRESHOLD};

/// Gaussian amplitudes are cut off at this many standard deviations.
pub const GAUSSIAN_TRUNCATION: f64 = 12.0;

#[derive(Debug, Clone, PartialEq)]
pub enum AmplitudeShape {
    /// `exp(1 - 1 / (1 - r^2))` for `r = |y - center| / width < 1`, zero
    /// outside; equals 1 at the center.
    Bump { center: Vec<f64>, width: f64 },
    /// `exp(-|y - center|^2 / (2 sigma^2))`, truncated at
    /// [`GAUSSIAN_TRUNCATION`] standard deviations.
    Gaussian { center: Vec<f64>, sigma: f64 },
}

/// Real initial amplitude `a_in`, a shape times a constant factor.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialAmplitude {
    pub shape: AmplitudeShape,
    pub scale: f64,
}

impl InitialAmplitude {
    pub fn bump(center: Vec<f64>, width: f64) -> Result<Self> {
        if !(width > 0.0) {
            return Err(Error::InvalidInput(format!("bump width must be > 0, got {width}")));
        }
        Ok(Self {
            shape: AmplitudeShape::Bump { center, width },
            scale: 1.0,
        })
    }

    pub fn gaussian(center: Vec<f64>, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::InvalidInput(format!("gaussian sigma must be > 0, got {sigma}")));
        }
        Ok(Self {
            shape: AmplitudeShape::Gaussian { center, sigma },
            scale: 1.0,
        })
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        self.scale *= factor;
        self
    }

    pub fn dim(&self) -> usize {
        match &self.shape {
            AmplitudeShape::Bump { center, .. } | AmplitudeShape::Gaussian { center, .. } => center.len(),
        }
    }

    pub fn tag(&self) -> String {
        match &self.shape {
            AmplitudeShape::Bump { center, width } => format!("{}*bump({center:?},{width})", self.scale),
            AmplitudeShape::Gaussian { center, sigma } => {
                format!(
                    "{}*gaussian({center:?},{sigma}) truncated at {GAUSSIAN_TRUNCATION} sigma",
                    self.scale
                )
            }
        }
    }

    pub fn value(&self, y: &[f64]) -> f64 {
        match &self.shape {
            AmplitudeShape::Bump { center, width } => {
                let r2 = y.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>() / (width * width);
                if r2 >= 1.0 {
                    0.0
                } else {
                    self.scale * (1.0 - 1.0 / (1.0 - r2)).exp()
                }
            }
            AmplitudeShape::Gaussian { center, sigma } => {
                let r2 = y.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>();
                if r2 >= (GAUSSIAN_TRUNCATION * sigma).powi(2) {
                    0.0
                } else {
                    self.scale * (-r2 / (2.0 * sigma * sigma)).exp()
                }
            }
        }
    }

    /// Smallest axis-aligned box outside which the amplitude vanishes.
    pub fn support(&self) -> SearchBox {
        let (center, half) = match &self.shape {
            AmplitudeShape::Bump { center, width } => (center, *width),
            AmplitudeShape::Gaussian { center, sigma } => (center, GAUSSIAN_TRUNCATION * sigma),
        };
        SearchBox {
            lower: center.iter().map(|c| c - half).collect(),
            upper: center.iter().map(|c| c + half).collect(),
        }
    }

    /// Characteristic length of the shape (bump radius or Gaussian sigma).
    pub fn length_scale(&self) -> f64 {
        match &self.shape {
            AmplitudeShape::Bump { width, .. } => *width,
            AmplitudeShape::Gaussian { sigma, .. } => *sigma,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WkbSettings {
    pub flow_dt: f64,
    pub caustic_threshold: f64,
    pub maslov: MaslovMethod,
}

impl Default for WkbSettings {
    fn default() -> Self {
        Self {
            flow_dt: DEFAULT_DT,
            caustic_threshold: DEFAULT_CAUSTIC_THRESHOLD,
            maslov: MaslovMethod::CrossingCount,
        }
    }
}

/// The full problem statement: potential, WKB initial data and the region
/// searched for ray preimages.
#[derive(Debug, Clone)]
pub struct Problem {
    pub potential: PotentialModel,
    pub phase: InitialPhase,
    pub amplitude: InitialAmplitude,
    pub search: BranchSearch,
    pub settings: WkbSettings,
}

/// One term of the WKB sum.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchContribution {
    pub branch: Branch,
    /// `S_j(t, x)`.
    pub phase: f64,
    /// `M_j(t, x)`.
    pub maslov: u32,
    /// `a_in(y_j) J_t(y_j)^(-1/2) i^(-M_j)`.
    pub amplitude: Complex64,
}

impl BranchContribution {
    pub fn value(&self, eps: f64) -> Complex64 {
        self.amplitude * Complex64::from_polar(1.0, self.phase / eps)
    }
}

/// `i^(-m)`.
pub fn maslov_factor(m: u32) -> Complex64 {
    match m % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, -1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, 1.0),
    }
}

impl Problem {
    pub fn new(
        potential: PotentialModel,
        phase: InitialPhase,
        amplitude: InitialAmplitude,
        search_box: SearchBox,
    ) -> Result<Self> {
        let n = potential.dim();
        if phase.dim() != n || amplitude.dim() != n || search_box.dim() != n {
            return Err(Error::InvalidInput(format!(
                "dimension mismatch: potential {n}, phase {}, amplitude {}, search box {}",
                phase.dim(),
                amplitude.dim(),
                search_box.dim()
            )));
        }
        Ok(Self {
            potential,
            phase,
            amplitude,
            search: BranchSearch::new(search_box),
            settings: WkbSettings::default(),
        })
    }

    pub fn dim(&self) -> usize {
        self.potential.dim()
    }

    pub fn rays(&self) -> RayMap<'_> {
        RayMap {
            potential: &self.potential,
            phase: &self.phase,
            dt: self.settings.flow_dt,
            caustic_threshold: self.settings.caustic_threshold,
        }
    }

    pub fn branches(&self, t: f64, x: &[f64]) -> Result<Vec<Branch>> {
        self.rays().find_branches(t, x, &self.search)
    }

    /// `S_j = S_in(y_j) + S(t, y_j, grad S_in(y_j))`.
    pub fn branch_phase(&self, branch: &Branch, t: f64) -> Result<f64> {
        let state = flow(&self.potential, &branch.y, &branch.xi0, t, self.settings.flow_dt)?;
        Ok(self.phase.value(&branch.y) + state.action)
    }

    pub fn maslov_index(&self, branch: &Branch, t: f64) -> Result<u32> {
        match self.settings.maslov {
            MaslovMethod::FreeEigenvalue if self.potential.is_free() => {
                maslov_free(&self.phase.hessian_matrix(&branch.y), t)
            }
            MaslovMethod::FreeEigenvalue => Err(Error::InvalidInput(
                "the eigenvalue formula for the Maslov index only holds for V = 0".into(),
            )),
            MaslovMethod::CrossingCount => Ok(maslov_crossings(&self.rays(), &branch.y, t)?.index),
        }
    }

    pub fn contribution(&self, branch: Branch, t: f64) -> Result<BranchContribution> {
        let phase = self.branch_phase(&branch, t)?;
        let maslov = self.maslov_index(&branch, t)?;
        let amplitude = maslov_factor(maslov) * (self.amplitude.value(&branch.y) / branch.jacobian.sqrt());
        Ok(BranchContribution {
            branch,
            phase,
            maslov,
            amplitude,
        })
    }

    /// Every term of the WKB sum at `(t, x)`, including branches launched
    /// outside the amplitude support (which contribute zero).
    pub fn contributions(&self, t: f64, x: &[f64]) -> Result<Vec<BranchContribution>> {
        self.branches(t, x)?
            .into_iter()
            .map(|b| self.contribution(b, t))
            .collect()
    }

    /// `Psi_eps(t, x)`.
    pub fn wkb_value(&self, eps: f64, t: f64, x: &[f64]) -> Result<Complex64> {
        if !(eps > 0.0) {
            return Err(Error::InvalidInput(format!("eps must be > 0, got {eps}")));
        }
        Ok(self.contributions(t, x)?.iter().map(|c| c.value(eps)).sum())
    }

    /// The initial datum `a_in(x) exp(i S_in(x) / eps)`.
    pub fn initial_value(&self, eps: f64, x: &[f64]) -> Complex64 {
        Complex64::from_polar(self.amplitude.value(x), self.phase.value(x) / eps)
    }

    /// Central-difference residual of `d_t S_j + |grad_x S_j|^2 / 2 + V(x)`
    /// for every branch at `(t, x)`, with each stencil point reached by
    /// warm-started continuation of the branch.
    pub fn eikonal_residual(&self, t: f64, x: &[f64], h: f64) -> Result<Vec<f64>> {
        if !(h > 0.0) || t - h < 0.0 {
            return Err(Error::InvalidInput(format!(
                "eikonal stencil needs h > 0 and t - h >= 0, got t = {t}, h = {h}"
            )));
        }
        let rays = self.rays();
        let n = self.dim();
        let phase_at = |b: &Branch, t2: f64, x2: &[f64]| -> Result<f64> {
            let moved = rays.continue_branch(b, t, x, t2, x2, &self.search)?;
            if moved.caustic_proximal {
                return Err(Error::CausticProximity {
                    y: moved.y,
                    jacobian: moved.jacobian,
                });
            }
            self.branch_phase(&moved, t2)
        };

        self.branches(t, x)?
            .iter()
            .map(|b| {
                let dt_s = (phase_at(b, t + h, x)? - phase_at(b, t - h, x)?) / (2.0 * h);
                let mut grad2 = 0.0;
                let mut probe = x.to_vec();
                for k in 0..n {
                    probe[k] = x[k] + h;
                    let plus = phase_at(b, t, &probe)?;
                    probe[k] = x[k] - h;
                    let minus = phase_at(b, t, &probe)?;
                    probe[k] = x[k];
                    let g = (plus - minus) / (2.0 * h);
                    grad2 += g * g;
                }
                Ok(dt_s + 0.5 * grad2 + self.potential.value(x))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn free_quadratic() -> Problem {
        Problem::new(
            PotentialModel::zero(1),
            InitialPhase::isotropic_quadratic(1, -1.0),
            InitialAmplitude::bump(vec![0.0], 1.5).unwrap(),
            SearchBox::symmetric(1, 4.0).unwrap(),
        )
        .unwrap()
    }

    fn free_cosine() -> Problem {
        Problem::new(
            PotentialModel::zero(1),
            InitialPhase::cosine(1),
            InitialAmplitude::bump(vec![0.0], 3.0).unwrap(),
            SearchBox::symmetric(1, 8.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn maslov_factor_cycles() {
        assert_eq!(maslov_factor(0), Complex64::new(1.0, 0.0));
        assert_eq!(maslov_factor(1), Complex64::new(0.0, -1.0));
        assert_eq!(maslov_factor(2), Complex64::new(-1.0, 0.0));
        assert_eq!(maslov_factor(3), Complex64::new(0.0, 1.0));
        assert_eq!(maslov_factor(5), maslov_factor(1));
    }

    #[test]
    fn bump_amplitude() {
        let a = InitialAmplitude::bump(vec![0.0], 3.0).unwrap();
        assert_eq!(a.value(&[0.0]), 1.0);
        assert_eq!(a.value(&[3.0]), 0.0);
        assert_eq!(a.value(&[-4.0]), 0.0);
        assert!(a.value(&[2.9]) > 0.0);
        let s = a.support();
        assert_eq!((s.lower[0], s.upper[0]), (-3.0, 3.0));
        assert_eq!(a.clone().scaled(2.0).value(&[1.0]), 2.0 * a.value(&[1.0]));
    }

    #[test]
    fn phase_at_time_zero_is_initial_phase() {
        let p = free_cosine();
        let b = p.branches(0.0, &[0.7]).unwrap();
        assert_eq!(b.len(), 1);
        assert!((p.branch_phase(&b[0], 0.0).unwrap() - 0.7f64.cos()).abs() < 1e-15);
    }

    #[test]
    fn phase_examples() {
        let p = free_quadratic();
        let b = p.branches(2.0, &[0.0]).unwrap();
        assert_eq!(b.len(), 1);
        assert!(b[0].y[0].abs() < 1e-14);
        assert!(p.branch_phase(&b[0], 2.0).unwrap().abs() < 1e-14);

        let p = free_cosine();
        let b = p.branches(2.0, &[0.0]).unwrap();
        let mid = b.iter().find(|b| b.y[0].abs() < 1e-9).unwrap();
        assert!((p.branch_phase(mid, 2.0).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn wkb_value_examples() {
        let p = free_quadratic();
        let eps = 0.01;
        let v = p.wkb_value(eps, 0.5, &[0.0]).unwrap();
        assert!((v - Complex64::new(2f64.sqrt(), 0.0)).norm() < 1e-12);
        let v = p.wkb_value(eps, 2.0, &[0.0]).unwrap();
        assert!((v - Complex64::new(0.0, -1.0)).norm() < 1e-12);

        let v0 = p.wkb_value(eps, 0.0, &[0.37]).unwrap();
        assert!((v0 - p.initial_value(eps, &[0.37])).norm() < 1e-14);
    }

    #[test]
    fn free_eigenvalue_method_agrees_for_zero_potential() {
        let mut p = free_cosine();
        let a = p.contributions(2.0, &[0.1]).unwrap();
        p.settings.maslov = MaslovMethod::FreeEigenvalue;
        let b = p.contributions(2.0, &[0.1]).unwrap();
        let ma: Vec<u32> = a.iter().map(|c| c.maslov).collect();
        let mb: Vec<u32> = b.iter().map(|c| c.maslov).collect();
        assert_eq!(ma, vec![0, 1, 0]);
        assert_eq!(ma, mb);
    }

    #[test]
    fn eikonal_residual_quadratic_phase() {
        let p = free_quadratic();
        let r = p.eikonal_residual(0.5, &[0.3], 1e-3).unwrap();
        assert_eq!(r.len(), 1);
        assert!(r[0].abs() <= 1e-6, "{r:?}");
    }

    #[test]
    fn eikonal_residual_at_time_zero_plus() {
        let p = free_cosine();
        let r = p.eikonal_residual(1e-3, &[0.4], 1e-3).unwrap();
        assert!(r.iter().all(|v| v.abs() <= 1e-6), "{r:?}");
    }

    #[test]
    fn eikonal_residual_harmonic() {
        let p = Problem::new(
            PotentialModel::harmonic(1, 1.0),
            InitialPhase::isotropic_quadratic(1, 0.0),
            InitialAmplitude::bump(vec![0.0], 1.5).unwrap(),
            SearchBox::symmetric(1, 4.0).unwrap(),
        )
        .unwrap();
        let r = p.eikonal_residual(0.3, &[0.2], 1e-3).unwrap();
        assert!(r.iter().all(|v| v.abs() <= 1e-5), "{r:?}");
        // S(t, x) = -x^2 tan(t) / 2
        let b = p.branches(0.3, &[0.2]).unwrap();
        let s = p.branch_phase(&b[0], 0.3).unwrap();
        assert!((s + 0.04 * 0.3f64.tan() / 2.0).abs() < 1e-10);
    }

    #[test]
    fn rejects_non_positive_eps() {
        assert!(free_cosine().wkb_value(0.0, 1.0, &[0.0]).is_err());
    }
}
