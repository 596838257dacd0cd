//! Scenario files: JSON documents (`"schema": 1`) describing one problem,
//! its reference grid and the experiment parameters.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use semiclassical::maslov::MaslovMethod;
use semiclassical::phase_space::PotentialModel;
use semiclassical::ray_map::{BranchSearch, InitialPhase, SearchBox};
use semiclassical::reference::{resolved_grid, Axis, SpatialGrid};
use semiclassical::wkb::{InitialAmplitude, Problem, WkbSettings};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PotentialSpec {
    Zero,
    Harmonic { omega: f64 },
    Cosine { v0: f64, k: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PhaseSpec {
    /// `y^T A y / 2`, `matrix` given row by row.
    Quadratic {
        matrix: Vec<Vec<f64>>,
    },
    /// `amplitude * sum_i cos(wavenumber * y_i)`.
    Cosine {
        amplitude: f64,
        wavenumber: f64,
    },
    Linear {
        momentum: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AmplitudeSpec {
    Bump {
        center: Vec<f64>,
        width: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    Gaussian {
        center: Vec<f64>,
        sigma: f64,
        #[serde(default = "one")]
        scale: f64,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Reference-solver grid: a periodic box, the smallest node count per axis
/// (raised automatically to resolve every `eps`) and the split-step size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub min_nodes: usize,
    pub dt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaslovSpec {
    FreeEigenvalue,
    CrossingCount,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    #[serde(default = "Settings::default_flow_dt")]
    pub flow_dt: f64,
    #[serde(default = "Settings::default_root_tol")]
    pub root_tol: f64,
    #[serde(default = "Settings::default_grid_density")]
    pub grid_density: usize,
    #[serde(default = "Settings::default_caustic_threshold")]
    pub caustic_threshold: f64,
    #[serde(default = "Settings::default_maslov")]
    pub maslov: MaslovSpec,
}

impl Settings {
    fn default_flow_dt() -> f64 {
        WkbSettings::default().flow_dt
    }
    fn default_root_tol() -> f64 {
        BranchSearch::DEFAULT_TOL
    }
    fn default_grid_density() -> usize {
        BranchSearch::DEFAULT_DENSITY
    }
    fn default_caustic_threshold() -> f64 {
        WkbSettings::default().caustic_threshold
    }
    fn default_maslov() -> MaslovSpec {
        MaslovSpec::CrossingCount
    }
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            flow_dt: Self::default_flow_dt(),
            root_tol: Self::default_root_tol(),
            grid_density: Self::default_grid_density(),
            caustic_threshold: Self::default_caustic_threshold(),
            maslov: Self::default_maslov(),
        }
    }
}

/// Settings of the `caustic-map` verb.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CausticMapSpec {
    pub t_range: [f64; 2],
    pub x_range: [f64; 2],
    pub resolution: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: u32,
    pub name: String,
    pub dimension: usize,
    pub potential: PotentialSpec,
    pub phase: PhaseSpec,
    pub amplitude: AmplitudeSpec,
    pub search_box: BoxSpec,
    pub grid: GridSpec,
    /// Comparison window `K`.
    pub window: BoxSpec,
    pub eps: Vec<f64>,
    pub times: Vec<f64>,
    pub output: PathBuf,
    #[serde(default)]
    pub settings: Settings,
    #[serde(default)]
    pub caustic_map: Option<CausticMapSpec>,
    /// Points at which the `wigner` verb evaluates slices and masses;
    /// defaults to the window centre.
    #[serde(default)]
    pub wigner_points: Option<Vec<Vec<f64>>>,
    #[serde(default = "Scenario::default_window_width")]
    pub wigner_window: f64,
    /// Number of `(t, x)` samples of the `maslov-audit` verb.
    #[serde(default = "Scenario::default_audit_samples")]
    pub audit_samples: usize,
}

/// A parsed scenario together with the SHA-256 of its source text.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    pub sha256: String,
    pub path: Option<PathBuf>,
}

impl Scenario {
    fn default_window_width() -> f64 {
        semiclassical::wigner::DEFAULT_WINDOW_WIDTH
    }

    fn default_audit_samples() -> usize {
        200
    }

    pub fn load(path: &Path) -> CliResult<LoadedScenario> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut loaded = Self::parse(&text)?;
        loaded.path = Some(path.to_path_buf());
        Ok(loaded)
    }

    pub fn parse(text: &str) -> CliResult<LoadedScenario> {
        let scenario: Scenario =
            serde_json::from_str(text).map_err(|e| CliError::Validation(format!("scenario JSON: {e}")))?;
        scenario.validate()?;
        let sha256 = format!("{:x}", Sha256::digest(text.as_bytes()));
        Ok(LoadedScenario {
            scenario,
            sha256,
            path: None,
        })
    }

    pub fn validate(&self) -> CliResult<()> {
        let invalid = |m: String| Err(CliError::Validation(m));
        if self.schema != SCHEMA_VERSION {
            return invalid(format!("unsupported schema {}, expected {SCHEMA_VERSION}", self.schema));
        }
        let n = self.dimension;
        if !(1..=3).contains(&n) {
            return invalid(format!("dimension must be 1, 2 or 3, got {n}"));
        }
        if self.eps.is_empty() || self.eps.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
            return invalid("eps values must be positive and finite".into());
        }
        let mut sorted = self.eps.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return invalid("eps values must be distinct".into());
        }
        if self.times.is_empty() || self.times.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
            return invalid("times must be non-negative and finite".into());
        }
        for (what, b) in [("search_box", &self.search_box), ("window", &self.window)] {
            check_box(what, n, &b.lower, &b.upper)?;
        }
        check_box("grid", n, &self.grid.lower, &self.grid.upper)?;
        if !(self.grid.dt > 0.0) {
            return invalid(format!("grid.dt must be > 0, got {}", self.grid.dt));
        }
        if !(self.wigner_window > 0.0) {
            return invalid("wigner_window must be > 0".into());
        }
        if let Some(points) = &self.wigner_points {
            if points.iter().any(|p| p.len() != n) {
                return invalid("wigner_points must have the scenario dimension".into());
            }
        }
        if let Some(map) = &self.caustic_map {
            if map.resolution < 16 {
                return invalid(format!("caustic_map.resolution must be >= 16, got {}", map.resolution));
            }
            if !(map.t_range[1] > map.t_range[0]) || map.t_range[0] < 0.0 || !(map.x_range[1] > map.x_range[0]) {
                return invalid("caustic_map ranges must be increasing with t >= 0".into());
            }
        }
        let s = &self.settings;
        if !(s.flow_dt > 0.0) || !(s.root_tol > 0.0) || !(s.caustic_threshold > 0.0) || s.grid_density == 0 {
            return invalid("settings must be positive".into());
        }
        if s.maslov == MaslovSpec::FreeEigenvalue && self.potential != PotentialSpec::Zero {
            return invalid("the free-eigenvalue Maslov method needs potential zero".into());
        }
        let problem = self.problem()?;
        problem.potential.check_derivatives(&probe_points(&problem))?;
        problem.phase.check_derivatives(&probe_points(&problem))?;
        if n <= 2 {
            self.base_grid()?;
        }
        Ok(())
    }

    pub fn potential(&self) -> CliResult<PotentialModel> {
        let n = self.dimension;
        Ok(match self.potential {
            PotentialSpec::Zero => PotentialModel::zero(n),
            PotentialSpec::Harmonic { omega } => PotentialModel::harmonic(n, omega),
            PotentialSpec::Cosine { v0, k } => PotentialModel::cosine(n, v0, k),
        })
    }

    pub fn phase(&self) -> CliResult<InitialPhase> {
        let n = self.dimension;
        Ok(match &self.phase {
            PhaseSpec::Quadratic { matrix } => {
                if matrix.len() != n || matrix.iter().any(|r| r.len() != n) {
                    return Err(CliError::Validation(format!(
                        "quadratic phase matrix must be {n} x {n}"
                    )));
                }
                let flat: Vec<f64> = matrix.iter().flatten().copied().collect();
                InitialPhase::quadratic(DMatrix::from_row_slice(n, n, &flat))?
            }
            PhaseSpec::Cosine { amplitude, wavenumber } => InitialPhase::Cosine {
                dim: n,
                amplitude: *amplitude,
                wavenumber: *wavenumber,
            },
            PhaseSpec::Linear { momentum } => InitialPhase::linear(momentum.clone()),
        })
    }

    pub fn amplitude(&self) -> CliResult<InitialAmplitude> {
        Ok(match &self.amplitude {
            AmplitudeSpec::Bump { center, width, scale } => {
                InitialAmplitude::bump(center.clone(), *width)?.scaled(*scale)
            }
            AmplitudeSpec::Gaussian { center, sigma, scale } => {
                InitialAmplitude::gaussian(center.clone(), *sigma)?.scaled(*scale)
            }
        })
    }

    pub fn problem(&self) -> CliResult<Problem> {
        let search_box = SearchBox::new(self.search_box.lower.clone(), self.search_box.upper.clone())?;
        let mut problem = Problem::new(self.potential()?, self.phase()?, self.amplitude()?, search_box)?;
        let s = &self.settings;
        problem.search = problem.search.with_density(s.grid_density).with_tol(s.root_tol);
        problem.settings = WkbSettings {
            flow_dt: s.flow_dt,
            caustic_threshold: s.caustic_threshold,
            maslov: match s.maslov {
                MaslovSpec::FreeEigenvalue => MaslovMethod::FreeEigenvalue,
                MaslovSpec::CrossingCount => MaslovMethod::CrossingCount,
            },
        };
        Ok(problem)
    }

    /// The grid as written in the scenario, before resolution refinement.
    pub fn base_grid(&self) -> CliResult<SpatialGrid> {
        let axes = self
            .grid
            .lower
            .iter()
            .zip(&self.grid.upper)
            .map(|(lo, hi)| Axis::new(*lo, hi - lo, self.grid.min_nodes))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(SpatialGrid::new(axes)?)
    }

    /// The reference grid used at `eps`.
    pub fn grid_for(&self, problem: &Problem, eps: f64) -> CliResult<SpatialGrid> {
        Ok(resolved_grid(problem, &self.base_grid()?, eps)?)
    }

    pub fn window_box(&self) -> CliResult<SearchBox> {
        Ok(SearchBox::new(self.window.lower.clone(), self.window.upper.clone())?)
    }
}

fn check_box(what: &str, n: usize, lower: &[f64], upper: &[f64]) -> CliResult<()> {
    if lower.len() != n || upper.len() != n {
        return Err(CliError::Validation(format!("{what} must have {n} bounds per side")));
    }
    if lower
        .iter()
        .zip(upper)
        .any(|(l, u)| !(u > l) || !l.is_finite() || !u.is_finite())
    {
        return Err(CliError::Validation(format!("{what} needs finite lower < upper")));
    }
    Ok(())
}

/// A few deterministic points inside the search box for derivative checks.
fn probe_points(problem: &Problem) -> Vec<Vec<f64>> {
    let b = &problem.search.search_box;
    [0.17, 0.5, 0.83]
        .iter()
        .map(|f| b.lower.iter().zip(&b.upper).map(|(l, u)| l + f * (u - l)).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shipped(name: &str) -> String {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name);
        fs::read_to_string(path).unwrap()
    }

    #[test]
    fn shipped_scenarios_validate() {
        for name in [
            "free-quadratic.json",
            "free-cosine.json",
            "harmonic.json",
            "cosine-lattice.json",
        ] {
            let loaded = Scenario::parse(&shipped(name)).unwrap();
            assert_eq!(loaded.sha256.len(), 64);
        }
    }

    #[test]
    fn rejects_bad_documents() {
        let base: serde_json::Value = serde_json::from_str(&shipped("free-cosine.json")).unwrap();
        let cases: Vec<(&str, serde_json::Value)> = vec![
            ("schema", serde_json::json!(2)),
            ("eps", serde_json::json!([0.1, 0.1])),
            ("eps", serde_json::json!([-0.1])),
            ("dimension", serde_json::json!(2)),
            ("times", serde_json::json!([-1.0])),
        ];
        for (key, value) in cases {
            let mut doc = base.clone();
            doc[key] = value;
            let err = Scenario::parse(&doc.to_string()).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{key}: {err}");
        }
        let mut doc = base.clone();
        doc["unexpected"] = serde_json::json!(1);
        assert!(Scenario::parse(&doc.to_string()).is_err());
    }

    #[test]
    fn hash_tracks_source_text() {
        let text = shipped("free-cosine.json");
        let a = Scenario::parse(&text).unwrap();
        let b = Scenario::parse(&format!("{text}\n")).unwrap();
        assert_eq!(a.scenario, b.scenario);
        assert_ne!(a.sha256, b.sha256);
    }
}
