//! Experiment drivers behind the CLI verbs. Each returns a report that
//! renders to a [`Table`]; nothing here depends on wall-clock time or
//! random numbers, so identical scenarios give identical tables.

use num_complex::Complex64;
use rayon::prelude::*;

use semiclassical::maslov::{maslov_crossings, maslov_free};
use semiclassical::ray_map::SearchBox;
use semiclassical::reference::{evolve_split_step, WaveField};
use semiclassical::wigner::{concentration_weights, natural_xi_grid, wigner_transform, BranchMass};
use semiclassical::wkb::Problem;
use semiclassical::Error;

use crate::error::{CliError, CliResult};
use crate::scenario::LoadedScenario;
use crate::table::{num, Table};

/// Cells whose smallest Jacobian falls below this are flagged in caustic maps.
pub const MAP_FLAG_JACOBIAN: f64 = 0.05;

fn base_meta(table: &mut Table, loaded: &LoadedScenario, verb: &str) {
    let s = &loaded.scenario;
    table
        .meta("verb", verb)
        .meta("scenario", &s.name)
        .meta("scenario_sha256", &loaded.sha256)
        .meta("version", env!("CARGO_PKG_VERSION"))
        .meta("flow_dt", num(s.settings.flow_dt))
        .meta("root_tol", num(s.settings.root_tol))
        .meta("grid_density", s.settings.grid_density)
        .meta("caustic_threshold", num(s.settings.caustic_threshold))
        .meta("maslov", format!("{:?}", s.settings.maslov))
        .meta("split_dt", num(s.grid.dt));
}

fn coordinate_header(n: usize) -> Vec<String> {
    (0..n).map(|k| format!("x{k}")).collect()
}

fn require_listed(values: &[f64], v: f64, what: &str) -> CliResult<()> {
    if values.iter().any(|w| (w - v).abs() <= 1e-12 * v.abs().max(1.0)) {
        Ok(())
    } else {
        Err(CliError::Validation(format!(
            "{what} = {v} is not in the scenario list {values:?}"
        )))
    }
}

fn caustic_to_window(x: &[f64], e: Error) -> CliError {
    match e {
        Error::CausticProximity { jacobian, .. } => CliError::CausticInWindow {
            x: x.to_vec(),
            jacobian,
        },
        Error::OnCaustic { margin } => CliError::CausticInWindow {
            x: x.to_vec(),
            jacobian: margin,
        },
        Error::NonTransversalCrossing { .. } => CliError::CausticInWindow {
            x: x.to_vec(),
            jacobian: f64::NAN,
        },
        other => other.into(),
    }
}

/// Reference solution at `t` evolved from the WKB initial datum.
pub fn reference_field(loaded: &LoadedScenario, problem: &Problem, t: f64, eps: f64) -> CliResult<WaveField> {
    let s = &loaded.scenario;
    if s.dimension > 2 {
        return Err(CliError::Validation(
            "the reference solver handles dimensions 1 and 2".into(),
        ));
    }
    let grid = s.grid_for(problem, eps)?;
    let field = WaveField::initial_datum(grid, eps, problem)?;
    Ok(evolve_split_step(&problem.potential, &field, t, s.grid.dt)?)
}

#[derive(Debug, Clone)]
pub struct ComparePoint {
    pub x: Vec<f64>,
    pub reference: Complex64,
    pub wkb: Complex64,
}

impl ComparePoint {
    pub fn error(&self) -> f64 {
        (self.reference - self.wkb).norm()
    }
}

#[derive(Debug, Clone)]
pub struct CompareReport {
    pub t: f64,
    pub eps: f64,
    pub grid_nodes: usize,
    pub points: Vec<ComparePoint>,
}

impl CompareReport {
    pub fn sup_error(&self) -> f64 {
        self.points.iter().map(ComparePoint::error).fold(0.0, f64::max)
    }

    /// Sup error over the points inside `window`.
    pub fn sup_error_in(&self, window: &SearchBox) -> f64 {
        self.points
            .iter()
            .filter(|p| window.contains(&p.x, 0.0))
            .map(ComparePoint::error)
            .fold(0.0, f64::max)
    }

    pub fn to_table(&self, loaded: &LoadedScenario) -> Table {
        let n = loaded.scenario.dimension;
        let mut header = coordinate_header(n);
        header.extend(["re_reference", "im_reference", "re_wkb", "im_wkb", "abs_error"].map(String::from));
        let mut table = Table {
            header,
            ..Table::default()
        };
        base_meta(&mut table, loaded, "compare");
        table
            .meta("t", num(self.t))
            .meta("eps", num(self.eps))
            .meta("grid_nodes", self.grid_nodes)
            .meta("sup_error", num(self.sup_error()));
        for p in &self.points {
            let mut row: Vec<String> = p.x.iter().map(|v| num(*v)).collect();
            row.extend([p.reference.re, p.reference.im, p.wkb.re, p.wkb.im, p.error()].map(num));
            table.push(row);
        }
        table
    }
}

/// `|psi_eps - Psi_eps|` at the reference-grid nodes inside the scenario
/// window.
pub fn run_compare(loaded: &LoadedScenario, problem: &Problem, t: f64, eps: f64) -> CliResult<CompareReport> {
    let s = &loaded.scenario;
    require_listed(&s.times, t, "t")?;
    let window = s.window_box()?;
    let field = reference_field(loaded, problem, t, eps)?;
    let nodes: Vec<usize> = (0..field.grid.len())
        .filter(|&i| window.contains(&field.grid.node(i), 0.0))
        .collect();
    if nodes.is_empty() {
        return Err(CliError::Validation("the comparison window holds no grid node".into()));
    }
    let points = nodes
        .par_iter()
        .map(|&i| {
            let x = field.grid.node(i);
            let wkb = problem.wkb_value(eps, t, &x).map_err(|e| caustic_to_window(&x, e))?;
            Ok(ComparePoint {
                x,
                reference: field.values[i],
                wkb,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(CompareReport {
        t,
        eps,
        grid_nodes: field.grid.len(),
        points,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CausticCell {
    pub t: f64,
    pub x: f64,
    pub branches: usize,
    /// Smallest `J_t(y_j)` over the branches; NaN without branches.
    pub min_jacobian: f64,
    pub maslov: Vec<u32>,
    pub flagged: bool,
}

#[derive(Debug, Clone)]
pub struct CausticMap {
    pub resolution: usize,
    pub cells: Vec<CausticCell>,
}

impl CausticMap {
    pub fn row(&self, k: usize) -> &[CausticCell] {
        &self.cells[k * self.resolution..(k + 1) * self.resolution]
    }

    pub fn to_table(&self, loaded: &LoadedScenario) -> Table {
        let mut table = Table::new(&["t", "x", "branches", "min_jacobian", "flagged", "maslov"]);
        base_meta(&mut table, loaded, "caustic-map");
        table
            .meta("resolution", self.resolution)
            .meta("flag_jacobian", num(MAP_FLAG_JACOBIAN));
        for c in &self.cells {
            let maslov: Vec<String> = c.maslov.iter().map(u32::to_string).collect();
            table.push(vec![
                num(c.t),
                num(c.x),
                c.branches.to_string(),
                num(c.min_jacobian),
                u8::from(c.flagged).to_string(),
                maslov.join(";"),
            ]);
        }
        table
    }
}

fn linspace(range: [f64; 2], k: usize, n: usize) -> f64 {
    range[0] + (range[1] - range[0]) * k as f64 / (n - 1) as f64
}

/// Branch count, smallest Jacobian and Maslov indices on a
/// `resolution x resolution` grid of `(t, x)`. A cell is flagged when the
/// branch search hits the caustic, when a Maslov index is undefined, when
/// the smallest Jacobian is below [`MAP_FLAG_JACOBIAN`], or when the branch
/// count differs from a neighbour in the same `t` row.
pub fn run_caustic_map(
    problem: &Problem,
    t_range: [f64; 2],
    x_range: [f64; 2],
    resolution: usize,
) -> CliResult<CausticMap> {
    if problem.dim() != 1 {
        return Err(CliError::Validation("caustic maps are one-dimensional".into()));
    }
    if resolution < 16 {
        return Err(CliError::Validation(format!(
            "resolution must be >= 16, got {resolution}"
        )));
    }
    let rays = problem.rays();
    let mut cells: Vec<CausticCell> = (0..resolution * resolution)
        .into_par_iter()
        .map(|flat| {
            let t = linspace(t_range, flat / resolution, resolution);
            let x = linspace(x_range, flat % resolution, resolution);
            let mut cell = CausticCell {
                t,
                x,
                branches: 0,
                min_jacobian: f64::NAN,
                maslov: Vec::new(),
                flagged: false,
            };
            match problem.branches(t, &[x]) {
                Ok(branches) => {
                    cell.branches = branches.len();
                    cell.min_jacobian = branches.iter().map(|b| b.jacobian).fold(f64::INFINITY, f64::min);
                    match branches
                        .iter()
                        .map(|b| problem.maslov_index(b, t))
                        .collect::<Result<Vec<u32>, _>>()
                    {
                        Ok(m) => cell.maslov = m,
                        Err(_) => cell.flagged = true,
                    }
                }
                Err(Error::CausticProximity { .. }) => {
                    cell.flagged = true;
                    if let Ok(roots) = rays.find_preimages(t, &[x], &problem.search) {
                        cell.branches = roots.len();
                        cell.min_jacobian = roots.iter().map(|b| b.jacobian).fold(f64::INFINITY, f64::min);
                    }
                }
                Err(Error::NoRoot { .. }) => cell.flagged = true,
                Err(e) => return Err(CliError::from(e)),
            }
            if cell.min_jacobian < MAP_FLAG_JACOBIAN {
                cell.flagged = true;
            }
            Ok(cell)
        })
        .collect::<CliResult<_>>()?;
    for k in 0..resolution {
        for j in 0..resolution {
            let here = cells[k * resolution + j].branches;
            let differs = (j > 0 && cells[k * resolution + j - 1].branches != here)
                || (j + 1 < resolution && cells[k * resolution + j + 1].branches != here);
            if differs {
                cells[k * resolution + j].flagged = true;
            }
        }
    }
    Ok(CausticMap { resolution, cells })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditRow {
    pub t: f64,
    pub x: f64,
    pub branch: usize,
    pub y: f64,
    pub jacobian: f64,
    pub crossings: u32,
    /// Negative-eigenvalue count of `I + t hess S_in`, for `V = 0` only.
    pub free: Option<u32>,
}

impl AuditRow {
    pub fn agrees(&self) -> bool {
        self.free.is_none_or(|f| f == self.crossings)
    }
}

#[derive(Debug, Clone)]
pub struct AuditReport {
    pub rows: Vec<AuditRow>,
    pub points: usize,
    pub skipped: usize,
}

impl AuditReport {
    pub fn mismatches(&self) -> usize {
        self.rows.iter().filter(|r| !r.agrees()).count()
    }

    pub fn to_table(&self, loaded: &LoadedScenario) -> Table {
        let mut table = Table::new(&[
            "t",
            "x",
            "branch",
            "y",
            "jacobian",
            "crossing_count",
            "free_eigenvalue",
            "agree",
        ]);
        base_meta(&mut table, loaded, "maslov-audit");
        table
            .meta("points", self.points)
            .meta("skipped", self.skipped)
            .meta("mismatches", self.mismatches());
        for r in &self.rows {
            table.push(vec![
                num(r.t),
                num(r.x),
                r.branch.to_string(),
                num(r.y),
                num(r.jacobian),
                r.crossings.to_string(),
                r.free.map_or(String::new(), |f| f.to_string()),
                u8::from(r.agrees()).to_string(),
            ]);
        }
        table
    }
}

/// Van der Corput radical inverse of `k` in `base`.
pub fn radical_inverse(mut k: usize, base: usize) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while k > 0 {
        out += (k % base) as f64 * inv;
        k /= base;
        inv /= base as f64;
    }
    out
}

/// Compares the crossing count with the free eigenvalue count on `samples`
/// off-caustic points from a Halton sequence over `t_range x x_range`.
/// Points where the branch search or a crossing count meets the caustic are
/// skipped and counted.
pub fn run_maslov_audit(
    problem: &Problem,
    t_range: [f64; 2],
    x_range: [f64; 2],
    samples: usize,
) -> CliResult<AuditReport> {
    if problem.dim() != 1 {
        return Err(CliError::Validation("the Maslov audit is one-dimensional".into()));
    }
    let rays = problem.rays();
    let free = problem.potential.is_free();
    let mut rows = Vec::new();
    let (mut points, mut skipped) = (0, 0);
    let mut k = 1;
    while points < samples {
        if k > 50 * samples.max(1) {
            return Err(CliError::Validation(format!(
                "only {points} of {samples} audit points are off the caustic"
            )));
        }
        let t = t_range[0] + (t_range[1] - t_range[0]) * radical_inverse(k, 2);
        let x = x_range[0] + (x_range[1] - x_range[0]) * radical_inverse(k, 3);
        k += 1;
        if t <= 0.0 {
            continue;
        }
        let audited = problem.branches(t, &[x]).and_then(|branches| {
            branches
                .iter()
                .map(|b| {
                    let crossings = maslov_crossings(&rays, &b.y, t)?.index;
                    let free = if free {
                        Some(maslov_free(&problem.phase.hessian_matrix(&b.y), t)?)
                    } else {
                        None
                    };
                    Ok(AuditRow {
                        t,
                        x,
                        branch: b.index,
                        y: b.y[0],
                        jacobian: b.jacobian,
                        crossings,
                        free,
                    })
                })
                .collect::<Result<Vec<_>, Error>>()
        });
        match audited {
            Ok(r) => {
                rows.extend(r);
                points += 1;
            }
            Err(
                Error::CausticProximity { .. }
                | Error::OnCaustic { .. }
                | Error::NonTransversalCrossing { .. }
                | Error::NoRoot { .. },
            ) => skipped += 1,
            Err(e) => return Err(e.into()),
        }
    }
    Ok(AuditReport { rows, points, skipped })
}

#[derive(Debug, Clone)]
pub struct WignerReport {
    pub t: f64,
    pub eps: f64,
    /// `(x, xi, W)` samples.
    pub slices: Vec<(f64, f64, f64)>,
    pub masses: Vec<(f64, Vec<BranchMass>)>,
    /// Points whose position average would cross a caustic, with the reason.
    pub unavailable: Vec<(f64, String)>,
}

impl WignerReport {
    pub fn slice_table(&self, loaded: &LoadedScenario) -> Table {
        let mut table = Table::new(&["x", "xi", "w"]);
        base_meta(&mut table, loaded, "wigner");
        table.meta("t", num(self.t)).meta("eps", num(self.eps));
        for (x, xi, w) in &self.slices {
            table.push(vec![num(*x), num(*xi), num(*w)]);
        }
        table
    }

    pub fn mass_table(&self, loaded: &LoadedScenario) -> Table {
        let mut table = Table::new(&["x", "branch", "xi_center", "mass", "limit", "relative_error"]);
        base_meta(&mut table, loaded, "wigner");
        table
            .meta("t", num(self.t))
            .meta("eps", num(self.eps))
            .meta("window_width", num(loaded.scenario.wigner_window));
        if !self.unavailable.is_empty() {
            let xs: Vec<String> = self.unavailable.iter().map(|(x, _)| num(*x)).collect();
            table.meta("unavailable_x", xs.join(";"));
        }
        for (x, masses) in &self.masses {
            for (j, m) in masses.iter().enumerate() {
                table.push(vec![
                    num(*x),
                    j.to_string(),
                    num(m.xi_center),
                    num(m.mass),
                    num(m.limit),
                    num((m.mass - m.limit).abs() / m.limit),
                ]);
            }
        }
        table
    }
}

/// Wigner slices of the reference solution and the branch masses at the
/// scenario's Wigner points.
pub fn run_wigner(loaded: &LoadedScenario, problem: &Problem, t: f64, eps: f64) -> CliResult<WignerReport> {
    let s = &loaded.scenario;
    if s.dimension != 1 {
        return Err(CliError::Validation("the wigner verb is one-dimensional".into()));
    }
    require_listed(&s.times, t, "t")?;
    let points: Vec<f64> = match &s.wigner_points {
        Some(p) => p.iter().map(|x| x[0]).collect(),
        None => vec![0.5 * (s.window.lower[0] + s.window.upper[0])],
    };
    let field = reference_field(loaded, problem, t, eps)?;
    let xi_grid = natural_xi_grid(&field);
    let bound = 2.0 * semiclassical::reference::momentum_bound(problem, &field.grid) + 4.0 * s.wigner_window;
    let mut slices = Vec::new();
    let mut masses = Vec::new();
    let mut unavailable = Vec::new();
    for &x in &points {
        let slice = wigner_transform(&field, &[x], &xi_grid)?;
        for (k, w) in slice.values.iter().enumerate() {
            let xi = xi_grid.node(k)[0];
            if xi.abs() <= bound {
                slices.push((x, xi, *w));
            }
        }
        // the branch masses are undefined when the eps-dependent position
        // average reaches a caustic; the slice itself is still reported
        match concentration_weights(&field, problem, t, &[x], s.wigner_window) {
            Ok(m) => masses.push((x, m)),
            Err(e @ (Error::BranchJump { .. } | Error::CausticProximity { .. })) => {
                unavailable.push((x, e.to_string()))
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(WignerReport {
        t,
        eps,
        slices,
        masses,
        unavailable,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub t: f64,
    pub eps: f64,
    pub sup_error: f64,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    /// `sup_error(eps_k) / sup_error(eps_{k+1})` for consecutive rows at the
    /// same `t`, with `eps` sorted in decreasing order.
    pub fn ratios(&self, t: f64) -> Vec<f64> {
        let errs: Vec<f64> = self.rows.iter().filter(|r| r.t == t).map(|r| r.sup_error).collect();
        errs.windows(2).map(|w| w[0] / w[1]).collect()
    }

    pub fn to_table(&self, loaded: &LoadedScenario) -> Table {
        let mut table = Table::new(&["t", "eps", "sup_error", "ratio_to_next"]);
        base_meta(&mut table, loaded, "sweep");
        for (i, r) in self.rows.iter().enumerate() {
            let ratio = self
                .rows
                .get(i + 1)
                .filter(|n| n.t == r.t)
                .map_or(String::new(), |n| num(r.sup_error / n.sup_error));
            table.push(vec![num(r.t), num(r.eps), num(r.sup_error), ratio]);
        }
        table
    }
}

/// Sup errors over the window for every listed `t` and every `eps`
/// (largest first); the evolutions for different `eps` run concurrently.
pub fn run_sweep(loaded: &LoadedScenario, problem: &Problem, times: &[f64], eps: &[f64]) -> CliResult<SweepReport> {
    let mut eps = eps.to_vec();
    eps.sort_by(|a, b| b.total_cmp(a));
    let jobs: Vec<(f64, f64)> = times.iter().flat_map(|&t| eps.iter().map(move |&e| (t, e))).collect();
    let rows = jobs
        .par_iter()
        .map(|&(t, e)| {
            let report = run_compare(loaded, problem, t, e)?;
            Ok(SweepRow {
                t,
                eps: e,
                sup_error: report.sup_error(),
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(SweepReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halton_points() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(3, 2), 0.75);
        assert!((radical_inverse(5, 3) - 7.0 / 9.0).abs() < 1e-15);
    }
}
