use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use semiclassical_cli::drivers::{run_caustic_map, run_compare, run_maslov_audit, run_sweep, run_wigner};
use semiclassical_cli::{CliError, CliResult, Scenario};

#[derive(Debug, Parser)]
#[command(
    name = "wkb",
    version,
    about = "Semiclassical WKB experiments against a spectral reference solver"
)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,

    /// Scenario JSON file.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,

    /// Output directory; overrides the scenario's `output`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Restrict to one eps instead of the scenario list.
    #[arg(long, global = true)]
    eps: Option<f64>,

    /// Restrict to one time instead of the scenario list.
    #[arg(long, global = true)]
    t: Option<f64>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Verb {
    /// Sup error between the reference solution and the WKB sum on the window.
    Compare,
    /// Branch counts, minimum Jacobians and Maslov indices over (t, x).
    CausticMap,
    /// Crossing-count versus eigenvalue-count Maslov indices.
    MaslovAudit,
    /// Wigner slices and branch masses of the reference solution.
    Wigner,
    /// eps-convergence table of the sup error.
    Sweep,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: &Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Validation(format!("--threads: {e}")))?;
    }
    let path = cli
        .scenario
        .as_deref()
        .ok_or_else(|| CliError::Validation("--scenario is required".into()))?;
    let loaded = Scenario::load(path)?;
    let s = &loaded.scenario;
    let problem = s.problem()?;
    let out = cli.out.clone().unwrap_or_else(|| s.output.clone());
    let times = select(&s.times, cli.t, "t")?;
    let eps = select(&s.eps, cli.eps, "eps")?;
    let t_max = s.times.iter().copied().fold(0.0, f64::max);
    let (t_range, x_range, resolution) = match &s.caustic_map {
        Some(m) => (m.t_range, m.x_range, m.resolution),
        None => ([0.0, t_max], [s.window.lower[0], s.window.upper[0]], 64),
    };

    match cli.verb {
        Verb::Compare => {
            for &t in &times {
                for &e in &eps {
                    let report = run_compare(&loaded, &problem, t, e)?;
                    let file = out.join(format!("compare_{}_t{t}_eps{e}.csv", s.name));
                    report.to_table(&loaded).write(&file)?;
                    println!(
                        "t = {t}, eps = {e}: sup error {:.6e} -> {}",
                        report.sup_error(),
                        file.display()
                    );
                }
            }
        }
        Verb::CausticMap => {
            let map = run_caustic_map(&problem, t_range, x_range, resolution)?;
            let file = out.join(format!("caustic_map_{}.csv", s.name));
            map.to_table(&loaded).write(&file)?;
            let flagged = map.cells.iter().filter(|c| c.flagged).count();
            println!("{flagged} of {} cells flagged -> {}", map.cells.len(), file.display());
        }
        Verb::MaslovAudit => {
            let audit = run_maslov_audit(&problem, [t_range[0], t_range[1]], x_range, s.audit_samples)?;
            let file = out.join(format!("maslov_audit_{}.csv", s.name));
            audit.to_table(&loaded).write(&file)?;
            println!(
                "{} points ({} skipped near caustics), {} branches, {} mismatches -> {}",
                audit.points,
                audit.skipped,
                audit.rows.len(),
                audit.mismatches(),
                file.display()
            );
        }
        Verb::Wigner => {
            for &t in &times {
                for &e in &eps {
                    let report = run_wigner(&loaded, &problem, t, e)?;
                    let slice = out.join(format!("wigner_slice_{}_t{t}_eps{e}.csv", s.name));
                    let masses = out.join(format!("wigner_mass_{}_t{t}_eps{e}.csv", s.name));
                    report.slice_table(&loaded).write(&slice)?;
                    report.mass_table(&loaded).write(&masses)?;
                    print_masses(&report, &masses);
                }
            }
        }
        Verb::Sweep => {
            let report = run_sweep(&loaded, &problem, &times, &eps)?;
            let file = out.join(format!("sweep_{}.csv", s.name));
            report.to_table(&loaded).write(&file)?;
            for r in &report.rows {
                println!("t = {}, eps = {}: sup error {:.6e}", r.t, r.eps, r.sup_error);
            }
            println!("-> {}", file.display());
        }
    }
    Ok(())
}

fn select(list: &[f64], pick: Option<f64>, what: &str) -> CliResult<Vec<f64>> {
    match pick {
        None => Ok(list.to_vec()),
        Some(v) if v > 0.0 || (what == "t" && v == 0.0) => Ok(vec![v]),
        Some(v) => Err(CliError::Validation(format!("--{what} {v} is out of range"))),
    }
}

fn print_masses(report: &semiclassical_cli::drivers::WignerReport, file: &Path) {
    for (x, masses) in &report.masses {
        for m in masses {
            println!(
                "t = {}, eps = {}, x = {x}: xi {:+.5} mass {:.5} limit {:.5}",
                report.t, report.eps, m.xi_center, m.mass, m.limit
            );
        }
    }
    for (x, why) in &report.unavailable {
        println!(
            "t = {}, eps = {}, x = {x}: masses unavailable ({why})",
            report.t, report.eps
        );
    }
    println!("-> {}", file.display());
}
