//! `prepot`: equilibrium, mode, spectrum, and correspondence reports for
//! prepotential systems, from one static binary.
//!
//! Subcommand style with a JSON config file and flag overrides (flags
//! win). Exit codes: 0 success, 1 solver failure, 2 unmatched levels in a
//! correspondence run, 64 malformed configuration.

mod config;
mod output;

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use prepotential::classical::verification_rows;
use prepotential::correspondence::{
    default_hbar_sweep, run_correspondence, CorrespondenceOptions, LevelStatus,
};
use prepotential::equilibrium::{find_equilibrium, EquilibriumReport};
use prepotential::quantum::{
    converge_spectrum, default_grid, solve_spectrum, GridSpec, SpectrumTable,
    DEFAULT_REL_TOL,
};
use prepotential::report;
use prepotential::systems::{make_system, PrepotentialSystem};

use config::{FlagOverrides, Format, RunConfig};
use output::{list, write_reports};

#[derive(Parser)]
#[command(
    name = "prepot",
    version,
    about = "Classical-spectrum analysis of prepotential systems",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Locate the equilibrium and report normal-mode frequencies
    Analyze(AnalyzeArgs),
    /// Solve the quantum spectrum on grids across an hbar list
    Spectrum(SpectrumArgs),
    /// Verify classical eigenfunctions by seeded sampling
    Verify(VerifyArgs),
    /// Fit the hbar sweep and decompose levels over mode frequencies
    Correspond(CorrespondArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Catalog system name (harmonic | poschl_teller | calogero_a)
    #[arg(long)]
    system: Option<String>,
    /// JSON config file; explicit flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Oscillator frequency parameter
    #[arg(long, allow_negative_numbers = true)]
    omega: Option<f64>,
    /// Coupling parameter
    #[arg(long, allow_negative_numbers = true)]
    g: Option<f64>,
    /// Particle count (calogero_a)
    #[arg(long, allow_negative_numbers = true)]
    n: Option<f64>,
    /// Path prefix for report files (<prefix>.<command>.{json,csv})
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report format written under --out
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Seed for sampled verification points
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct SpectrumArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// hbar values (repeat the flag or separate with commas)
    #[arg(long = "hbar", value_delimiter = ',', num_args = 1..)]
    hbar: Option<Vec<f64>>,
    /// Number of levels to resolve
    #[arg(long)]
    levels: Option<usize>,
    /// Grid half-width override (box [-L, L])
    #[arg(long)]
    half_width: Option<f64>,
    /// Grid point count override (pins the grid; disables refinement)
    #[arg(long)]
    points: Option<usize>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Sample points per eigenfunction
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Args)]
struct CorrespondArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// hbar sweep (repeat the flag or separate with commas; >= 3 values)
    #[arg(long = "hbar", value_delimiter = ',', num_args = 1..)]
    hbar: Option<Vec<f64>>,
    /// Number of levels to fit and decompose
    #[arg(long)]
    levels: Option<usize>,
    /// Grid half-width override (needs --points as well)
    #[arg(long)]
    half_width: Option<f64>,
    /// Grid point count override (needs --half-width as well)
    #[arg(long)]
    points: Option<usize>,
    /// Absolute tolerance for matching fitted eigenvalues
    #[arg(long, allow_negative_numbers = true)]
    match_tol: Option<f64>,
    /// Cap on total occupation in the decomposition search
    #[arg(long)]
    max_total: Option<usize>,
}

fn main() {
    // die quietly when the reader of a pipe goes away (e.g. `prepot ... | head`)
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 64 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    std::process::exit(run(cli));
}

fn run(cli: Cli) -> i32 {
    let built = match build(&cli) {
        Ok(built) => built,
        Err(e) => {
            eprintln!("error: {e:#}");
            eprintln!("run `prepot --help` for usage");
            return 64;
        }
    };
    let (cfg, system) = built;
    let outcome = match &cli.command {
        Command::Analyze(_) => cmd_analyze(&cfg, &system),
        Command::Spectrum(_) => cmd_spectrum(&cfg, &system),
        Command::Verify(_) => cmd_verify(&cfg, &system),
        Command::Correspond(_) => cmd_correspond(&cfg, &system),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

/// Configuration phase: merge file and flags, then build the system.
/// Every failure here is a usage problem (exit 64).
fn build(cli: &Cli) -> Result<(RunConfig, PrepotentialSystem)> {
    let (name, common) = match &cli.command {
        Command::Analyze(a) => ("analyze", &a.common),
        Command::Spectrum(a) => ("spectrum", &a.common),
        Command::Verify(a) => ("verify", &a.common),
        Command::Correspond(a) => ("correspond", &a.common),
    };

    let mut flags = FlagOverrides {
        system: common.system.clone(),
        out: common.out.clone(),
        format: common.format,
        seed: common.seed,
        ..FlagOverrides::default()
    };
    let mut params = BTreeMap::new();
    if let Some(v) = common.omega {
        params.insert("omega".to_string(), v);
    }
    if let Some(v) = common.g {
        params.insert("g".to_string(), v);
    }
    if let Some(v) = common.n {
        params.insert("n".to_string(), v);
    }
    flags.params = params;

    match &cli.command {
        Command::Analyze(_) => {}
        Command::Spectrum(a) => {
            flags.hbar_list = a.hbar.clone();
            flags.levels = a.levels;
            flags.half_width = a.half_width;
            flags.points = a.points;
        }
        Command::Verify(a) => {
            flags.samples = a.samples;
        }
        Command::Correspond(a) => {
            flags.hbar_list = a.hbar.clone();
            flags.levels = a.levels;
            flags.half_width = a.half_width;
            flags.points = a.points;
            flags.match_tol = a.match_tol;
            flags.max_total = a.max_total;
        }
    }

    let file = match &common.config {
        Some(path) => Some(config::load_file(path)?),
        None => None,
    };
    if let Some(file_command) = file.as_ref().and_then(|f| f.command.as_deref()) {
        if file_command != name {
            eprintln!(
                "note: config file names command `{file_command}`; running `{name}` as invoked"
            );
        }
    }
    let cfg = config::resolve(name, file, flags)?;

    if name == "correspond" {
        if !cfg.hbar_list.is_empty() && cfg.hbar_list.len() < 3 {
            bail!(
                "the correspond sweep needs at least 3 hbar values, got {}",
                cfg.hbar_list.len()
            );
        }
        if let Some(grid) = &cfg.grid {
            if grid.half_width.is_some() != grid.points.is_some() {
                bail!("correspond grid overrides need both --half-width and --points");
            }
        }
    }

    let system = make_system(&cfg.system.name, &cfg.system.params)
        .map_err(|e| anyhow!("{e}"))?;
    Ok((cfg, system))
}

fn param_summary(cfg: &RunConfig) -> String {
    let inner: Vec<String> = cfg
        .system
        .params
        .iter()
        .map(|(k, v)| format!("{k} = {v}"))
        .collect();
    format!("{} ({})", cfg.system.name, inner.join(", "))
}

fn report_written(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn equilibrium_for(system: &PrepotentialSystem) -> Result<EquilibriumReport> {
    find_equilibrium(system, &system.default_guess(), 1e-12)
        .context("equilibrium search failed")
}

fn cmd_analyze(cfg: &RunConfig, system: &PrepotentialSystem) -> Result<i32> {
    let report = equilibrium_for(system)?;
    println!("system: {}", param_summary(cfg));
    println!("qbar = {}", list(&report.qbar));
    println!("frequencies = {}", list(&report.frequencies));
    println!("|grad W| = {:e}", report.grad_norm);
    let paths = write_reports(cfg, &report, &report::equilibrium_csv(&report))?;
    report_written(&paths);
    Ok(0)
}

fn cmd_spectrum(cfg: &RunConfig, system: &PrepotentialSystem) -> Result<i32> {
    let hbars: Vec<f64> = if cfg.hbar_list.is_empty() {
        vec![1.0]
    } else {
        cfg.hbar_list.clone()
    };
    let levels = cfg.levels;
    let overrides = cfg.grid.clone().unwrap_or_default();

    let tables: Result<Vec<SpectrumTable>> = std::thread::scope(|scope| {
        let handles: Vec<_> = hbars
            .iter()
            .map(|&hbar| {
                let overrides = &overrides;
                scope.spawn(move || -> Result<SpectrumTable> {
                    let mut grid = default_grid(system, hbar, levels)
                        .map_err(|e| anyhow!("{e}"))?;
                    if let Some(w) = overrides.half_width {
                        grid.half_width = w;
                    }
                    if let Some(p) = overrides.points {
                        grid.points = p;
                        // a pinned point count means: solve this exact grid
                        return solve_spectrum(system, hbar, &grid)
                            .map_err(|e| anyhow!("{e}"));
                    }
                    converge_spectrum(system, hbar, &grid, DEFAULT_REL_TOL)
                        .map_err(|e| anyhow!("{e}"))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("solver thread panicked"))
            .collect()
    });
    let tables = tables?;

    println!("system: {}", param_summary(cfg));
    for t in &tables {
        let trusted = (0..t.energies.len()).filter(|&i| t.is_trusted(i)).count();
        println!(
            "hbar = {}: E = {} ({} of {} trusted{})",
            t.hbar,
            list(&t.energies),
            trusted,
            t.energies.len(),
            if t.truncation_warning {
                ", truncated box"
            } else {
                ""
            }
        );
    }
    let paths = write_reports(cfg, &tables, &report::spectrum_csv(&tables))?;
    report_written(&paths);
    Ok(0)
}

fn cmd_verify(cfg: &RunConfig, system: &PrepotentialSystem) -> Result<i32> {
    let rows = verification_rows(system, cfg.samples, cfg.seed)
        .map_err(|e| anyhow!("{e}"))?;
    println!("system: {}", param_summary(cfg));
    let mut worst = 0.0f64;
    for row in &rows {
        println!(
            "{:<26} eigenvalue {:<8} residual {:.2e}",
            row.label, row.eigenvalue, row.residual
        );
        worst = worst.max(row.residual);
    }
    println!(
        "{} eigenfunctions checked, worst residual {worst:.2e}",
        rows.len()
    );
    let paths = write_reports(cfg, &rows, &report::verification_csv(&rows))?;
    report_written(&paths);
    Ok(0)
}

fn cmd_correspond(cfg: &RunConfig, system: &PrepotentialSystem) -> Result<i32> {
    let hbars: Vec<f64> = if cfg.hbar_list.is_empty() {
        default_hbar_sweep(system, cfg.levels)
    } else {
        cfg.hbar_list.clone()
    };
    let base_grid = cfg.grid.as_ref().and_then(|g| {
        Some(GridSpec {
            half_width: g.half_width?,
            points: g.points?,
            levels: cfg.levels,
        })
    });
    let options = CorrespondenceOptions {
        base_grid,
        match_tol: cfg.match_tol,
        max_total: cfg.max_total,
        ..CorrespondenceOptions::default()
    };
    let run = run_correspondence(system, &hbars, cfg.levels, &options)
        .map_err(|e| anyhow!("{e}"))?;

    println!("system: {}", param_summary(cfg));
    println!("sweep: hbar = {}", list(&run.hbar_list));
    println!("frequencies = {}", list(&run.equilibrium.frequencies));
    let mut matched = 0usize;
    for rep in &run.reports {
        match rep.status {
            LevelStatus::Matched => {
                matched += 1;
                let occ = rep.match_vector.as_ref().unwrap();
                let occ: Vec<String> = occ.iter().map(|n| n.to_string()).collect();
                println!(
                    "level {}: eigenvalue {:.6} = ({}) residual {:.2e}",
                    rep.level,
                    rep.classical_eigenvalue.unwrap(),
                    occ.join(","),
                    rep.match_residual.unwrap()
                );
            }
            LevelStatus::Unmatched => println!(
                "level {}: eigenvalue {:.6} unmatched (best residual {:.2e})",
                rep.level,
                rep.classical_eigenvalue.unwrap(),
                rep.match_residual.unwrap()
            ),
            LevelStatus::Flagged => {
                println!("level {}: flagged (untrusted on some grids)", rep.level)
            }
        }
    }
    println!("{matched} of {} levels matched", run.reports.len());

    let paths = write_reports(cfg, &run, &report::correspondence_csv(&run))?;
    report_written(&paths);
    Ok(if matched == run.reports.len() { 0 } else { 2 })
}
