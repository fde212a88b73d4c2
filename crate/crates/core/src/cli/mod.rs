//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 every
//! trajectory diverged, 3 parameters infeasible.

pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::analysis::{check_feasibility, check_feasibility_per_coordinate, sweep_rho, theoretical_bounds, StabilityReport};
use crate::dither::DitherSpec;
use crate::dynamics::AlgoParams;
use crate::ensemble::{self, InitSpec};
use crate::error::Error;
use crate::objectives::curvature_at_minimizer;

use config::{paper_scale_traj, ExperimentConfig, PartialConfig, SystemKind};
use output::{paths_path, read_columns, sidecar_path, write_columns_csv, write_json, write_paths_csv, write_stats_csv};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DIVERGED: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "tdes", version, about = "Delayed-dither extremum seeking experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an ensemble and write per-step statistics.
    Simulate(SimulateArgs),
    /// Write theoretical mean and 1-sigma bound for a quadratic experiment.
    Analyze(AnalyzeArgs),
    /// Check parameter feasibility and print the report as JSON.
    Feasible(FeasibleArgs),
    /// Report feasible step-size intervals at fixed beta.
    Sweep(SweepArgs),
    /// List the built-in presets.
    Presets,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// JSON configuration file.
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    n_traj: Option<usize>,
    #[arg(long)]
    n_steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: $TDES_THREADS, else all cores).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    chi: Option<f64>,
    #[arg(long)]
    psi: Option<f64>,
    /// Initial point, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    x0: Option<Vec<f64>>,
    /// Minimizer, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    center: Option<Vec<f64>>,
    /// Output CSV; a JSON sidecar is written next to it.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Use the trajectory counts of the original experiments.
    #[arg(long)]
    paper_scale: bool,
    /// Also write this many full sample paths.
    #[arg(long, default_value_t = 0)]
    paths: usize,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    run: RunArgs,
    /// CSV from `simulate` to join with the theoretical columns.
    #[arg(long)]
    join: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FeasibleArgs {
    #[arg(long, allow_negative_numbers = true)]
    rho: f64,
    #[arg(long, allow_negative_numbers = true)]
    beta: f64,
    #[arg(long)]
    chi: f64,
    #[arg(long)]
    psi: f64,
    #[arg(long)]
    mu: f64,
    #[arg(long, default_value_t = 1e-7)]
    eps: f64,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    beta: f64,
    #[arg(long)]
    chi: f64,
    #[arg(long)]
    psi: f64,
    #[arg(long)]
    mu: f64,
    #[arg(long, default_value_t = 1e-7)]
    eps: f64,
    #[arg(long, default_value_t = 2.0)]
    rho_max: f64,
    #[arg(long, default_value_t = 400)]
    grid: usize,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Analyze(a) => analyze(a),
        Command::Feasible(a) => feasible(a),
        Command::Sweep(a) => sweep(a),
        Command::Presets => {
            for (name, what) in config::PRESETS {
                println!("{name:<8} {what}");
            }
            Ok(EXIT_OK)
        }
    };
    match result {
        Ok(code) => code,
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            code
        }
    }
}

struct Failure(i32, String);

fn usage(msg: impl ToString) -> Failure {
    Failure(EXIT_USAGE, msg.to_string())
}

fn io(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| usage(format!("{}: {e}", path.display()))
}

impl RunArgs {
    fn flags(&self) -> PartialConfig {
        PartialConfig {
            preset: self.preset.clone(),
            n_traj: self.n_traj,
            n_steps: self.n_steps,
            seed: self.seed,
            threads: self.threads,
            rho: self.rho,
            beta: self.beta,
            eps: self.eps,
            chi: self.chi,
            psi: self.psi,
            x0: self.x0.clone().map(|value| InitSpec::Fixed { value }),
            center: self.center.clone(),
            output: self.output.clone(),
            ..Default::default()
        }
    }

    fn resolve(&self) -> Result<ExperimentConfig, Failure> {
        let file = match &self.config {
            Some(p) => PartialConfig::from_file(p).map_err(usage)?,
            None => PartialConfig::default(),
        };
        if self.config.is_none() && self.preset.is_none() {
            return Err(usage("give a config file or --preset (see `tdes presets`)"));
        }
        file.overlay(self.flags()).resolve().map_err(usage)
    }
}

fn default_output(cfg: &ExperimentConfig, suffix: &str) -> PathBuf {
    let stem = cfg.preset.clone().unwrap_or_else(|| "run".to_string());
    PathBuf::from(format!("{stem}{suffix}.csv"))
}

fn feasibility_reports(cfg: &ExperimentConfig) -> Vec<StabilityReport> {
    let (Ok(params), Ok(obj)) = (cfg.algo_params(), cfg.objective()) else {
        return Vec::new();
    };
    match cfg.system {
        SystemKind::Adaptive1d => curvature_at_minimizer(&obj)
            .map(|mu| vec![check_feasibility(&params, mu)])
            .unwrap_or_default(),
        SystemKind::Multidim => obj
            .as_quadratic()
            .map(|q| check_feasibility_per_coordinate(&params, q))
            .unwrap_or_default(),
        _ => Vec::new(),
    }
}

#[derive(Serialize)]
struct RunSummary {
    seed: u64,
    n_traj: usize,
    n_diverged: usize,
    y0: Vec<f64>,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    #[serde(flatten)]
    config: &'a ExperimentConfig,
    run: RunSummary,
}

fn simulate(a: SimulateArgs) -> Result<i32, Failure> {
    let mut cfg = a.run.resolve()?;
    if a.paper_scale && a.run.n_traj.is_none() {
        cfg.n_traj = paper_scale_traj(&cfg);
    }
    let out = cfg.output.clone().unwrap_or_else(|| default_output(&cfg, ""));
    cfg.output = Some(out.clone());
    for r in feasibility_reports(&cfg) {
        if !r.feasible {
            eprintln!("warning: parameters fail the feasibility check for mu = {}", r.mu);
        }
    }
    let obj = cfg.objective().map_err(usage)?;
    let ens = cfg.ensemble().map_err(usage)?;
    let stats = match ensemble::run(&ens, &obj) {
        Ok(s) => s,
        Err(e @ Error::AllDiverged { .. }) => return Err(Failure(EXIT_DIVERGED, e.to_string())),
        Err(e) => return Err(usage(e)),
    };
    write_stats_csv(&out, &stats).map_err(io(&out))?;
    let side = sidecar_path(&out);
    let summary = Sidecar {
        config: &cfg,
        run: RunSummary {
            seed: cfg.seed,
            n_traj: cfg.n_traj,
            n_diverged: stats.n_diverged,
            y0: stats.y0.clone(),
        },
    };
    write_json(&side, &summary).map_err(io(&side))?;
    if a.paths > 0 {
        let paths = ensemble::sample_paths(&ens, &obj, a.paths.min(cfg.n_traj)).map_err(usage)?;
        let pp = paths_path(&out);
        write_paths_csv(&pp, &paths).map_err(io(&pp))?;
    }
    if stats.n_diverged > 0 {
        eprintln!("warning: {} of {} trajectories diverged", stats.n_diverged, stats.n_traj);
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct AnalyzeReport {
    mu: f64,
    x_tilde0: f64,
    y0: f64,
    feasibility: StabilityReport,
}

fn analyze(a: AnalyzeArgs) -> Result<i32, Failure> {
    let cfg = a.run.resolve()?;
    let obj = cfg.objective().map_err(usage)?;
    let mu = match (cfg.system, obj.known_curvature()) {
        (SystemKind::Adaptive1d, Some(mu)) => mu,
        _ => return Err(usage("analyze needs the adaptive system on a one-dimensional quadratic")),
    };
    let x0 = match &cfg.x0 {
        InitSpec::Fixed { value } => value[0],
        _ => return Err(usage("analyze needs a fixed x0")),
    };
    let params = cfg.algo_params().map_err(usage)?;
    let ens = cfg.ensemble().map_err(usage)?;
    let y0 = ens.resolve_y0(1)[0];
    let x_tilde0 = x0 - cfg.center[0];
    let report = check_feasibility(&params, mu);

    let out = cfg.output.clone().unwrap_or_else(|| default_output(&cfg, "_theory"));
    let side = sidecar_path(&out);
    write_json(
        &side,
        &AnalyzeReport {
            mu,
            x_tilde0,
            y0,
            feasibility: report.clone(),
        },
    )
    .map_err(io(&side))?;

    let tb = theoretical_bounds(&params, mu, x_tilde0, y0, cfg.n_steps).map_err(usage)?;
    let center = cfg.center[0];
    let mut cols = vec![
        ("mean_x_theory", tb.mean.iter().map(|m| m[0] + center).collect::<Vec<_>>()),
        ("sigma_x_upper", tb.sigma_upper.clone()),
        ("mean_y_theory", tb.mean.iter().map(|m| m[1]).collect()),
    ];
    if let Some(j) = &a.join {
        let mut sim = read_columns(j, &["mean_x", "sigma_x"]).map_err(usage)?;
        let sigma = sim.pop().unwrap();
        let mean = sim.pop().unwrap();
        cols.push(("mean_x", mean));
        cols.push(("sigma_x", sigma));
    }
    write_columns_csv(&out, &cols).map_err(io(&out))?;
    if report.feasible {
        Ok(EXIT_OK)
    } else {
        for c in report.reasons.iter().filter(|c| !c.holds) {
            eprintln!("infeasible: {} (lhs {}, rhs {})", c.name, c.lhs, c.rhs);
        }
        Ok(EXIT_INFEASIBLE)
    }
}

fn feasible(a: FeasibleArgs) -> Result<i32, Failure> {
    let dither = DitherSpec::new(a.chi, a.psi).map_err(usage)?;
    let params = AlgoParams::new(a.rho, a.beta, a.eps, dither).map_err(usage)?;
    if !(a.mu > 0.0 && a.mu.is_finite()) {
        return Err(usage("--mu must be positive"));
    }
    let report = check_feasibility(&params, a.mu);
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    Ok(if report.feasible { EXIT_OK } else { EXIT_INFEASIBLE })
}

fn sweep(a: SweepArgs) -> Result<i32, Failure> {
    let dither = DitherSpec::new(a.chi, a.psi).map_err(usage)?;
    if !(a.mu > 0.0 && a.mu.is_finite()) {
        return Err(usage("--mu must be positive"));
    }
    let res = sweep_rho(a.beta, a.eps, dither, a.mu, a.rho_max, a.grid, 1e-10).map_err(usage)?;
    println!("{}", serde_json::to_string_pretty(&res).expect("result serializes"));
    Ok(if res.intervals.is_empty() { EXIT_INFEASIBLE } else { EXIT_OK })
}
