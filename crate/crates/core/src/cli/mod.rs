//! Command-line front end: `design`, `simulate` and `montecarlo`.

mod config;
mod report;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::design::{repair_via_pole_shift, DesignResult};
use crate::motor::model_for;
use crate::sim::{
    disturbance_magnitude_guard, run_monte_carlo, simulate, simulate_run, Disturbance, Feedback,
    MonteCarloSummary,
};
use crate::{Error, Result};

pub use config::{FeedbackKind, MonteCarloConfig, RunConfig};
pub use report::{
    error_unit, monte_carlo_summary_toml, write_error_stats_csv, write_trace_csv, DesignReport,
    MonteCarloContext, TRACE_HEADER,
};

pub const DESIGN_REPORT_FILE: &str = "design_report.toml";
pub const TRACE_FILE: &str = "trace.csv";
pub const MC_SUMMARY_FILE: &str = "montecarlo_summary.toml";
pub const MC_STATS_FILE: &str = "montecarlo_error_stats.csv";
pub const MC_RUNS_DIR: &str = "runs";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "lqpc",
    version,
    about = "LQ projective output-feedback design for DC motors"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute gains, spectra and the stability report.
    Design(CommonArgs),
    /// Run one closed-loop simulation and write a CSV trace.
    Simulate(CommonArgs),
    /// Run repeated simulations with random load torque.
    Montecarlo(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// RNG seed (overrides `sim.seed`).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of Monte Carlo runs (overrides `monte_carlo.n_runs`).
    #[arg(long)]
    pub runs: Option<usize>,
}

impl CommonArgs {
    pub fn load(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::from_path(&self.config)?;
        if let Some(dir) = &self.output {
            cfg.output_dir = dir.clone();
        }
        if let Some(seed) = self.seed {
            cfg.sim.seed = seed;
        }
        if let Some(runs) = self.runs {
            if runs == 0 {
                return Err(Error::Config("--runs must be at least 1".into()));
            }
            let write_run_csvs = cfg.monte_carlo.is_some_and(|m| m.write_run_csvs);
            cfg.monte_carlo = Some(MonteCarloConfig {
                n_runs: runs,
                write_run_csvs,
            });
        }
        Ok(cfg)
    }
}

/// Maps an error to the process exit code.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Divergence { .. } => EXIT_DIVERGED,
        e if e.is_design_infeasible() => EXIT_INFEASIBLE,
        Error::Numerical { .. } => EXIT_INFEASIBLE,
        _ => EXIT_CONFIG,
    }
}

/// Runs a parsed command line; returns the exit code.
pub fn run(cli: &Cli) -> i32 {
    let result = match &cli.command {
        Command::Design(args) => args.load().and_then(|c| cmd_design(&c)).map(|_| ()),
        Command::Simulate(args) => args.load().and_then(|c| cmd_simulate(&c)).map(|_| ()),
        Command::Montecarlo(args) => args.load().and_then(|c| cmd_montecarlo(&c)).map(|_| ()),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Design for the configured model, applying the repair shifts if any.
pub fn run_design(cfg: &RunConfig) -> Result<DesignResult> {
    let model = model_for(cfg.control_kind, &cfg.motor);
    repair_via_pole_shift(&model, &cfg.weights, &cfg.repair, &cfg.retention)
}

fn feedback(cfg: &RunConfig, d: &DesignResult) -> Feedback {
    match cfg.feedback {
        FeedbackKind::Output => Feedback::Output(d.k_out.clone()),
        FeedbackKind::Full => Feedback::Full(d.k_full.clone()),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

pub fn cmd_design(cfg: &RunConfig) -> Result<PathBuf> {
    let d = run_design(cfg)?;
    let report = DesignReport::new(cfg.control_kind, &cfg.weights, &d);
    create_dir(&cfg.output_dir)?;
    let path = cfg.output_dir.join(DESIGN_REPORT_FILE);
    fs::write(&path, report.to_toml())?;
    Ok(path)
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<PathBuf> {
    let d = run_design(cfg)?;
    let model = model_for(cfg.control_kind, &cfg.motor);
    let trace = simulate(&model, &feedback(cfg, &d), &cfg.sim)?;
    create_dir(&cfg.output_dir)?;
    let path = cfg.output_dir.join(TRACE_FILE);
    write_trace_csv(BufWriter::new(File::create(&path)?), &trace)?;
    Ok(path)
}

pub fn cmd_montecarlo(cfg: &RunConfig) -> Result<(PathBuf, MonteCarloSummary)> {
    let mc = cfg
        .monte_carlo
        .ok_or_else(|| Error::Config("montecarlo needs a [monte_carlo] section or --runs".into()))?;
    let Disturbance::Gaussian {
        mean,
        variance,
        hold_interval,
    } = cfg.sim.disturbance
    else {
        return Err(Error::Config(
            "montecarlo needs [sim.disturbance] kind = \"gaussian\"".into(),
        ));
    };
    let d = run_design(cfg)?;
    let model = model_for(cfg.control_kind, &cfg.motor);
    let gain = feedback(cfg, &d);

    let mut quiet = cfg.sim.clone();
    quiet.disturbance = Disturbance::None;
    let nominal = simulate(&model, &gain, &quiet)?;
    let guard_ok = disturbance_magnitude_guard(&nominal, variance);
    if !guard_ok {
        eprintln!(
            "warning: disturbance std {:.4} N·m exceeds 10% of the peak motor torque {:.4} N·m",
            variance.sqrt(),
            nominal.max_abs_torque()
        );
    }

    let summary = run_monte_carlo(&model, &gain, &cfg.sim, mc.n_runs)?;
    create_dir(&cfg.output_dir)?;
    let ctx = MonteCarloContext {
        kind: cfg.control_kind,
        repaired: d.repaired,
        seed: cfg.sim.seed,
        mean_nm: mean,
        variance_nm2: variance,
        hold_interval_s: hold_interval,
        dt_s: cfg.sim.dt,
        horizon_s: cfg.sim.horizon,
        deterministic_max_torque_nm: nominal.max_abs_torque(),
        disturbance_guard_ok: guard_ok,
    };
    let path = cfg.output_dir.join(MC_SUMMARY_FILE);
    fs::write(&path, monte_carlo_summary_toml(&ctx, &summary))?;
    write_error_stats_csv(
        BufWriter::new(File::create(cfg.output_dir.join(MC_STATS_FILE))?),
        cfg.control_kind,
        &summary,
    )?;

    if mc.write_run_csvs {
        let runs_dir = cfg.output_dir.join(MC_RUNS_DIR);
        create_dir(&runs_dir)?;
        for run in 0..mc.n_runs {
            let file = runs_dir.join(format!("run_{run:04}.csv"));
            match simulate_run(&model, &gain, &cfg.sim, run as u64) {
                Ok(trace) => write_trace_csv(BufWriter::new(File::create(file)?), &trace)?,
                Err(Error::Divergence { .. }) => continue,
                Err(e) => return Err(e),
            }
        }
    }
    Ok((path, summary))
}
