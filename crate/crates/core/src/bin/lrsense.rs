//! Command-line driver for the lrsense experiments.
//!
//! Exit status: 0 when every assertion of the invoked suite passes, 1 when
//! any fails, 2 on errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use lrsense::experiments::config::{peek, resolve, user_layers, Resolved};
use lrsense::experiments::report::{prepare_run_dir, write_report};
use lrsense::experiments::{
    run_grid, run_overfit_demo, run_rip_probe, run_scaling_study, Assertion, Axis, DemoConfig, GridConfig, Problem,
    Report, RipConfig, ScalingConfig, WORKERS_ENV,
};

#[derive(Parser)]
#[command(name = "lrsense", version, about = "Low-rank matrix sensing experiments")]
struct Cli {
    /// Worker threads for concurrent trials (default: all cores).
    #[arg(long, global = true, env = WORKERS_ENV)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML config file; omitted keys keep their defaults.
    #[arg(long, short)]
    config: Option<PathBuf>,

    /// Run directory (default: runs/<command>-<seed>).
    #[arg(long, short)]
    out: Option<PathBuf>,

    /// Base seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Config override `key=value`, value in TOML syntax; repeatable.
    /// Dotted keys address tables, e.g. `gd.iterations=200`.
    #[arg(long = "set", short = 's', value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// One over-parameterized run with train/validation/recovery curves.
    DemoOverfit {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = ["sensing", "completion"])]
        problem: Option<String>,
        #[arg(long)]
        sigma2: Option<f64>,
    },
    /// Recovery-error heatmaps over a rank × noise-variance grid.
    Grid {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = ["sensing", "completion"])]
        problem: Option<String>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Log-log slope of the selected error along one axis.
    Scaling {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = ["sigma2", "r_star", "m"])]
        axis: Option<String>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Empirical restricted-isometry constants of an operator.
    RipProbe {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = ["sensing", "completion"])]
        problem: Option<String>,
        /// Probe this operator file instead of drawing one.
        #[arg(long)]
        load_operator: Option<PathBuf>,
        /// Save the probed operator into the run directory under this name.
        #[arg(long)]
        save_operator: Option<String>,
    },
}

fn push<T: ToString>(overrides: &mut Vec<String>, key: &str, value: Option<T>) {
    if let Some(v) = value {
        overrides.push(format!("{key}={}", v.to_string()));
    }
}

fn quoted(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

fn load<T, F>(common: &Common, extra: Vec<String>, defaults: F) -> lrsense::Result<Resolved<T>>
where
    T: Serialize + serde::de::DeserializeOwned,
    F: FnOnce(&toml::Table) -> lrsense::Result<T>,
{
    let mut overrides = common.overrides.clone();
    push(&mut overrides, "seed", common.seed);
    overrides.extend(extra);
    let user = user_layers(common.config.as_deref(), &overrides)?;
    let d = defaults(&user)?;
    resolve(&d, user)
}

fn problem_of(user: &toml::Table) -> lrsense::Result<Problem> {
    Ok(peek(user, "problem")?.unwrap_or(Problem::Sensing))
}

fn run_dir(common: &Common, command: &str, seed: u64) -> PathBuf {
    common
        .out
        .clone()
        .unwrap_or_else(|| Path::new("runs").join(format!("{command}-{seed}")))
}

fn finish<C: Serialize, R: Serialize>(
    dir: &Path,
    command: &str,
    resolved: &Resolved<C>,
    assertions: Vec<Assertion>,
    result: &R,
    started: Instant,
) -> lrsense::Result<bool> {
    let report = Report::new(
        command,
        &resolved.config,
        resolved.defaults_used.clone(),
        assertions,
        result,
    )?;
    write_report(dir, &report)?;
    for a in &report.assertions {
        println!("{} {}: {}", if a.passed { "PASS" } else { "FAIL" }, a.name, a.detail);
    }
    println!(
        "{command}: {} in {:.1}s, outputs in {}",
        if report.passed { "passed" } else { "FAILED" },
        started.elapsed().as_secs_f64(),
        dir.display()
    );
    Ok(report.passed)
}

fn run(cli: Cli) -> lrsense::Result<bool> {
    let started = Instant::now();
    match cli.command {
        Command::DemoOverfit {
            common,
            problem,
            sigma2,
        } => {
            let mut extra = Vec::new();
            push(&mut extra, "problem", problem);
            push(&mut extra, "sigma2", sigma2.map(|s| format!("{s:?}")));
            let r = load(&common, extra, |u| Ok(DemoConfig::standard(problem_of(u)?)))?;
            let dir = run_dir(&common, "demo-overfit", r.config.seed);
            prepare_run_dir(&dir, &r.config)?;
            let outcome = run_overfit_demo(&r.config)?;
            outcome.write_artifacts(&dir)?;
            finish(
                &dir,
                "demo-overfit",
                &r,
                outcome.assertions(&r.config),
                &outcome.summary,
                started,
            )
        }
        Command::Grid {
            common,
            problem,
            trials,
        } => {
            let mut extra = Vec::new();
            push(&mut extra, "problem", problem);
            push(&mut extra, "trials", trials);
            let r = load(&common, extra, |u| Ok(GridConfig::standard(problem_of(u)?)))?;
            let dir = run_dir(&common, "grid", r.config.seed);
            prepare_run_dir(&dir, &r.config)?;
            let outcome = run_grid(&r.config)?;
            outcome.write_artifacts(&dir, r.config.problem.as_str())?;
            let assertions = outcome.assertions(r.config.min_spearman);
            finish(&dir, "grid", &r, assertions, &outcome, started)
        }
        Command::Scaling { common, axis, trials } => {
            let mut extra = Vec::new();
            push(&mut extra, "axis", axis);
            push(&mut extra, "trials", trials);
            let r = load(&common, extra, |u| {
                Ok(ScalingConfig::standard(peek(u, "axis")?.unwrap_or(Axis::Sigma2)))
            })?;
            let dir = run_dir(&common, "scaling", r.config.seed);
            prepare_run_dir(&dir, &r.config)?;
            let outcome = run_scaling_study(&r.config)?;
            outcome.write_artifacts(&dir)?;
            finish(&dir, "scaling", &r, outcome.assertions(), &outcome, started)
        }
        Command::RipProbe {
            common,
            problem,
            load_operator,
            save_operator,
        } => {
            let mut extra = Vec::new();
            push(&mut extra, "problem", problem);
            push(
                &mut extra,
                "load_operator",
                load_operator.map(|p| quoted(&p.to_string_lossy())),
            );
            push(&mut extra, "save_operator", save_operator.map(|s| quoted(&s)));
            let r = load(&common, extra, |u| Ok(RipConfig::standard(problem_of(u)?)))?;
            let dir = run_dir(&common, "rip-probe", r.config.seed);
            prepare_run_dir(&dir, &r.config)?;
            let outcome = run_rip_probe(&r.config)?;
            outcome.write_artifacts(&dir, r.config.save_operator.as_deref())?;
            let summary = outcome.summary();
            finish(&dir, "rip-probe", &r, outcome.assertions(), &summary, started)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(w) = cli.workers.filter(|&w| w > 0) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(w).build_global() {
            eprintln!("error: cannot start {w} workers: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
