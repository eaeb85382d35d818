//! Single over-parameterized run showing the overfitting valley.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::Serialize;

use super::config::DemoConfig;
use super::pipeline::{run_trial, TrialOutcome, TrialSeeds, TrialSpec};
use super::plot::{write_log_curves, Series};
use super::report::Assertion;
use crate::error::Result;
use crate::validation::{SelectionBound, TheoryTerms};

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const CURVES_FILE: &str = "curves.png";

#[derive(Clone, Debug, Serialize)]
pub struct DemoSummary {
    pub seeds: TrialSeeds,
    pub m_train: usize,
    pub t_hat: usize,
    pub t_tilde: usize,
    pub error_at_t_hat: f64,
    pub error_at_t_tilde: f64,
    pub final_error: f64,
    /// `error(T) / error(t̃)`
    pub overfit_ratio: f64,
    /// `error(t̂) / error(t̃)`
    pub selection_ratio: f64,
    /// Distance between `t̂` and `t̃` counted in recorded iterates.
    pub valley_distance: usize,
    pub initial_train_loss: f64,
    pub final_train_loss: f64,
    pub delta_val: f64,
    pub bound: SelectionBound,
    pub theory: TheoryTerms,
    pub assertions_enabled: bool,
}

#[derive(Clone, Debug)]
pub struct DemoOutcome {
    pub trial: TrialOutcome,
    pub summary: DemoSummary,
}

/// Seeds of the demo run; the same coordinates a grid cell at `r*`, first
/// variance, first trial would use.
pub fn demo_seeds(cfg: &DemoConfig) -> TrialSeeds {
    TrialSeeds::derive(cfg.seed, &[cfg.r_star as u64, 0, 0])
}

pub fn run_overfit_demo(cfg: &DemoConfig) -> Result<DemoOutcome> {
    let seeds = demo_seeds(cfg);
    let spec = TrialSpec {
        problem: cfg.problem,
        n: cfg.n,
        m: cfg.m,
        m_val: cfg.m_val,
        r_star: cfg.r_star,
        sigma2: cfg.sigma2,
        gd: cfg.gd.clone(),
        seeds,
        phase_every: (cfg.phase_every > 0).then_some(cfg.phase_every),
    };
    let trial = run_trial(&spec)?;
    let records = &trial.trajectory.records;
    let sel = &trial.selection;
    let t_tilde = sel.t_tilde.expect("truth hook always runs");
    let index_of = |t: usize| records.iter().position(|r| r.t == t).expect("selected from records");
    let last = records.last().expect("non-empty trajectory");
    let final_error = last.recovery_error.expect("truth hook always runs");
    let (e_hat, e_tilde) = (trial.error_at_t_hat(), trial.error_at_t_tilde());
    let summary = DemoSummary {
        seeds,
        m_train: trial.m_train,
        t_hat: sel.t_hat,
        t_tilde,
        error_at_t_hat: e_hat,
        error_at_t_tilde: e_tilde,
        final_error,
        overfit_ratio: final_error / e_tilde,
        selection_ratio: e_hat / e_tilde,
        valley_distance: index_of(sel.t_hat).abs_diff(index_of(t_tilde)),
        initial_train_loss: records[0].train_loss,
        final_train_loss: last.train_loss,
        delta_val: trial.delta_val,
        bound: trial.bound,
        theory: trial.theory,
        assertions_enabled: cfg.sigma2 > 0.0,
    };
    Ok(DemoOutcome { trial, summary })
}

impl DemoOutcome {
    /// The overfitting signature; empty when the run is noiseless.
    pub fn assertions(&self, cfg: &DemoConfig) -> Vec<Assertion> {
        let s = &self.summary;
        if !s.assertions_enabled {
            return Vec::new();
        }
        let last_t = self.trial.trajectory.records.last().map_or(0, |r| r.t);
        vec![
            Assertion::new(
                "interior_recovery_minimum",
                s.t_tilde > 0 && s.t_tilde < last_t,
                format!("t_tilde = {} with T = {last_t}", s.t_tilde),
            ),
            Assertion::new(
                "overfit_ratio",
                s.overfit_ratio >= 1.5,
                format!("error(T)/error(t_tilde) = {:.4} (need >= 1.5)", s.overfit_ratio),
            ),
            Assertion::new(
                "valley_proximity",
                s.valley_distance <= cfg.valley_window,
                format!(
                    "t_hat = {}, t_tilde = {}: {} recorded iterates apart (need <= {})",
                    s.t_hat, s.t_tilde, s.valley_distance, cfg.valley_window
                ),
            ),
            Assertion::new(
                "selection_ratio",
                s.selection_ratio <= 1.5,
                format!("error(t_hat)/error(t_tilde) = {:.4} (need <= 1.5)", s.selection_ratio),
            ),
        ]
    }

    /// Writes the trajectory CSV and the curve plot into `dir`.
    pub fn write_artifacts(&self, dir: &Path) -> Result<()> {
        let traj = &self.trial.trajectory;
        traj.write_csv(BufWriter::new(File::create(dir.join(TRAJECTORY_FILE))?))?;
        let curve = |f: &dyn Fn(&crate::recovery::IterateRecord) -> Option<f64>| -> Vec<(f64, f64)> {
            traj.records
                .iter()
                .map(|r| (r.t as f64, f(r).unwrap_or(f64::NAN)))
                .collect()
        };
        let train = curve(&|r| Some(r.train_loss));
        let val = curve(&|r| r.val_loss);
        let err = curve(&|r| r.recovery_error);
        write_log_curves(
            &dir.join(CURVES_FILE),
            &[
                Series {
                    points: &train,
                    color: [30, 60, 220],
                },
                Series {
                    points: &val,
                    color: [220, 30, 30],
                },
                Series {
                    points: &err,
                    color: [20, 150, 40],
                },
            ],
            900,
            560,
        )
    }
}
