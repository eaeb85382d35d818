//! Log-log slope of the selected recovery error along one axis.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Axis, ScalingConfig};
use super::pipeline::{run_trial, TrialSeeds, TrialSpec};
use super::plot::{write_log_curves, Series};
use super::report::Assertion;
use super::stats::{mean, ols, std_dev, LinearFit};
use crate::error::{Error, Result};
use crate::validation::{SelectionBound, TheoryTerms};

pub const MIN_POINTS: usize = 4;
pub const MIN_TRIALS: usize = 10;
pub const RUNS_FILE: &str = "runs.csv";
pub const POINTS_FILE: &str = "points.csv";
pub const PLOT_FILE: &str = "scaling.png";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScalingRun {
    pub value: f64,
    pub trial: usize,
    pub seeds: TrialSeeds,
    pub m_train: usize,
    pub m_val: usize,
    pub t_hat: usize,
    pub t_tilde: usize,
    pub error_t_hat: f64,
    pub error_t_tilde: f64,
    pub bound: SelectionBound,
    pub theory: TheoryTerms,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub value: f64,
    pub trials: usize,
    pub mean_error_t_hat: f64,
    pub std_error_t_hat: f64,
    pub mean_error_t_tilde: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScalingOutcome {
    pub axis: Axis,
    pub points: Vec<ScalingPoint>,
    pub runs: Vec<ScalingRun>,
    /// Fit of `ln(mean selected error)` on `ln(value)`.
    pub fit: LinearFit,
    pub oracle_fit: Option<LinearFit>,
    pub expected_slope: f64,
    pub tolerance: f64,
}

impl ScalingConfig {
    /// The trial spec at `value` along the swept axis.
    pub fn trial_spec(&self, value: f64, seeds: TrialSeeds) -> TrialSpec {
        let (mut m, mut r_star, mut sigma2) = (self.m, self.r_star, self.sigma2);
        match self.axis {
            Axis::Sigma2 => sigma2 = value,
            Axis::RStar => r_star = value as usize,
            Axis::M => m = value as usize,
        }
        TrialSpec {
            problem: self.problem,
            n: self.n,
            m,
            m_val: (self.val_fraction * m as f64).round() as usize,
            r_star,
            sigma2,
            gd: self.gd.clone(),
            seeds,
            phase_every: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.len() < MIN_POINTS || self.trials < MIN_TRIALS {
            return Err(Error::InsufficientPoints {
                needed: MIN_POINTS * MIN_TRIALS,
                got: self.values.len() * self.trials,
            });
        }
        for &v in &self.values {
            let integral = matches!(self.axis, Axis::RStar | Axis::M);
            if !(v > 0.0 && v.is_finite()) || (integral && v.fract() != 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "{} value {v} must be a positive{}",
                    self.axis.as_str(),
                    if integral { " integer" } else { " number" }
                )));
            }
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "val_fraction {} outside (0, 1)",
                self.val_fraction
            )));
        }
        Ok(())
    }
}

/// Seeds for trial `trial` at point `point` of the sweep.
pub fn scaling_seeds(cfg: &ScalingConfig, point: usize, trial: usize) -> TrialSeeds {
    let axis = match cfg.axis {
        Axis::Sigma2 => 0,
        Axis::RStar => 1,
        Axis::M => 2,
    };
    TrialSeeds::derive(cfg.seed, &[axis, point as u64, trial as u64])
}

/// Any failed trial fails the study: the regression needs every point.
pub fn run_scaling_study(cfg: &ScalingConfig) -> Result<ScalingOutcome> {
    cfg.validate()?;
    let k = cfg.trials;
    let runs: Vec<ScalingRun> = (0..cfg.values.len() * k)
        .into_par_iter()
        .map(|idx| {
            let (p, trial) = (idx / k, idx % k);
            let value = cfg.values[p];
            let seeds = scaling_seeds(cfg, p, trial);
            let spec = cfg.trial_spec(value, seeds);
            let o = run_trial(&spec)?;
            Ok(ScalingRun {
                value,
                trial,
                seeds,
                m_train: o.m_train,
                m_val: spec.m_val,
                t_hat: o.selection.t_hat,
                t_tilde: o.selection.t_tilde.expect("truth hook always runs"),
                error_t_hat: o.error_at_t_hat(),
                error_t_tilde: o.error_at_t_tilde(),
                bound: o.bound,
                theory: o.theory,
            })
        })
        .collect::<Result<_>>()?;

    let points: Vec<ScalingPoint> = runs
        .chunks(k)
        .map(|chunk| {
            let hat: Vec<f64> = chunk.iter().map(|r| r.error_t_hat).collect();
            let tilde: Vec<f64> = chunk.iter().map(|r| r.error_t_tilde).collect();
            ScalingPoint {
                value: chunk[0].value,
                trials: chunk.len(),
                mean_error_t_hat: mean(&hat),
                std_error_t_hat: std_dev(&hat),
                mean_error_t_tilde: mean(&tilde),
            }
        })
        .collect();
    let lx: Vec<f64> = points.iter().map(|p| p.value.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.mean_error_t_hat.ln()).collect();
    let lo: Vec<f64> = points.iter().map(|p| p.mean_error_t_tilde.ln()).collect();
    let fit = ols(&lx, &ly).ok_or_else(|| Error::InvalidConfig("scaling values must not all be equal".into()))?;
    Ok(ScalingOutcome {
        axis: cfg.axis,
        points,
        runs,
        fit,
        oracle_fit: ols(&lx, &lo),
        expected_slope: cfg.expected_slope,
        tolerance: cfg.tolerance,
    })
}

impl ScalingOutcome {
    pub fn slope_ok(&self) -> bool {
        (self.fit.slope - self.expected_slope).abs() <= self.tolerance
    }

    pub fn bound_violations(&self) -> Vec<&ScalingRun> {
        self.runs.iter().filter(|r| !r.bound.holds).collect()
    }

    pub fn assertions(&self) -> Vec<Assertion> {
        let vacuous = self.runs.iter().filter(|r| r.bound.vacuous).count();
        vec![
            Assertion::new(
                "slope",
                self.slope_ok(),
                format!(
                    "slope in {} = {:.3} ± {:.3} (95%), expected {} ± {}",
                    self.axis.as_str(),
                    self.fit.slope,
                    self.fit.half_width_95,
                    self.expected_slope,
                    self.tolerance
                ),
            ),
            Assertion::new(
                "selection_bound",
                self.bound_violations().is_empty(),
                format!(
                    "{} of {} runs violate the selection bound ({vacuous} vacuous)",
                    self.bound_violations().len(),
                    self.runs.len()
                ),
            ),
        ]
    }

    pub fn write_artifacts(&self, dir: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(File::create(dir.join(RUNS_FILE))?);
        writeln!(
            f,
            "axis,value,trial,seed_ground_truth,seed_operator,seed_noise,seed_split,seed_init,\
m_train,m_val,t_hat,t_tilde,error_t_hat,error_t_tilde,delta_val,bound_lhs,bound_rhs,bound_holds"
        )?;
        for r in &self.runs {
            let s = &r.seeds;
            writeln!(
                f,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                self.axis.as_str(),
                r.value,
                r.trial,
                s.ground_truth,
                s.operator,
                s.noise,
                s.split,
                s.init,
                r.m_train,
                r.m_val,
                r.t_hat,
                r.t_tilde,
                r.error_t_hat,
                r.error_t_tilde,
                r.bound.delta_val,
                r.bound.lhs,
                r.bound.rhs,
                r.bound.holds
            )?;
        }
        f.flush()?;

        let mut f = std::io::BufWriter::new(File::create(dir.join(POINTS_FILE))?);
        writeln!(f, "value,trials,mean_error_t_hat,std_error_t_hat,mean_error_t_tilde")?;
        for p in &self.points {
            writeln!(
                f,
                "{},{},{},{},{}",
                p.value, p.trials, p.mean_error_t_hat, p.std_error_t_hat, p.mean_error_t_tilde
            )?;
        }
        f.flush()?;

        // x is ln(value) so the log-y plot reads as a log-log plot
        let sel: Vec<(f64, f64)> = self.points.iter().map(|p| (p.value.ln(), p.mean_error_t_hat)).collect();
        let ora: Vec<(f64, f64)> = self
            .points
            .iter()
            .map(|p| (p.value.ln(), p.mean_error_t_tilde))
            .collect();
        let fitted: Vec<(f64, f64)> = sel
            .iter()
            .map(|&(x, _)| (x, (self.fit.intercept + self.fit.slope * x).exp()))
            .collect();
        write_log_curves(
            &dir.join(PLOT_FILE),
            &[
                Series {
                    points: &fitted,
                    color: [160, 160, 160],
                },
                Series {
                    points: &ora,
                    color: [20, 150, 40],
                },
                Series {
                    points: &sel,
                    color: [220, 30, 30],
                },
            ],
            640,
            480,
        )
    }
}
