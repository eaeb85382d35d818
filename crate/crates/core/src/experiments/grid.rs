//! Recovery error over a rank × noise-variance grid.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::GridConfig;
use super::pipeline::{run_trial, TrialSeeds, TrialSpec};
use super::plot::write_heatmap;
use super::report::Assertion;
use super::stats::{mean, power_law_fit, spearman, std_dev, PowerLawFit};
use crate::error::Result;

pub const TRIALS_FILE: &str = "trials.csv";
pub const ORACLE_CSV: &str = "heatmap_oracle.csv";
pub const SELECTED_CSV: &str = "heatmap_selected.csv";
pub const ORACLE_PNG: &str = "heatmap_oracle.png";
pub const SELECTED_PNG: &str = "heatmap_selected.png";

const TRIALS_HEADER: &str = "problem,r_star,sigma2_index,sigma2,trial,seed_ground_truth,\
seed_operator,seed_noise,seed_split,seed_init,status,t_hat,t_tilde,error_t_hat,error_t_tilde,\
gap,final_error,delta_val,bound_holds";

/// What one trial of a cell produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub t_hat: usize,
    pub t_tilde: usize,
    pub error_t_hat: f64,
    pub error_t_tilde: f64,
    pub gap: f64,
    pub final_error: f64,
    pub delta_val: f64,
    pub bound_holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellTrial {
    pub r_star: usize,
    pub sigma2_index: usize,
    pub sigma2: f64,
    pub trial: usize,
    pub seeds: TrialSeeds,
    /// `Err` holds the message of a diverged or otherwise failed trial.
    pub outcome: std::result::Result<TrialSummary, String>,
}

/// Per-trial seeds: the base seed hashed with `(r*, σ² index, trial)` and
/// the stream label.
pub fn cell_seeds(base: u64, r_star: usize, sigma2_index: usize, trial: usize) -> TrialSeeds {
    TrialSeeds::derive(base, &[r_star as u64, sigma2_index as u64, trial as u64])
}

/// Runs one trial of cell `(ranks[rank_index], sigma2[sigma2_index])`.
/// Failures are captured in the result rather than returned.
pub fn run_cell(grid: &GridConfig, rank_index: usize, sigma2_index: usize, trial: usize) -> CellTrial {
    let r_star = grid.ranks[rank_index];
    let sigma2 = grid.sigma2[sigma2_index];
    let seeds = cell_seeds(grid.seed, r_star, sigma2_index, trial);
    let spec = TrialSpec {
        problem: grid.problem,
        n: grid.n,
        m: grid.m,
        m_val: grid.m_val,
        r_star,
        sigma2,
        gd: grid.gd.clone(),
        seeds,
        phase_every: None,
    };
    let outcome = run_trial(&spec)
        .map(|o| TrialSummary {
            t_hat: o.selection.t_hat,
            t_tilde: o.selection.t_tilde.expect("truth hook always runs"),
            error_t_hat: o.error_at_t_hat(),
            error_t_tilde: o.error_at_t_tilde(),
            gap: o.selection.gap.expect("truth hook always runs"),
            final_error: o
                .trajectory
                .records
                .last()
                .and_then(|r| r.recovery_error)
                .expect("truth hook always runs"),
            delta_val: o.delta_val,
            bound_holds: o.bound.holds,
        })
        .map_err(|e| e.to_string());
    CellTrial {
        r_star,
        sigma2_index,
        sigma2,
        trial,
        seeds,
        outcome,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCellResult {
    pub r_star: usize,
    pub sigma2: f64,
    pub trials_ok: usize,
    pub trials_flagged: usize,
    pub mean_error_t_tilde: f64,
    pub std_error_t_tilde: f64,
    pub mean_error_t_hat: f64,
    pub std_error_t_hat: f64,
    pub mean_gap: f64,
    /// Two standard errors of the mean gap; the tolerance on
    /// `mean_error_t_hat ≥ mean_error_t_tilde`.
    pub mc_tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlaggedTrial {
    pub r_star: usize,
    pub sigma2: f64,
    pub trial: usize,
    pub seeds: TrialSeeds,
    pub reason: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridOutcome {
    pub ranks: Vec<usize>,
    pub sigma2: Vec<f64>,
    /// `cells[i][j]` is rank `i`, variance `j`.
    pub cells: Vec<Vec<GridCellResult>>,
    /// Written to the trials CSV rather than the report.
    #[serde(skip_serializing, default)]
    pub trials: Vec<CellTrial>,
    pub flagged: Vec<FlaggedTrial>,
    /// Spearman of mean selected error against r*, one per variance.
    pub spearman_vs_rank: Vec<Option<f64>>,
    /// Spearman of mean selected error against σ², one per rank.
    pub spearman_vs_sigma2: Vec<Option<f64>>,
    pub spearman_oracle_vs_rank: Vec<Option<f64>>,
    pub spearman_oracle_vs_sigma2: Vec<Option<f64>>,
    /// `ln e ≈ c + a ln r* + b ln σ²` fitted to the selected-error means.
    pub power_law: Option<PowerLawFit>,
}

fn aggregate(r_star: usize, sigma2: f64, trials: &[&CellTrial]) -> GridCellResult {
    let ok: Vec<&TrialSummary> = trials.iter().filter_map(|t| t.outcome.as_ref().ok()).collect();
    let col = |f: fn(&TrialSummary) -> f64| ok.iter().map(|s| f(s)).collect::<Vec<_>>();
    let (tilde, hat, gap) = (col(|s| s.error_t_tilde), col(|s| s.error_t_hat), col(|s| s.gap));
    GridCellResult {
        r_star,
        sigma2,
        trials_ok: ok.len(),
        trials_flagged: trials.len() - ok.len(),
        mean_error_t_tilde: mean(&tilde),
        std_error_t_tilde: std_dev(&tilde),
        mean_error_t_hat: mean(&hat),
        std_error_t_hat: std_dev(&hat),
        mean_gap: mean(&gap),
        mc_tolerance: if gap.is_empty() {
            f64::NAN
        } else {
            2.0 * std_dev(&gap) / (gap.len() as f64).sqrt()
        },
    }
}

/// Runs every (rank, variance, trial) triple concurrently on the current
/// rayon pool and aggregates in grid order.
pub fn run_grid(grid: &GridConfig) -> Result<GridOutcome> {
    grid.validate()?;
    let (nr, ns, k) = (grid.ranks.len(), grid.sigma2.len(), grid.trials);
    let trials: Vec<CellTrial> = (0..nr * ns * k)
        .into_par_iter()
        .map(|idx| run_cell(grid, idx / (ns * k), (idx / k) % ns, idx % k))
        .collect();

    let cells: Vec<Vec<GridCellResult>> = (0..nr)
        .map(|i| {
            (0..ns)
                .map(|j| {
                    let start = (i * ns + j) * k;
                    let group: Vec<&CellTrial> = trials[start..start + k].iter().collect();
                    aggregate(grid.ranks[i], grid.sigma2[j], &group)
                })
                .collect()
        })
        .collect();
    let flagged = trials
        .iter()
        .filter_map(|t| {
            t.outcome.as_ref().err().map(|reason| FlaggedTrial {
                r_star: t.r_star,
                sigma2: t.sigma2,
                trial: t.trial,
                seeds: t.seeds,
                reason: reason.clone(),
            })
        })
        .collect();

    let ranks_f: Vec<f64> = grid.ranks.iter().map(|&r| r as f64).collect();
    let by_rank = |f: fn(&GridCellResult) -> f64| -> Vec<Option<f64>> {
        (0..ns)
            .map(|j| {
                let ys: Vec<f64> = (0..nr).map(|i| f(&cells[i][j])).collect();
                finite_spearman(&ranks_f, &ys)
            })
            .collect()
    };
    let by_sigma = |f: fn(&GridCellResult) -> f64| -> Vec<Option<f64>> {
        cells
            .iter()
            .map(|row| {
                let ys: Vec<f64> = row.iter().map(f).collect();
                finite_spearman(&grid.sigma2, &ys)
            })
            .collect()
    };
    let points: Vec<(f64, f64, f64)> = cells
        .iter()
        .flatten()
        .map(|c| (c.r_star as f64, c.sigma2, c.mean_error_t_hat))
        .collect();

    Ok(GridOutcome {
        ranks: grid.ranks.clone(),
        sigma2: grid.sigma2.clone(),
        spearman_vs_rank: by_rank(|c| c.mean_error_t_hat),
        spearman_vs_sigma2: by_sigma(|c| c.mean_error_t_hat),
        spearman_oracle_vs_rank: by_rank(|c| c.mean_error_t_tilde),
        spearman_oracle_vs_sigma2: by_sigma(|c| c.mean_error_t_tilde),
        power_law: power_law_fit(&points),
        cells,
        trials,
        flagged,
    })
}

/// Spearman over the cells whose mean is defined.
fn finite_spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let (fx, fy): (Vec<f64>, Vec<f64>) = xs
        .iter()
        .zip(ys)
        .filter(|(_, y)| y.is_finite())
        .map(|(x, y)| (*x, *y))
        .unzip();
    spearman(&fx, &fy)
}

impl GridOutcome {
    pub fn oracle_matrix(&self) -> Vec<Vec<f64>> {
        self.matrix(|c| c.mean_error_t_tilde)
    }

    pub fn selected_matrix(&self) -> Vec<Vec<f64>> {
        self.matrix(|c| c.mean_error_t_hat)
    }

    fn matrix(&self, f: fn(&GridCellResult) -> f64) -> Vec<Vec<f64>> {
        self.cells.iter().map(|row| row.iter().map(f).collect()).collect()
    }

    /// Monotonicity along both axes for both heatmaps, plus the
    /// selected-versus-oracle sanity check. Correlations that are undefined
    /// (a single rank or variance) are skipped.
    pub fn assertions(&self, min_spearman: f64) -> Vec<Assertion> {
        let mut out = Vec::new();
        let mut check = |name: &str, axis: &str, values: &[Option<f64>]| {
            let defined: Vec<f64> = values.iter().flatten().copied().collect();
            if defined.is_empty() {
                return;
            }
            let worst = defined.iter().copied().fold(f64::INFINITY, f64::min);
            out.push(Assertion::new(
                name,
                worst >= min_spearman,
                format!(
                    "min Spearman vs {axis} = {worst:.3} over {} lines (need >= {min_spearman})",
                    defined.len()
                ),
            ));
        };
        check("selected_monotone_in_rank", "r*", &self.spearman_vs_rank);
        check("selected_monotone_in_sigma2", "sigma2", &self.spearman_vs_sigma2);
        check("oracle_monotone_in_rank", "r*", &self.spearman_oracle_vs_rank);
        check("oracle_monotone_in_sigma2", "sigma2", &self.spearman_oracle_vs_sigma2);

        let violations = self
            .cells
            .iter()
            .flatten()
            .filter(|c| c.trials_ok > 0)
            .filter(|c| c.mean_error_t_hat < c.mean_error_t_tilde - c.mc_tolerance)
            .count();
        out.push(Assertion::new(
            "selected_not_below_oracle",
            violations == 0,
            format!("{violations} cells with mean selected error below oracle minus tolerance"),
        ));
        out
    }

    pub fn write_artifacts(&self, dir: &Path, problem: &str) -> Result<()> {
        let mut f = std::io::BufWriter::new(File::create(dir.join(TRIALS_FILE))?);
        writeln!(f, "{TRIALS_HEADER}")?;
        for t in &self.trials {
            let s = &t.seeds;
            write!(
                f,
                "{problem},{},{},{},{},{},{},{},{},{},",
                t.r_star, t.sigma2_index, t.sigma2, t.trial, s.ground_truth, s.operator, s.noise, s.split, s.init
            )?;
            match &t.outcome {
                Ok(o) => writeln!(
                    f,
                    "ok,{},{},{},{},{},{},{},{}",
                    o.t_hat,
                    o.t_tilde,
                    o.error_t_hat,
                    o.error_t_tilde,
                    o.gap,
                    o.final_error,
                    o.delta_val,
                    o.bound_holds
                )?,
                Err(_) => writeln!(f, "flagged,,,,,,,,")?,
            }
        }
        f.flush()?;
        for (name, png, m) in [
            (ORACLE_CSV, ORACLE_PNG, self.oracle_matrix()),
            (SELECTED_CSV, SELECTED_PNG, self.selected_matrix()),
        ] {
            self.write_matrix_csv(&dir.join(name), &m)?;
            write_heatmap(&dir.join(png), &m, 24)?;
        }
        Ok(())
    }

    /// Rows are ranks, columns variances.
    fn write_matrix_csv(&self, path: &Path, m: &[Vec<f64>]) -> Result<()> {
        let mut f = std::io::BufWriter::new(File::create(path)?);
        let header: Vec<String> = self.sigma2.iter().map(|s| format!("sigma2={s}")).collect();
        writeln!(f, "r_star,{}", header.join(","))?;
        for (r, row) in self.ranks.iter().zip(m) {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(f, "{r},{}", cells.join(","))?;
        }
        f.flush()?;
        Ok(())
    }
}
