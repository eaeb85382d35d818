//! Factored gradient descent from small random initialization.
//!
//! The iteration is
//!
//! ```text
//! U₀ = α·G,   G_ij ~ N(0, 1) / √r
//! U_{t+1} = U_t − η · (1/N) · sym(𝒜*(𝒜(U_t U_tᵀ) − y)) · U_t
//! ```
//!
//! where `N` is [`SensingOperator::normalization`] (`m` for Gaussian
//! sensing). This is the literal update rule with the `1/N` factor and no
//! factor of two: the exact derivative of the training loss
//! `f(U) = ‖𝒜(UUᵀ) − y‖² / (2N)` is twice [`gradient`], so a step size `η`
//! here corresponds to `η / 2` on the exact gradient.

use std::collections::BTreeMap;
use std::io::Write;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::diagnostics::PhaseQuantities;
use crate::error::{Error, Result};
use crate::matrix::{Factor, SymMatrix};
use crate::operators::{sq_norm, SensingOperator};
use crate::rng::RngSpec;

/// Loss growth over the initial value treated as divergence.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

pub const TRAJECTORY_CSV_HEADER: [&str; 7] = [
    "t",
    "train_loss",
    "val_loss",
    "recovery_error",
    "sigma_min_signal",
    "err_norm",
    "alignment",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GdConfig {
    /// Columns of the factor (over-specified rank).
    pub r: usize,
    pub eta: f64,
    pub alpha: f64,
    /// Iteration budget `T`.
    pub iterations: usize,
    pub init_rng: RngSpec,
    pub record_every: usize,
    /// Extra iterations whose factor is kept in the trajectory.
    #[serde(default)]
    pub checkpoint_at: Vec<usize>,
}

impl GdConfig {
    pub fn new(r: usize, eta: f64, alpha: f64, iterations: usize, init_rng: RngSpec) -> Self {
        Self {
            r,
            eta,
            alpha,
            iterations,
            init_rng,
            record_every: 1,
            checkpoint_at: Vec::new(),
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad(format!("step size must be positive, got {}", self.eta));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("initialization scale must be positive, got {}", self.alpha));
        }
        if self.iterations == 0 {
            return bad("iteration budget must be at least 1".into());
        }
        if self.r == 0 || self.r > n {
            return bad(format!("factor rank must satisfy 1 <= r <= n = {n}, got {}", self.r));
        }
        if self.record_every == 0 {
            return bad("record_every must be at least 1".into());
        }
        Ok(())
    }

    fn records_at(&self, t: usize) -> bool {
        t.is_multiple_of(self.record_every) || t == self.iterations
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterateRecord {
    pub t: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub recovery_error: Option<f64>,
    pub phase: Option<PhaseQuantities>,
}

/// Per-iterate observer. Hooks see the current factor read-only and may fill
/// in optional fields of the record.
pub trait IterateHook {
    fn observe(&mut self, t: usize, u: &Factor, record: &mut IterateRecord) -> Result<()>;
}

impl<F> IterateHook for F
where
    F: FnMut(usize, &Factor, &mut IterateRecord) -> Result<()>,
{
    fn observe(&mut self, t: usize, u: &Factor, record: &mut IterateRecord) -> Result<()> {
        self(t, u, record)
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub config: GdConfig,
    pub records: Vec<IterateRecord>,
    /// Stored factors: the final iterate, requested iterations and the
    /// running validation argmin.
    pub checkpoints: BTreeMap<usize, Factor>,
    best_val: Option<(usize, f64)>,
}

impl Trajectory {
    pub fn final_factor(&self) -> &Factor {
        &self.checkpoints[&self.config.iterations]
    }

    pub fn checkpoint(&self, t: usize) -> Option<&Factor> {
        self.checkpoints.get(&t)
    }

    /// Earliest iteration attaining the smallest validation loss seen.
    pub fn best_val_iteration(&self) -> Option<usize> {
        self.best_val.map(|(t, _)| t)
    }

    pub fn record(&self, t: usize) -> Option<&IterateRecord> {
        self.records
            .binary_search_by_key(&t, |r| r.t)
            .ok()
            .map(|i| &self.records[i])
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(TRAJECTORY_CSV_HEADER)?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.records {
            out.write_record([
                r.t.to_string(),
                r.train_loss.to_string(),
                opt(r.val_loss),
                opt(r.recovery_error),
                opt(r.phase.map(|p| p.sigma_min_signal)),
                opt(r.phase.map(|p| p.err_norm)),
                opt(r.phase.map(|p| p.alignment)),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// `U₀ = α·G` with `G_ij ~ N(0, 1) / √r`, drawn in row-major order.
pub fn init_factor(n: usize, config: &GdConfig) -> Result<Factor> {
    config.validate(n)?;
    let r = config.r;
    let scale = config.alpha / (r as f64).sqrt();
    let mut gen = config.init_rng.rng();
    let entries: Vec<f64> = (0..n * r)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut gen);
            scale * z
        })
        .collect();
    Factor::from_row_slice(n, r, &entries)
}

fn check_inputs(op: &SensingOperator, y: &[f64], u: &Factor) -> Result<()> {
    if y.len() != op.m() {
        return Err(Error::DimensionMismatch {
            context: "measurement vector",
            expected: op.m(),
            found: y.len(),
        });
    }
    if u.n() != op.n() {
        return Err(Error::DimensionMismatch {
            context: "factor rows",
            expected: op.n(),
            found: u.n(),
        });
    }
    Ok(())
}

fn residual(op: &SensingOperator, y: &[f64], u: &Factor) -> Result<Vec<f64>> {
    let mut res = op.apply(&SymMatrix::gram(u))?;
    for (r, yi) in res.iter_mut().zip(y) {
        *r -= yi;
    }
    Ok(res)
}

fn gradient_from_residual(op: &SensingOperator, res: &[f64], u: &Factor) -> Result<Factor> {
    let s = op.adjoint(res)?;
    Factor::new(s.as_matrix() * u.as_matrix() / op.normalization())
}

/// `‖𝒜(UUᵀ) − y‖² / (2N)`.
pub fn train_loss(op: &SensingOperator, y: &[f64], u: &Factor) -> Result<f64> {
    check_inputs(op, y, u)?;
    Ok(0.5 * sq_norm(&residual(op, y, u)?) / op.normalization())
}

/// `(1/N)·sym(𝒜*(𝒜(UUᵀ) − y))·U`, half the exact derivative of [`train_loss`].
pub fn gradient(op: &SensingOperator, y: &[f64], u: &Factor) -> Result<Factor> {
    check_inputs(op, y, u)?;
    gradient_from_residual(op, &residual(op, y, u)?, u)
}

/// Runs the full budget of `config.iterations` steps on the training data.
///
/// Iterates `0..=T` are evaluated; records are kept every `record_every`
/// steps and always at `T`. Hooks run in order on each recorded iterate.
pub fn run_gd(
    op: &SensingOperator,
    y: &[f64],
    config: &GdConfig,
    hooks: &mut [&mut dyn IterateHook],
) -> Result<Trajectory> {
    let n = op.n();
    config.validate(n)?;
    let mut u = init_factor(n, config)?;
    check_inputs(op, y, &u)?;
    let norm = op.normalization();

    let mut traj = Trajectory {
        config: config.clone(),
        records: Vec::with_capacity(config.iterations / config.record_every + 2),
        checkpoints: BTreeMap::new(),
        best_val: None,
    };
    let mut initial_loss = None;

    for t in 0..=config.iterations {
        let res = residual(op, y, &u)?;
        let loss = 0.5 * sq_norm(&res) / norm;
        if !loss.is_finite() || !u.is_finite() {
            return Err(Error::NonFinite { t });
        }
        let initial = *initial_loss.get_or_insert(loss);
        if initial > 0.0 && loss > DIVERGENCE_FACTOR * initial {
            return Err(Error::Divergence { t, loss, initial });
        }

        if config.records_at(t) {
            let mut record = IterateRecord {
                t,
                train_loss: loss,
                val_loss: None,
                recovery_error: None,
                phase: None,
            };
            for hook in hooks.iter_mut() {
                hook.observe(t, &u, &mut record)?;
            }
            if let Some(v) = record.val_loss {
                if traj.best_val.is_none_or(|(_, best)| v < best) {
                    if let Some((old, _)) = traj.best_val {
                        if !config.checkpoint_at.contains(&old) {
                            traj.checkpoints.remove(&old);
                        }
                    }
                    traj.best_val = Some((t, v));
                    traj.checkpoints.insert(t, u.clone());
                }
            }
            traj.records.push(record);
        }
        if config.checkpoint_at.contains(&t) {
            traj.checkpoints.insert(t, u.clone());
        }
        if t == config.iterations {
            traj.checkpoints.insert(t, u.clone());
            break;
        }

        let grad = gradient_from_residual(op, &res, &u)?;
        *u.as_matrix_mut() -= grad.as_matrix() * config.eta;
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::build_gaussian_operator;
    use crate::truth::generate_ground_truth;

    fn cfg(r: usize, t: usize) -> GdConfig {
        GdConfig::new(r, 0.5, 1e-3, t, RngSpec::new(4, crate::rng::INIT))
    }

    #[test]
    fn config_validation() {
        assert!(cfg(3, 10).validate(3).is_ok());
        assert!(cfg(4, 10).validate(3).is_err());
        assert!(cfg(0, 10).validate(3).is_err());
        assert!(cfg(2, 0).validate(3).is_err());
        let mut c = cfg(2, 5);
        c.alpha = 0.0;
        assert!(matches!(init_factor(3, &c), Err(Error::InvalidConfig(_))));
        let mut c = cfg(2, 5);
        c.eta = -1.0;
        assert!(c.validate(3).is_err());
        let mut c = cfg(2, 5);
        c.record_every = 0;
        assert!(c.validate(3).is_err());
    }

    #[test]
    fn init_scale_standard_setting() {
        let mut c = cfg(50, 1);
        c.alpha = 1e-6;
        let u = init_factor(50, &c).unwrap();
        let s = crate::matrix::spectral_norm(u.as_matrix()).unwrap();
        assert!(s > 1e-7 && s < 1e-5, "spectral norm {s}");
    }

    #[test]
    fn gradient_vanishes_at_solution_and_origin() {
        let gt = generate_ground_truth(6, 2, &RngSpec::new(1, "gt")).unwrap();
        let op = build_gaussian_operator(6, 40, &RngSpec::new(2, "op")).unwrap();
        let y = op.apply(&gt.x_nat).unwrap();
        let g = gradient(&op, &y, &gt.u_nat.padded(4).unwrap()).unwrap();
        assert!(g.as_matrix().amax() < 1e-10);
        let g0 = gradient(&op, &y, &Factor::zeros(6, 3).unwrap()).unwrap();
        assert_eq!(g0.as_matrix().amax(), 0.0);
    }

    #[test]
    fn single_step_matches_hand_update() {
        let gt = generate_ground_truth(5, 2, &RngSpec::new(1, "gt")).unwrap();
        let op = build_gaussian_operator(5, 30, &RngSpec::new(2, "op")).unwrap();
        let y = op.apply(&gt.x_nat).unwrap();
        let c = cfg(3, 1);
        let traj = run_gd(&op, &y, &c, &mut []).unwrap();
        let u0 = init_factor(5, &c).unwrap();
        let g = gradient(&op, &y, &u0).unwrap();
        let expected = u0.as_matrix() - g.as_matrix() * 0.5;
        assert_eq!(traj.final_factor().as_matrix(), &expected);
        assert_eq!(traj.records.len(), 2);
    }

    #[test]
    fn stationary_when_measurements_match_init() {
        let op = build_gaussian_operator(4, 12, &RngSpec::new(2, "op")).unwrap();
        let c = cfg(2, 20);
        let u0 = init_factor(4, &c).unwrap();
        let y = op.apply(&SymMatrix::gram(&u0)).unwrap();
        let mut c2 = c.clone();
        c2.checkpoint_at = vec![7];
        let traj = run_gd(&op, &y, &c2, &mut []).unwrap();
        // the residual may be a few ulps off zero; the update is then far below u0's scale
        let drift = (traj.final_factor().as_matrix() - u0.as_matrix()).amax();
        assert!(drift <= 1e-12 * u0.as_matrix().amax(), "drift {drift}");
        assert!(traj.checkpoint(7).is_some());
    }

    #[test]
    fn divergence_is_reported() {
        let gt = generate_ground_truth(6, 2, &RngSpec::new(1, "gt")).unwrap();
        let op = build_gaussian_operator(6, 40, &RngSpec::new(2, "op")).unwrap();
        let y = op.apply(&gt.x_nat).unwrap();
        let mut c = cfg(3, 200);
        c.eta = 50.0;
        c.alpha = 1.0;
        let err = run_gd(&op, &y, &c, &mut []).unwrap_err();
        assert!(matches!(err, Error::Divergence { .. } | Error::NonFinite { .. }));
    }

    #[test]
    fn record_cadence_and_csv() {
        let gt = generate_ground_truth(5, 1, &RngSpec::new(1, "gt")).unwrap();
        let op = build_gaussian_operator(5, 30, &RngSpec::new(2, "op")).unwrap();
        let y = op.apply(&gt.x_nat).unwrap();
        let mut c = cfg(2, 10);
        c.record_every = 4;
        let traj = run_gd(&op, &y, &c, &mut []).unwrap();
        let ts: Vec<usize> = traj.records.iter().map(|r| r.t).collect();
        assert_eq!(ts, vec![0, 4, 8, 10]);
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,train_loss,val_loss,recovery_error,sigma_min_signal,err_norm,alignment"
        );
        assert!(lines.next().unwrap().ends_with(",,,,,"));
    }

    #[test]
    fn hooks_fill_records_and_drive_checkpoints() {
        let gt = generate_ground_truth(5, 1, &RngSpec::new(1, "gt")).unwrap();
        let op = build_gaussian_operator(5, 30, &RngSpec::new(2, "op")).unwrap();
        let y = op.apply(&gt.x_nat).unwrap();
        // fake validation curve with its minimum at t = 3
        let mut hook = |t: usize, _u: &Factor, rec: &mut IterateRecord| {
            rec.val_loss = Some((t as f64 - 3.0).powi(2));
            Ok(())
        };
        let traj = run_gd(&op, &y, &cfg(2, 8), &mut [&mut hook]).unwrap();
        assert_eq!(traj.best_val_iteration(), Some(3));
        let keys: Vec<usize> = traj.checkpoints.keys().copied().collect();
        assert_eq!(keys, vec![3, 8]);
    }
}
