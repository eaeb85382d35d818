//! Hold-out validation: measurement splits, validation loss, and selection of
//! the stopping iterate.
//!
//! Selection runs over the recorded iterates only, so with
//! `record_every > 1` the argmin is over the recorded subset.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{Factor, SymMatrix};
use crate::operators::SensingOperator;
use crate::recovery::{IterateHook, IterateRecord, Trajectory};
use crate::rng::RngSpec;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub m_train: usize,
    pub m_val: usize,
    pub rng: RngSpec,
    /// Ascending measurement indices used for training.
    pub train_indices: Vec<usize>,
    /// Ascending measurement indices held out.
    pub val_indices: Vec<usize>,
}

impl SplitSpec {
    /// Entries of `v` at the training indices.
    pub fn train_part(&self, v: &[f64]) -> Vec<f64> {
        self.train_indices.iter().map(|&i| v[i]).collect()
    }

    pub fn val_part(&self, v: &[f64]) -> Vec<f64> {
        self.val_indices.iter().map(|&i| v[i]).collect()
    }
}

#[derive(Clone, Debug)]
pub struct MeasurementSplit {
    pub train_op: SensingOperator,
    pub train_y: Vec<f64>,
    pub val_op: SensingOperator,
    pub val_y: Vec<f64>,
    pub spec: SplitSpec,
}

/// Uniformly random partition holding out `m_val` of the `m` measurements.
pub fn split_measurements(op: &SensingOperator, y: &[f64], m_val: usize, rng: &RngSpec) -> Result<MeasurementSplit> {
    let m = op.m();
    if y.len() != m {
        return Err(Error::DimensionMismatch {
            context: "measurement vector",
            expected: m,
            found: y.len(),
        });
    }
    if m_val == 0 || m_val >= m {
        return Err(Error::InvalidSplit { m, m_val });
    }
    let mut gen = rng.rng();
    let mut held = vec![false; m];
    for i in index::sample(&mut gen, m, m_val) {
        held[i] = true;
    }
    let (val_indices, train_indices): (Vec<usize>, Vec<usize>) = (0..m).partition(|&i| held[i]);
    let spec = SplitSpec {
        m_train: train_indices.len(),
        m_val: val_indices.len(),
        rng: rng.clone(),
        train_indices,
        val_indices,
    };
    Ok(MeasurementSplit {
        train_op: op.select(&spec.train_indices)?,
        train_y: spec.train_part(y),
        val_op: op.select(&spec.val_indices)?,
        val_y: spec.val_part(y),
        spec,
    })
}

/// `½‖𝒜_val(UUᵀ) − y_val‖²`, unnormalized.
pub fn validation_loss(op_val: &SensingOperator, y_val: &[f64], u: &Factor) -> Result<f64> {
    if y_val.len() != op_val.m() {
        return Err(Error::DimensionMismatch {
            context: "validation measurements",
            expected: op_val.m(),
            found: y_val.len(),
        });
    }
    let pred = op_val.apply(&SymMatrix::gram(u))?;
    Ok(0.5 * pred.iter().zip(y_val).map(|(p, y)| (p - y).powi(2)).sum::<f64>())
}

/// Records the validation loss on every recorded iterate.
pub struct ValidationHook<'a> {
    op: &'a SensingOperator,
    y: &'a [f64],
}

impl<'a> ValidationHook<'a> {
    pub fn new(op: &'a SensingOperator, y: &'a [f64]) -> Self {
        Self { op, y }
    }
}

impl IterateHook for ValidationHook<'_> {
    fn observe(&mut self, _t: usize, u: &Factor, record: &mut IterateRecord) -> Result<()> {
        record.val_loss = Some(validation_loss(self.op, self.y, u)?);
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    /// Earliest recorded iteration with the smallest validation loss.
    pub t_hat: usize,
    /// Earliest recorded iteration with the smallest recovery error.
    pub t_tilde: Option<usize>,
    /// `(t, validation loss)` for every record.
    pub val_curve: Vec<(usize, f64)>,
    pub error_at_t_hat: Option<f64>,
    pub error_at_t_tilde: Option<f64>,
    /// `error(t_hat) − error(t_tilde)`, non-negative.
    pub gap: Option<f64>,
}

fn first_argmin(values: impl Iterator<Item = (usize, f64)>) -> Option<(usize, f64)> {
    values.fold(None, |best, (t, v)| match best {
        Some((_, b)) if v >= b => best,
        _ => Some((t, v)),
    })
}

pub fn select_iterate(traj: &Trajectory) -> Result<SelectionResult> {
    if traj.records.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let val_curve = traj
        .records
        .iter()
        .map(|r| r.val_loss.map(|v| (r.t, v)).ok_or(Error::MissingValidation { t: r.t }))
        .collect::<Result<Vec<_>>>()?;
    let (t_hat, _) = first_argmin(val_curve.iter().copied()).expect("non-empty curve");

    let errors: Option<Vec<(usize, f64)>> = traj
        .records
        .iter()
        .map(|r| r.recovery_error.map(|e| (r.t, e)))
        .collect();
    let (t_tilde, error_at_t_tilde, error_at_t_hat) = match &errors {
        Some(errs) => {
            let (tt, et) = first_argmin(errs.iter().copied()).expect("non-empty curve");
            let eh = errs.iter().find(|(t, _)| *t == t_hat).map(|&(_, e)| e);
            (Some(tt), Some(et), eh)
        }
        None => (None, None, None),
    };
    let gap = match (error_at_t_hat, error_at_t_tilde) {
        (Some(h), Some(t)) => Some(h - t),
        _ => None,
    };
    Ok(SelectionResult {
        t_hat,
        t_tilde,
        val_curve,
        error_at_t_hat,
        error_at_t_tilde,
        gap,
    })
}

/// Relative deviation of the validation residual energy from its mean:
/// `|‖𝒜_val(D) − e‖² − (N‖D‖_F² + m_val σ²)| / (N‖D‖_F² + m_val σ²)`,
/// where `N` is the operator normalization (`m_val` for Gaussian sensing).
pub fn val_deviation(op_val: &SensingOperator, noise_val: &[f64], d: &SymMatrix, sigma: f64) -> Result<f64> {
    if noise_val.len() != op_val.m() {
        return Err(Error::DimensionMismatch {
            context: "validation noise",
            expected: op_val.m(),
            found: noise_val.len(),
        });
    }
    let ad = op_val.apply(d)?;
    let energy: f64 = ad.iter().zip(noise_val).map(|(a, e)| (a - e).powi(2)).sum();
    let mean = op_val.normalization() * d.as_matrix().norm_squared() + op_val.m() as f64 * sigma * sigma;
    if mean == 0.0 {
        return Ok(if energy == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok((energy - mean).abs() / mean)
}

/// [`val_deviation`] for each of `ds`.
pub fn check_val_concentration(
    op_val: &SensingOperator,
    noise_val: &[f64],
    ds: &[SymMatrix],
    sigma: f64,
) -> Result<Vec<f64>> {
    ds.iter().map(|d| val_deviation(op_val, noise_val, d, sigma)).collect()
}

/// Ground-truth-dependent quantities from the selection theory, reported
/// next to the measured `δ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoryTerms {
    /// `κ² n r* / m_train`
    pub delta_val: f64,
    /// `(n r*)² κ² m_val / m_train²`; the sample-size condition asks this to
    /// exceed `C log T / log(1/ε)` for an unspecified `C`.
    pub sample_condition: f64,
}

impl TheoryTerms {
    pub fn new(n: usize, r_star: usize, kappa: f64, m_train: usize, m_val: usize) -> Self {
        let nr = (n * r_star) as f64;
        let mt = m_train as f64;
        Self {
            delta_val: kappa * kappa * nr / mt,
            sample_condition: nr * nr * kappa * kappa * m_val as f64 / (mt * mt),
        }
    }
}

/// The selection guarantee
/// `‖D_{t̂}‖² ≤ (1+δ)/(1−δ)·‖D_{t̃}‖² + 2δ/(1−δ)·σ_eff²`
/// evaluated with a measured `δ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionBound {
    pub delta_val: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// `δ ≥ 1`: the bound says nothing.
    pub vacuous: bool,
    pub holds: bool,
}

/// `sigma2_eff` is `σ² · m_val / N` (plain `σ²` for Gaussian sensing).
pub fn selection_bound(error_at_t_hat: f64, error_at_t_tilde: f64, delta_val: f64, sigma2_eff: f64) -> SelectionBound {
    if delta_val >= 1.0 {
        return SelectionBound {
            delta_val,
            lhs: error_at_t_hat,
            rhs: f64::INFINITY,
            vacuous: true,
            holds: true,
        };
    }
    let rhs =
        (1.0 + delta_val) / (1.0 - delta_val) * error_at_t_tilde + 2.0 * delta_val / (1.0 - delta_val) * sigma2_eff;
    // rounding slack of a few ulps on the two sides
    let slack = 1e-12 * rhs.abs().max(error_at_t_hat.abs());
    SelectionBound {
        delta_val,
        lhs: error_at_t_hat,
        rhs,
        vacuous: false,
        holds: error_at_t_hat <= rhs + slack,
    }
}

/// Largest validation deviation over a run, tracked as a hook.
pub struct ConcentrationHook<'a> {
    op: &'a SensingOperator,
    noise: &'a [f64],
    truth: &'a SymMatrix,
    sigma: f64,
    pub max_deviation: f64,
}

impl<'a> ConcentrationHook<'a> {
    pub fn new(op: &'a SensingOperator, noise: &'a [f64], truth: &'a SymMatrix, sigma: f64) -> Self {
        Self {
            op,
            noise,
            truth,
            sigma,
            max_deviation: 0.0,
        }
    }
}

impl IterateHook for ConcentrationHook<'_> {
    fn observe(&mut self, _t: usize, u: &Factor, _record: &mut IterateRecord) -> Result<()> {
        let d = SymMatrix::gram(u).sub(self.truth);
        let dev = val_deviation(self.op, self.noise, &d, self.sigma)?;
        self.max_deviation = self.max_deviation.max(dev);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::sq_norm as energy;
    use crate::operators::{build_completion_operator, build_gaussian_operator};
    use crate::recovery::{run_gd, GdConfig};

    #[test]
    fn standard_split_sizes() {
        let op = build_gaussian_operator(5, 1000, &RngSpec::new(1, "op")).unwrap();
        let y: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        let s = split_measurements(&op, &y, 100, &RngSpec::new(2, "split")).unwrap();
        assert_eq!((s.spec.m_train, s.spec.m_val), (900, 100));
        assert_eq!(s.train_op.m(), 900);
        assert_eq!(s.val_op.m(), 100);
        for (k, &i) in s.spec.val_indices.iter().enumerate() {
            assert_eq!(s.val_y[k], i as f64);
            assert_eq!(s.val_op.sensing_matrix(k), op.sensing_matrix(i));
        }
    }

    #[test]
    fn minimal_split_and_errors() {
        let op = build_completion_operator(3, 2, &RngSpec::new(1, "op")).unwrap();
        let s = split_measurements(&op, &[1.0, 2.0], 1, &RngSpec::new(2, "split")).unwrap();
        assert_eq!(s.spec.m_val, 1);
        assert_eq!(s.spec.m_train, 1);
        assert!(matches!(
            split_measurements(&op, &[1.0, 2.0], 2, &RngSpec::new(2, "s")),
            Err(Error::InvalidSplit { m: 2, m_val: 2 })
        ));
        assert!(split_measurements(&op, &[1.0, 2.0], 0, &RngSpec::new(2, "s")).is_err());
    }

    #[test]
    fn zero_predictor_loss() {
        let op = build_gaussian_operator(4, 10, &RngSpec::new(1, "op")).unwrap();
        let y: Vec<f64> = (0..10).map(|i| 0.1 * i as f64).collect();
        let l = validation_loss(&op, &y, &Factor::zeros(4, 2).unwrap()).unwrap();
        assert!((l - 0.5 * energy(&y)).abs() < 1e-15);
    }

    fn traj_with(vals: &[f64], errs: Option<&[f64]>) -> Trajectory {
        let op = build_gaussian_operator(3, 5, &RngSpec::new(1, "op")).unwrap();
        let cfg = GdConfig::new(2, 0.1, 1e-3, vals.len() - 1, RngSpec::new(1, "init"));
        let mut hook = |t: usize, _u: &Factor, rec: &mut IterateRecord| {
            rec.val_loss = Some(vals[t]);
            rec.recovery_error = errs.map(|e| e[t]);
            Ok(())
        };
        run_gd(&op, &[0.0; 5], &cfg, &mut [&mut hook]).unwrap()
    }

    #[test]
    fn interior_minimum_selected() {
        let vals = [9.0, 4.0, 1.0, 0.0, 1.0, 4.0];
        let errs = [5.0, 3.0, 0.5, 0.7, 2.0, 4.0];
        let sel = select_iterate(&traj_with(&vals, Some(&errs))).unwrap();
        assert_eq!(sel.t_hat, 3);
        assert_eq!(sel.t_tilde, Some(2));
        assert!((sel.gap.unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn constant_curve_picks_first() {
        let sel = select_iterate(&traj_with(&[2.0; 4], None)).unwrap();
        assert_eq!(sel.t_hat, 0);
        assert_eq!(sel.t_tilde, None);
        assert_eq!(sel.gap, None);
    }

    #[test]
    fn missing_validation_rejected() {
        let op = build_gaussian_operator(3, 5, &RngSpec::new(1, "op")).unwrap();
        let cfg = GdConfig::new(2, 0.1, 1e-3, 2, RngSpec::new(1, "init"));
        let traj = run_gd(&op, &[0.0; 5], &cfg, &mut []).unwrap();
        assert!(matches!(select_iterate(&traj), Err(Error::MissingValidation { t: 0 })));
        let mut empty = traj.clone();
        empty.records.clear();
        assert!(matches!(select_iterate(&empty), Err(Error::EmptyTrajectory)));
    }

    #[test]
    fn noise_only_deviation() {
        let op = build_gaussian_operator(4, 50, &RngSpec::new(1, "op")).unwrap();
        let e = crate::truth::gaussian_noise(50, 0.5, &RngSpec::new(2, "noise"));
        let dev = val_deviation(&op, &e, &SymMatrix::zeros(4), 0.5).unwrap();
        let expected = (energy(&e) / 50.0 - 0.25).abs() / 0.25;
        assert!((dev - expected).abs() < 1e-12);
    }

    #[test]
    fn noiseless_deviation_is_isometry_defect() {
        let op = build_gaussian_operator(5, 40, &RngSpec::new(1, "op")).unwrap();
        let v = nalgebra::DMatrix::from_column_slice(5, 1, &[1.0, 0.0, -1.0, 2.0, 0.5]);
        let d = SymMatrix::gram_of(&v);
        let d = d.scaled(1.0 / d.frobenius_norm());
        let dev = val_deviation(&op, &[0.0; 40], &d, 0.0).unwrap();
        let ratio = energy(&op.apply(&d).unwrap()) / 40.0;
        assert!((dev - (ratio - 1.0).abs()).abs() < 1e-12);
    }

    #[test]
    fn bound_arithmetic() {
        let b = selection_bound(0.11, 0.1, 0.1, 0.2);
        let rhs = 1.1 / 0.9 * 0.1 + 0.2 / 0.9 * 0.2;
        assert!((b.rhs - rhs).abs() < 1e-15);
        assert!(b.holds && !b.vacuous);
        assert!(!selection_bound(1.0, 0.1, 0.0, 0.0).holds);
        assert!(selection_bound(5.0, 0.1, 1.5, 0.0).vacuous);
    }

    #[test]
    fn theory_terms_by_hand() {
        // n = 50, r* = 5, κ = 2, 900 train / 100 val
        let t = TheoryTerms::new(50, 5, 2.0, 900, 100);
        assert!((t.delta_val - 1000.0 / 900.0).abs() < 1e-12);
        assert!((t.sample_condition - 25_000_000.0 / 810_000.0).abs() < 1e-12);
    }
}
