use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{sq_norm, SensingOperator};
use crate::error::{Error, Result};
use crate::matrix::{nuclear_norm, spectral_norm, sym_svd, SymMatrix, RANK_CUTOFF};
use crate::rng::RngSpec;

/// Monte-Carlo estimate of a rank-`k` restricted isometry constant.
///
/// `delta_hat` is the worst deviation observed over random rank-`k` test
/// matrices, so it is a lower bound on the true constant, never a
/// certificate.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RipEstimate {
    pub k: usize,
    pub trials: usize,
    pub delta_hat: f64,
    /// `‖𝒜(X)‖² / N` for each trial, in trial order.
    pub ratios: Vec<f64>,
}

impl RipEstimate {
    pub fn median_deviation(&self) -> f64 {
        let mut d: Vec<f64> = self.ratios.iter().map(|r| (r - 1.0).abs()).collect();
        d.sort_by(f64::total_cmp);
        let mid = d.len() / 2;
        if d.len() % 2 == 1 {
            d[mid]
        } else {
            0.5 * (d[mid - 1] + d[mid])
        }
    }
}

/// Trial `i` draws its test matrix from `rng.derive("rip-trial", [k, i])`,
/// so a longer run always extends a shorter one.
pub fn estimate_rip(op: &SensingOperator, k: usize, trials: usize, rng: &RngSpec) -> Result<RipEstimate> {
    let n = op.n();
    if k == 0 || k > n {
        return Err(Error::InvalidDimension(format!(
            "rip rank must satisfy 1 <= k <= n = {n}, got {k}"
        )));
    }
    if trials == 0 {
        return Err(Error::InvalidConfig("rip estimate needs at least one trial".into()));
    }
    let norm = op.normalization();
    let ratios = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut gen = rng.derive("rip-trial", &[k as u64, i as u64]).rng();
            let entries: Vec<f64> = (0..n * k).map(|_| StandardNormal.sample(&mut gen)).collect();
            let g = DMatrix::from_row_slice(n, k, &entries);
            let x = SymMatrix::gram_of(&g);
            let x = x.scaled(1.0 / x.frobenius_norm());
            Ok(sq_norm(&op.apply(&x)?) / norm)
        })
        .collect::<Result<Vec<f64>>>()?;
    let delta_hat = ratios.iter().map(|r| (r - 1.0).abs()).fold(0.0, f64::max);
    Ok(RipEstimate {
        k,
        trials,
        delta_hat,
        ratios,
    })
}

/// Both sides of the spectral-to-Frobenius and spectral-to-nuclear
/// perturbation bounds, with `𝒟 = ℐ − 𝒜*𝒜/N`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PerturbationCheck {
    /// `‖𝒟(X)‖₂`
    pub spectral_x: f64,
    /// `‖X‖_F`
    pub frobenius_x: f64,
    /// `‖𝒟(Z)‖₂`
    pub spectral_z: f64,
    /// `‖Z‖_*`
    pub nuclear_z: f64,
}

impl PerturbationCheck {
    /// Smallest `δ` consistent with both observed inequalities.
    pub fn implied_delta(&self) -> f64 {
        let a = if self.frobenius_x > 0.0 {
            self.spectral_x / self.frobenius_x
        } else {
            0.0
        };
        let b = if self.nuclear_z > 0.0 {
            self.spectral_z / self.nuclear_z
        } else {
            0.0
        };
        a.max(b)
    }
}

fn deviation(op: &SensingOperator, z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let back = op.adjoint_raw(&op.apply_matrix(z)?)?;
    Ok(z - back / op.normalization())
}

/// Evaluates `‖𝒟(X)‖₂` against `‖X‖_F` for a rank-`≤ k` symmetric `x`, and
/// `‖𝒟(Z)‖₂` against `‖Z‖_*` for an arbitrary square `z`.
pub fn check_perturbation_bounds(
    op: &SensingOperator,
    x: &SymMatrix,
    z: &DMatrix<f64>,
    k: usize,
) -> Result<PerturbationCheck> {
    let fro = x.frobenius_norm();
    let rank = sym_svd(x)?.rank(RANK_CUTOFF * fro.max(f64::MIN_POSITIVE));
    if rank > k {
        return Err(Error::InvalidDimension(format!(
            "x has numerical rank {rank} > k = {k}"
        )));
    }
    Ok(PerturbationCheck {
        spectral_x: spectral_norm(&deviation(op, x.as_matrix())?)?,
        frobenius_x: fro,
        spectral_z: spectral_norm(&deviation(op, z)?)?,
        nuclear_z: nuclear_norm(z)?,
    })
}
