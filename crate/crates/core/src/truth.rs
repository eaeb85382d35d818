//! Planted low-rank ground truths and measurement noise.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::matrix::{sym_svd, Factor, SymMatrix, RANK_CUTOFF};
use crate::rng::RngSpec;

/// A rank-`r*` PSD matrix `X♮ = U♮U♮ᵀ` normalized to unit Frobenius norm.
#[derive(Clone, Debug)]
pub struct GroundTruth {
    pub x_nat: SymMatrix,
    pub u_nat: Factor,
    pub true_rank: usize,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub kappa: f64,
    /// Orthonormal basis `V_{X♮}` of the column space (`n × r*`).
    pub basis: DMatrix<f64>,
    /// Orthonormal basis `V_{X♮⊥}` of its complement (`n × (n − r*)`).
    pub complement: DMatrix<f64>,
}

impl GroundTruth {
    pub fn n(&self) -> usize {
        self.x_nat.n()
    }

    /// Builds the truth for an explicit factor, rescaling it so `‖U Uᵀ‖_F = 1`.
    pub fn from_factor(u: Factor) -> Result<Self> {
        let r_star = u.r();
        let raw = SymMatrix::gram(&u);
        let fro = raw.frobenius_norm();
        if fro == 0.0 || !fro.is_finite() {
            return Err(Error::InvalidDimension(
                "ground-truth factor has zero or non-finite Gram matrix".into(),
            ));
        }
        let u_nat = Factor::new(u.as_matrix() / fro.sqrt())?;
        let x_nat = SymMatrix::gram(&u_nat);
        let svd = sym_svd(&x_nat)?;
        if svd.rank(RANK_CUTOFF) != r_star {
            return Err(Error::InvalidDimension(format!(
                "factor has numerical rank {} instead of {r_star}",
                svd.rank(RANK_CUTOFF)
            )));
        }
        let sigma_max = svd.values[0];
        let sigma_min = svd.values[r_star - 1];
        Ok(Self {
            x_nat,
            u_nat,
            true_rank: r_star,
            sigma_min,
            sigma_max,
            kappa: sigma_max / sigma_min,
            basis: svd.basis(r_star),
            complement: svd.complement(r_star),
        })
    }
}

/// Draws `U♮` with i.i.d. standard normal entries (row-major order) and
/// rescales so that `‖U♮U♮ᵀ‖_F = 1`.
pub fn generate_ground_truth(n: usize, r_star: usize, rng: &RngSpec) -> Result<GroundTruth> {
    if n == 0 || r_star == 0 || r_star > n {
        return Err(Error::InvalidDimension(format!(
            "ground truth needs 1 <= r* <= n, got n = {n}, r* = {r_star}"
        )));
    }
    let mut gen = rng.rng();
    let entries: Vec<f64> = (0..n * r_star).map(|_| StandardNormal.sample(&mut gen)).collect();
    GroundTruth::from_factor(Factor::from_row_slice(n, r_star, &entries)?)
}

/// `m` i.i.d. draws from `N(0, σ²)`.
pub fn gaussian_noise(m: usize, sigma: f64, rng: &RngSpec) -> Vec<f64> {
    if sigma == 0.0 || m == 0 {
        return vec![0.0; m];
    }
    let normal = Normal::new(0.0, sigma).expect("sigma must be finite and non-negative");
    let mut gen = rng.rng();
    (0..m).map(|_| gen.sample(normal)).collect()
}
