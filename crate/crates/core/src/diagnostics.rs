//! Signal/error decomposition of an iterate and the phase quantities that
//! track it.
//!
//! With `V_{X♮}ᵀ U = V Σ Wᵀ` (thin SVD, `W ∈ ℝ^{r×r*}`) and `W_⊥` an
//! orthonormal basis of the complement of `W` in `ℝ^r`, an iterate splits as
//!
//! ```text
//! U = U W Wᵀ  +  U W_⊥ W_⊥ᵀ
//!     signal      error
//! ```
//!
//! and the tracked quantities are `σ_{r*}(U W)`, `‖U W_⊥‖₂` and the
//! subspace misalignment `‖V_{X♮⊥}ᵀ V_{UW}‖₂`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{spectral_norm, sym_svd, thin_svd, Factor, SymMatrix, RANK_CUTOFF};
use crate::recovery::{IterateHook, IterateRecord};
use crate::truth::GroundTruth;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseQuantities {
    pub sigma_min_signal: f64,
    /// Spectral norm of the error part `U W_⊥`.
    pub err_norm: f64,
    pub alignment: f64,
    pub fro_error: f64,
    /// `V_{X♮}ᵀU` had fewer than `r*` numerically nonzero singular values,
    /// so `W` is only the SVD routine's leading block.
    pub degenerate: bool,
}

#[derive(Clone, Debug)]
pub struct SignalErrorSplit {
    pub signal: DMatrix<f64>,
    pub error: DMatrix<f64>,
    /// `r × r*`
    pub w: DMatrix<f64>,
    /// `r × (r − r*)`
    pub w_perp: DMatrix<f64>,
    pub rank_deficient: bool,
}

fn check_shapes(u: &Factor, gt: &GroundTruth) -> Result<()> {
    if u.n() != gt.n() {
        return Err(Error::DimensionMismatch {
            context: "factor rows vs ground truth",
            expected: gt.n(),
            found: u.n(),
        });
    }
    if u.r() < gt.true_rank {
        return Err(Error::InvalidDimension(format!(
            "decomposition needs r >= r*, got r = {} < r* = {}",
            u.r(),
            gt.true_rank
        )));
    }
    Ok(())
}

pub fn signal_error_decompose(u: &Factor, gt: &GroundTruth) -> Result<SignalErrorSplit> {
    check_shapes(u, gt)?;
    let r = u.r();
    let r_star = gt.true_rank;
    let um = u.as_matrix();

    let proj = gt.basis.transpose() * um;
    let (_, s, v) = thin_svd(&proj)?;
    let w = v.columns(0, r_star).into_owned();
    let lead = s.first().copied().unwrap_or(0.0);
    let rank_deficient = lead == 0.0 || s[r_star - 1] <= RANK_CUTOFF * lead;

    let w_perp = if r == r_star {
        DMatrix::zeros(r, 0)
    } else {
        let p_perp = DMatrix::<f64>::identity(r, r) - &w * w.transpose();
        sym_svd(&SymMatrix::symmetrize(&p_perp)?)?.basis(r - r_star)
    };

    let signal = um * &w * w.transpose();
    let error = um * &w_perp * w_perp.transpose();
    Ok(SignalErrorSplit {
        signal,
        error,
        w,
        w_perp,
        rank_deficient,
    })
}

pub fn phase_quantities(u: &Factor, gt: &GroundTruth) -> Result<PhaseQuantities> {
    let split = signal_error_decompose(u, gt)?;
    let r_star = gt.true_rank;
    let um = u.as_matrix();

    let uw = um * &split.w;
    let (left, s, _) = thin_svd(&uw)?;
    let sigma_min_signal = s[r_star - 1];
    let err_norm = if split.w_perp.ncols() == 0 {
        0.0
    } else {
        spectral_norm(&(um * &split.w_perp))?
    };
    let alignment = if gt.complement.ncols() == 0 {
        0.0
    } else {
        let basis = left.columns(0, r_star);
        spectral_norm(&(gt.complement.transpose() * basis))?
    };
    Ok(PhaseQuantities {
        sigma_min_signal,
        err_norm,
        alignment,
        fro_error: recovery_error(u, gt)?.sqrt(),
        degenerate: split.rank_deficient,
    })
}

/// `‖UUᵀ − X♮‖_F²`.
pub fn recovery_error(u: &Factor, gt: &GroundTruth) -> Result<f64> {
    if u.n() != gt.n() {
        return Err(Error::DimensionMismatch {
            context: "factor rows vs ground truth",
            expected: gt.n(),
            found: u.n(),
        });
    }
    let d = SymMatrix::gram(u).sub(&gt.x_nat);
    Ok(d.as_matrix().norm_squared())
}

/// Fills `recovery_error` on every record and, every `phase_every` recorded
/// iterations, the phase quantities.
pub struct TruthHook<'a> {
    gt: &'a GroundTruth,
    phase_every: Option<usize>,
}

impl<'a> TruthHook<'a> {
    pub fn new(gt: &'a GroundTruth) -> Self {
        Self { gt, phase_every: None }
    }

    pub fn with_phases(gt: &'a GroundTruth, every: usize) -> Self {
        Self {
            gt,
            phase_every: Some(every.max(1)),
        }
    }
}

impl IterateHook for TruthHook<'_> {
    fn observe(&mut self, t: usize, u: &Factor, record: &mut IterateRecord) -> Result<()> {
        record.recovery_error = Some(recovery_error(u, self.gt)?);
        if let Some(every) = self.phase_every {
            if t.is_multiple_of(every) {
                record.phase = Some(phase_quantities(u, self.gt)?);
            }
        }
        Ok(())
    }
}
