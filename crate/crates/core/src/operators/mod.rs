//! Linear measurement operators `𝒜: ℝ^{n×n} → ℝ^m` and their adjoints.
//!
//! Two kinds are supported: dense sensing with i.i.d. standard normal
//! matrices `A_i`, and entry sampling (matrix completion) where each `A_i` is
//! a single one at a sampled position. Operators are stored raw; the scaling
//! that makes `‖𝒜(X)‖²` comparable to `‖X‖_F²` lives in
//! [`SensingOperator::normalization`] and is applied at use sites.

mod file;
mod rip;

pub use file::{read_operator, write_operator, MAGIC, VERSION};
pub use rip::{check_perturbation_bounds, estimate_rip, PerturbationCheck, RipEstimate};

use nalgebra::{DMatrix, DVectorView};
use rand::seq::index;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::SymMatrix;
use crate::rng::RngSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorKind {
    DenseGaussian,
    CompletionMask,
}

#[derive(Clone, Debug)]
enum Repr {
    /// `n² × m`; column `i` is `vec(A_i)` in column-major order.
    Dense(DMatrix<f64>),
    /// Observed `(row, col)` positions, all distinct.
    Mask(Vec<(usize, usize)>),
}

#[derive(Clone, Debug)]
pub struct SensingOperator {
    n: usize,
    seed: u64,
    repr: Repr,
}

/// Dense operator with `m` sensing matrices of i.i.d. `N(0, 1)` entries.
/// Each matrix is drawn row by row.
pub fn build_gaussian_operator(n: usize, m: usize, rng: &RngSpec) -> Result<SensingOperator> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidDimension(format!(
            "gaussian operator needs n >= 1 and m >= 1, got n = {n}, m = {m}"
        )));
    }
    let nn = n * n;
    let total = nn.checked_mul(m).ok_or(Error::Allocation { elements: usize::MAX })?;
    let mut data: Vec<f64> = Vec::new();
    data.try_reserve_exact(total)
        .map_err(|_| Error::Allocation { elements: total })?;
    data.resize(total, 0.0);
    let mut gen = rng.rng();
    for i in 0..m {
        let col = &mut data[i * nn..(i + 1) * nn];
        for row in 0..n {
            for c in 0..n {
                col[c * n + row] = StandardNormal.sample(&mut gen);
            }
        }
    }
    Ok(SensingOperator {
        n,
        seed: rng.seed,
        repr: Repr::Dense(DMatrix::from_vec(nn, m, data)),
    })
}

/// Samples `m` distinct entries of an `n × n` matrix uniformly without
/// replacement.
pub fn build_completion_operator(n: usize, m: usize, rng: &RngSpec) -> Result<SensingOperator> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidDimension(format!(
            "completion operator needs n >= 1 and m >= 1, got n = {n}, m = {m}"
        )));
    }
    let cells = n * n;
    if m > cells {
        return Err(Error::TooManySamples {
            requested: m,
            available: cells,
        });
    }
    let mut gen = rng.rng();
    let pairs = index::sample(&mut gen, cells, m)
        .into_iter()
        .map(|flat| (flat / n, flat % n))
        .collect();
    Ok(SensingOperator {
        n,
        seed: rng.seed,
        repr: Repr::Mask(pairs),
    })
}

impl SensingOperator {
    /// Dense operator from explicit sensing matrices.
    pub fn from_sensing_matrices(n: usize, mats: &[DMatrix<f64>], seed: u64) -> Result<Self> {
        if n == 0 || mats.is_empty() {
            return Err(Error::InvalidDimension("need n >= 1 and at least one matrix".into()));
        }
        let nn = n * n;
        let mut data = DMatrix::zeros(nn, mats.len());
        for (i, a) in mats.iter().enumerate() {
            if a.nrows() != n || a.ncols() != n {
                return Err(Error::DimensionMismatch {
                    context: "sensing matrix",
                    expected: n,
                    found: a.nrows().max(a.ncols()),
                });
            }
            data.column_mut(i).copy_from_slice(a.as_slice());
        }
        Ok(Self {
            n,
            seed,
            repr: Repr::Dense(data),
        })
    }

    /// Completion operator observing exactly `pairs`.
    pub fn from_pairs(n: usize, pairs: Vec<(usize, usize)>, seed: u64) -> Result<Self> {
        if n == 0 || pairs.is_empty() {
            return Err(Error::InvalidDimension("need n >= 1 and at least one pair".into()));
        }
        let mut seen = std::collections::HashSet::with_capacity(pairs.len());
        for &(r, c) in &pairs {
            if r >= n || c >= n {
                return Err(Error::InvalidDimension(format!(
                    "pair ({r}, {c}) out of range for n = {n}"
                )));
            }
            if !seen.insert((r, c)) {
                return Err(Error::InvalidDimension(format!("duplicate pair ({r}, {c})")));
            }
        }
        Ok(Self {
            n,
            seed,
            repr: Repr::Mask(pairs),
        })
    }

    pub fn kind(&self) -> OperatorKind {
        match self.repr {
            Repr::Dense(_) => OperatorKind::DenseGaussian,
            Repr::Mask(_) => OperatorKind::CompletionMask,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        match &self.repr {
            Repr::Dense(d) => d.ncols(),
            Repr::Mask(p) => p.len(),
        }
    }

    /// Seed of the stream the operator was drawn from (inherited by splits).
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `N` with `E‖𝒜(X)‖² = N‖X‖_F²` for a fixed `X`: `m` for Gaussian
    /// sensing, `m / n²` for uniform entry sampling.
    pub fn normalization(&self) -> f64 {
        match &self.repr {
            Repr::Dense(d) => d.ncols() as f64,
            Repr::Mask(p) => p.len() as f64 / (self.n * self.n) as f64,
        }
    }

    /// Observed positions of a completion operator.
    pub fn pairs(&self) -> Option<&[(usize, usize)]> {
        match &self.repr {
            Repr::Mask(p) => Some(p),
            Repr::Dense(_) => None,
        }
    }

    /// The `i`-th sensing matrix, materialized.
    pub fn sensing_matrix(&self, i: usize) -> DMatrix<f64> {
        let n = self.n;
        match &self.repr {
            Repr::Dense(d) => DMatrix::from_column_slice(n, n, d.column(i).as_slice()),
            Repr::Mask(p) => {
                let mut a = DMatrix::zeros(n, n);
                a[p[i]] = 1.0;
                a
            }
        }
    }

    /// `𝒜(Z)` for a symmetric `Z`.
    pub fn apply(&self, z: &SymMatrix) -> Result<Vec<f64>> {
        self.apply_matrix(z.as_matrix())
    }

    /// `(⟨A_1, Z⟩, …, ⟨A_m, Z⟩)` for an arbitrary square `Z`.
    pub fn apply_matrix(&self, z: &DMatrix<f64>) -> Result<Vec<f64>> {
        if z.nrows() != self.n || z.ncols() != self.n {
            return Err(Error::DimensionMismatch {
                context: "operator input",
                expected: self.n,
                found: if z.nrows() != self.n { z.nrows() } else { z.ncols() },
            });
        }
        Ok(match &self.repr {
            Repr::Dense(d) => {
                let v = DVectorView::from_slice(z.as_slice(), self.n * self.n);
                d.tr_mul(&v).data.into()
            }
            Repr::Mask(p) => p.iter().map(|&rc| z[rc]).collect(),
        })
    }

    /// `Σᵢ vᵢ A_i` without symmetrization.
    pub fn adjoint_raw(&self, v: &[f64]) -> Result<DMatrix<f64>> {
        if v.len() != self.m() {
            return Err(Error::DimensionMismatch {
                context: "adjoint input",
                expected: self.m(),
                found: v.len(),
            });
        }
        let n = self.n;
        Ok(match &self.repr {
            Repr::Dense(d) => {
                let out = d * DVectorView::from_slice(v, v.len());
                DMatrix::from_vec(n, n, out.data.into())
            }
            Repr::Mask(p) => {
                let mut out = DMatrix::zeros(n, n);
                for (&rc, &vi) in p.iter().zip(v) {
                    out[rc] += vi;
                }
                out
            }
        })
    }

    /// Symmetrized adjoint `sym(Σᵢ vᵢ A_i)`.
    pub fn adjoint(&self, v: &[f64]) -> Result<SymMatrix> {
        SymMatrix::symmetrize(&self.adjoint_raw(v)?)
    }

    /// Sub-operator keeping the measurements at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let m = self.m();
        if let Some(&bad) = indices.iter().find(|&&i| i >= m) {
            return Err(Error::DimensionMismatch {
                context: "measurement index",
                expected: m,
                found: bad,
            });
        }
        if indices.is_empty() {
            return Err(Error::InvalidDimension("cannot select zero measurements".into()));
        }
        let repr = match &self.repr {
            Repr::Dense(d) => Repr::Dense(d.select_columns(indices.iter())),
            Repr::Mask(p) => Repr::Mask(indices.iter().map(|&i| p[i]).collect()),
        };
        Ok(Self {
            n: self.n,
            seed: self.seed,
            repr,
        })
    }

    pub(crate) fn dense_data(&self) -> Option<&DMatrix<f64>> {
        match &self.repr {
            Repr::Dense(d) => Some(d),
            Repr::Mask(_) => None,
        }
    }

    pub(crate) fn from_dense_data(n: usize, seed: u64, data: DMatrix<f64>) -> Self {
        Self {
            n,
            seed,
            repr: Repr::Dense(data),
        }
    }
}

/// `‖v‖₂²`.
pub(crate) fn sq_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}
