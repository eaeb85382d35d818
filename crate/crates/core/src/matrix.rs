//! Dense matrix value types shared by every stage of the pipeline.
//!
//! Storage is nalgebra's column-major [`DMatrix`]. For the symmetric types
//! row-major and column-major layouts coincide, which is what the serialized
//! forms rely on.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Cutoff on singular values of unit-Frobenius matrices below which a
/// direction counts as numerically absent.
pub const RANK_CUTOFF: f64 = 1e-10;

const EIGEN_EPS: f64 = f64::EPSILON;
const EIGEN_MAX_SWEEPS: usize = 10_000;

/// Square matrix whose entries are exactly symmetric.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix {
    inner: DMatrix<f64>,
}

impl SymMatrix {
    /// Wraps `m`, rejecting non-square or not bit-exactly symmetric input.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() == 0 || m.nrows() != m.ncols() {
            return Err(Error::InvalidDimension(format!(
                "symmetric matrix must be square and non-empty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let n = m.nrows();
        for j in 0..n {
            for i in (j + 1)..n {
                if m[(i, j)] != m[(j, i)] {
                    return Err(Error::InvalidDimension(format!(
                        "matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { inner: m })
    }

    /// `(M + Mᵀ) / 2`. Floating-point addition commutes, so the result is
    /// exactly symmetric.
    pub fn symmetrize(m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() == 0 || m.nrows() != m.ncols() {
            return Err(Error::InvalidDimension(format!(
                "cannot symmetrize a {}x{} matrix",
                m.nrows(),
                m.ncols()
            )));
        }
        let n = m.nrows();
        let inner = DMatrix::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]));
        Ok(Self { inner })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            inner: DMatrix::zeros(n, n),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            inner: DMatrix::identity(n, n),
        }
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let n = d.len();
        Self {
            inner: DMatrix::from_fn(n, n, |i, j| if i == j { d[i] } else { 0.0 }),
        }
    }

    /// `U Uᵀ`, computed on the lower triangle and mirrored.
    pub fn gram(u: &Factor) -> Self {
        Self::gram_of(u.as_matrix())
    }

    pub(crate) fn gram_of(u: &DMatrix<f64>) -> Self {
        let mut g = u * u.transpose();
        mirror_lower(&mut g);
        Self { inner: g }
    }

    pub fn n(&self) -> usize {
        self.inner.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.inner
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner[(i, j)]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner.norm()
    }

    /// Trace inner product `⟨self, other⟩`.
    pub fn dot(&self, other: &SymMatrix) -> f64 {
        self.inner.dot(&other.inner)
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self { inner: &self.inner * a }
    }

    pub fn sub(&self, other: &SymMatrix) -> Self {
        Self {
            inner: &self.inner - &other.inner,
        }
    }

    pub fn add(&self, other: &SymMatrix) -> Self {
        Self {
            inner: &self.inner + &other.inner,
        }
    }
}

fn mirror_lower(g: &mut DMatrix<f64>) {
    let n = g.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            g[(j, i)] = g[(i, j)];
        }
    }
}

/// The `n × r` factor `U` of a Burer–Monteiro parameterization `X = U Uᵀ`.
#[derive(Clone, Debug, PartialEq)]
pub struct Factor {
    inner: DMatrix<f64>,
}

impl Factor {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() == 0 || m.ncols() == 0 || m.ncols() > m.nrows() {
            return Err(Error::InvalidDimension(format!(
                "factor must satisfy 1 <= r <= n, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(Self { inner: m })
    }

    pub fn zeros(n: usize, r: usize) -> Result<Self> {
        Self::new(DMatrix::zeros(n, r))
    }

    /// Builds a factor from row-major entries.
    pub fn from_row_slice(n: usize, r: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != n * r {
            return Err(Error::DimensionMismatch {
                context: "factor entries",
                expected: n * r,
                found: entries.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(n, r, entries))
    }

    pub fn n(&self) -> usize {
        self.inner.nrows()
    }

    pub fn r(&self) -> usize {
        self.inner.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.inner
    }

    /// Appends zero columns up to `r` total.
    pub fn padded(&self, r: usize) -> Result<Self> {
        if r < self.r() {
            return Err(Error::InvalidDimension(format!(
                "cannot pad {} columns down to {r}",
                self.r()
            )));
        }
        let mut m = DMatrix::zeros(self.n(), r);
        m.columns_mut(0, self.r()).copy_from(&self.inner);
        Self::new(m)
    }

    pub fn is_finite(&self) -> bool {
        self.inner.iter().all(|v| v.is_finite())
    }

    pub(crate) fn as_matrix_mut(&mut self) -> &mut DMatrix<f64> {
        &mut self.inner
    }
}

/// Singular values of a symmetric matrix with the matching eigenvectors.
#[derive(Clone, Debug)]
pub struct SymSvd {
    /// `σ₁ ≥ … ≥ σ_n`, the absolute eigenvalues.
    pub values: Vec<f64>,
    /// Signed eigenvalues in the same order as `values`.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal columns, column `i` paired with `values[i]`.
    pub vectors: DMatrix<f64>,
}

impl SymSvd {
    /// Number of singular values strictly above `cutoff`.
    pub fn rank(&self, cutoff: f64) -> usize {
        self.values.iter().take_while(|&&s| s > cutoff).count()
    }

    /// Leading `k` basis vectors.
    pub fn basis(&self, k: usize) -> DMatrix<f64> {
        self.vectors.columns(0, k).into_owned()
    }

    /// Column-space basis for the values above `cutoff`.
    pub fn basis_at_cutoff(&self, cutoff: f64) -> DMatrix<f64> {
        self.basis(self.rank(cutoff))
    }

    /// Orthonormal basis of the complement of the leading `k` vectors.
    pub fn complement(&self, k: usize) -> DMatrix<f64> {
        let n = self.vectors.ncols();
        self.vectors.columns(k, n - k).into_owned()
    }

    /// `V diag(σ) Vᵀ`; equals the input for PSD matrices.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let scaled = DMatrix::from_fn(self.vectors.nrows(), self.vectors.ncols(), |i, j| {
            self.vectors[(i, j)] * self.values[j]
        });
        scaled * self.vectors.transpose()
    }
}

/// Singular values (descending) and eigenvectors of a symmetric matrix.
pub fn sym_svd(x: &SymMatrix) -> Result<SymSvd> {
    let eig = SymmetricEigen::try_new(x.as_matrix().clone(), EIGEN_EPS, EIGEN_MAX_SWEEPS)
        .ok_or(Error::Convergence("symmetric eigendecomposition"))?;
    let n = x.n();
    let mut order: Vec<usize> = (0..n).collect();
    // Descending by magnitude, then by signed value so ties resolve the same
    // way on every call.
    order.sort_by(|&a, &b| {
        let (la, lb) = (eig.eigenvalues[a], eig.eigenvalues[b]);
        lb.abs().total_cmp(&la.abs()).then(lb.total_cmp(&la)).then(a.cmp(&b))
    });
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let values = eigenvalues.iter().map(|l| l.abs()).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(SymSvd {
        values,
        eigenvalues,
        vectors,
    })
}

/// Singular values of a general matrix, descending.
pub fn singular_values(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(Vec::new());
    }
    let svd = m
        .clone()
        .try_svd(false, false, EIGEN_EPS, EIGEN_MAX_SWEEPS)
        .ok_or(Error::Convergence("singular value decomposition"))?;
    let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

/// Thin SVD `M = U diag(s) Vᵀ` with singular values sorted descending.
/// Returns `(U, s, V)` with `min(rows, cols)` columns in `U` and `V`.
pub fn thin_svd(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>, DMatrix<f64>)> {
    let svd = m
        .clone()
        .try_svd(true, true, EIGEN_EPS, EIGEN_MAX_SWEEPS)
        .ok_or(Error::Convergence("singular value decomposition"))?;
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::Convergence("singular vectors")),
    };
    let k = svd.singular_values.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .total_cmp(&svd.singular_values[a])
            .then(a.cmp(&b))
    });
    let mut uu = DMatrix::zeros(m.nrows(), k);
    let mut vv = DMatrix::zeros(m.ncols(), k);
    let mut s = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        uu.set_column(dst, &u.column(src));
        vv.set_column(dst, &v_t.row(src).transpose());
        s.push(svd.singular_values[src]);
    }
    Ok((uu, s, vv))
}

/// Largest singular value; zero for empty matrices.
pub fn spectral_norm(m: &DMatrix<f64>) -> Result<f64> {
    Ok(singular_values(m)?.first().copied().unwrap_or(0.0))
}

pub fn nuclear_norm(m: &DMatrix<f64>) -> Result<f64> {
    Ok(singular_values(m)?.iter().sum())
}

/// Left singular vectors of `m` for its `k` largest singular values.
pub fn leading_left_singular_vectors(m: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>> {
    let g = SymMatrix::gram_of(m);
    Ok(sym_svd(&g)?.basis(k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn identity_has_unit_singular_values() {
        let s = sym_svd(&SymMatrix::identity(4)).unwrap();
        assert_eq!(s.values.len(), 4);
        for v in &s.values {
            assert_abs_diff_eq!(*v, 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn diagonal_values_and_canonical_basis() {
        let s = sym_svd(&SymMatrix::from_diagonal(&[1.0, 3.0, 2.0])).unwrap();
        assert_abs_diff_eq!(s.values[0], 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.values[1], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.values[2], 1.0, epsilon = 1e-14);
        // value 3 lives on axis 1, value 2 on axis 2, value 1 on axis 0
        for (col, axis) in [(0, 1), (1, 2), (2, 0)] {
            assert_abs_diff_eq!(s.vectors[(axis, col)].abs(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn negative_eigenvalues_sort_by_magnitude() {
        let s = sym_svd(&SymMatrix::from_diagonal(&[-5.0, 1.0, 2.0])).unwrap();
        assert_eq!(s.values, vec![5.0, 2.0, 1.0]);
        assert_eq!(s.eigenvalues[0], -5.0);
    }

    #[test]
    fn symmetrize_is_exact() {
        let m = DMatrix::from_row_slice(3, 3, &[0.1, 0.7, 0.3, 0.2, 0.5, 1.1, 0.9, 0.4, 0.6]);
        let s = SymMatrix::symmetrize(&m).unwrap();
        assert!(SymMatrix::new(s.as_matrix().clone()).is_ok());
    }

    #[test]
    fn rejects_asymmetric_and_empty() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert!(SymMatrix::new(m).is_err());
        assert!(SymMatrix::new(DMatrix::zeros(0, 0)).is_err());
        assert!(SymMatrix::new(DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn factor_shape_rules() {
        assert!(Factor::zeros(3, 3).is_ok());
        assert!(Factor::zeros(3, 4).is_err());
        assert!(Factor::zeros(3, 0).is_err());
        let f = Factor::from_row_slice(2, 1, &[1.0, 2.0]).unwrap();
        let p = f.padded(2).unwrap();
        assert_eq!(p.as_matrix()[(1, 0)], 2.0);
        assert_eq!(p.as_matrix()[(1, 1)], 0.0);
    }

    #[test]
    fn norms_of_diagonal() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, -4.0]));
        assert_abs_diff_eq!(spectral_norm(&m).unwrap(), 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(nuclear_norm(&m).unwrap(), 7.0, epsilon = 1e-12);
    }
}
