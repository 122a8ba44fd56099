//! Dense symmetric-matrix primitives.
//!
//! Everything in the crate that is a covariance, a probability matrix or one
//! of their Hadamard inverses is carried by [`SymmetricMatrix`]. Values are
//! immutable after construction; symmetry is exact (the lower triangle is a
//! mirror of the upper one) and every entry is finite.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Largest dimension accepted by [`SymmetricMatrix`].
pub const MAX_DIM: usize = 1024;

/// Relative asymmetry tolerated by [`SymmetricMatrix::new`] before the input
/// is rejected; anything below it is averaged away.
const SYMMETRY_TOL: f64 = 1e-8;

/// Dense real symmetric `n x n` matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    inner: DMatrix<f64>,
}

impl SymmetricMatrix {
    /// Validates and symmetrizes `m` as `(m + m^T) / 2`.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        check_shape(&m)?;
        check_finite(&m)?;
        let n = m.nrows();
        let scale = m.amax().max(1.0);
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (m[(i, j)], m[(j, i)]);
                if (a - b).abs() > SYMMETRY_TOL * scale {
                    return Err(Error::InvalidInput(format!(
                        "matrix is not symmetric at ({i}, {j}): {a} vs {b}"
                    )));
                }
            }
        }
        let mut m = m;
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
                m[(i, j)] = avg;
                m[(j, i)] = avg;
            }
        }
        Ok(Self { inner: m })
    }

    /// Builds a matrix by evaluating `f(i, j)` on the upper triangle (`i <= j`)
    /// and mirroring it.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut m = DMatrix::zeros(n, n);
        for j in 0..n {
            for i in 0..=j {
                m[(i, j)] = f(i, j);
            }
        }
        Self::from_upper(m)
    }

    /// Mirrors the upper triangle of `m` into its lower triangle.
    pub(crate) fn from_upper(mut m: DMatrix<f64>) -> Result<Self> {
        check_shape(&m)?;
        let n = m.nrows();
        for j in 0..n {
            for i in (j + 1)..n {
                m[(i, j)] = m[(j, i)];
            }
        }
        check_finite(&m)?;
        Ok(Self { inner: m })
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::from_upper(DMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::from_upper(DMatrix::identity(n, n))
    }

    /// The all-ones matrix `1 1^T`.
    pub fn ones(n: usize) -> Result<Self> {
        Self::from_upper(DMatrix::from_element(n, n, 1.0))
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::from_upper(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    /// Rank-one matrix `v v^T`.
    pub fn outer(v: &[f64]) -> Result<Self> {
        Self::from_fn(v.len(), |i, j| v[i] * v[j])
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.inner
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.get(i, i)).collect()
    }

    pub fn trace(&self) -> f64 {
        self.inner.trace()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.inner.amax()
    }

    pub fn max_abs_diff(&self, other: &SymmetricMatrix) -> f64 {
        (&self.inner - &other.inner).amax()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner.norm()
    }

    pub fn scale(&self, c: f64) -> Result<Self> {
        Self::from_upper(&self.inner * c)
    }

    pub fn add(&self, other: &SymmetricMatrix) -> Result<Self> {
        same_dim(self, other)?;
        Self::from_upper(&self.inner + &other.inner)
    }

    pub fn sub(&self, other: &SymmetricMatrix) -> Result<Self> {
        same_dim(self, other)?;
        Self::from_upper(&self.inner - &other.inner)
    }

    /// Full symmetric eigendecomposition, eigenvalues sorted descending.
    pub fn spectrum(&self) -> Spectrum {
        let eig = SymmetricEigen::new(self.inner.clone());
        let n = self.dim();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let eigenvalues = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
        let mut eigenvectors = DMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
        }
        Spectrum {
            eigenvalues,
            eigenvectors,
        }
    }

    /// Whether the smallest eigenvalue is at least `-tol * ||A||`.
    pub fn is_psd(&self, tol: f64) -> bool {
        let spec = self.spectrum();
        let norm = spec.operator_norm();
        spec.eigenvalues.iter().all(|&l| l >= -tol * norm)
    }
}

/// Eigen-pairs of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct Spectrum {
    /// Sorted descending.
    pub eigenvalues: DVector<f64>,
    /// Orthonormal columns, paired with `eigenvalues`.
    pub eigenvectors: DMatrix<f64>,
}

impl Spectrum {
    pub fn operator_norm(&self) -> f64 {
        self.eigenvalues
            .iter()
            .fold(0.0_f64, |acc, l| acc.max(l.abs()))
    }

    pub fn nuclear_norm(&self) -> f64 {
        self.eigenvalues.iter().map(|l| l.abs()).sum()
    }

    /// `Q diag(lambda) Q^T`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let scaled = &self.eigenvectors * DMatrix::from_diagonal(&self.eigenvalues);
        scaled * self.eigenvectors.transpose()
    }
}

/// Set `E` of index pairs `(i, j)` on which an estimate is defined.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservedPairSet {
    n: usize,
    members: Vec<bool>,
}

impl ObservedPairSet {
    pub fn full(n: usize) -> Self {
        Self {
            n,
            members: vec![true; n * n],
        }
    }

    pub fn empty(n: usize) -> Self {
        Self {
            n,
            members: vec![false; n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut members = vec![false; n * n];
        for i in 0..n {
            for j in 0..n {
                members[i * n + j] = f(i, j);
            }
        }
        Self { n, members }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.members[i * self.n + j]
    }

    /// Number of ordered pairs in the set.
    pub fn len(&self) -> usize {
        self.members.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_full(&self) -> bool {
        self.members.iter().all(|&b| b)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.n;
        self.members
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(k, _)| (k / n, k % n))
    }

    /// `Sigma_E`: entries of `m` inside the set, zero elsewhere.
    pub fn restrict(&self, m: &SymmetricMatrix) -> Result<SymmetricMatrix> {
        if m.dim() != self.n {
            return Err(Error::dims(self.n, m.dim()));
        }
        SymmetricMatrix::from_fn(self.n, |i, j| {
            if self.contains(i, j) {
                m.get(i, j)
            } else {
                0.0
            }
        })
    }
}

/// Largest absolute eigenvalue.
pub fn operator_norm(a: &SymmetricMatrix) -> f64 {
    a.spectrum().operator_norm()
}

/// Sum of absolute eigenvalues.
pub fn nuclear_norm(a: &SymmetricMatrix) -> f64 {
    a.spectrum().nuclear_norm()
}

/// Effective rank `||A||_* / ||A||`, in `[1, rank(A)]`.
pub fn erank(a: &SymmetricMatrix) -> Result<f64> {
    let spec = a.spectrum();
    let op = spec.operator_norm();
    if op == 0.0 {
        return Err(Error::UndefinedErank);
    }
    Ok(spec.nuclear_norm() / op)
}

pub fn hadamard_product(a: &SymmetricMatrix, b: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    same_dim(a, b)?;
    SymmetricMatrix::from_upper(a.inner.component_mul(&b.inner))
}

/// Entrywise reciprocal; every entry must be strictly positive.
pub fn hadamard_inverse(a: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    let n = a.dim();
    for j in 0..n {
        for i in 0..=j {
            let v = a.get(i, j);
            if v <= 0.0 {
                return Err(Error::NotHadamardInvertible {
                    row: i,
                    col: j,
                    value: v,
                });
            }
        }
    }
    SymmetricMatrix::from_fn(n, |i, j| 1.0 / a.get(i, j))
}

/// Hadamard inverse of an empirical probability matrix restricted to its
/// support `E = {(i, j) : p_hat_ij != 0}`; zero outside `E`.
///
/// Nonzero entries of an empirical probability matrix built from `n_samples`
/// columns are at least `1 / n_samples`, so this is the reciprocal of
/// `max(p_hat, 1/N)` with the entries outside `E` zeroed.
pub fn masked_hadamard_inverse(
    p_hat: &SymmetricMatrix,
    n_samples: usize,
) -> Result<(SymmetricMatrix, ObservedPairSet)> {
    if n_samples == 0 {
        return Err(Error::InvalidInput("N must be at least 1".into()));
    }
    let n = p_hat.dim();
    for j in 0..n {
        for i in 0..=j {
            let v = p_hat.get(i, j);
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidInput(format!(
                    "empirical probability ({i}, {j}) = {v} outside [0, 1]"
                )));
            }
        }
    }
    let support = ObservedPairSet::from_fn(n, |i, j| p_hat.get(i, j) != 0.0);
    let gamma = SymmetricMatrix::from_fn(n, |i, j| {
        let v = p_hat.get(i, j);
        if v != 0.0 {
            1.0 / v
        } else {
            0.0
        }
    })?;
    Ok((gamma, support))
}

/// Orthonormalizes the columns of `m` left to right (modified Gram-Schmidt
/// with one re-orthogonalization pass).
pub fn gram_schmidt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    const PIVOT_TOL: f64 = 1e-12;
    let (rows, cols) = m.shape();
    if cols > rows {
        return Err(Error::DegenerateInput(format!(
            "{cols} columns cannot be orthonormal in dimension {rows}"
        )));
    }
    let mut q = m.clone();
    for j in 0..cols {
        let mut v = q.column(j).clone_owned();
        for _pass in 0..2 {
            for k in 0..j {
                let qk = q.column(k);
                let proj = qk.dot(&v);
                v.axpy(-proj, &qk, 1.0);
            }
        }
        let norm = v.norm();
        if !(norm > PIVOT_TOL) {
            return Err(Error::DegenerateInput(format!(
                "column {j} is numerically dependent on earlier columns (pivot norm {norm:e})"
            )));
        }
        v /= norm;
        q.set_column(j, &v);
    }
    Ok(q)
}

fn check_shape(m: &DMatrix<f64>) -> Result<()> {
    let (r, c) = m.shape();
    if r != c {
        return Err(Error::dims("square matrix", format!("{r}x{c}")));
    }
    if r == 0 || r > MAX_DIM {
        return Err(Error::InvalidInput(format!(
            "dimension {r} outside 1..={MAX_DIM}"
        )));
    }
    Ok(())
}

fn check_finite(m: &DMatrix<f64>) -> Result<()> {
    if let Some(k) = m.iter().position(|v| !v.is_finite()) {
        let n = m.nrows();
        return Err(Error::InvalidInput(format!(
            "non-finite entry at ({}, {})",
            k % n,
            k / n
        )));
    }
    Ok(())
}

fn same_dim(a: &SymmetricMatrix, b: &SymmetricMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::dims(a.dim(), b.dim()));
    }
    Ok(())
}
