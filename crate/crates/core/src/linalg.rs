//! Dense linear-algebra kernels for small real matrices.
//!
//! Singular value decomposition and the real Schur form are delegated to
//! nalgebra. Eigenvectors of general (non-symmetric) matrices are recovered
//! from the null space of `A - λI`, computed with a complex SVD, so that
//! conjugate eigenvalues always receive conjugate eigenvectors.

use std::fmt;

use nalgebra::{Complex, DMatrix, DVector, SVD};
use thiserror::Error;

pub type Complex64 = Complex<f64>;
pub type ComplexMatrix = DMatrix<Complex64>;

const MAX_SVD_ITERATIONS: usize = 0; // 0 = iterate until convergence
const MAX_SCHUR_ITERATIONS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix must have at least one row and one column (got {rows}x{cols})")]
    EmptyMatrix { rows: usize, cols: usize },
    #[error("expected {expected} entries for a {rows}x{cols} matrix, got {got}")]
    EntryCount {
        rows: usize,
        cols: usize,
        expected: usize,
        got: usize,
    },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("matrix must be square (got {rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("shape mismatch: {left:?} * {right:?}")]
    ShapeMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("invalid singular values: {0}")]
    InvalidSpectrum(String),
    #[error("{0} did not converge")]
    NoConvergence(&'static str),
}

/// A finite, non-empty, dense real matrix.
#[derive(Clone, PartialEq)]
pub struct RealMatrix {
    data: DMatrix<f64>,
}

impl fmt::Debug for RealMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RealMatrix{:?}", self.data)
    }
}

impl RealMatrix {
    pub fn from_row_major(rows: usize, cols: usize, entries: &[f64]) -> Result<Self, LinalgError> {
        if rows == 0 || cols == 0 {
            return Err(LinalgError::EmptyMatrix { rows, cols });
        }
        if entries.len() != rows * cols {
            return Err(LinalgError::EntryCount {
                rows,
                cols,
                expected: rows * cols,
                got: entries.len(),
            });
        }
        Self::from_dmatrix(DMatrix::from_row_slice(rows, cols, entries))
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let cols = columns.len();
        let rows = columns.first().map_or(0, Vec::len);
        if rows == 0 || cols == 0 {
            return Err(LinalgError::EmptyMatrix { rows, cols });
        }
        if let Some(bad) = columns.iter().find(|c| c.len() != rows) {
            return Err(LinalgError::EntryCount {
                rows,
                cols,
                expected: rows * cols,
                got: rows * (cols - 1) + bad.len(),
            });
        }
        Self::from_dmatrix(DMatrix::from_fn(rows, cols, |i, j| columns[j][i]))
    }

    pub fn from_dmatrix(data: DMatrix<f64>) -> Result<Self, LinalgError> {
        let (rows, cols) = data.shape();
        if rows == 0 || cols == 0 {
            return Err(LinalgError::EmptyMatrix { rows, cols });
        }
        for j in 0..cols {
            for i in 0..rows {
                if !data[(i, j)].is_finite() {
                    return Err(LinalgError::NonFinite { row: i, col: j });
                }
            }
        }
        Ok(Self { data })
    }

    pub fn identity(n: usize) -> Self {
        assert!(n > 0, "identity of size 0");
        Self {
            data: DMatrix::identity(n, n),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self, LinalgError> {
        let n = diag.len();
        Self::from_dmatrix(DMatrix::from_fn(
            n,
            n,
            |i, j| if i == j { diag[i] } else { 0.0 },
        ))
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.data.shape()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[(row, col)]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        self.data.column(col).iter().copied().collect()
    }

    /// Entries in row-major order.
    pub fn to_row_major(&self) -> Vec<f64> {
        self.data.transpose().as_slice().to_vec()
    }

    pub fn as_dmatrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_dmatrix(self) -> DMatrix<f64> {
        self.data
    }

    pub fn transpose(&self) -> Self {
        Self {
            data: self.data.transpose(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.norm()
    }

    /// Contiguous block of columns `start..end`.
    pub fn columns_range(&self, start: usize, end: usize) -> Result<Self, LinalgError> {
        if start >= end || end > self.cols() {
            return Err(LinalgError::EmptyMatrix {
                rows: self.rows(),
                cols: end.saturating_sub(start),
            });
        }
        Ok(Self {
            data: self.data.columns(start, end - start).into_owned(),
        })
    }

    pub fn matmul(&self, rhs: &RealMatrix) -> Result<RealMatrix, LinalgError> {
        if self.cols() != rhs.rows() {
            return Err(LinalgError::ShapeMismatch {
                left: self.shape(),
                right: rhs.shape(),
            });
        }
        Ok(Self {
            data: &self.data * &rhs.data,
        })
    }

    /// Largest absolute entry of `self - other`.
    pub fn max_abs_diff(&self, other: &RealMatrix) -> f64 {
        assert_eq!(self.shape(), other.shape());
        (&self.data - &other.data).amax()
    }
}

/// Thin SVD `M = U diag(sigma) Vᵀ` with `k = min(rows, cols)` components.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub u: RealMatrix,
    pub sigma: Vec<f64>,
    pub v: RealMatrix,
}

impl SvdFactors {
    pub fn reconstruct(&self) -> RealMatrix {
        let mut us = self.u.data.clone();
        for (j, s) in self.sigma.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        RealMatrix {
            data: us * self.v.data.transpose(),
        }
    }
}

pub fn svd(m: &RealMatrix) -> Result<SvdFactors, LinalgError> {
    let decomposition = SVD::try_new(m.data.clone(), true, true, f64::EPSILON, MAX_SVD_ITERATIONS)
        .ok_or(LinalgError::NoConvergence("SVD"))?;
    let u = decomposition.u.ok_or(LinalgError::NoConvergence("SVD"))?;
    let v_t = decomposition.v_t.ok_or(LinalgError::NoConvergence("SVD"))?;
    let sigma: Vec<f64> = decomposition
        .singular_values
        .iter()
        .map(|s| s.max(0.0))
        .collect();

    // nalgebra sorts already, but keep the ordering guarantee local.
    let mut order: Vec<usize> = (0..sigma.len()).collect();
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]));
    let k = sigma.len();
    let u = DMatrix::from_fn(m.rows(), k, |i, j| u[(i, order[j])]);
    let v = DMatrix::from_fn(m.cols(), k, |i, j| v_t[(order[j], i)]);
    let sigma = order.iter().map(|&i| sigma[i]).collect();

    Ok(SvdFactors {
        u: RealMatrix { data: u },
        sigma,
        v: RealMatrix { data: v },
    })
}

/// Aspect-ratio coefficient of the unknown-noise optimal hard threshold.
pub fn hard_threshold_coefficient(beta: f64) -> f64 {
    0.56 * beta.powi(3) - 0.95 * beta.powi(2) + 1.82 * beta + 1.43
}

/// Median with the even-length convention of averaging the two middle values.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    Some(if sorted.len().is_multiple_of(2) {
        0.5 * (sorted[mid - 1] + sorted[mid])
    } else {
        sorted[mid]
    })
}

/// Rank selected by the optimal hard threshold for a `rows x cols` matrix
/// with unknown noise level: the number of singular values strictly above
/// `ω(β)·median(sigma)`, floored at 1.
pub fn optimal_rank(sigma: &[f64], rows: usize, cols: usize) -> Result<usize, LinalgError> {
    if sigma.is_empty() {
        return Err(LinalgError::InvalidSpectrum("empty".into()));
    }
    if rows == 0 || cols == 0 {
        return Err(LinalgError::EmptyMatrix { rows, cols });
    }
    if sigma.len() != rows.min(cols) {
        return Err(LinalgError::InvalidSpectrum(format!(
            "expected {} values for a {rows}x{cols} matrix, got {}",
            rows.min(cols),
            sigma.len()
        )));
    }
    if sigma.iter().any(|s| !s.is_finite() || *s < 0.0) {
        return Err(LinalgError::InvalidSpectrum(
            "negative or non-finite value".into(),
        ));
    }
    if sigma.windows(2).any(|w| w[1] > w[0]) {
        return Err(LinalgError::InvalidSpectrum(
            "not sorted non-increasing".into(),
        ));
    }
    let beta = rows.min(cols) as f64 / rows.max(cols) as f64;
    let tau = hard_threshold_coefficient(beta) * median(sigma).unwrap_or(0.0);
    let kept = sigma.iter().filter(|&&s| s > tau).count();
    Ok(kept.max(1))
}

/// Default cutoff below which singular values are treated as zero.
pub fn default_tolerance(rows: usize, cols: usize, largest_sigma: f64) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON * largest_sigma
}

/// Moore–Penrose pseudoinverse. `tol = None` selects [`default_tolerance`].
pub fn pinv(m: &RealMatrix, tol: Option<f64>) -> Result<RealMatrix, LinalgError> {
    let factors = svd(m)?;
    let tol = tol.unwrap_or_else(|| default_tolerance(m.rows(), m.cols(), factors.sigma[0]));
    let mut v_scaled = factors.v.data.clone();
    for (j, s) in factors.sigma.iter().enumerate() {
        let inv = if *s > tol { 1.0 / s } else { 0.0 };
        v_scaled.column_mut(j).scale_mut(inv);
    }
    Ok(RealMatrix {
        data: v_scaled * factors.u.data.transpose(),
    })
}

/// Pseudoinverse of a complex matrix with the same default cutoff as [`pinv`].
pub fn complex_pinv(m: &ComplexMatrix) -> Result<ComplexMatrix, LinalgError> {
    let (rows, cols) = m.shape();
    let decomposition = SVD::try_new(m.clone(), true, true, f64::EPSILON, MAX_SVD_ITERATIONS)
        .ok_or(LinalgError::NoConvergence("complex SVD"))?;
    let largest = decomposition
        .singular_values
        .iter()
        .copied()
        .fold(0.0, f64::max);
    let tol = default_tolerance(rows, cols, largest);
    decomposition
        .pseudo_inverse(tol)
        .map_err(|_| LinalgError::NoConvergence("complex SVD"))
}

/// Eigenvalues and unit-norm eigenvectors of a real square matrix.
#[derive(Debug, Clone)]
pub struct ComplexEigenSystem {
    pub eigenvalues: Vec<Complex64>,
    /// Column `i` pairs with `eigenvalues[i]`.
    pub eigenvectors: ComplexMatrix,
    /// `max_i ‖A v_i − λ_i v_i‖ / max(1, ‖A‖_F)`; large for defective input.
    pub residual: f64,
}

/// Eigendecomposition of a real square matrix.
///
/// Eigenvalues are ordered by decreasing modulus, then decreasing real part,
/// then decreasing imaginary part, so each conjugate pair is adjacent with
/// the positive imaginary part first.
pub fn eig(a: &RealMatrix) -> Result<ComplexEigenSystem, LinalgError> {
    let (rows, cols) = a.shape();
    if rows != cols {
        return Err(LinalgError::NotSquare { rows, cols });
    }
    let mut eigenvalues = schur_eigenvalues(&a.data)?;
    eigenvalues.sort_by(|x, y| {
        y.norm()
            .total_cmp(&x.norm())
            .then(y.re.total_cmp(&x.re))
            .then(y.im.total_cmp(&x.im))
    });

    let m = rows;
    let scale = a.frobenius_norm().max(1.0);
    let cluster_tol = 1e-8 * scale;
    let a_complex: ComplexMatrix = a.data.map(|x| Complex64::new(x, 0.0));
    let mut vectors: Vec<Option<DVector<Complex64>>> = vec![None; m];

    // Upper half-plane (and real axis) first; clusters share a null space.
    for i in 0..m {
        if vectors[i].is_some() || eigenvalues[i].im < 0.0 {
            continue;
        }
        let cluster: Vec<usize> = (i..m)
            .filter(|&j| {
                vectors[j].is_none()
                    && eigenvalues[j].im >= 0.0
                    && (eigenvalues[j] - eigenvalues[i]).norm() <= cluster_tol
            })
            .collect();
        let basis = null_vectors(&a_complex, eigenvalues[i], cluster.len())?;
        for (slot, v) in cluster.into_iter().zip(basis) {
            vectors[slot] = Some(v);
        }
    }
    // Lower half-plane: conjugate the partner's vector when one exists.
    let mut used_partner = vec![false; m];
    for i in 0..m {
        if vectors[i].is_some() {
            continue;
        }
        let target = eigenvalues[i].conj();
        let partner = (0..m).find(|&j| {
            !used_partner[j]
                && eigenvalues[j].im > 0.0
                && (eigenvalues[j] - target).norm() <= cluster_tol
        });
        vectors[i] = Some(match partner {
            Some(j) => {
                used_partner[j] = true;
                vectors[j].as_ref().map(|v| v.map(|z| z.conj())).unwrap()
            }
            None => null_vectors(&a_complex, eigenvalues[i], 1)?.remove(0),
        });
    }

    let eigenvectors =
        ComplexMatrix::from_fn(m, m, |r, c| vectors[c].as_ref().map(|v| v[r]).unwrap());
    let residual = (0..m)
        .map(|c| {
            let v = eigenvectors.column(c);
            (&a_complex * v - v * eigenvalues[c]).norm()
        })
        .fold(0.0, f64::max)
        / scale;

    Ok(ComplexEigenSystem {
        eigenvalues,
        eigenvectors,
        residual,
    })
}

/// Eigenvalues read off the quasi-triangular real Schur form.
fn schur_eigenvalues(a: &DMatrix<f64>) -> Result<Vec<Complex64>, LinalgError> {
    let m = a.nrows();
    if m == 1 {
        return Ok(vec![Complex64::new(a[(0, 0)], 0.0)]);
    }
    let schur = nalgebra::Schur::try_new(a.clone(), f64::EPSILON, MAX_SCHUR_ITERATIONS)
        .ok_or(LinalgError::NoConvergence("Schur decomposition"))?;
    let (_, t) = schur.unpack();
    let mut out = Vec::with_capacity(m);
    let mut k = 0;
    while k < m {
        if k + 1 < m && t[(k + 1, k)] != 0.0 {
            let (p, q, r, s) = (t[(k, k)], t[(k, k + 1)], t[(k + 1, k)], t[(k + 1, k + 1)]);
            let half_trace = 0.5 * (p + s);
            let half_diff = 0.5 * (p - s);
            let discriminant = half_diff * half_diff + q * r;
            if discriminant < 0.0 {
                let im = (-discriminant).sqrt();
                out.push(Complex64::new(half_trace, im));
                out.push(Complex64::new(half_trace, -im));
            } else {
                let root = discriminant.sqrt();
                out.push(Complex64::new(half_trace + root, 0.0));
                out.push(Complex64::new(half_trace - root, 0.0));
            }
            k += 2;
        } else {
            out.push(Complex64::new(t[(k, k)], 0.0));
            k += 1;
        }
    }
    Ok(out)
}

/// The `count` right singular vectors of `A − λI` with the smallest
/// singular values, each scaled to unit norm with a fixed phase.
fn null_vectors(
    a: &ComplexMatrix,
    lambda: Complex64,
    count: usize,
) -> Result<Vec<DVector<Complex64>>, LinalgError> {
    let m = a.nrows();
    let mut shifted = a.clone();
    for i in 0..m {
        shifted[(i, i)] -= lambda;
    }
    let decomposition = SVD::try_new(shifted, false, true, f64::EPSILON, MAX_SVD_ITERATIONS)
        .ok_or(LinalgError::NoConvergence("complex SVD"))?;
    let v_t = decomposition
        .v_t
        .ok_or(LinalgError::NoConvergence("complex SVD"))?;
    let sigma = &decomposition.singular_values;
    let mut order: Vec<usize> = (0..sigma.len()).collect();
    order.sort_by(|&x, &y| sigma[x].total_cmp(&sigma[y]));

    Ok(order
        .into_iter()
        .take(count)
        .map(|row| {
            let v = DVector::from_fn(m, |i, _| v_t[(row, i)].conj());
            normalize_phase(v)
        })
        .collect())
}

/// Unit norm, with the first largest-magnitude component real and positive.
pub(crate) fn normalize_phase(v: DVector<Complex64>) -> DVector<Complex64> {
    let norm = v.norm();
    if norm == 0.0 {
        return v;
    }
    let mut pivot = 0;
    for i in 1..v.len() {
        if v[i].norm() > v[pivot].norm() * (1.0 + 1e-12) {
            pivot = i;
        }
    }
    let phase = v[pivot] / v[pivot].norm();
    v.map(|z| z / phase / norm)
}
