//! Exact dynamic mode decomposition over the sentence axis.
//!
//! A paragraph of `P` sentences embedded in `N` dimensions is an `N x P`
//! matrix whose columns are treated as successive states of a discrete
//! linear system `x_{p+1} = A x_p`. [`fit`] estimates the spectrum of `A`
//! from the shifted snapshot pair `(X, X′)`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{
    self, complex_pinv, default_tolerance, normalize_phase, Complex64, ComplexMatrix, LinalgError,
    RealMatrix,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DmdError {
    #[error("too few sentences: need at least 2, got {0}")]
    TooFewSentences(usize),
    #[error("degenerate input: snapshot matrix is identically zero")]
    Degenerate,
    #[error("fixed rank must be at least 1")]
    ZeroRank,
    #[error("dynamics need at least one step")]
    ZeroSteps,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Per-sentence embeddings of one paragraph; column `p` is sentence `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    matrix: RealMatrix,
}

impl EmbeddingMatrix {
    pub fn new(matrix: RealMatrix) -> Result<Self, DmdError> {
        if matrix.cols() < 2 {
            return Err(DmdError::TooFewSentences(matrix.cols()));
        }
        Ok(Self { matrix })
    }

    /// One embedding vector per sentence, in sentence order.
    pub fn from_sentence_vectors(vectors: &[Vec<f64>]) -> Result<Self, DmdError> {
        if vectors.len() < 2 {
            return Err(DmdError::TooFewSentences(vectors.len()));
        }
        Self::new(RealMatrix::from_columns(vectors)?)
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn sentences(&self) -> usize {
        self.matrix.cols()
    }

    pub fn matrix(&self) -> &RealMatrix {
        &self.matrix
    }

    pub fn sentence_vector(&self, p: usize) -> Vec<f64> {
        self.matrix.column(p)
    }
}

/// `X` holds sentences `1..P-1`, `X′` holds sentences `2..P`.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotPair {
    pub x: RealMatrix,
    pub x_prime: RealMatrix,
}

pub fn build_snapshots(embeddings: &EmbeddingMatrix) -> SnapshotPair {
    let p = embeddings.sentences();
    let m = embeddings.matrix();
    // P >= 2 is an EmbeddingMatrix invariant, so both ranges are non-empty.
    SnapshotPair {
        x: m.columns_range(0, p - 1).expect("P >= 2"),
        x_prime: m.columns_range(1, p).expect("P >= 2"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankPolicy {
    /// Optimal hard threshold on the spectrum of `X`.
    #[default]
    Optimal,
    /// Fixed truncation, clamped to the admissible range.
    Fixed(usize),
    /// Every singular value above the pseudoinverse cutoff.
    Full,
}

impl fmt::Display for RankPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RankPolicy::Optimal => f.write_str("optimal"),
            RankPolicy::Full => f.write_str("full"),
            RankPolicy::Fixed(r) => write!(f, "{r}"),
        }
    }
}

impl FromStr for RankPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "optimal" => Ok(RankPolicy::Optimal),
            "full" => Ok(RankPolicy::Full),
            other => match other.parse::<usize>() {
                Ok(0) => Err("fixed rank must be at least 1".to_string()),
                Ok(r) => Ok(RankPolicy::Fixed(r)),
                Err(_) => Err(format!(
                    "invalid rank policy '{s}' (expected optimal, full or a positive integer)"
                )),
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct DmdResult {
    pub rank: usize,
    pub eigenvalues: Vec<Complex64>,
    /// `N x r`, unit-norm columns.
    pub modes: ComplexMatrix,
    pub amplitudes: Vec<Complex64>,
    /// `‖X′ − A X‖_F / ‖X′‖_F` for the fitted operator.
    pub residual: f64,
    /// Full singular-value spectrum of `X`.
    pub sigma: Vec<f64>,
    /// `Ã = U_rᵀ X′ V_r Σ_r⁻¹`.
    pub reduced_operator: RealMatrix,
    /// Eigen-residual of `Ã`, see [`linalg::ComplexEigenSystem::residual`].
    pub eig_residual: f64,
}

/// Exact DMD of the best-fit operator mapping `X` onto `X′`.
pub fn fit(pair: &SnapshotPair, policy: RankPolicy) -> Result<DmdResult, DmdError> {
    let x = &pair.x;
    let x_prime = &pair.x_prime;
    let (n, m) = x.shape();

    let factors = linalg::svd(x)?;
    let sigma = factors.sigma.clone();
    if sigma[0] == 0.0 {
        return Err(DmdError::Degenerate);
    }
    let cutoff = default_tolerance(n, m, sigma[0]);
    let numerical_rank = sigma.iter().filter(|&&s| s > cutoff).count();
    let requested = match policy {
        RankPolicy::Optimal => linalg::optimal_rank(&sigma, n, m)?,
        RankPolicy::Full => numerical_rank,
        RankPolicy::Fixed(0) => return Err(DmdError::ZeroRank),
        RankPolicy::Fixed(r) => r,
    };
    // Directions below the cutoff would be amplified by Σ⁻¹; drop them.
    let rank = requested.clamp(1, n.min(m)).min(numerical_rank);

    let u_r = factors.u.as_dmatrix().columns(0, rank).into_owned();
    let v_r = factors.v.as_dmatrix().columns(0, rank).into_owned();
    let mut v_r_sigma_inv = v_r.clone();
    for (mut column, s) in v_r_sigma_inv.column_iter_mut().zip(&sigma) {
        column.scale_mut(1.0 / s);
    }
    // X′ V_r Σ_r⁻¹ is shared by the reduced operator, the modes and the residual.
    let lifted = x_prime.as_dmatrix() * &v_r_sigma_inv;
    let reduced = u_r.transpose() * &lifted;
    let reduced_operator = RealMatrix::from_dmatrix(reduced)?;

    let eigen = linalg::eig(&reduced_operator)?;
    let lifted_c = lifted.map(|v| Complex64::new(v, 0.0));
    let u_r_c = u_r.map(|v| Complex64::new(v, 0.0));
    let mut modes = &lifted_c * &eigen.eigenvectors;
    for j in 0..rank {
        let column = modes.column(j).into_owned();
        // λ = 0 annihilates the exact mode; fall back to the projected one.
        let column = if column.norm() <= 1e-12 * lifted.norm().max(1.0) {
            &u_r_c * eigen.eigenvectors.column(j)
        } else {
            column
        };
        modes.set_column(j, &normalize_phase(column));
    }

    let x1 = x.as_dmatrix().column(0).map(|v| Complex64::new(v, 0.0));
    let amplitudes = (complex_pinv(&modes)? * x1).iter().copied().collect();

    // A X = X′ V_r Σ_r⁻¹ U_rᵀ X
    let predicted = &lifted * (u_r.transpose() * x.as_dmatrix());
    let misfit: DMatrix<f64> = x_prime.as_dmatrix() - predicted;
    let denominator = x_prime.frobenius_norm();
    let residual = if denominator > 0.0 {
        misfit.norm() / denominator
    } else {
        0.0
    };

    Ok(DmdResult {
        rank,
        eigenvalues: eigen.eigenvalues,
        modes,
        amplitudes,
        residual,
        sigma,
        reduced_operator,
        eig_residual: eigen.residual,
    })
}

/// Convenience wrapper: snapshots then fit.
pub fn fit_embeddings(
    embeddings: &EmbeddingMatrix,
    policy: RankPolicy,
) -> Result<DmdResult, DmdError> {
    fit(&build_snapshots(embeddings), policy)
}

/// `|b_i| · |λ_i|^p` for each mode `i` and sentence index `p < steps`.
/// Row `i` is mode `i`.
pub fn mode_dynamics(result: &DmdResult, steps: usize) -> Result<Vec<Vec<f64>>, DmdError> {
    if steps == 0 {
        return Err(DmdError::ZeroSteps);
    }
    Ok(result
        .eigenvalues
        .iter()
        .zip(&result.amplitudes)
        .map(|(lambda, b)| geometric_envelope(b.norm(), lambda.norm(), steps))
        .collect())
}

fn geometric_envelope(amplitude: f64, modulus: f64, steps: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(steps);
    let mut value = amplitude;
    for _ in 0..steps {
        out.push(value);
        value *= modulus;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenKind {
    Real,
    Complex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CirclePosition {
    Inside,
    On,
    Outside,
}

impl CirclePosition {
    pub fn as_str(self) -> &'static str {
        match self {
            CirclePosition::Inside => "inside",
            CirclePosition::On => "on",
            CirclePosition::Outside => "outside",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EigenClass {
    pub kind: EigenKind,
    pub circle: CirclePosition,
}

pub const REAL_AXIS_TOLERANCE: f64 = 1e-8;
pub const UNIT_CIRCLE_TOLERANCE: f64 = 1e-9;

pub fn classify_eigenvalue(lambda: Complex64) -> EigenClass {
    let modulus = lambda.norm();
    let kind = if lambda.im.abs() <= REAL_AXIS_TOLERANCE * modulus.max(1.0) {
        EigenKind::Real
    } else {
        EigenKind::Complex
    };
    let circle = if (modulus - 1.0).abs() <= UNIT_CIRCLE_TOLERANCE {
        CirclePosition::On
    } else if modulus < 1.0 {
        CirclePosition::Inside
    } else {
        CirclePosition::Outside
    };
    EigenClass { kind, circle }
}
