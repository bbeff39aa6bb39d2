//! Test-only reference routines, independent of the library's numerics.
#![allow(dead_code)]

use embdyn::linalg::Complex64;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

pub fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    random_matrix(rng, n, n).qr().q()
}

/// Singular values by one-sided Jacobi rotations on the columns of `m`.
pub fn jacobi_singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let mut a = if m.nrows() >= m.ncols() {
        m.clone()
    } else {
        m.transpose()
    };
    let n = a.ncols();
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha: f64 = a.column(p).norm_squared();
                let beta: f64 = a.column(q).norm_squared();
                let gamma: f64 = a.column(p).dot(&a.column(q));
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..a.nrows() {
                    let (ap, aq) = (a[(i, p)], a[(i, q)]);
                    a[(i, p)] = c * ap - s * aq;
                    a[(i, q)] = s * ap + c * aq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sigma: Vec<f64> = (0..n).map(|j| a.column(j).norm()).collect();
    sigma.sort_by(|x, y| y.total_cmp(x));
    sigma
}

/// Pseudoinverse of a full-rank matrix via the normal equations.
pub fn normal_equations_pinv(x: &DMatrix<f64>) -> DMatrix<f64> {
    let xt = x.transpose();
    if x.nrows() >= x.ncols() {
        (&xt * x).try_inverse().expect("full column rank") * xt
    } else {
        let gram = x * &xt;
        &xt * gram.try_inverse().expect("full row rank")
    }
}

/// Largest distance in a greedy nearest-neighbour matching of two multisets.
pub fn multiset_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut used = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for x in a {
        let (j, d) = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, y)| (j, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .unwrap();
        used[j] = true;
        worst = worst.max(d);
    }
    worst
}

/// Distance between a multiset and its own complex conjugate.
pub fn conjugate_gap(values: &[Complex64]) -> f64 {
    let conj: Vec<Complex64> = values.iter().map(|z| z.conj()).collect();
    multiset_distance(values, &conj)
}

/// Columns `x_1, A x_1, A² x_1, ...` built from explicit matrix powers.
pub fn power_trajectory(a: &DMatrix<f64>, x1: &[f64], steps: usize) -> Vec<Vec<f64>> {
    let x1 = nalgebra::DVector::from_column_slice(x1);
    let mut power = DMatrix::identity(a.nrows(), a.ncols());
    (0..steps)
        .map(|_| {
            let col = &power * &x1;
            power = &power * a;
            col.iter().copied().collect()
        })
        .collect()
}

/// `0.9·R(π/4)`, whose eigenvalues are `0.9·e^{±iπ/4}`.
pub fn rotation_scaling() -> DMatrix<f64> {
    let (s, c) = std::f64::consts::FRAC_PI_4.sin_cos();
    DMatrix::from_row_slice(2, 2, &[0.9 * c, -0.9 * s, 0.9 * s, 0.9 * c])
}

pub fn fixture(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}
