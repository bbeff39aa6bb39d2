mod common;

use common::{jacobi_singular_values, random_matrix, rng};
use embdyn::linalg::{
    eig, hard_threshold_coefficient, median, optimal_rank, pinv, svd, RealMatrix,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn real(m: DMatrix<f64>) -> RealMatrix {
    RealMatrix::from_dmatrix(m).unwrap()
}

fn max_orthonormality_error(q: &RealMatrix) -> f64 {
    q.transpose()
        .matmul(q)
        .unwrap()
        .max_abs_diff(&RealMatrix::identity(q.cols()))
}

#[test]
fn svd_matches_jacobi_reference_on_seeded_matrix() {
    let m = random_matrix(&mut rng(11), 6, 4);
    let reference = jacobi_singular_values(&m);
    let m = real(m);
    let f = svd(&m).unwrap();
    for (a, b) in f.sigma.iter().zip(&reference) {
        assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
    }
    let residual = (f.reconstruct().as_dmatrix() - m.as_dmatrix()).norm();
    assert!(residual <= 1e-8 * m.frobenius_norm().max(1.0));
    assert!(max_orthonormality_error(&f.u) <= 1e-10);
    assert!(max_orthonormality_error(&f.v) <= 1e-10);
}

#[test]
fn pinv_left_inverse_of_full_column_rank() {
    let m = real(random_matrix(&mut rng(5), 5, 3));
    let p = pinv(&m, None).unwrap();
    let product = p.matmul(&m).unwrap();
    assert!(product.max_abs_diff(&RealMatrix::identity(3)) <= 1e-8);
}

#[test]
fn pinv_moore_penrose_conditions_rank_deficient() {
    // rank 2 in a 5x4 matrix
    let mut r = rng(9);
    let m = real(random_matrix(&mut r, 5, 2) * random_matrix(&mut r, 2, 4));
    let p = pinv(&m, None).unwrap();
    let (a, g) = (m.as_dmatrix(), p.as_dmatrix());
    let scale = a.norm().max(1.0);
    assert!((a * g * a - a).norm() <= 1e-8 * scale);
    assert!((g * a * g - g).norm() <= 1e-8 * g.norm().max(1.0));
    assert!(((a * g).transpose() - a * g).norm() <= 1e-8);
    assert!(((g * a).transpose() - g * a).norm() <= 1e-8);
}

#[test]
fn optimal_rank_two_signal_values_by_direct_evaluation() {
    let sigma = [10.0, 8.0, 1e-6, 1e-7];
    let beta: f64 = 4.0 / 20.0;
    let omega = 0.56 * beta.powi(3) - 0.95 * beta.powi(2) + 1.82 * beta + 1.43;
    let tau = omega * (8.0 + 1e-6) / 2.0;
    assert!((hard_threshold_coefficient(beta) - omega).abs() < 1e-15);
    assert_eq!(median(&sigma), Some((8.0 + 1e-6) / 2.0));
    assert!(8.0 > tau && tau > 1e-6);
    assert_eq!(optimal_rank(&sigma, 20, 4).unwrap(), 2);
    // β is symmetric in the shape.
    assert_eq!(optimal_rank(&sigma, 4, 20).unwrap(), 2);
}

fn matrix_strategy() -> impl Strategy<Value = DMatrix<f64>> {
    (1usize..7, 1usize..7).prop_flat_map(|(r, c)| {
        proptest::collection::vec(-10.0f64..10.0, r * c)
            .prop_map(move |v| DMatrix::from_row_slice(r, c, &v))
    })
}

fn square_strategy() -> impl Strategy<Value = DMatrix<f64>> {
    (1usize..7).prop_flat_map(|n| {
        proptest::collection::vec(-2.0f64..2.0, n * n)
            .prop_map(move |v| DMatrix::from_row_slice(n, n, &v))
    })
}

fn sorted_spectrum() -> impl Strategy<Value = (Vec<f64>, usize, usize)> {
    (1usize..12, 1usize..12).prop_flat_map(|(rows, cols)| {
        proptest::collection::vec(0.0f64..100.0, rows.min(cols)).prop_map(move |mut s| {
            s.sort_by(|a, b| b.total_cmp(a));
            (s, rows, cols)
        })
    })
}

proptest! {
    #[test]
    fn svd_round_trip(m in matrix_strategy()) {
        let m = real(m);
        let f = svd(&m).unwrap();
        let err = (f.reconstruct().as_dmatrix() - m.as_dmatrix()).norm();
        prop_assert!(err / m.frobenius_norm().max(1.0) <= 1e-8);
        prop_assert!(f.sigma.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(f.sigma.iter().all(|s| *s >= 0.0));
        prop_assert!(max_orthonormality_error(&f.u) <= 1e-10);
        prop_assert!(max_orthonormality_error(&f.v) <= 1e-10);
    }

    #[test]
    fn optimal_rank_is_scale_invariant_and_bounded((sigma, rows, cols) in sorted_spectrum(), scale in 1e-3f64..1e3) {
        let r = optimal_rank(&sigma, rows, cols).unwrap();
        prop_assert!(r >= 1 && r <= sigma.len());
        let scaled: Vec<f64> = sigma.iter().map(|s| s * scale).collect();
        let tau = hard_threshold_coefficient(rows.min(cols) as f64 / rows.max(cols) as f64)
            * median(&sigma).unwrap();
        // Skip draws where rounding could move a value across the threshold.
        prop_assume!(sigma.iter().all(|s| (s - tau).abs() > 1e-9 * tau.max(1.0)));
        prop_assert_eq!(optimal_rank(&scaled, rows, cols).unwrap(), r);
    }

    #[test]
    fn eigenvalues_of_transpose_agree(a in square_strategy()) {
        let a = real(a);
        let e = eig(&a).unwrap();
        let et = eig(&a.transpose()).unwrap();
        let gap = common::multiset_distance(&e.eigenvalues, &et.eigenvalues);
        prop_assert!(gap <= 1e-8 * a.frobenius_norm().max(1.0), "gap {}", gap);
        prop_assert!(common::conjugate_gap(&e.eigenvalues) <= 1e-8);
    }

    #[test]
    fn eigenpairs_satisfy_residual_bound(a in square_strategy()) {
        let a = real(a);
        let e = eig(&a).unwrap();
        for j in 0..a.rows() {
            prop_assert!((e.eigenvectors.column(j).norm() - 1.0).abs() < 1e-12);
        }
        // Random dense matrices are diagonalizable with probability one.
        prop_assert!(e.residual <= 1e-8, "residual {}", e.residual);
    }

    #[test]
    fn pinv_of_pinv_recovers_full_rank(m in matrix_strategy()) {
        let m = real(m);
        let f = svd(&m).unwrap();
        prop_assume!(f.sigma[f.sigma.len() - 1] > 1e-3 * f.sigma[0]);
        let back = pinv(&pinv(&m, None).unwrap(), None).unwrap();
        prop_assert!(back.max_abs_diff(&m) <= 1e-8 * m.frobenius_norm().max(1.0));
    }
}
