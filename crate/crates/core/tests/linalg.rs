mod common;

use common::*;
use mvsc_core::linalg::{center_columns, exact_svd_small, randomized_svd, truncated_svd, SvdMethod, SvdSettings};
use mvsc_core::DenseMatrix;

fn orthonormal(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    let g = gaussian(rows, cols, &mut rng(seed));
    let qr = g.to_nalgebra().qr();
    DenseMatrix::from_nalgebra(&qr.q())
}

/// `Q1 diag(s) Q2ᵀ` with random orthonormal factors.
fn with_spectrum(rows: usize, cols: usize, s: &[f64], seed: u64) -> DenseMatrix {
    let mut u = orthonormal(rows, s.len(), seed);
    let v = orthonormal(cols, s.len(), seed + 1000);
    for i in 0..rows {
        for (x, sv) in u.row_mut(i).iter_mut().zip(s) {
            *x *= sv;
        }
    }
    u.matmul_t(&v).unwrap()
}

fn gram_error(u: &DenseMatrix) -> f64 {
    max_abs_diff(&u.t_matmul(u).unwrap(), &DenseMatrix::identity(u.cols()))
}

#[test]
fn center_columns_examples() {
    let c = center_columns(&DenseMatrix::from_rows(&[[1.0], [3.0]]));
    assert_eq!(c, DenseMatrix::from_rows(&[[-1.0], [1.0]]));
    let x = gaussian(50, 7, &mut rng(1));
    let c = center_columns(&x);
    let scale = x.max_abs();
    for s in c.col_sums() {
        assert!(s.abs() < 1e-9 * scale, "{s}");
    }
    let again = center_columns(&c);
    assert!(max_abs_diff(&again, &c) < 1e-12);
}

#[test]
fn randomized_diag_example() {
    let x = DenseMatrix::from_rows(&[[3.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 1.0]]);
    let svd = randomized_svd(&x, 2, 10, 4, 0).unwrap();
    assert!((svd.singular_values[0] - 3.0).abs() < 1e-10);
    assert!((svd.singular_values[1] - 2.0).abs() < 1e-10);
}

#[test]
fn randomized_recovers_exact_rank() {
    let mut r = rng(2);
    let x = gaussian(50, 5, &mut r).matmul(&gaussian(5, 40, &mut r)).unwrap();
    let svd = randomized_svd(&x, 5, 10, 4, 7).unwrap();
    let err = max_abs_diff(&svd.reconstruct(), &x);
    assert!(err < 1e-8, "{err}");
    assert!(gram_error(&svd.left) < 1e-8);
    assert!(gram_error(&svd.right) < 1e-8);
}

#[test]
fn randomized_error_within_five_percent_of_optimal() {
    let s: Vec<f64> = (1..=80).map(|i| (i as f64).powi(-2)).collect();
    let x = with_spectrum(200, 80, &s, 3);
    // dense oracle: optimal rank-10 error
    let full = x.to_nalgebra().svd(false, false).singular_values;
    let optimal: f64 = full.iter().skip(10).map(|v| v * v).sum::<f64>().sqrt();
    let svd = randomized_svd(&x, 10, 10, 4, 11).unwrap();
    let mut resid = x.clone();
    for (o, r) in resid.as_mut_slice().iter_mut().zip(svd.reconstruct().as_slice()) {
        *o -= r;
    }
    let err = resid.frobenius_norm();
    assert!(err <= 1.05 * optimal, "{err} vs optimal {optimal}");
}

#[test]
fn singular_triplets_are_consistent() {
    let s: Vec<f64> = (1..=30).map(|i| (i as f64).powi(-2)).collect();
    let x = with_spectrum(120, 30, &s, 5);
    let svd = randomized_svd(&x, 6, 10, 4, 1).unwrap();
    let xt_u = x.t_matmul(&svd.left).unwrap();
    let s1 = svd.singular_values[0];
    for i in 0..6 {
        let dev: f64 = (0..30)
            .map(|r| (xt_u.get(r, i) - svd.singular_values[i] * svd.right.get(r, i)).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(dev <= 1e-6 * s1, "component {i}: {dev}");
    }
    assert!(svd.singular_values.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn seeded_runs_are_reproducible() {
    let x = gaussian(300, 40, &mut rng(9));
    let a = randomized_svd(&x, 8, 10, 4, 42).unwrap();
    let b = randomized_svd(&x, 8, 10, 4, 42).unwrap();
    assert!(max_abs_diff(&a.left, &b.left) <= 1e-12);
    assert_eq!(a.singular_values, b.singular_values);
}

#[test]
fn thread_count_does_not_change_results() {
    let x = gaussian(3000, 30, &mut rng(4));
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| randomized_svd(&x, 5, 10, 4, 3).unwrap())
    };
    let one = run(1);
    let many = run(4);
    assert!(max_abs_diff(&one.left, &many.left) <= 1e-12);
}

#[test]
fn exact_examples() {
    let id = exact_svd_small(&DenseMatrix::identity(3)).unwrap();
    assert_eq!(id.singular_values, vec![1.0, 1.0, 1.0]);
    let z = exact_svd_small(&DenseMatrix::zeros(2, 2)).unwrap();
    assert_eq!(z.singular_values, vec![0.0, 0.0]);
    let x = gaussian(30, 20, &mut rng(6));
    let svd = exact_svd_small(&x).unwrap();
    assert!(max_abs_diff(&svd.reconstruct(), &x) < 1e-10);
    assert!(gram_error(&svd.left) < 1e-8);
    let tall = gaussian(500, 12, &mut rng(7));
    let svd = exact_svd_small(&tall).unwrap();
    assert!(max_abs_diff(&svd.reconstruct(), &tall) < 1e-10);
}

#[test]
fn exact_guard() {
    assert!(exact_svd_small(&DenseMatrix::zeros(2049, 2049)).is_err());
    let thin = DenseMatrix::zeros(3000, 2);
    assert!(exact_svd_small(&thin).is_ok());
}

#[test]
fn rank_beyond_dimensions_is_rejected() {
    let x = DenseMatrix::zeros(5, 3);
    assert!(randomized_svd(&x, 4, 10, 4, 0).is_err());
    assert!(randomized_svd(&x, 0, 10, 4, 0).is_err());
    let exact = SvdSettings {
        method: SvdMethod::Exact,
        ..SvdSettings::default()
    };
    assert!(truncated_svd(&x, 4, &exact, 0).is_err());
}

#[test]
fn sign_convention() {
    let x = gaussian(40, 10, &mut rng(8));
    let svd = truncated_svd(&x, 4, &SvdSettings::default(), 0).unwrap();
    for j in 0..4 {
        let col = svd.left.column(j);
        let top = col.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap();
        assert!(top > 0.0);
    }
}

#[test]
fn left_vectors_span_top_eigenspace() {
    // SVD of B versus eigendecomposition of B Bᵀ
    for seed in 0..10 {
        let b = gaussian(100, 10, &mut rng(100 + seed));
        let (vals, vecs) = sym_eigen_desc(&gram(&b));
        let r = 4;
        assert!(vals[r - 1] - vals[r] > 1e-8);
        let svd = truncated_svd(&b, r, &SvdSettings::default(), seed).unwrap();
        let angle = max_principal_angle(&svd.left, &vecs.columns(0, r));
        assert!(angle < 1e-6, "seed {seed}: {angle}");
    }
}
