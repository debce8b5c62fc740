#![allow(dead_code)]

use mvsc_core::DenseMatrix;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn uniform(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.random::<f64>())
}

pub fn max_abs_diff(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Eigenpairs of a symmetric matrix, eigenvalues descending.
pub fn sym_eigen_desc(a: &DenseMatrix) -> (Vec<f64>, DenseMatrix) {
    let eig = SymmetricEigen::new(a.to_nalgebra());
    let mut order: Vec<usize> = (0..a.rows()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(a.rows(), a.rows(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, DenseMatrix::from_nalgebra(&vectors))
}

/// Largest principal angle (radians) between the column spans of two
/// matrices with orthonormal columns.
pub fn max_principal_angle(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    let m = a.t_matmul(b).unwrap().to_nalgebra();
    let s = m.singular_values();
    let smallest = s.iter().copied().fold(f64::INFINITY, f64::min).min(1.0);
    // acos is ill-conditioned near 1; use the sine form
    (1.0 - smallest * smallest).max(0.0).sqrt().asin()
}

/// `B Bᵀ` formed densely.
pub fn gram(b: &DenseMatrix) -> DenseMatrix {
    b.matmul_t(b).unwrap()
}
