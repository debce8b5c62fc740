//! Explicit feature maps `Φ` with `Φ(u)·Φ(v) = k(u, v)`.
//!
//! The quadratic kernel `(uᵀv)²` has an exact map of dimension `f(f+1)/2`:
//! squares of the coordinates followed by `√2·u_j·u_l` for `j < l`. RBF and
//! sigmoid kernels are approximated with Nystroem: kernel values against a
//! uniformly sampled landmark set, whitened by the inverse square root of the
//! landmark kernel matrix.

use nalgebra::SymmetricEigen;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::spectral::FactorMatrix;

/// Relative eigenvalue floor applied when whitening a landmark kernel matrix.
pub const NYSTROEM_EIGEN_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    #[default]
    Quadratic,
    Rbf,
    Sigmoid,
}

impl std::str::FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quadratic" => Ok(Self::Quadratic),
            "rbf" => Ok(Self::Rbf),
            "sigmoid" => Ok(Self::Sigmoid),
            other => Err(Error::config(format!("unknown kernel `{other}`"))),
        }
    }
}

/// User-facing kernel settings; unset values take input-dependent defaults
/// when a map is fitted.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KernelSettings {
    pub kind: KernelKind,
    /// Nystroem landmark count. Defaults to `10 * k` in the pipeline.
    pub components: Option<usize>,
    /// RBF width, or sigmoid slope. Defaults to `1 / f`.
    pub gamma: Option<f64>,
    /// Sigmoid intercept.
    pub coef0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    pub gamma: f64,
    pub coef0: f64,
}

impl KernelParams {
    pub fn scale_free(input_dim: usize) -> Self {
        Self {
            gamma: 1.0 / input_dim.max(1) as f64,
            coef0: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelMap {
    kind: KernelKind,
    input_dim: usize,
    output_dim: usize,
    params: KernelParams,
    landmarks: Option<DenseMatrix>,
    whitening: Option<DenseMatrix>,
    seed: u64,
}

fn kernel_value(kind: KernelKind, p: KernelParams, a: &[f64], b: &[f64]) -> f64 {
    match kind {
        KernelKind::Quadratic => {
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            dot * dot
        }
        KernelKind::Rbf => {
            let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
            (-p.gamma * sq).exp()
        }
        KernelKind::Sigmoid => {
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            (p.gamma * dot + p.coef0).tanh()
        }
    }
}

/// `k(a_i, b_j)` for all row pairs.
pub fn kernel_matrix(kind: KernelKind, params: KernelParams, a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    use rayon::prelude::*;
    let mut out = DenseMatrix::zeros(a.rows(), b.rows());
    if b.rows() == 0 {
        return out;
    }
    out.as_mut_slice()
        .par_chunks_mut(b.rows())
        .enumerate()
        .for_each(|(i, row)| {
            for (j, o) in row.iter_mut().enumerate() {
                *o = kernel_value(kind, params, a.row(i), b.row(j));
            }
        });
    out
}

impl KernelMap {
    pub fn fit(kind: KernelKind, u: &DenseMatrix, components: usize, params: KernelParams, seed: u64) -> Result<Self> {
        let f = u.cols();
        match kind {
            KernelKind::Quadratic => Ok(Self {
                kind,
                input_dim: f,
                output_dim: f * (f + 1) / 2,
                params,
                landmarks: None,
                whitening: None,
                seed,
            }),
            KernelKind::Rbf | KernelKind::Sigmoid => {
                let n = u.rows();
                if components == 0 || components > n {
                    return Err(Error::config(format!(
                        "Nystroem needs 1..={n} components, got {components}"
                    )));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut picks = rand::seq::index::sample(&mut rng, n, components).into_vec();
                picks.sort_unstable();
                let landmarks = DenseMatrix::from_fn(components, f, |i, j| u[(picks[i], j)]);
                let kmm = kernel_matrix(kind, params, &landmarks, &landmarks);
                let whitening = inverse_sqrt_psd(&kmm)?;
                Ok(Self {
                    kind,
                    input_dim: f,
                    output_dim: components,
                    params,
                    landmarks: Some(landmarks),
                    whitening: Some(whitening),
                    seed,
                })
            }
        }
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn params(&self) -> KernelParams {
        self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn is_exact(&self) -> bool {
        self.kind == KernelKind::Quadratic
    }

    pub fn landmarks(&self) -> Option<&DenseMatrix> {
        self.landmarks.as_ref()
    }

    /// The kernel this map realizes (or approximates), evaluated directly.
    pub fn kernel(&self, a: &[f64], b: &[f64]) -> f64 {
        kernel_value(self.kind, self.params, a, b)
    }

    /// Row `i` of the result is `Φ(u_i)`.
    pub fn apply(&self, u: &DenseMatrix) -> Result<FactorMatrix> {
        if u.cols() != self.input_dim {
            return Err(Error::dim(format!(
                "kernel map fitted on {} columns applied to {}",
                self.input_dim,
                u.cols()
            )));
        }
        let values = match (&self.landmarks, &self.whitening) {
            (Some(l), Some(w)) => kernel_matrix(self.kind, self.params, u, l).matmul(w)?,
            _ => quadratic_features(u),
        };
        if !values.is_finite() {
            return Err(Error::numeric("kernel feature map produced non-finite values"));
        }
        Ok(FactorMatrix::new(values))
    }
}

/// Spec-named entry point for [`KernelMap::fit`].
pub fn fit_kernel_map(kind: KernelKind, u: &DenseMatrix, components: usize, params: KernelParams, seed: u64) -> Result<KernelMap> {
    KernelMap::fit(kind, u, components, params, seed)
}

fn quadratic_features(u: &DenseMatrix) -> DenseMatrix {
    let f = u.cols();
    let m = f * (f + 1) / 2;
    let mut out = DenseMatrix::zeros(u.rows(), m);
    for i in 0..u.rows() {
        let x = u.row(i);
        let row = out.row_mut(i);
        for j in 0..f {
            row[j] = x[j] * x[j];
        }
        let mut k = f;
        for j in 0..f {
            for l in j + 1..f {
                row[k] = std::f64::consts::SQRT_2 * x[j] * x[l];
                k += 1;
            }
        }
    }
    out
}

/// `V diag(|λ|^{-1/2}) Vᵀ` with `|λ|` floored at `NYSTROEM_EIGEN_FLOOR * max|λ|`.
///
/// Using magnitudes keeps indefinite (sigmoid) landmark matrices usable; for a
/// positive semidefinite matrix this is the usual floored inverse square root.
fn inverse_sqrt_psd(k: &DenseMatrix) -> Result<DenseMatrix> {
    let eig = SymmetricEigen::new(k.to_nalgebra());
    let top = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(top.is_finite() && top > 0.0) {
        return Err(Error::numeric("landmark kernel matrix is zero or non-finite"));
    }
    let floor = NYSTROEM_EIGEN_FLOOR * top;
    let m = k.rows();
    let scale: Vec<f64> = eig.eigenvalues.iter().map(|l| l.abs().max(floor).powf(-0.5)).collect();
    let v = &eig.eigenvectors;
    Ok(DenseMatrix::from_fn(m, m, |i, j| {
        (0..m).map(|c| v[(i, c)] * scale[c] * v[(j, c)]).sum()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn gaussian(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn quadratic_dimensions_and_layout() {
        let u = DenseMatrix::from_rows(&[[1.0, 0.0, 0.0]]);
        let map = KernelMap::fit(KernelKind::Quadratic, &u, 0, KernelParams::scale_free(3), 0).unwrap();
        assert_eq!(map.output_dim(), 6);
        let u = DenseMatrix::from_rows(&[[1.0, 0.0]]);
        let map = KernelMap::fit(KernelKind::Quadratic, &u, 0, KernelParams::scale_free(2), 0).unwrap();
        assert_eq!(map.apply(&u).unwrap().values().row(0), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn quadratic_kernel_value() {
        let u = DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]);
        let map = KernelMap::fit(KernelKind::Quadratic, &u, 0, KernelParams::scale_free(2), 0).unwrap();
        let phi = map.apply(&u).unwrap();
        let k = dot(phi.values().row(0), phi.values().row(1));
        // (1*3 + 2*4)^2
        assert!((k - 121.0).abs() < 1e-12);
    }

    #[test]
    fn rbf_with_all_landmarks_is_exact() {
        let u = gaussian(120, 4, 1);
        let params = KernelParams::scale_free(4);
        let map = KernelMap::fit(KernelKind::Rbf, &u, 120, params, 3).unwrap();
        let phi = map.apply(&u).unwrap();
        let gram = phi.values().matmul_t(phi.values()).unwrap();
        let exact = kernel_matrix(KernelKind::Rbf, params, &u, &u);
        let mut worst = 0.0f64;
        for (a, b) in gram.as_slice().iter().zip(exact.as_slice()) {
            worst = worst.max((a - b).abs());
        }
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn nystroem_landmarks_are_seeded() {
        let u = gaussian(500, 3, 2);
        let params = KernelParams::scale_free(3);
        let a = KernelMap::fit(KernelKind::Sigmoid, &u, 50, params, 9).unwrap();
        let b = KernelMap::fit(KernelKind::Sigmoid, &u, 50, params, 9).unwrap();
        assert_eq!(a.landmarks(), b.landmarks());
        assert_eq!(a.output_dim(), 50);
        let c = KernelMap::fit(KernelKind::Sigmoid, &u, 50, params, 10).unwrap();
        assert_ne!(a.landmarks(), c.landmarks());
    }

    #[test]
    fn nystroem_rejects_too_many_components() {
        let u = gaussian(10, 2, 0);
        assert!(KernelMap::fit(KernelKind::Rbf, &u, 11, KernelParams::scale_free(2), 0).is_err());
    }

    #[test]
    fn apply_checks_dimension() {
        let u = gaussian(10, 2, 0);
        let map = KernelMap::fit(KernelKind::Quadratic, &u, 0, KernelParams::scale_free(2), 0).unwrap();
        assert!(matches!(map.apply(&gaussian(10, 3, 0)), Err(Error::Dimension(_))));
    }
}
