//! Degree normalization and spectral embedding of an implicit affinity
//! `W = B Bᵀ`, working only with the `n x m` factor `B`.
//!
//! Degrees are `B (Bᵀ 1)`, and the leading eigenvectors of `D^{-1/2} W D^{-1/2}`
//! are the leading left singular vectors of `D^{-1/2} B`, so no `n x n` matrix
//! is ever formed.

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::linalg::{truncated_svd, SvdSettings};

/// Relative floor applied to degrees before inverting them.
pub const DEGREE_FLOOR: f64 = 1e-12;

/// Dense factor `B` of an implicit affinity `B Bᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorMatrix {
    values: DenseMatrix,
    degree_normalized: bool,
}

impl FactorMatrix {
    pub fn new(values: DenseMatrix) -> Self {
        Self {
            values,
            degree_normalized: false,
        }
    }

    pub fn values(&self) -> &DenseMatrix {
        &self.values
    }

    pub fn into_values(self) -> DenseMatrix {
        self.values
    }

    pub fn n(&self) -> usize {
        self.values.rows()
    }

    pub fn m(&self) -> usize {
        self.values.cols()
    }

    pub fn is_degree_normalized(&self) -> bool {
        self.degree_normalized
    }
}

/// Row sums of `B Bᵀ`, floored to stay strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct Degrees {
    pub values: Vec<f64>,
    /// Entries that were `<= 0` before flooring. Nonzero only for
    /// indefinite kernels or rows with no affinity at all.
    pub nonpositive: usize,
}

pub fn implicit_degrees(b: &FactorMatrix) -> Result<Degrees> {
    if b.degree_normalized {
        return Err(Error::config("degrees requested for an already normalized factor"));
    }
    let col_sums = b.values.col_sums();
    let mut values = b.values.mul_vec(&col_sums);
    let nonpositive = values.iter().filter(|&&d| !(d > 0.0)).count();
    if nonpositive > 0 {
        log::warn!("{nonpositive} nonpositive degrees floored");
    }
    let top = values.iter().copied().fold(0.0f64, f64::max);
    let floor = if top > 0.0 { DEGREE_FLOOR * top } else { f64::MIN_POSITIVE };
    for d in &mut values {
        if !(*d >= floor) {
            *d = floor;
        }
    }
    Ok(Degrees { values, nonpositive })
}

/// Scales row `i` by `d_i^{-1/2}`.
pub fn degree_normalize(b: FactorMatrix, degrees: &[f64]) -> Result<FactorMatrix> {
    if degrees.len() != b.n() {
        return Err(Error::dim(format!("{} degrees for {} rows", degrees.len(), b.n())));
    }
    if let Some(i) = degrees.iter().position(|&d| !(d > 0.0 && d.is_finite())) {
        return Err(Error::numeric(format!("degree {} of row {i} is not positive", degrees[i])));
    }
    let factors: Vec<f64> = degrees.iter().map(|d| d.sqrt().recip()).collect();
    let mut values = b.values;
    values.scale_rows(&factors);
    Ok(FactorMatrix {
        values,
        degree_normalized: true,
    })
}

/// Degrees then normalization in one step.
pub fn normalize(b: FactorMatrix) -> Result<(FactorMatrix, Degrees)> {
    let d = implicit_degrees(&b)?;
    let b = degree_normalize(b, &d.values)?;
    Ok((b, d))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEmbedding {
    /// `n x r`, orthonormal columns, except that directions with a numerically
    /// zero singular value are zeroed.
    pub coords: DenseMatrix,
    pub dropped_first: bool,
    /// Singular values of every vector computed, including a dropped first one.
    pub singular_values: Vec<f64>,
}

/// Leading left singular vectors of a normalized factor. With `drop_first`,
/// `r + 1` vectors are computed and the first (the trivial, degree-aligned
/// direction) is discarded.
pub fn spectral_embedding(
    b: &FactorMatrix,
    r: usize,
    drop_first: bool,
    svd: &SvdSettings,
    seed: u64,
) -> Result<SpectralEmbedding> {
    if !b.degree_normalized {
        return Err(Error::config("spectral embedding needs a degree-normalized factor"));
    }
    let need = r + usize::from(drop_first);
    let limit = b.n().min(b.m());
    if r == 0 || need > limit {
        return Err(Error::dim(format!(
            "embedding needs {need} singular vectors but the {}x{} factor has at most {limit}; \
             the kernel map is too small for this many components",
            b.n(),
            b.m()
        )));
    }
    let svd = truncated_svd(&b.values, need, svd, seed)?;
    let start = usize::from(drop_first);
    Ok(SpectralEmbedding {
        coords: svd.left_informative().columns(start, need),
        dropped_first: drop_first,
        singular_values: svd.singular_values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthonormal_rows_have_unit_degrees() {
        let b = FactorMatrix::new(DenseMatrix::identity(2));
        assert_eq!(implicit_degrees(&b).unwrap().values, vec![1.0, 1.0]);
    }

    #[test]
    fn all_ones_degrees() {
        let b = FactorMatrix::new(DenseMatrix::from_fn(3, 2, |_, _| 1.0));
        assert_eq!(implicit_degrees(&b).unwrap().values, vec![6.0, 6.0, 6.0]);
    }

    #[test]
    fn normalize_single_row() {
        let b = FactorMatrix::new(DenseMatrix::from_rows(&[[2.0, 0.0]]));
        let nb = degree_normalize(b, &[4.0]).unwrap();
        assert_eq!(nb.values().row(0), &[1.0, 0.0]);
        assert!(nb.is_degree_normalized());
    }

    #[test]
    fn nonpositive_degrees_are_floored_and_counted() {
        // rows 0 and 1 cancel, row 2 is empty
        let b = FactorMatrix::new(DenseMatrix::from_rows(&[[1.0, 0.0], [-1.0, 0.0], [0.0, 0.0], [0.0, 2.0]]));
        let d = implicit_degrees(&b).unwrap();
        assert_eq!(d.nonpositive, 3);
        assert!(d.values.iter().all(|&v| v > 0.0));
        assert_eq!(d.values[3], 4.0);
        assert_eq!(d.values[0], 4.0 * DEGREE_FLOOR);
    }

    #[test]
    fn degree_normalize_rejects_bad_input() {
        let b = FactorMatrix::new(DenseMatrix::zeros(2, 2));
        assert!(degree_normalize(b.clone(), &[1.0]).is_err());
        assert!(degree_normalize(b, &[1.0, 0.0]).is_err());
    }

    #[test]
    fn one_pass_semantics() {
        let b = FactorMatrix::new(DenseMatrix::from_rows(&[[1.0, 2.0], [0.5, 0.1], [3.0, 0.2]]));
        let (nb, _) = normalize(b).unwrap();
        assert!(implicit_degrees(&nb).is_err());
        // renormalizing a fresh copy moves it: degrees of the normalized
        // affinity are not all one in general
        let again = implicit_degrees(&FactorMatrix::new(nb.values().clone())).unwrap();
        assert!(again.values.iter().any(|d| (d - 1.0).abs() > 1e-3));
    }

    #[test]
    fn embedding_requires_enough_columns() {
        let b = FactorMatrix::new(DenseMatrix::from_fn(10, 3, |i, j| ((i + 1) * (j + 2)) as f64 % 7.0 + 1.0));
        let (nb, _) = normalize(b).unwrap();
        assert!(spectral_embedding(&nb, 3, true, &SvdSettings::default(), 0).is_err());
        let e = spectral_embedding(&nb, 2, true, &SvdSettings::default(), 0).unwrap();
        assert_eq!(e.coords.shape(), (10, 2));
        assert_eq!(e.singular_values.len(), 3);
        assert!(spectral_embedding(&FactorMatrix::new(DenseMatrix::zeros(4, 4)), 1, true, &SvdSettings::default(), 0).is_err());
    }
}
