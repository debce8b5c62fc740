//! Column centering and truncated singular value decompositions.
//!
//! The randomized SVD follows the range-finder scheme: sketch the column space
//! with a seeded Gaussian test matrix, sharpen it with a few orthonormalized
//! power iterations, then solve a small dense SVD in the sketched basis.
//! Dense factorizations of small blocks go through nalgebra.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};

/// Largest `min(rows, cols)` accepted by [`exact_svd_small`].
pub const EXACT_SVD_LIMIT: usize = 2048;

/// Under [`SvdMethod::Auto`], matrices whose smaller side is at most this are
/// decomposed exactly, unless the oversampled rank is under a quarter of it.
pub const AUTO_EXACT_LIMIT: usize = 256;

/// Singular values at or below this fraction of the largest are treated as
/// zero by [`TruncatedSvd::left_informative`].
pub const NULL_RTOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedSvd {
    /// `rows x r`, orthonormal columns.
    pub left: DenseMatrix,
    /// Nonincreasing, length `r`.
    pub singular_values: Vec<f64>,
    /// `cols x r`, orthonormal columns.
    pub right: DenseMatrix,
}

impl TruncatedSvd {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    /// `U diag(s) V^T`.
    pub fn reconstruct(&self) -> DenseMatrix {
        let mut us = self.left.clone();
        let r = self.rank();
        for i in 0..us.rows() {
            for (v, s) in us.row_mut(i).iter_mut().zip(&self.singular_values) {
                *v *= s;
            }
        }
        debug_assert_eq!(us.cols(), r);
        us.matmul_t(&self.right).expect("factor shapes agree")
    }

    /// Left vectors with numerically null directions zeroed. Vectors paired
    /// with a zero singular value are an arbitrary basis of the null space
    /// and carry nothing about the matrix.
    pub fn left_informative(&self) -> DenseMatrix {
        let top = self.singular_values.first().copied().unwrap_or(0.0);
        let keep: Vec<f64> = self
            .singular_values
            .iter()
            .map(|&s| if s > NULL_RTOL * top { 1.0 } else { 0.0 })
            .collect();
        let mut left = self.left.clone();
        if keep.iter().all(|&k| k == 1.0) {
            return left;
        }
        for i in 0..left.rows() {
            for (v, k) in left.row_mut(i).iter_mut().zip(&keep) {
                *v *= k;
            }
        }
        left
    }

    fn truncate(mut self, r: usize) -> Self {
        if r < self.rank() {
            self.left = self.left.columns(0, r);
            self.right = self.right.columns(0, r);
            self.singular_values.truncate(r);
        }
        self
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SvdMethod {
    Randomized,
    Exact,
    #[default]
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvdSettings {
    pub method: SvdMethod,
    pub oversample: usize,
    pub power_iters: usize,
}

impl Default for SvdSettings {
    fn default() -> Self {
        Self {
            method: SvdMethod::Auto,
            oversample: 10,
            power_iters: 4,
        }
    }
}

impl SvdSettings {
    pub fn randomized() -> Self {
        Self {
            method: SvdMethod::Randomized,
            ..Self::default()
        }
    }
}

/// Subtracts each column's mean.
pub fn center_columns(x: &DenseMatrix) -> DenseMatrix {
    let n = x.rows();
    let mut out = x.clone();
    if n == 0 {
        return out;
    }
    let means: Vec<f64> = x.col_sums().into_iter().map(|s| s / n as f64).collect();
    for i in 0..n {
        for (v, m) in out.row_mut(i).iter_mut().zip(&means) {
            *v -= m;
        }
    }
    out
}

/// Leading `r` singular triplets, by the method `settings` selects.
pub fn truncated_svd(x: &DenseMatrix, r: usize, settings: &SvdSettings, seed: u64) -> Result<TruncatedSvd> {
    let small = x.rows().min(x.cols());
    let exact = match settings.method {
        SvdMethod::Exact => true,
        SvdMethod::Randomized => false,
        SvdMethod::Auto => small <= AUTO_EXACT_LIMIT && 4 * (r + settings.oversample) > small,
    };
    if exact {
        check_rank(x, r)?;
        Ok(exact_svd_small(x)?.truncate(r))
    } else {
        randomized_svd(x, r, settings.oversample, settings.power_iters, seed)
    }
}

fn check_rank(x: &DenseMatrix, r: usize) -> Result<()> {
    let small = x.rows().min(x.cols());
    if r == 0 || r > small {
        return Err(Error::dim(format!(
            "rank {r} requested from a {}x{} matrix",
            x.rows(),
            x.cols()
        )));
    }
    Ok(())
}

/// Rank-`r` randomized SVD. Deterministic for a given `seed`.
pub fn randomized_svd(
    x: &DenseMatrix,
    r: usize,
    oversample: usize,
    power_iters: usize,
    seed: u64,
) -> Result<TruncatedSvd> {
    check_rank(x, r)?;
    if !x.is_finite() {
        return Err(Error::numeric("SVD input has non-finite entries"));
    }
    let (n, d) = x.shape();
    let l = (r + oversample).min(n.min(d));
    if l == n.min(d) && l <= EXACT_SVD_LIMIT {
        // a sketch this wide spans the whole range
        return Ok(exact_svd_small(x)?.truncate(r));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega = DenseMatrix::from_fn(d, l, |_, _| rng.sample(StandardNormal));
    let mut q = orthonormal_basis(&x.matmul(&omega)?);
    for _ in 0..power_iters {
        let z = orthonormal_basis(&x.t_matmul(&q)?);
        q = orthonormal_basis(&x.matmul(&z)?);
    }
    // x ≈ q (q^T x); decompose the small projected block
    let projected = q.t_matmul(x)?;
    let small = exact_svd_small(&projected)?;
    let left = q.matmul(&small.left)?;
    let mut out = TruncatedSvd {
        left,
        singular_values: small.singular_values,
        right: small.right,
    };
    fix_signs(&mut out);
    Ok(out.truncate(r))
}

/// Full thin SVD of a matrix whose smaller side is at most [`EXACT_SVD_LIMIT`].
pub fn exact_svd_small(x: &DenseMatrix) -> Result<TruncatedSvd> {
    let (n, d) = x.shape();
    let small = n.min(d);
    if small > EXACT_SVD_LIMIT {
        return Err(Error::dim(format!(
            "exact SVD limited to min dimension {EXACT_SVD_LIMIT}, got {n}x{d}"
        )));
    }
    if !x.is_finite() {
        return Err(Error::numeric("SVD input has non-finite entries"));
    }
    if small == 0 {
        return Ok(TruncatedSvd {
            left: DenseMatrix::zeros(n, 0),
            singular_values: Vec::new(),
            right: DenseMatrix::zeros(d, 0),
        });
    }
    let mut out = if n >= d {
        let (u, s, v) = thin_svd_tall(x)?;
        TruncatedSvd {
            left: u,
            singular_values: s,
            right: DenseMatrix::from_nalgebra(&v),
        }
    } else {
        let (v, s, u) = thin_svd_tall(&x.transpose())?;
        TruncatedSvd {
            left: DenseMatrix::from_nalgebra(&u),
            singular_values: s,
            right: v,
        }
    };
    fix_signs(&mut out);
    Ok(out)
}

/// SVD of a tall matrix (`rows >= cols`), returning `(U, s, V)` sorted by
/// decreasing singular value. Very tall inputs are reduced by QR first.
fn thin_svd_tall(a: &DenseMatrix) -> Result<(DenseMatrix, Vec<f64>, DMatrix<f64>)> {
    let (n, d) = a.shape();
    if n > 2 * d {
        let (q, r) = tall_qr(a);
        let (ur, s, v) = svd_square(r)?;
        Ok((q.matmul(&DenseMatrix::from_nalgebra(&ur))?, s, v))
    } else {
        let (u, s, v) = svd_square(a.to_nalgebra())?;
        Ok((DenseMatrix::from_nalgebra(&u), s, v))
    }
}

/// Rows per leaf block of [`tall_qr`].
const QR_BLOCK: usize = 512;

/// Thin QR of a matrix with `rows >= cols`. Fixed row blocks are factored
/// independently, their stacked `R` factors are factored again (recursively),
/// and the block `Q` factors are combined. Work is linear in the row count and
/// the blocking does not depend on the thread count.
fn tall_qr(a: &DenseMatrix) -> (DenseMatrix, DMatrix<f64>) {
    let (n, c) = a.shape();
    let block = QR_BLOCK.max(4 * c);
    let blocks = n / block;
    if blocks < 2 {
        let qr = a.to_nalgebra().qr();
        return (DenseMatrix::from_nalgebra(&qr.q()), qr.r());
    }
    // the last block absorbs the remainder so every block has >= c rows
    let bounds = |b: usize| (b * block, if b + 1 == blocks { n } else { (b + 1) * block });
    let leaves: Vec<(DMatrix<f64>, DMatrix<f64>)> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let (lo, hi) = bounds(b);
            let qr = DMatrix::from_row_slice(hi - lo, c, &a.as_slice()[lo * c..hi * c]).qr();
            (qr.q(), qr.r())
        })
        .collect();
    let mut stacked = DenseMatrix::zeros(blocks * c, c);
    for (b, (_, r)) in leaves.iter().enumerate() {
        for i in 0..c {
            for j in 0..c {
                stacked[(b * c + i, j)] = r[(i, j)];
            }
        }
    }
    let (top, r) = tall_qr(&stacked);
    let mut q = DenseMatrix::zeros(n, c);
    q.as_mut_slice()
        .par_chunks_mut(c)
        .enumerate()
        .for_each(|(i, row)| {
            let b = (i / block).min(blocks - 1);
            let (lo, _) = bounds(b);
            let ql = &leaves[b].0;
            for k in 0..c {
                let a = ql[(i - lo, k)];
                if a != 0.0 {
                    for (o, t) in row.iter_mut().zip(top.row(b * c + k)) {
                        *o += a * t;
                    }
                }
            }
        });
    (q, r)
}

fn svd_square(a: DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>, DMatrix<f64>)> {
    let d = a.ncols();
    let svd = a
        .try_svd(true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::numeric("dense SVD did not converge"))?;
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]).then(i.cmp(&j)));
    let s: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let u_sorted = DMatrix::from_fn(u.nrows(), order.len(), |r, c| u[(r, order[c])]);
    let v_sorted = DMatrix::from_fn(d, order.len(), |r, c| vt[(order[c], r)]);
    Ok((u_sorted, s, v_sorted))
}

/// Orthonormal basis for the column space of `y` (thin Householder QR).
pub(crate) fn orthonormal_basis(y: &DenseMatrix) -> DenseMatrix {
    if y.rows() >= y.cols() {
        return tall_qr(y).0;
    }
    DenseMatrix::from_nalgebra(&y.to_nalgebra().qr().q())
}

/// Flips each singular pair so the left vector's largest-magnitude entry
/// (lowest index on ties) is positive.
fn fix_signs(svd: &mut TruncatedSvd) {
    let n = svd.left.rows();
    for c in 0..svd.rank() {
        let mut best = (0usize, 0.0f64);
        for i in 0..n {
            let v = svd.left[(i, c)];
            if v.abs() > best.1.abs() {
                best = (i, v);
            }
        }
        if best.1 < 0.0 {
            for i in 0..n {
                svd.left[(i, c)] = -svd.left[(i, c)];
            }
            for i in 0..svd.right.rows() {
                svd.right[(i, c)] = -svd.right[(i, c)];
            }
        }
    }
}
