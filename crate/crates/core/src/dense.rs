//! Row-major dense matrices and the handful of products the pipeline needs.
//!
//! Products that reduce over rows (`t_matmul`, `col_sums`) split the rows into
//! fixed-size chunks and add the chunk partials in order, so results do not
//! depend on the size of the rayon thread pool.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const REDUCE_CHUNK: usize = 512;
const PAR_MIN_WORK: usize = 1 << 15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dim(format!(
                "buffer of length {} cannot hold a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from equal-length rows. Panics on ragged input.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        // chunks_exact on an empty-column matrix would panic
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    /// Columns `start..end` as a new matrix.
    pub fn columns(&self, start: usize, end: usize) -> Self {
        assert!(start <= end && end <= self.cols);
        let w = end - start;
        let mut data = Vec::with_capacity(self.rows * w);
        for r in self.row_iter() {
            data.extend_from_slice(&r[start..end]);
        }
        Self {
            rows: self.rows,
            cols: w,
            data,
        }
    }

    /// Horizontal concatenation of blocks with equal row counts.
    pub fn hcat(blocks: &[&DenseMatrix]) -> Result<Self> {
        let rows = blocks.first().map_or(0, |b| b.rows);
        if blocks.iter().any(|b| b.rows != rows) {
            return Err(Error::dim("hcat blocks disagree on row count"));
        }
        let cols = blocks.iter().map(|b| b.cols).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for b in blocks {
                data.extend_from_slice(b.row(i));
            }
        }
        Ok(Self { rows, cols, data })
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    /// Multiplies row `i` by `factors[i]`.
    pub fn scale_rows(&mut self, factors: &[f64]) {
        assert_eq!(factors.len(), self.rows);
        let cols = self.cols.max(1);
        self.data
            .chunks_mut(cols)
            .zip(factors)
            .for_each(|(row, &f)| row.iter_mut().for_each(|v| *v *= f));
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.row_iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let cols = self.cols;
        let partials: Vec<Vec<f64>> = self
            .data
            .par_chunks(REDUCE_CHUNK * cols.max(1))
            .map(|chunk| {
                let mut acc = vec![0.0; cols];
                for row in chunk.chunks_exact(cols.max(1)) {
                    for (a, v) in acc.iter_mut().zip(row) {
                        *a += v;
                    }
                }
                acc
            })
            .collect();
        let mut out = vec![0.0; cols];
        for p in partials {
            for (o, v) in out.iter_mut().zip(p) {
                *o += v;
            }
        }
        out
    }

    /// `self * v` for a vector of length `cols`.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols);
        let dot = |r: &[f64]| r.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
        if self.rows * self.cols >= PAR_MIN_WORK {
            (0..self.rows).into_par_iter().map(|i| dot(self.row(i))).collect()
        } else {
            self.row_iter().map(dot).collect()
        }
    }

    /// `self * other`.
    pub fn matmul(&self, other: &DenseMatrix) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::dim(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let (n, p) = (self.rows, other.cols);
        let mut out = Self::zeros(n, p);
        if p == 0 {
            return Ok(out);
        }
        let kernel = |(i, out_row): (usize, &mut [f64])| {
            for (k, &a) in self.row(i).iter().enumerate() {
                if a != 0.0 {
                    for (o, b) in out_row.iter_mut().zip(other.row(k)) {
                        *o += a * b;
                    }
                }
            }
        };
        if n * self.cols * p >= PAR_MIN_WORK {
            out.data.par_chunks_mut(p).enumerate().for_each(kernel);
        } else {
            out.data.chunks_mut(p).enumerate().for_each(kernel);
        }
        Ok(out)
    }

    /// `selfᵀ * other`, reducing over the shared row dimension.
    pub fn t_matmul(&self, other: &DenseMatrix) -> Result<Self> {
        if self.rows != other.rows {
            return Err(Error::dim(format!(
                "cannot multiply ({}x{})^T by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let (m, p) = (self.cols, other.cols);
        let n = self.rows;
        let n_chunks = n.div_ceil(REDUCE_CHUNK);
        let partial = |c: usize| {
            let mut acc = vec![0.0; m * p];
            for i in c * REDUCE_CHUNK..((c + 1) * REDUCE_CHUNK).min(n) {
                let b = other.row(i);
                for (k, &a) in self.row(i).iter().enumerate() {
                    if a != 0.0 {
                        for (o, bv) in acc[k * p..(k + 1) * p].iter_mut().zip(b) {
                            *o += a * bv;
                        }
                    }
                }
            }
            acc
        };
        let partials: Vec<Vec<f64>> = if n * m * p >= PAR_MIN_WORK {
            (0..n_chunks).into_par_iter().map(partial).collect()
        } else {
            (0..n_chunks).map(partial).collect()
        };
        let mut data = vec![0.0; m * p];
        for part in partials {
            for (o, v) in data.iter_mut().zip(part) {
                *o += v;
            }
        }
        Ok(Self {
            rows: m,
            cols: p,
            data,
        })
    }

    /// `self * otherᵀ`.
    pub fn matmul_t(&self, other: &DenseMatrix) -> Result<Self> {
        if self.cols != other.cols {
            return Err(Error::dim(format!(
                "cannot multiply {}x{} by ({}x{})^T",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let p = other.rows;
        let mut out = Self::zeros(self.rows, p);
        if p == 0 {
            return Ok(out);
        }
        let kernel = |(i, out_row): (usize, &mut [f64])| {
            let a = self.row(i);
            for (j, o) in out_row.iter_mut().enumerate() {
                *o = a.iter().zip(other.row(j)).map(|(x, y)| x * y).sum();
            }
        };
        if self.rows * self.cols * p >= PAR_MIN_WORK {
            out.data.par_chunks_mut(p).enumerate().for_each(kernel);
        } else {
            out.data.chunks_mut(p).enumerate().for_each(kernel);
        }
        Ok(out)
    }

    pub fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub fn from_nalgebra(m: &DMatrix<f64>) -> Self {
        let (rows, cols) = m.shape();
        Self::from_fn(rows, cols, |i, j| m[(i, j)])
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
        DenseMatrix::from_fn(a.rows(), b.cols(), |i, j| {
            (0..a.cols()).map(|k| a[(i, k)] * b[(k, j)]).sum()
        })
    }

    fn pseudo(rows: usize, cols: usize, salt: u64) -> DenseMatrix {
        DenseMatrix::from_fn(rows, cols, |i, j| {
            let x = (i as u64 * 7919 + j as u64 * 104_729 + salt * 31) % 1000;
            x as f64 / 500.0 - 1.0
        })
    }

    #[test]
    fn products_agree_with_naive() {
        let a = pseudo(700, 13, 1);
        let b = pseudo(13, 9, 2);
        let c = pseudo(700, 9, 3);
        let ab = a.matmul(&b).unwrap();
        let expect = naive(&a, &b);
        for (x, y) in ab.as_slice().iter().zip(expect.as_slice()) {
            assert!((x - y).abs() < 1e-12);
        }
        let atc = a.t_matmul(&c).unwrap();
        let expect = naive(&a.transpose(), &c);
        for (x, y) in atc.as_slice().iter().zip(expect.as_slice()) {
            assert!((x - y).abs() < 1e-10);
        }
        let act = a.matmul_t(&b.transpose()).unwrap();
        let expect = naive(&a, &b);
        assert_eq!(act.shape(), (700, 9));
        for (x, y) in act.as_slice().iter().zip(expect.as_slice()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn mismatched_shapes_are_rejected() {
        let a = DenseMatrix::zeros(3, 2);
        assert!(a.matmul(&a).is_err());
        assert!(a.t_matmul(&DenseMatrix::zeros(2, 2)).is_err());
        assert!(DenseMatrix::from_vec(2, 2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn hcat_and_columns_are_inverse() {
        let a = pseudo(5, 3, 4);
        let b = pseudo(5, 2, 5);
        let ab = DenseMatrix::hcat(&[&a, &b]).unwrap();
        assert_eq!(ab.columns(0, 3), a);
        assert_eq!(ab.columns(3, 5), b);
    }

    #[test]
    fn col_sums_match_transposed_row_sums() {
        let a = pseudo(1500, 4, 6);
        let cs = a.col_sums();
        let rs = a.transpose().row_sums();
        for (x, y) in cs.iter().zip(&rs) {
            assert!((x - y).abs() < 1e-9);
        }
    }
}
