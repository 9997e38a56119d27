//! Dense and sparse f64 matrices with the handful of kernels the rest of the
//! crate needs: plain/transposed matmuls, row ops, and a compressed-row view
//! for very sparse inputs (bag-of-words features are ~1% dense, and skipping
//! the zeros makes first-layer products ~50x cheaper).
//!
//! All arithmetic is f64. On-disk formats store f32; the conversion happens
//! at the IO layer, not here.

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Build from a row-major value buffer. Errors if the length is wrong.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Invalid(format!(
                "matrix buffer has {} values, expected {}x{}={}",
                data.len(),
                rows,
                cols,
                rows * cols
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Build from explicit rows (mostly for tests and small fixtures).
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Matrix { rows: r, cols: c, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

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

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Copy of the selected rows, in the given order (duplicates allowed).
    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(idx.len(), self.cols);
        for (k, &i) in idx.iter().enumerate() {
            out.row_mut(k).copy_from_slice(self.row(i));
        }
        out
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Squared Euclidean distance between row `i` of `self` and row `j` of `other`.
    pub fn row_dist2(&self, i: usize, other: &Matrix, j: usize) -> f64 {
        debug_assert_eq!(self.cols, other.cols);
        let a = self.row(i);
        let b = other.row(j);
        let mut s = 0.0;
        for k in 0..a.len() {
            let d = a[k] - b[k];
            s += d * d;
        }
        s
    }
}

/// Run `f` once per row of `data` (chunked by `cols`). Uses the rayon pool
/// when the `parallel` feature is on and the pool has more than one thread;
/// rows are independent, so the parallel result is bitwise identical to the
/// serial one.
pub(crate) fn for_each_row(data: &mut [f64], cols: usize, f: impl Fn(usize, &mut [f64]) + Sync) {
    #[cfg(feature = "parallel")]
    {
        if rayon::current_num_threads() > 1 {
            use rayon::prelude::*;
            data.par_chunks_mut(cols)
                .enumerate()
                .for_each(|(i, row)| f(i, row));
            return;
        }
    }
    for (i, row) in data.chunks_mut(cols).enumerate() {
        f(i, row);
    }
}

/// C = A · B.
pub fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    assert_eq!(a.cols, b.rows, "matmul shape mismatch");
    let mut c = Matrix::zeros(a.rows, b.cols);
    let cols = c.cols;
    for_each_row(&mut c.data, cols, |i, crow| {
        let arow = a.row(i);
        for (k, &aik) in arow.iter().enumerate() {
            if aik != 0.0 {
                let brow = b.row(k);
                for (cv, &bv) in crow.iter_mut().zip(brow.iter()) {
                    *cv += aik * bv;
                }
            }
        }
    });
    c
}

/// C = Aᵀ · B (A is stored untransposed). Used for weight gradients Xᵀ·dZ.
pub fn matmul_tn(a: &Matrix, b: &Matrix) -> Matrix {
    assert_eq!(a.rows, b.rows, "matmul_tn shape mismatch");
    let mut c = Matrix::zeros(a.cols, b.cols);
    for k in 0..a.rows {
        let arow = a.row(k);
        let brow = b.row(k);
        for (i, &aki) in arow.iter().enumerate() {
            if aki != 0.0 {
                let crow = &mut c.data[i * b.cols..(i + 1) * b.cols];
                for (cv, &bv) in crow.iter_mut().zip(brow.iter()) {
                    *cv += aki * bv;
                }
            }
        }
    }
    c
}

/// C = A · Bᵀ (B is stored untransposed). Used for input gradients dZ·Wᵀ.
pub fn matmul_nt(a: &Matrix, b: &Matrix) -> Matrix {
    assert_eq!(a.cols, b.cols, "matmul_nt shape mismatch");
    let mut c = Matrix::zeros(a.rows, b.rows);
    let cols = c.cols;
    for_each_row(&mut c.data, cols, |i, crow| {
        let arow = a.row(i);
        for (j, cv) in crow.iter_mut().enumerate() {
            let brow = b.row(j);
            let mut s = 0.0;
            for k in 0..arow.len() {
                s += arow[k] * brow[k];
            }
            *cv = s;
        }
    });
    c
}

/// Compressed sparse rows over a dense matrix: only the nonzero entries of
/// each row. Worth building whenever density is a few percent.
#[derive(Debug, Clone)]
pub struct SparseRows {
    rows: usize,
    cols: usize,
    offsets: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl SparseRows {
    /// Assemble from raw CSR parts. Callers guarantee consistency; debug
    /// builds verify the offsets.
    pub(crate) fn from_parts(
        rows: usize,
        cols: usize,
        offsets: Vec<usize>,
        indices: Vec<u32>,
        values: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(offsets.len(), rows + 1);
        debug_assert_eq!(offsets[0], 0);
        debug_assert_eq!(*offsets.last().unwrap(), indices.len());
        debug_assert_eq!(indices.len(), values.len());
        debug_assert!(indices.iter().all(|&j| (j as usize) < cols));
        SparseRows {
            rows,
            cols,
            offsets,
            indices,
            values,
        }
    }

    pub fn from_dense(m: &Matrix) -> Self {
        let mut offsets = Vec::with_capacity(m.rows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        offsets.push(0);
        for i in 0..m.rows {
            for (j, &v) in m.row(i).iter().enumerate() {
                if v != 0.0 {
                    indices.push(j as u32);
                    values.push(v);
                }
            }
            offsets.push(indices.len());
        }
        SparseRows {
            rows: m.rows,
            cols: m.cols,
            offsets,
            indices,
            values,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Fraction of entries that are nonzero.
    pub fn density(&self) -> f64 {
        if self.rows * self.cols == 0 {
            0.0
        } else {
            self.nnz() as f64 / (self.rows * self.cols) as f64
        }
    }

    #[inline]
    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let lo = self.offsets[i];
        let hi = self.offsets[i + 1];
        (&self.indices[lo..hi], &self.values[lo..hi])
    }

    /// Mutable view of all stored values (the sparsity pattern is fixed).
    /// Used to apply dropout to a sparse input without densifying it.
    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

/// C = S · B for sparse S.
pub fn matmul_sparse(s: &SparseRows, b: &Matrix) -> Matrix {
    assert_eq!(s.cols, b.rows, "matmul_sparse shape mismatch");
    let mut c = Matrix::zeros(s.rows, b.cols);
    let cols = c.cols;
    for_each_row(&mut c.data, cols, |i, crow| {
        let (idx, vals) = s.row(i);
        for (&k, &v) in idx.iter().zip(vals.iter()) {
            let brow = b.row(k as usize);
            for (cv, &bv) in crow.iter_mut().zip(brow.iter()) {
                *cv += v * bv;
            }
        }
    });
    c
}

/// C = Sᵀ · B for sparse S. Serial: rows of S scatter into shared output rows.
pub fn matmul_sparse_tn(s: &SparseRows, b: &Matrix) -> Matrix {
    assert_eq!(s.rows, b.rows, "matmul_sparse_tn shape mismatch");
    let mut c = Matrix::zeros(s.cols, b.cols);
    for r in 0..s.rows {
        let (idx, vals) = s.row(r);
        let brow = b.row(r);
        for (&i, &v) in idx.iter().zip(vals.iter()) {
            let crow = &mut c.data[i as usize * b.cols..(i as usize + 1) * b.cols];
            for (cv, &bv) in crow.iter_mut().zip(brow.iter()) {
                *cv += v * bv;
            }
        }
    }
    c
}
