//! Dense row-major matrices and the few products the pipeline needs.
//! Small `d x d` factorizations go through nalgebra.

use nalgebra::DMatrix;

use crate::embeddings::EmbeddingMatrix;
use crate::exec::Exec;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Ok(DenseMatrix {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }
}

#[inline]
fn dot4(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let k = c * 4;
        acc[0] += a[k] * b[k];
        acc[1] += a[k + 1] * b[k + 1];
        acc[2] += a[k + 2] * b[k + 2];
        acc[3] += a[k + 3] * b[k + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for k in chunks * 4..a.len() {
        s += a[k] * b[k];
    }
    s
}

/// `A Bᵀ` for two embedding matrices of equal dimension, computed row by row.
pub fn a_bt(a: &EmbeddingMatrix, b: &EmbeddingMatrix, exec: Exec) -> Result<DenseMatrix> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!(
            "left has dimension {}, right has {}",
            a.dim(),
            b.dim()
        )));
    }
    let mut out = DenseMatrix::zeros(a.rows(), b.rows());
    let cols = b.rows();
    exec.for_each_row_mut(&mut out.data, cols, |i, row| {
        let ai = a.row(i);
        for (j, v) in row.iter_mut().enumerate() {
            *v = dot4(ai, b.row(j));
        }
    });
    Ok(out)
}

pub fn to_nalgebra(m: &EmbeddingMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.dim(), m.as_slice())
}

pub fn from_nalgebra(m: &DMatrix<f64>) -> EmbeddingMatrix {
    let mut data = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        data.extend(m.row(i).iter());
    }
    EmbeddingMatrix::from_vec(m.nrows(), m.ncols(), data).expect("shape is consistent")
}

/// `M W` for an embedding matrix and a `d x d'` transform.
pub fn transform(m: &EmbeddingMatrix, w: &DMatrix<f64>, exec: Exec) -> EmbeddingMatrix {
    let out_dim = w.ncols();
    let wt: Vec<Vec<f64>> = (0..out_dim).map(|c| w.column(c).iter().copied().collect()).collect();
    let mut out = EmbeddingMatrix::zeros(m.rows(), out_dim);
    exec.for_each_row_mut(out.as_mut_slice(), out_dim, |i, row| {
        let src = m.row(i);
        for (c, v) in row.iter_mut().enumerate() {
            *v = dot4(src, &wt[c]);
        }
    });
    out
}

/// `Aᵀ B` restricted to paired rows: Σ_k a[src_k]ᵀ b[trg_k].
pub fn paired_cross_covariance(a: &EmbeddingMatrix, b: &EmbeddingMatrix, pairs: &[(usize, usize)]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(a.dim(), b.dim());
    for &(i, j) in pairs {
        let ai = a.row(i);
        let bj = b.row(j);
        for (r, &x) in ai.iter().enumerate() {
            for (c, &y) in bj.iter().enumerate() {
                m[(r, c)] += x * y;
            }
        }
    }
    m
}

/// Frobenius norm of `WᵀW - I`.
pub fn orthogonality_error(w: &DMatrix<f64>) -> f64 {
    let g = w.transpose() * w;
    let n = g.nrows();
    (g - DMatrix::<f64>::identity(n, n)).norm()
}
