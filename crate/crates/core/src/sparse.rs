//! Compressed sparse row matrices with the handful of operations the energy systems need.
//!
//! Row-parallel kernels write disjoint output rows, and vector reductions sum fixed-size
//! chunks in index order, so results do not depend on the number of threads.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{MattingError, Result};

const REDUCE_CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in diag.iter().enumerate() {
            if v != 0.0 {
                m.indices.push(i);
                m.values.push(v);
            }
            m.indptr[i + 1] = m.indices.len();
        }
        m
    }

    /// Builds a matrix from unsorted per-row entries, summing duplicates and dropping zeros.
    pub fn from_rows(ncols: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let nrows = rows.len();
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for mut row in rows {
            row.sort_unstable_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for (j, v) in row {
                if j >= ncols {
                    return Err(MattingError::InvalidInput(format!(
                        "column {j} outside a matrix with {ncols} columns"
                    )));
                }
                if last == Some(j) {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(j);
                    values.push(v);
                    last = Some(j);
                }
            }
            indptr.push(indices.len());
        }
        let mut m = Self {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        };
        m.prune_zeros();
        Ok(m)
    }

    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut rows = vec![Vec::new(); nrows];
        for &(i, j, v) in triplets {
            if i >= nrows {
                return Err(MattingError::InvalidInput(format!(
                    "row {i} outside a matrix with {nrows} rows"
                )));
            }
            rows[i].push((j, v));
        }
        Self::from_rows(ncols, rows)
    }

    fn prune_zeros(&mut self) {
        if !self.values.contains(&0.0) {
            return;
        }
        let mut indptr = Vec::with_capacity(self.nrows + 1);
        let mut indices = Vec::with_capacity(self.indices.len());
        let mut values = Vec::with_capacity(self.values.len());
        indptr.push(0);
        for i in 0..self.nrows {
            for k in self.indptr[i]..self.indptr[i + 1] {
                if self.values[k] != 0.0 {
                    indices.push(self.indices[k]);
                    values.push(self.values[k]);
                }
            }
            indptr.push(indices.len());
        }
        self.indptr = indptr;
        self.indices = indices;
        self.values = values;
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.ncols
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `i`, sorted by column.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(0.0, |k| vals[k])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    /// `y = A x`.
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&j, v)| v * x[j]).sum();
        });
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &j in &self.indices {
            counts[j + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let indptr = counts.clone();
        let mut next = counts;
        let mut indices = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let slot = next[j];
                indices[slot] = i;
                values[slot] = v;
                next[j] += 1;
            }
        }
        Self {
            nrows: self.ncols,
            ncols: self.nrows,
            indptr,
            indices,
            values,
        }
    }

    /// Sparse product `self * other` (row-wise Gustavson accumulation).
    pub fn matmul(&self, other: &CsrMatrix) -> Result<Self> {
        if self.ncols != other.nrows {
            return Err(MattingError::InvalidInput(format!(
                "cannot multiply {}x{} by {}x{}",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        let ncols = other.ncols;
        let rows: Vec<(Vec<usize>, Vec<f64>)> = (0..self.nrows)
            .into_par_iter()
            .map_init(
                || (vec![f64::NAN; ncols], Vec::new()),
                |(acc, touched), i| {
                    let (cols, vals) = self.row(i);
                    for (&k, &a) in cols.iter().zip(vals) {
                        let (ocols, ovals) = other.row(k);
                        for (&j, &b) in ocols.iter().zip(ovals) {
                            if acc[j].is_nan() {
                                acc[j] = a * b;
                                touched.push(j);
                            } else {
                                acc[j] += a * b;
                            }
                        }
                    }
                    touched.sort_unstable();
                    let mut idx = Vec::with_capacity(touched.len());
                    let mut val = Vec::with_capacity(touched.len());
                    for &j in touched.iter() {
                        if acc[j] != 0.0 {
                            idx.push(j);
                            val.push(acc[j]);
                        }
                        acc[j] = f64::NAN;
                    }
                    touched.clear();
                    (idx, val)
                },
            )
            .collect();
        Ok(Self::from_row_parts(self.nrows, ncols, rows))
    }

    fn from_row_parts(nrows: usize, ncols: usize, rows: Vec<(Vec<usize>, Vec<f64>)>) -> Self {
        let mut indptr = Vec::with_capacity(nrows + 1);
        let nnz = rows.iter().map(|r| r.0.len()).sum();
        let mut indices = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        indptr.push(0);
        for (idx, val) in rows {
            indices.extend(idx);
            values.extend(val);
            indptr.push(indices.len());
        }
        Self {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    /// `sum_k c_k * M_k` over matrices of identical shape.
    pub fn linear_combination(terms: &[(f64, &CsrMatrix)]) -> Result<Self> {
        let Some((_, first)) = terms.first() else {
            return Err(MattingError::InvalidInput("empty linear combination".into()));
        };
        let (nrows, ncols) = (first.nrows, first.ncols);
        if let Some((_, m)) = terms.iter().find(|(_, m)| m.nrows != nrows || m.ncols != ncols) {
            return Err(MattingError::InvalidInput(format!(
                "cannot add {}x{} to {nrows}x{ncols}",
                m.nrows, m.ncols
            )));
        }
        let rows: Vec<(Vec<usize>, Vec<f64>)> = (0..nrows)
            .into_par_iter()
            .map(|i| {
                let mut entries: Vec<(usize, f64)> = Vec::new();
                for (c, m) in terms {
                    let (cols, vals) = m.row(i);
                    entries.extend(cols.iter().zip(vals).map(|(&j, &v)| (j, c * v)));
                }
                entries.sort_by_key(|e| e.0);
                let mut idx: Vec<usize> = Vec::with_capacity(entries.len());
                let mut val: Vec<f64> = Vec::with_capacity(entries.len());
                for (j, v) in entries {
                    if idx.last() == Some(&j) {
                        *val.last_mut().unwrap() += v;
                    } else {
                        idx.push(j);
                        val.push(v);
                    }
                }
                (idx, val)
            })
            .collect();
        let mut m = Self::from_row_parts(nrows, ncols, rows);
        m.prune_zeros();
        Ok(m)
    }

    /// Places `blocks[r][c]` (all `n x n`, `None` meaning zero) into one `(R n) x (C n)` matrix.
    pub fn block(blocks: &[Vec<Option<&CsrMatrix>>]) -> Result<Self> {
        let n = blocks
            .iter()
            .flatten()
            .flatten()
            .map(|m| m.nrows)
            .next()
            .ok_or_else(|| MattingError::InvalidInput("block matrix has no blocks".into()))?;
        let block_cols = blocks.first().map_or(0, Vec::len);
        let mut rows = Vec::with_capacity(blocks.len() * n);
        for block_row in blocks {
            if block_row.len() != block_cols {
                return Err(MattingError::InvalidInput("ragged block matrix".into()));
            }
            for i in 0..n {
                let mut row = Vec::new();
                for (bc, m) in block_row.iter().enumerate() {
                    if let Some(m) = m {
                        if m.nrows != n || m.ncols != n {
                            return Err(MattingError::InvalidInput("blocks differ in size".into()));
                        }
                        let (cols, vals) = m.row(i);
                        row.extend(cols.iter().zip(vals).map(|(&j, &v)| (bc * n + j, v)));
                    }
                }
                rows.push(row);
            }
        }
        Self::from_rows(block_cols * n, rows)
    }

    /// Largest `|A_ij - A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let t = self.transpose();
        (0..self.nrows)
            .map(|i| {
                let (cols, vals) = self.row(i);
                let (tcols, tvals) = t.row(i);
                let mut worst: f64 = 0.0;
                for (&j, &v) in cols.iter().zip(vals) {
                    worst = worst.max((v - t.get(i, j)).abs());
                }
                for (&j, &v) in tcols.iter().zip(tvals) {
                    worst = worst.max((v - self.get(i, j)).abs());
                }
                worst
            })
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                d[(i, j)] += v;
            }
        }
        d
    }
}

/// Dot product with a thread-count independent summation order.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let partial: Vec<f64> = a
        .par_chunks(REDUCE_CHUNK)
        .zip(b.par_chunks(REDUCE_CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum())
        .collect();
    partial.iter().sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
