//! Compressed-row sparse matrices and cell-wise assembly into a fixed pattern.

use nalgebra::DMatrix;
use rayon::prelude::*;

/// CSR matrix with sorted, duplicate-free column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Sums duplicate entries.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        order.sort_by_key(|&t| (triplets[t].0, triplets[t].1));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last = None;
        for &t in &order {
            let (r, c, v) = triplets[t];
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                row_ptr[r + 1] += 1;
                col_idx.push(c);
                values.push(v);
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self { nrows, ncols, row_ptr, col_idx, values }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, row_ptr: vec![0; nrows + 1], col_idx: Vec::new(), values: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self { nrows: n, ncols: n, row_ptr: (0..=n).collect(), col_idx: (0..n).collect(), values: vec![1.0; n] }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[range.clone()].binary_search(&c) {
            Ok(i) => self.values[range.start + i],
            Err(_) => 0.0,
        }
    }

    pub fn same_pattern(&self, other: &Self) -> bool {
        self.nrows == other.nrows && self.ncols == other.ncols && self.row_ptr == other.row_ptr && self.col_idx == other.col_idx
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()).collect()
    }

    pub fn transpose_mul_vec(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.nrows);
        let mut out = vec![0.0; self.ncols];
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                out[c] += v * y[r];
            }
        }
        out
    }

    /// `y^T A x`.
    pub fn bilinear(&self, y: &[f64], x: &[f64]) -> f64 {
        assert_eq!(y.len(), self.nrows);
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows).map(|r| y[r] * self.row(r).map(|(c, v)| v * x[c]).sum::<f64>()).sum()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Vec::with_capacity(self.nnz());
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                t.push((c, r, v));
            }
        }
        Self::from_triplets(self.ncols, self.nrows, &t)
    }

    pub fn scale(&mut self, s: f64) {
        self.values.iter_mut().for_each(|v| *v *= s);
    }

    /// `self += s * other`; both must share a pattern.
    pub fn axpy_same_pattern(&mut self, s: f64, other: &Self) {
        assert!(self.same_pattern(other), "pattern mismatch");
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += s * b;
        }
    }

    /// Linear combination of matrices sharing one pattern.
    pub fn combination(terms: &[(f64, &Self)]) -> Self {
        let mut out = terms[0].1.clone();
        out.scale(terms[0].0);
        for (s, m) in &terms[1..] {
            out.axpy_same_pattern(*s, m);
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                d[(r, c)] += v;
            }
        }
        d
    }

    /// Largest entry of `|self - self^T|`.
    pub fn asymmetry(&self) -> f64 {
        (self.to_dense() - self.to_dense().transpose()).amax()
    }
}

/// CSR pattern induced by cell-local DOF lists, with the value position of
/// every local `(row, col)` pair of every cell.
#[derive(Debug, Clone)]
pub struct CellPattern {
    template: SparseMatrix,
    local_rows: usize,
    local_cols: usize,
    /// `positions[k * local_rows * local_cols + a * local_cols + b]`.
    positions: Vec<usize>,
}

impl CellPattern {
    /// `row_dofs` and `col_dofs` are flattened per-cell tables with fixed strides.
    pub fn new(nrows: usize, ncols: usize, row_dofs: &[usize], local_rows: usize, col_dofs: &[usize], local_cols: usize) -> Self {
        let ncells = row_dofs.len() / local_rows;
        assert_eq!(col_dofs.len() / local_cols, ncells);
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); nrows];
        for k in 0..ncells {
            for &r in &row_dofs[k * local_rows..(k + 1) * local_rows] {
                rows[r].extend_from_slice(&col_dofs[k * local_cols..(k + 1) * local_cols]);
            }
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        for r in rows.iter_mut() {
            r.sort_unstable();
            r.dedup();
            col_idx.extend_from_slice(r);
            row_ptr.push(col_idx.len());
        }
        let values = vec![0.0; col_idx.len()];
        let template = SparseMatrix { nrows, ncols, row_ptr, col_idx, values };
        let mut positions = Vec::with_capacity(ncells * local_rows * local_cols);
        for k in 0..ncells {
            for &r in &row_dofs[k * local_rows..(k + 1) * local_rows] {
                let start = template.row_ptr[r];
                let cols = &template.col_idx[start..template.row_ptr[r + 1]];
                for &c in &col_dofs[k * local_cols..(k + 1) * local_cols] {
                    positions.push(start + cols.binary_search(&c).expect("column in pattern"));
                }
            }
        }
        Self { template, local_rows, local_cols, positions }
    }

    pub fn num_cells(&self) -> usize {
        self.positions.len() / (self.local_rows * self.local_cols)
    }

    /// A zero matrix with this pattern.
    pub fn zeros(&self) -> SparseMatrix {
        self.template.clone()
    }

    /// Computes local matrices in parallel (row-major `local_rows x
    /// local_cols`) and accumulates them in cell order.
    pub fn assemble<F>(&self, local: F) -> SparseMatrix
    where
        F: Fn(usize) -> Vec<f64> + Sync,
    {
        let blocks: Vec<Vec<f64>> = (0..self.num_cells()).into_par_iter().map(&local).collect();
        let mut m = self.template.clone();
        let stride = self.local_rows * self.local_cols;
        for (k, block) in blocks.iter().enumerate() {
            debug_assert_eq!(block.len(), stride);
            for (p, v) in self.positions[k * stride..(k + 1) * stride].iter().zip(block) {
                m.values[*p] += v;
            }
        }
        m
    }
}

/// Dense `nrows x ncols` local matrix in row-major order.
#[derive(Debug, Clone)]
pub struct LocalMatrix {
    pub ncols: usize,
    pub data: Vec<f64>,
}

impl LocalMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { ncols, data: vec![0.0; nrows * ncols] }
    }

    #[inline]
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.ncols + c] += v;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn triplets_sum_duplicates() {
        let m = SparseMatrix::from_triplets(2, 3, &[(0, 2, 1.0), (1, 0, 2.0), (0, 2, 0.5), (0, 0, -1.0)]);
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.get(0, 2), 1.5);
        assert_eq!(m.get(0, 1), 0.0);
        assert_eq!(m.mul_vec(&[1.0, 1.0, 2.0]), vec![2.0, 2.0]);
        assert_eq!(m.transpose().get(2, 0), 1.5);
    }

    #[test]
    fn cell_pattern_accumulates_in_order() {
        // two "cells" sharing DOF 1
        let p = CellPattern::new(3, 3, &[0, 1, 1, 2], 2, &[0, 1, 1, 2], 2);
        let m = p.assemble(|_| vec![1.0, -1.0, -1.0, 1.0]);
        let d = m.to_dense();
        assert_eq!(d[(1, 1)], 2.0);
        assert_eq!(d[(0, 2)], 0.0);
        assert_eq!(m.mul_vec(&[1.0, 1.0, 1.0]), vec![0.0; 3]);
    }

    proptest! {
        #[test]
        fn matvec_matches_dense(entries in proptest::collection::vec((0usize..5, 0usize..4, -10.0f64..10.0), 0..30),
                                x in proptest::collection::vec(-1.0f64..1.0, 4),
                                y in proptest::collection::vec(-1.0f64..1.0, 5)) {
            let m = SparseMatrix::from_triplets(5, 4, &entries);
            let d = m.to_dense();
            let xv = nalgebra::DVector::from_vec(x.clone());
            let yv = nalgebra::DVector::from_vec(y.clone());
            let dx = &d * &xv;
            for (a, b) in m.mul_vec(&x).iter().zip(dx.iter()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            let dty = d.transpose() * &yv;
            for (a, b) in m.transpose_mul_vec(&y).iter().zip(dty.iter()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            prop_assert!((m.bilinear(&y, &x) - yv.dot(&dx)).abs() < 1e-11);
        }
    }
}
