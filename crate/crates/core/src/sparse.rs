//! Compressed sparse row matrices.

use nalgebra::DMatrix;

#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub row_offsets: Vec<usize>,
    pub col_indices: Vec<usize>,
    pub values: Vec<f64>,
    /// Set when the matrix was assembled as symmetric.
    pub symmetric: bool,
}

impl SparseMatrix {
    /// Builds a CSR matrix from `(row, col, value)` triplets, summing duplicates.
    ///
    /// Duplicates are summed in insertion order, so mirrored assembly gives
    /// bitwise symmetric matrices.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: Vec<(usize, usize, f64)>) -> Self {
        // bucket by row, keeping insertion order within each row
        let mut start = vec![0usize; nrows + 1];
        for &(i, j, _) in &triplets {
            assert!(i < nrows && j < ncols, "triplet ({i}, {j}) out of bounds");
            start[i + 1] += 1;
        }
        for i in 0..nrows {
            start[i + 1] += start[i];
        }
        let mut next = start.clone();
        let mut bucket = vec![(0usize, 0.0f64); triplets.len()];
        for (i, j, v) in triplets {
            bucket[next[i]] = (j, v);
            next[i] += 1;
        }

        let mut row_offsets = vec![0; nrows + 1];
        let mut col_indices = Vec::with_capacity(bucket.len());
        let mut values: Vec<f64> = Vec::with_capacity(bucket.len());
        for i in 0..nrows {
            let row = &mut bucket[start[i]..start[i + 1]];
            row.sort_by_key(|&(j, _)| j);
            let mut last = None;
            for &(j, v) in row.iter() {
                if last == Some(j) {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_indices.push(j);
                    values.push(v);
                    last = Some(j);
                }
            }
            row_offsets[i + 1] = values.len();
        }
        Self {
            nrows,
            ncols,
            row_offsets,
            col_indices,
            values,
            symmetric: false,
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::from_triplets(n, n, (0..n).map(|i| (i, i, 1.0)).collect());
        m.symmetric = true;
        m
    }

    pub fn with_symmetric(mut self, symmetric: bool) -> Self {
        self.symmetric = symmetric;
        self
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_offsets[i]..self.row_offsets[i + 1];
        self.col_indices[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_offsets[i]..self.row_offsets[i + 1];
        match self.col_indices[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn transpose_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for (i, &xi) in x.iter().enumerate() {
            for (j, v) in self.row(i) {
                y[j] += v * xi;
            }
        }
        y
    }

    /// Largest `|A_ij - A_ji|` relative to the largest entry.
    pub fn symmetry_defect(&self) -> f64 {
        if self.nrows != self.ncols {
            return f64::INFINITY;
        }
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut worst = 0.0f64;
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        if scale > 0.0 {
            worst / scale
        } else {
            0.0
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }
}
