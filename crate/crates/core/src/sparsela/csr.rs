//! Compressed sparse row matrices with the handful of operations the
//! preconditioners need: matvec, transpose, and sparse-sparse products.

use rayon::prelude::*;

/// CSR matrix. Column indices are strictly increasing within each row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn new(
        n_rows: usize,
        n_cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Self {
        assert_eq!(row_ptr.len(), n_rows + 1);
        assert_eq!(col_idx.len(), values.len());
        assert_eq!(*row_ptr.last().unwrap(), col_idx.len());
        debug_assert!(row_ptr.windows(2).all(|w| w[0] <= w[1]));
        for r in 0..n_rows {
            let cols = &col_idx[row_ptr[r]..row_ptr[r + 1]];
            debug_assert!(cols.windows(2).all(|w| w[0] < w[1]), "row {r} not sorted");
            debug_assert!(cols.iter().all(|&c| c < n_cols));
        }
        Self { n_rows, n_cols, row_ptr, col_idx, values }
    }

    /// Build from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut entries: Vec<(usize, usize, f64)> = triplets.to_vec();
        entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for &(r, c, v) in &entries {
            assert!(r < n_rows && c < n_cols, "triplet ({r},{c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n_rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self::new(n_rows, n_cols, row_ptr, col_idx, values)
    }

    pub fn identity(n: usize) -> Self {
        Self::new(n, n, (0..=n).collect(), (0..n).collect(), vec![1.0; n])
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.col_idx[span.clone()], &self.values[span])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows.min(self.n_cols)).map(|i| self.get(i, i)).collect()
    }

    /// y = A·x. Row-parallel; each row is accumulated serially, so the
    /// result is independent of the thread count.
    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n_cols);
        assert_eq!(y.len(), self.n_rows);
        let row_of = |r: usize| -> f64 {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum()
        };
        if self.n_rows >= 2048 {
            y.par_iter_mut().enumerate().for_each(|(r, yr)| *yr = row_of(r));
        } else {
            for (r, yr) in y.iter_mut().enumerate() {
                *yr = row_of(r);
            }
        }
    }

    pub fn spmv(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_rows];
        self.spmv_into(x, &mut y);
        y
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut row_ptr = vec![0usize; self.n_cols + 1];
        for &c in &self.col_idx {
            row_ptr[c + 1] += 1;
        }
        for c in 0..self.n_cols {
            row_ptr[c + 1] += row_ptr[c];
        }
        let mut col_idx = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        let mut next = row_ptr.clone();
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                col_idx[next[c]] = r;
                values[next[c]] = v;
                next[c] += 1;
            }
        }
        // Rows come out sorted because source rows are visited in order.
        CsrMatrix::new(self.n_cols, self.n_rows, row_ptr, col_idx, values)
    }

    /// C = A·B, classical row-merge sparse product.
    pub fn matmul(&self, other: &CsrMatrix) -> CsrMatrix {
        assert_eq!(self.n_cols, other.n_rows);
        let n_cols = other.n_cols;
        let mut row_ptr = vec![0usize; self.n_rows + 1];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        // Dense scratch accumulator per row.
        let mut acc = vec![0.0f64; n_cols];
        let mut marker = vec![usize::MAX; n_cols];
        let mut touched: Vec<usize> = Vec::new();
        for r in 0..self.n_rows {
            touched.clear();
            let (acols, avals) = self.row(r);
            for (&k, &av) in acols.iter().zip(avals) {
                let (bcols, bvals) = other.row(k);
                for (&c, &bv) in bcols.iter().zip(bvals) {
                    if marker[c] != r {
                        marker[c] = r;
                        acc[c] = 0.0;
                        touched.push(c);
                    }
                    acc[c] += av * bv;
                }
            }
            touched.sort_unstable();
            for &c in &touched {
                col_idx.push(c);
                values.push(acc[c]);
            }
            row_ptr[r + 1] = col_idx.len();
        }
        CsrMatrix::new(self.n_rows, n_cols, row_ptr, col_idx, values)
    }

    /// Extract the principal submatrix on `dofs` (sorted global indices),
    /// renumbered to local indices.
    pub fn principal_submatrix(&self, dofs: &[usize]) -> CsrMatrix {
        debug_assert!(dofs.windows(2).all(|w| w[0] < w[1]));
        let mut local_of = vec![usize::MAX; self.n_cols];
        for (l, &g) in dofs.iter().enumerate() {
            local_of[g] = l;
        }
        let mut triplets = Vec::new();
        for (lr, &g) in dofs.iter().enumerate() {
            let (cols, vals) = self.row(g);
            for (&c, &v) in cols.iter().zip(vals) {
                if local_of[c] != usize::MAX {
                    triplets.push((lr, local_of[c], v));
                }
            }
        }
        CsrMatrix::from_triplets(dofs.len(), dofs.len(), &triplets)
    }

    #[cfg(test)]
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n_cols]; self.n_rows];
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                d[r][c] = v;
            }
        }
        d
    }
}
