//! Sparse direct solver: reverse Cuthill–McKee ordering followed by banded
//! LU with partial pivoting.
//!
//! The band is whatever the reordered matrix has, so the factorization is
//! correct for any nonsingular matrix; it is only *fast* when the pattern
//! reorders to a narrow band, which holds for the FEM blocks and coarse
//! operators this solver serves.

use thiserror::Error;

use super::CsrMatrix;

#[derive(Debug, Error)]
pub enum LuError {
    #[error("matrix is singular (zero pivot at column {0})")]
    Singular(usize),
    #[error("matrix must be square, got {0}x{1}")]
    NotSquare(usize, usize),
}

/// Reusable LU factorization of a permuted band matrix.
#[derive(Debug, Clone)]
pub struct LuFactors {
    n: usize,
    /// `order[new] = old`: RCM permutation applied symmetrically.
    order: Vec<usize>,
    kl: usize,
    ku: usize,
    /// Column-major LAPACK-style band storage with `kl` fill rows on top:
    /// entry (i, j) lives at `ab[j * ldab + (kl + ku + i - j)]`.
    ab: Vec<f64>,
    ldab: usize,
    /// Row interchanged with row `j` at elimination step `j`.
    pivot: Vec<usize>,
}

impl LuFactors {
    /// Factor `A = P·L·U` after RCM reordering.
    pub fn factor(a: &CsrMatrix) -> Result<Self, LuError> {
        if a.n_rows != a.n_cols {
            return Err(LuError::NotSquare(a.n_rows, a.n_cols));
        }
        let n = a.n_rows;
        let order = rcm_order(a);
        let mut new_of = vec![0usize; n];
        for (new, &old) in order.iter().enumerate() {
            new_of[old] = new;
        }
        // Bandwidth of the reordered matrix.
        let mut kl = 0usize;
        let mut ku = 0usize;
        for r in 0..n {
            let (cols, _) = a.row(r);
            let nr = new_of[r];
            for &c in cols {
                let nc = new_of[c];
                if nr > nc {
                    kl = kl.max(nr - nc);
                } else {
                    ku = ku.max(nc - nr);
                }
            }
        }
        let ldab = 2 * kl + ku + 1;
        let mut ab = vec![0.0f64; ldab * n];
        for r in 0..n {
            let (cols, vals) = a.row(r);
            let nr = new_of[r];
            for (&c, &v) in cols.iter().zip(vals) {
                let nc = new_of[c];
                ab[nc * ldab + (kl + ku + nr - nc)] += v;
            }
        }

        // Banded LU with partial pivoting (dgbtrf-style).
        let mut pivot = vec![0usize; n];
        for j in 0..n {
            let pmax = (j + kl).min(n - 1);
            // Pivot search in column j, rows j..=pmax.
            let mut piv = j;
            let mut pval = ab[j * ldab + (kl + ku)].abs();
            for i in j + 1..=pmax {
                let v = ab[j * ldab + (kl + ku + i - j)].abs();
                if v > pval {
                    pval = v;
                    piv = i;
                }
            }
            if pval == 0.0 {
                return Err(LuError::Singular(j));
            }
            pivot[j] = piv;
            let jmax = (j + kl + ku).min(n - 1);
            if piv != j {
                for c in j..=jmax {
                    let off = kl + ku;
                    ab.swap(c * ldab + off + j - c, c * ldab + off + piv - c);
                }
            }
            let diag = ab[j * ldab + (kl + ku)];
            for i in j + 1..=pmax {
                let m = ab[j * ldab + (kl + ku + i - j)] / diag;
                ab[j * ldab + (kl + ku + i - j)] = m;
                if m != 0.0 {
                    for c in j + 1..=jmax {
                        let ujc = ab[c * ldab + (kl + ku + j - c)];
                        if ujc != 0.0 {
                            ab[c * ldab + (kl + ku + i - c)] -= m * ujc;
                        }
                    }
                }
            }
        }
        Ok(Self { n, order, kl, ku, ab, ldab, pivot })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Solve `A·x = b` using the cached factorization.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let (n, kl, ku, ldab) = (self.n, self.kl, self.ku, self.ldab);
        let mut y: Vec<f64> = (0..n).map(|i| b[self.order[i]]).collect();
        // Forward: apply pivots and L.
        for j in 0..n {
            y.swap(j, self.pivot[j]);
            let yj = y[j];
            if yj != 0.0 {
                let imax = (j + kl).min(n - 1);
                for i in j + 1..=imax {
                    y[i] -= self.ab[j * ldab + (kl + ku + i - j)] * yj;
                }
            }
        }
        // Backward: U.
        for j in (0..n).rev() {
            let jmin = j.saturating_sub(kl + ku);
            y[j] /= self.ab[j * ldab + (kl + ku)];
            let yj = y[j];
            if yj != 0.0 {
                for i in jmin..j {
                    y[i] -= self.ab[j * ldab + (kl + ku + i - j)] * yj;
                }
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.order.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }

    pub fn solve_into(&self, b: &[f64], x: &mut [f64]) {
        x.copy_from_slice(&self.solve(b));
    }
}

/// Convenience one-shot solve.
pub fn lu_solve(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>, LuError> {
    Ok(LuFactors::factor(a)?.solve(b))
}

/// Reverse Cuthill–McKee ordering on the symmetrized pattern of `a`.
/// Returns `order[new] = old`.
fn rcm_order(a: &CsrMatrix) -> Vec<usize> {
    let n = a.n_rows;
    // Symmetrized adjacency (excluding the diagonal).
    let mut adj = vec![Vec::new(); n];
    for r in 0..n {
        let (cols, _) = a.row(r);
        for &c in cols {
            if c != r {
                adj[r].push(c);
                adj[c].push(r);
            }
        }
    }
    for l in &mut adj {
        l.sort_unstable();
        l.dedup();
    }
    let degree: Vec<usize> = adj.iter().map(|l| l.len()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = std::collections::VecDeque::new();
    // Process each connected component from its minimum-degree vertex.
    let mut seeds: Vec<usize> = (0..n).collect();
    seeds.sort_by_key(|&v| (degree[v], v));
    for seed in seeds {
        if visited[seed] {
            continue;
        }
        visited[seed] = true;
        queue.push_back(seed);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nbrs: Vec<usize> =
                adj[v].iter().copied().filter(|&u| !visited[u]).collect();
            nbrs.sort_by_key(|&u| (degree[u], u));
            for u in nbrs {
                visited[u] = true;
                queue.push_back(u);
            }
        }
    }
    order.reverse();
    order
}
