//! Smoothed-aggregation algebraic multigrid: setup of a Galerkin hierarchy
//! from matrix entries alone, and a linear V(1,1) cycle with damped-Jacobi
//! smoothing used as a preconditioner for the coarse-problem GMRES.

use thiserror::Error;

use crate::sparsela::{CsrMatrix, LuError, LuFactors};

#[derive(Debug, Error)]
pub enum AmgError {
    #[error("zero diagonal entry at row {0}")]
    ZeroDiagonal(usize),
    #[error("coarsest-level factorization failed: {0}")]
    CoarseFactor(#[from] LuError),
}

#[derive(Debug, Clone)]
pub struct AmgOptions {
    /// Keep off-diagonals with |a_ij| ≥ θ·√(|a_ii·a_jj|).
    pub strength_threshold: f64,
    pub max_levels: usize,
    /// Solve directly once a level has at most this many dofs.
    pub coarse_size: usize,
    pub smoother_omega: f64,
    pub pre_sweeps: usize,
    pub post_sweeps: usize,
}

impl Default for AmgOptions {
    fn default() -> Self {
        Self {
            strength_threshold: 0.08,
            max_levels: 20,
            coarse_size: 64,
            smoother_omega: 2.0 / 3.0,
            pre_sweeps: 1,
            post_sweeps: 1,
        }
    }
}

struct Level {
    a: CsrMatrix,
    inv_diag: Vec<f64>,
    /// Interpolation to this level from the next-coarser one; `None` on the
    /// coarsest level.
    p: Option<CsrMatrix>,
    pt: Option<CsrMatrix>,
}

/// Galerkin hierarchy `A_{ℓ+1} = PᵀA_ℓP` with a direct coarsest solve.
pub struct AmgHierarchy {
    levels: Vec<Level>,
    coarse_lu: LuFactors,
    opts: AmgOptions,
    /// Set when coarsening stopped early because a level failed to shrink
    /// by at least 10%.
    pub stagnated: bool,
}

/// Build the hierarchy by greedy aggregation of the strength graph with
/// piecewise-constant tentative interpolation smoothed by one damped-Jacobi
/// step.
pub fn amg_setup(a: &CsrMatrix, opts: AmgOptions) -> Result<AmgHierarchy, AmgError> {
    assert_eq!(a.n_rows, a.n_cols);
    let mut levels: Vec<Level> = Vec::new();
    let mut current = a.clone();
    let mut stagnated = false;
    loop {
        let n = current.n_rows;
        let diag = current.diagonal();
        if let Some(row) = diag.iter().position(|&d| d == 0.0) {
            return Err(AmgError::ZeroDiagonal(row));
        }
        let inv_diag: Vec<f64> = diag.iter().map(|&d| 1.0 / d).collect();
        if n <= opts.coarse_size || levels.len() + 1 >= opts.max_levels {
            levels.push(Level { a: current, inv_diag, p: None, pt: None });
            break;
        }
        let agg = aggregate(&current, opts.strength_threshold);
        let nc = agg.iter().max().map_or(0, |&m| m + 1);
        if nc * 10 > n * 9 {
            // Level failed to shrink by at least 10%: stop the hierarchy
            // here rather than stack useless levels.
            stagnated = true;
            levels.push(Level { a: current, inv_diag, p: None, pt: None });
            break;
        }
        // Tentative piecewise-constant interpolation.
        let tent = CsrMatrix::from_triplets(
            n,
            nc,
            &agg.iter().enumerate().map(|(i, &g)| (i, g, 1.0)).collect::<Vec<_>>(),
        );
        // One damped-Jacobi smoothing step: P = (I − ω·D⁻¹A)·P_tent.
        let omega = opts.smoother_omega;
        let mut damped = current.clone();
        for r in 0..n {
            let scale = omega * inv_diag[r];
            for k in damped.row_ptr[r]..damped.row_ptr[r + 1] {
                let diag_term = if damped.col_idx[k] == r { 1.0 } else { 0.0 };
                damped.values[k] = diag_term - scale * damped.values[k];
            }
        }
        let p = damped.matmul(&tent);
        let pt = p.transpose();
        let coarse = pt.matmul(&current).matmul(&p);
        levels.push(Level { a: current, inv_diag, p: Some(p), pt: Some(pt) });
        current = coarse;
    }
    let coarse_lu = LuFactors::factor(&levels.last().unwrap().a)?;
    Ok(AmgHierarchy { levels, coarse_lu, opts, stagnated })
}

/// Greedy aggregation over the strength graph. Returns the aggregate id of
/// each node.
fn aggregate(a: &CsrMatrix, theta: f64) -> Vec<usize> {
    let n = a.n_rows;
    let diag = a.diagonal();
    let strong: Vec<Vec<usize>> = (0..n)
        .map(|r| {
            let (cols, vals) = a.row(r);
            cols.iter()
                .zip(vals)
                .filter(|&(&c, &v)| c != r && v.abs() >= theta * (diag[r] * diag[c]).abs().sqrt())
                .map(|(&c, _)| c)
                .collect()
        })
        .collect();
    let mut agg = vec![usize::MAX; n];
    let mut next_id = 0usize;
    // Pass 1: seed aggregates from nodes whose strong neighbourhood is
    // entirely unaggregated.
    for i in 0..n {
        if agg[i] == usize::MAX && strong[i].iter().all(|&j| agg[j] == usize::MAX) {
            agg[i] = next_id;
            for &j in &strong[i] {
                agg[j] = next_id;
            }
            next_id += 1;
        }
    }
    // Pass 2: attach leftovers to a neighbouring aggregate, or make them
    // singletons.
    for i in 0..n {
        if agg[i] == usize::MAX {
            if let Some(&j) = strong[i].iter().find(|&&j| agg[j] != usize::MAX) {
                agg[i] = agg[j];
            } else {
                agg[i] = next_id;
                next_id += 1;
            }
        }
    }
    agg
}

impl AmgHierarchy {
    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn level_size(&self, l: usize) -> usize {
        self.levels[l].a.n_rows
    }

    pub fn level_matrix(&self, l: usize) -> &CsrMatrix {
        &self.levels[l].a
    }

    pub fn interpolation(&self, l: usize) -> Option<&CsrMatrix> {
        self.levels[l].p.as_ref()
    }

    /// One V-cycle approximating `A⁻¹·r`. Fixed sweep counts and a zero
    /// initial guess make this a linear operator, so it is usable inside
    /// plain (non-flexible) GMRES.
    pub fn vcycle(&self, r: &[f64]) -> Vec<f64> {
        self.cycle(0, r)
    }

    fn cycle(&self, l: usize, b: &[f64]) -> Vec<f64> {
        let level = &self.levels[l];
        if level.p.is_none() {
            return self.coarse_lu.solve(b);
        }
        let a = &level.a;
        let omega = self.opts.smoother_omega;
        let n = a.n_rows;
        // Pre-smooth from a zero initial guess.
        let mut x = vec![0.0; n];
        let mut ax = vec![0.0; n];
        for s in 0..self.opts.pre_sweeps {
            if s == 0 {
                for i in 0..n {
                    x[i] = omega * level.inv_diag[i] * b[i];
                }
            } else {
                a.spmv_into(&x, &mut ax);
                for i in 0..n {
                    x[i] += omega * level.inv_diag[i] * (b[i] - ax[i]);
                }
            }
        }
        // Coarse correction.
        a.spmv_into(&x, &mut ax);
        let resid: Vec<f64> = (0..n).map(|i| b[i] - ax[i]).collect();
        let rc = level.pt.as_ref().unwrap().spmv(&resid);
        let ec = self.cycle(l + 1, &rc);
        let ef = level.p.as_ref().unwrap().spmv(&ec);
        for i in 0..n {
            x[i] += ef[i];
        }
        // Post-smooth.
        for _ in 0..self.opts.post_sweeps {
            a.spmv_into(&x, &mut ax);
            for i in 0..n {
                x[i] += omega * level.inv_diag[i] * (b[i] - ax[i]);
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparsela::{gmres, KrylovConfig};
    use rand::{Rng, SeedableRng};

    fn laplacian_1d(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, n, &t)
    }

    /// 5-point Laplacian on an m×m grid with Dirichlet elimination.
    fn laplacian_2d(m: usize) -> CsrMatrix {
        let idx = |i: usize, j: usize| j * m + i;
        let mut t = Vec::new();
        for j in 0..m {
            for i in 0..m {
                t.push((idx(i, j), idx(i, j), 4.0));
                if i + 1 < m {
                    t.push((idx(i, j), idx(i + 1, j), -1.0));
                    t.push((idx(i + 1, j), idx(i, j), -1.0));
                }
                if j + 1 < m {
                    t.push((idx(i, j), idx(i, j + 1), -1.0));
                    t.push((idx(i, j + 1), idx(i, j), -1.0));
                }
            }
        }
        CsrMatrix::from_triplets(m * m, m * m, &t)
    }

    #[test]
    fn laplacian_hierarchy_shrinks() {
        let a = laplacian_1d(64);
        let h = amg_setup(&a, AmgOptions { coarse_size: 8, ..Default::default() }).unwrap();
        assert!(h.n_levels() >= 2);
        for l in 1..h.n_levels() {
            assert!(
                h.level_size(l) <= h.level_size(l - 1) / 2,
                "level {l}: {} vs {}",
                h.level_size(l),
                h.level_size(l - 1)
            );
        }
        assert!(!h.stagnated);
    }

    #[test]
    fn diagonal_matrix_single_level() {
        let a = CsrMatrix::from_triplets(
            128,
            128,
            &(0..128).map(|i| (i, i, 1.0 + i as f64)).collect::<Vec<_>>(),
        );
        let h = amg_setup(&a, AmgOptions::default()).unwrap();
        // No strong connections: every aggregate is a singleton, coarsening
        // stagnates and the hierarchy stays single-level.
        assert_eq!(h.n_levels(), 1);
        assert!(h.stagnated);
        // The degenerate V-cycle is then an exact solve.
        let b: Vec<f64> = (0..128).map(|i| i as f64).collect();
        let x = h.vcycle(&b);
        for i in 0..128 {
            assert!((x[i] - b[i] / (1.0 + i as f64)).abs() < 1e-12);
        }
    }

    #[test]
    fn galerkin_product_is_definitional() {
        let a = laplacian_1d(40);
        let h = amg_setup(&a, AmgOptions { coarse_size: 4, ..Default::default() }).unwrap();
        assert!(h.n_levels() >= 2);
        let p = h.interpolation(0).unwrap();
        let explicit = p.transpose().matmul(&a).matmul(p);
        let coarse = h.level_matrix(1);
        assert_eq!(explicit.col_idx, coarse.col_idx);
        for (x, y) in explicit.values.iter().zip(&coarse.values) {
            assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }

    #[test]
    fn zero_diagonal_rejected() {
        let a = CsrMatrix::from_triplets(3, 3, &[(0, 0, 1.0), (1, 2, 1.0), (2, 1, 1.0)]);
        assert!(matches!(amg_setup(&a, AmgOptions::default()), Err(AmgError::ZeroDiagonal(_))));
    }

    #[test]
    fn vcycle_zero_and_linearity() {
        let a = laplacian_2d(17);
        let h = amg_setup(&a, AmgOptions::default()).unwrap();
        let zero = h.vcycle(&vec![0.0; a.n_rows]);
        assert!(zero.iter().all(|&v| v == 0.0));

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let r1: Vec<f64> = (0..a.n_rows).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r2: Vec<f64> = (0..a.n_rows).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (alpha, beta) = (0.37, -2.11);
        let combo: Vec<f64> =
            r1.iter().zip(&r2).map(|(a1, a2)| alpha * a1 + beta * a2).collect();
        let v1 = h.vcycle(&r1);
        let v2 = h.vcycle(&r2);
        let vc = h.vcycle(&combo);
        let scale: f64 = vc.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for i in 0..vc.len() {
            assert!(
                (vc[i] - (alpha * v1[i] + beta * v2[i])).abs() <= 1e-12 * scale,
                "nonlinear at {i}"
            );
        }
    }

    #[test]
    fn preconditions_2d_laplacian_quickly() {
        let a = laplacian_2d(33);
        let h = amg_setup(&a, AmgOptions::default()).unwrap();
        let b = vec![1.0; a.n_rows];
        let m = |r: &[f64], z: &mut [f64]| z.copy_from_slice(&h.vcycle(r));
        let cfg = KrylovConfig { rtol: 1e-8, ..Default::default() };
        let (_, rep) = gmres(&a, &b, &m, &cfg, &vec![0.0; a.n_rows]);
        assert!(rep.converged);
        assert!(rep.iterations <= 25, "iterations {}", rep.iterations);
    }

    #[test]
    fn mesh_independence_trend() {
        // Iterations should grow by less than 2x when dofs grow 4x.
        let mut iters = Vec::new();
        for m in [33usize, 65] {
            let a = laplacian_2d(m);
            let h = amg_setup(&a, AmgOptions::default()).unwrap();
            let b = vec![1.0; a.n_rows];
            let pc = |r: &[f64], z: &mut [f64]| z.copy_from_slice(&h.vcycle(r));
            let cfg = KrylovConfig { rtol: 1e-8, ..Default::default() };
            let (_, rep) = gmres(&a, &b, &pc, &cfg, &vec![0.0; a.n_rows]);
            assert!(rep.converged);
            iters.push(rep.iterations);
        }
        assert!(iters[1] < 2 * iters[0], "iters {iters:?}");
    }
}
