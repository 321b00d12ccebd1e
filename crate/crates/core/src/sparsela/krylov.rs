//! GMRES and FGMRES with right preconditioning, plus a damped Jacobi
//! smoother.
//!
//! Right preconditioning means the residual history holds true residual
//! norms of the original system, so different preconditioners can be
//! compared directly.

use super::CsrMatrix;

/// Abstract square operator `y = A·x`.
pub trait LinOp {
    fn n(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl LinOp for CsrMatrix {
    fn n(&self) -> usize {
        assert_eq!(self.n_rows, self.n_cols);
        self.n_rows
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.spmv_into(x, y);
    }
}

/// Preconditioner action `z ≈ A⁻¹·r`. The action may be nonlinear across
/// calls (e.g. an inner iterative solve); such preconditioners are only
/// valid inside FGMRES.
pub trait Precond {
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

pub struct IdentityPrecond;

impl Precond for IdentityPrecond {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

impl<F: Fn(&[f64], &mut [f64])> Precond for F {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        self(r, z)
    }
}

/// Stopping-rule and size parameters shared by the outer and inner Krylov
/// solvers. Convergence: `‖r‖ < max(rtol·‖b‖, atol)`; divergence:
/// `‖r‖ > dtol·‖b‖`.
#[derive(Debug, Clone)]
pub struct KrylovConfig {
    pub rtol: f64,
    pub atol: f64,
    pub dtol: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    /// Restart length; `None` keeps the full Krylov basis up to `max_outer`.
    pub restart: Option<usize>,
}

impl Default for KrylovConfig {
    fn default() -> Self {
        Self { rtol: 1e-5, atol: 1e-50, dtol: 1e5, max_outer: 200, max_inner: 100, restart: None }
    }
}

/// Outcome of the PETSc-style stopping test for one residual norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopCheck {
    Continue,
    Converged,
    Diverged,
}

/// Convergence when `‖r‖ < max(rtol·‖b‖, atol)`, divergence when
/// `‖r‖ > dtol·‖b‖`.
pub fn stopping_check(rnorm: f64, bnorm: f64, cfg: &KrylovConfig) -> StopCheck {
    if rnorm < (cfg.rtol * bnorm).max(cfg.atol) {
        StopCheck::Converged
    } else if rnorm > cfg.dtol * bnorm {
        StopCheck::Diverged
    } else {
        StopCheck::Continue
    }
}

#[derive(Debug, Clone)]
pub struct KrylovReport {
    pub iterations: usize,
    pub final_residual_norm: f64,
    pub converged: bool,
    pub diverged: bool,
    /// True residual norms; `history[0] = ‖b − A·x₀‖` and one entry per
    /// iteration after that.
    pub residual_history: Vec<f64>,
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// GMRES with a fixed right preconditioner.
pub fn gmres(
    a: &dyn LinOp,
    b: &[f64],
    m: &dyn Precond,
    cfg: &KrylovConfig,
    x0: &[f64],
) -> (Vec<f64>, KrylovReport) {
    // With a fixed preconditioner the flexible algorithm generates the
    // identical iterate sequence, so one engine serves both entry points.
    fgmres(a, b, m, cfg, x0)
}

/// Flexible GMRES: the preconditioner action may change between
/// iterations. Stores the preconditioned basis Z so the solution update
/// never needs to re-apply M.
pub fn fgmres(
    a: &dyn LinOp,
    b: &[f64],
    m: &dyn Precond,
    cfg: &KrylovConfig,
    x0: &[f64],
) -> (Vec<f64>, KrylovReport) {
    let n = a.n();
    assert_eq!(b.len(), n);
    assert_eq!(x0.len(), n);
    assert!(cfg.rtol > 0.0 && cfg.atol > 0.0 && cfg.dtol > 0.0 && cfg.max_outer >= 1);

    let bnorm = norm2(b);
    let cycle = cfg.restart.unwrap_or(cfg.max_outer).max(1);

    let mut x = x0.to_vec();
    let mut r = vec![0.0; n];
    a.apply(&x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut rnorm = norm2(&r);
    let mut history = vec![rnorm];
    let mut total_iters = 0usize;
    let mut converged = stopping_check(rnorm, bnorm, cfg) == StopCheck::Converged;
    let mut diverged = false;

    'outer: while !converged && !diverged && total_iters < cfg.max_outer {
        let steps = cycle.min(cfg.max_outer - total_iters);
        // Arnoldi basis V, preconditioned vectors Z, Hessenberg H (column
        // major, column j has j+2 entries), Givens rotations, rhs g.
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|&vi| vi / rnorm).collect()];
        let mut z: Vec<Vec<f64>> = Vec::new();
        let mut h: Vec<Vec<f64>> = Vec::new();
        let mut givens: Vec<(f64, f64)> = Vec::new();
        let mut g = vec![rnorm];
        let mut cols = 0usize;

        for j in 0..steps {
            let mut zj = vec![0.0; n];
            m.apply(&v[j], &mut zj);
            let mut w = vec![0.0; n];
            a.apply(&zj, &mut w);
            z.push(zj);
            // Modified Gram–Schmidt.
            let mut hcol = Vec::with_capacity(j + 2);
            for vi in v.iter() {
                let hij = dot(&w, vi);
                for (wk, vk) in w.iter_mut().zip(vi) {
                    *wk -= hij * vk;
                }
                hcol.push(hij);
            }
            let hnext = norm2(&w);
            hcol.push(hnext);
            // Apply existing rotations to the new column.
            for (i, &(c, s)) in givens.iter().enumerate() {
                let t = c * hcol[i] + s * hcol[i + 1];
                hcol[i + 1] = -s * hcol[i] + c * hcol[i + 1];
                hcol[i] = t;
            }
            // New rotation zeroing the subdiagonal.
            let (hj, hj1) = (hcol[j], hcol[j + 1]);
            let rho = (hj * hj + hj1 * hj1).sqrt();
            let (c, s) = if rho == 0.0 { (1.0, 0.0) } else { (hj / rho, hj1 / rho) };
            hcol[j] = rho;
            hcol[j + 1] = 0.0;
            givens.push((c, s));
            g.push(-s * g[j]);
            g[j] *= c;
            h.push(hcol);
            cols = j + 1;
            total_iters += 1;
            // |g[j+1]| is the true residual norm of the current iterate
            // (right preconditioning, no restart within the cycle).
            rnorm = g[j + 1].abs();
            history.push(rnorm);
            match stopping_check(rnorm, bnorm, cfg) {
                StopCheck::Converged => converged = true,
                StopCheck::Diverged => diverged = true,
                StopCheck::Continue => {}
            }
            if converged || diverged || total_iters >= cfg.max_outer {
                update_solution(&mut x, &h, &g, &z, cols);
                if converged || diverged {
                    break 'outer;
                }
                break;
            }
            if hnext == 0.0 {
                // Lucky breakdown: exact solution found.
                update_solution(&mut x, &h, &g, &z, cols);
                converged = stopping_check(rnorm, bnorm, cfg) == StopCheck::Converged;
                break 'outer;
            }
            v.push(w.iter().map(|&wk| wk / hnext).collect());
        }
        if !converged && !diverged {
            if total_iters >= cfg.max_outer {
                break;
            }
            // Restart: recompute the residual from the updated iterate.
            update_solution(&mut x, &h, &g, &z, cols);
            a.apply(&x, &mut r);
            for i in 0..n {
                r[i] = b[i] - r[i];
            }
            rnorm = norm2(&r);
            continue;
        }
    }

    // Report the recomputed true residual of the returned iterate.
    a.apply(&x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let final_residual_norm = norm2(&r);
    let report = KrylovReport {
        iterations: total_iters,
        final_residual_norm,
        converged,
        diverged,
        residual_history: history,
    };
    (x, report)
}

/// Solve the triangular least-squares system accumulated so far and add
/// `Z·y` onto `x`. Mutates nothing else; callable mid-cycle.
fn update_solution(x: &mut [f64], h: &[Vec<f64>], g: &[f64], z: &[Vec<f64>], cols: usize) {
    if cols == 0 {
        return;
    }
    let mut y = vec![0.0; cols];
    for i in (0..cols).rev() {
        let mut s = g[i];
        for (j, yj) in y.iter().enumerate().take(cols).skip(i + 1) {
            s -= h[j][i] * yj;
        }
        y[i] = s / h[i][i];
    }
    for (j, yj) in y.iter().enumerate() {
        for (xi, zi) in x.iter_mut().zip(&z[j]) {
            *xi += yj * zi;
        }
    }
}

/// `sweeps` damped-Jacobi iterations `x ← x + ω·D⁻¹(b − A·x)`.
/// Panics on a zero diagonal entry.
pub fn jacobi_smooth(a: &CsrMatrix, b: &[f64], x: &mut [f64], sweeps: usize, omega: f64) {
    let diag = a.diagonal();
    assert!(diag.iter().all(|&d| d != 0.0), "jacobi_smooth: zero diagonal entry");
    let mut r = vec![0.0; x.len()];
    for _ in 0..sweeps {
        a.spmv_into(x, &mut r);
        for i in 0..x.len() {
            x[i] += omega * (b[i] - r[i]) / diag[i];
        }
    }
}
