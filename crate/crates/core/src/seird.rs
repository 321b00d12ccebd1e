//! P1 finite-element discretization of the SEIRD reaction–diffusion model
//! with density-dependent diffusion and an Allee transmission factor,
//! advanced by backward Euler with a Picard sweep that updates the
//! compartments sequentially (S, E, I, R, D) within each iteration.

use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use thiserror::Error;

use crate::decomp::{CoarseSpace, Decomposition};
use crate::mesh::Mesh;
use crate::schwarz::{make_preconditioner, PcKind, SchwarzError};
use crate::sparsela::{fgmres, gmres, CsrMatrix, KrylovConfig, LuError, LuFactors};

pub const C_S: usize = 0;
pub const C_E: usize = 1;
pub const C_I: usize = 2;
pub const C_R: usize = 3;
pub const C_D: usize = 4;
pub const N_COMPARTMENTS: usize = 5;
pub const COMPARTMENT_NAMES: [&str; N_COMPARTMENTS] = ["s", "e", "i", "r", "d"];

/// Nodal values of the five compartment densities.
pub type State = [Vec<f64>; N_COMPARTMENTS];

#[derive(Debug, Clone, Copy)]
pub struct ModelParameters {
    /// Allee threshold A in the transmission factor (1 − A/N).
    pub allee: f64,
    /// Exposed-to-susceptible transmission rate β_E.
    pub beta_e: f64,
    /// Infected-to-susceptible transmission rate β_I.
    pub beta_i: f64,
    /// Base diffusivities ν̄ per compartment; the deceased compartment does
    /// not diffuse, so `nu[C_D]` must be 0.
    pub nu: [f64; N_COMPARTMENTS],
    /// Exposed → infected rate σ.
    pub sigma: f64,
    /// Exposed → recovered rate γ_E.
    pub gamma_e: f64,
    /// Infected → recovered rate γ_R.
    pub gamma_r: f64,
    /// Infected → deceased rate γ_D.
    pub gamma_d: f64,
}

/// Boundary value sampler: (compartment, position, time) → value.
pub type FieldFn = Box<dyn Fn(usize, [f64; 2], f64) -> f64 + Sync>;
/// Flux sampler: (compartment, facet label, position, time) → ∇u·n̂.
pub type FluxFn = Box<dyn Fn(usize, i32, [f64; 2], f64) -> f64 + Sync>;

pub enum BoundaryCondition {
    /// Homogeneous Neumann (no flux) on the whole boundary; the default.
    NoFlux,
    /// Prescribed values on every boundary vertex (row replacement).
    Dirichlet(FieldFn),
    /// Prescribed normal derivative g = ∇u·n̂; enters the right-hand side
    /// as Δt ∮ ν̄_c N g φ ds.
    Neumann(FluxFn),
}

/// Space/time modulation multiplying both β_E and β_I.
pub type BetaFn = Box<dyn Fn([f64; 2], f64) -> f64 + Sync>;

/// The pieces of a problem that are closures rather than plain numbers:
/// boundary conditions, manufactured-solution forcing, and a β(x,t) field.
pub struct ProblemSpec {
    pub bc: BoundaryCondition,
    pub forcing: Option<FieldFn>,
    /// Pointwise factor on β_E and β_I; treated as 1 when absent.
    pub beta_scale: Option<BetaFn>,
}

impl ProblemSpec {
    pub fn no_flux() -> Self {
        Self { bc: BoundaryCondition::NoFlux, forcing: None, beta_scale: None }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PicardConfig {
    /// Relative update tolerance ‖u^{k+1} − u^k‖₂ / ‖u^n‖₂.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for PicardConfig {
    fn default() -> Self {
        Self { tol: 1e-8, max_iters: 50 }
    }
}

/// How each compartment's linear system is solved.
pub enum LinearSolver {
    Direct,
    Krylov {
        pc: PcKind,
        decomp: Decomposition,
        coarse: Option<CoarseSpace>,
        coarse_decomp: Option<Decomposition>,
        outer: KrylovConfig,
        inner: KrylovConfig,
    },
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("linear solve for compartment {compartment} at t = {t}: {reason}")]
    Linear { compartment: usize, t: f64, reason: String },
    #[error(transparent)]
    Precond(#[from] SchwarzError),
    #[error(transparent)]
    Factor(#[from] LuError),
}

#[derive(Debug, Clone, Default)]
pub struct StepReport {
    pub picard_iterations: usize,
    pub picard_converged: bool,
    /// Outer Krylov iterations summed over every linear solve in the step.
    pub krylov_iterations: usize,
    /// Inner coarse-solver iterations, one entry per coarse apply.
    pub coarse_inner_iterations: Vec<usize>,
    pub assemble_seconds: f64,
    /// Preconditioner construction time (local factorizations + coarse
    /// setup), part of every Krylov solve since the matrix changes per
    /// Picard iterate.
    pub pc_setup_seconds: f64,
    pub solve_seconds: f64,
}

static ALLEE_CLAMP_WARNED: AtomicBool = AtomicBool::new(false);

/// Transmission factor (1 − A/N) with N clamped away from zero so a locally
/// vanishing population cannot blow the factor up.
fn allee_factor(a: f64, n: f64) -> f64 {
    if a == 0.0 {
        return 1.0;
    }
    let floor = (a * 1e-6).max(1e-12);
    if n < floor && !ALLEE_CLAMP_WARNED.swap(true, Ordering::Relaxed) {
        eprintln!("warning: total population clamped to {floor:e} in the Allee factor");
    }
    1.0 - a / n.max(floor)
}

/// Sparsity pattern shared by all five systems plus per-cell scatter
/// indices and the boundary vertex list; built once per mesh.
pub struct FemWorkspace {
    pattern: CsrMatrix,
    /// For each cell, (dim+1)² indices into `pattern.values` in row-major
    /// local order.
    scatter: Vec<usize>,
    pub boundary_vertices: Vec<usize>,
}

impl FemWorkspace {
    pub fn new(mesh: &Mesh) -> Self {
        let n = mesh.n_vertices();
        let adj = mesh.vertex_adjacency();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for (v, nbrs) in adj.iter().enumerate() {
            let mut row: Vec<usize> = nbrs.clone();
            row.push(v);
            row.sort_unstable();
            col_idx.extend_from_slice(&row);
            row_ptr.push(col_idx.len());
        }
        let nnz = col_idx.len();
        let pattern = CsrMatrix::new(n, n, row_ptr, col_idx, vec![0.0; nnz]);
        let npc = mesh.dim + 1;
        let mut scatter = Vec::with_capacity(mesh.n_cells() * npc * npc);
        for c in 0..mesh.n_cells() {
            let nodes = mesh.cell(c);
            for &i in nodes {
                let row = &pattern.col_idx[pattern.row_ptr[i]..pattern.row_ptr[i + 1]];
                for &j in nodes {
                    let k = row.binary_search(&j).expect("adjacency covers cell pairs");
                    scatter.push(pattern.row_ptr[i] + k);
                }
            }
        }
        let mut boundary_vertices: Vec<usize> = (0..mesh.n_facets())
            .flat_map(|f| mesh.facet(f).0.iter().copied().collect::<Vec<_>>())
            .collect();
        boundary_vertices.sort_unstable();
        boundary_vertices.dedup();
        FemWorkspace { pattern, scatter, boundary_vertices }
    }

    pub fn n(&self) -> usize {
        self.pattern.n_rows
    }
}

/// Everything that defines one compartment solve inside a Picard sweep.
struct CompartmentSystem<'a> {
    mesh: &'a Mesh,
    params: &'a ModelParameters,
    dt: f64,
    /// Time level t^{n+1}: coefficients, forcing, and boundary data are all
    /// evaluated there (backward Euler).
    t: f64,
    /// Total population N^{n+1,k} of the current Picard iterate, frozen for
    /// the whole sweep.
    n_field: &'a [f64],
}

/// Assemble the backward-Euler system for compartment `c`.
///
/// `cur` holds this sweep's working state: compartments already swept carry
/// their k+1 values, the rest carry iterate k. `old` is u^n for this
/// compartment.
#[allow(clippy::too_many_arguments)]
fn assemble_compartment(
    sys: &CompartmentSystem,
    ws: &FemWorkspace,
    c: usize,
    cur: &State,
    old: &[f64],
    spec: &ProblemSpec,
) -> (CsrMatrix, Vec<f64>) {
    let bc = &spec.bc;
    let forcing = spec.forcing.as_ref();
    let mesh = sys.mesh;
    let p = sys.params;
    let dt = sys.dt;
    let n = ws.n();
    let mut a = ws.pattern.clone();
    let mut rhs = vec![0.0; n];
    let npc = mesh.dim + 1;

    // Reaction coefficient α multiplying u^{k+1} on the left, and source f
    // on the right, both evaluated pointwise from interpolated fields:
    //   S: α = (1−A/N)(β_E e + β_I i),            f = 0
    //   E: α = σ + γ_E − (1−A/N) β_E s,           f = (1−A/N) β_I s i
    //   I: α = γ_R + γ_D,                         f = σ e
    //   R: α = 0,                                 f = γ_R i + γ_E e
    //   D: α = 0,                                 f = γ_D i
    // where s, e, i are the sweep's working values (s, and e/i where noted
    // updated, the rest frozen at iterate k).
    let react = |x: [f64; 2], vals: [f64; N_COMPARTMENTS], nq: f64| -> (f64, f64) {
        let al = allee_factor(p.allee, nq);
        let bs = spec.beta_scale.as_ref().map_or(1.0, |f| f(x, sys.t));
        let (be, bi) = (p.beta_e * bs, p.beta_i * bs);
        let (s, e, i) = (vals[C_S], vals[C_E], vals[C_I]);
        let mut out = match c {
            C_S => (al * (be * e + bi * i), 0.0),
            C_E => (p.sigma + p.gamma_e - al * be * s, al * bi * s * i),
            C_I => (p.gamma_r + p.gamma_d, p.sigma * e),
            C_R => (0.0, p.gamma_r * i + p.gamma_e * e),
            _ => (0.0, p.gamma_d * i),
        };
        if let Some(f) = forcing {
            out.1 += f(c, x, sys.t);
        }
        out
    };

    // Quadrature: 3-point mid-edge rule on triangles, 2-point Gauss on
    // intervals. Both integrate the products of linears appearing here
    // exactly.
    let g1 = 0.5 - 0.5 / 3f64.sqrt();
    let quad_1d = [(g1, 0.5), (1.0 - g1, 0.5)];

    for cell in 0..mesh.n_cells() {
        let nodes = mesh.cell(cell);
        let coords: Vec<[f64; 2]> = nodes.iter().map(|&v| mesh.vertices[v]).collect();
        let measure = mesh.cell_measure(cell);
        let mut local = vec![0.0; npc * npc];
        let mut local_rhs = vec![0.0; npc];

        // Constant P1 gradients.
        let mut grad = vec![[0.0f64; 2]; npc];
        if mesh.dim == 1 {
            grad[0][0] = -1.0 / measure;
            grad[1][0] = 1.0 / measure;
        } else {
            for i in 0..3 {
                let (j, k) = ((i + 1) % 3, (i + 2) % 3);
                grad[i][0] = (coords[j][1] - coords[k][1]) / (2.0 * measure);
                grad[i][1] = (coords[k][0] - coords[j][0]) / (2.0 * measure);
            }
        }

        // (weight, basis values at the point) list for this cell.
        let qpts: Vec<(f64, Vec<f64>)> = if mesh.dim == 1 {
            quad_1d.iter().map(|&(xi, w)| (w * measure, vec![1.0 - xi, xi])).collect()
        } else {
            [[0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]]
                .iter()
                .map(|phi| (measure / 3.0, phi.to_vec()))
                .collect()
        };

        for (w, phi) in &qpts {
            let mut x = [0.0; 2];
            let mut vals = [0.0; N_COMPARTMENTS];
            let mut nq = 0.0;
            let mut old_q = 0.0;
            for (l, &v) in nodes.iter().enumerate() {
                for d in 0..2 {
                    x[d] += phi[l] * mesh.vertices[v][d];
                }
                for cc in 0..N_COMPARTMENTS {
                    vals[cc] += phi[l] * cur[cc][v];
                }
                nq += phi[l] * sys.n_field[v];
                old_q += phi[l] * old[v];
            }
            let (alpha, f) = react(x, vals, nq);
            let diff = dt * p.nu[c] * nq;
            for i in 0..npc {
                for j in 0..npc {
                    let gdot = grad[i][0] * grad[j][0] + grad[i][1] * grad[j][1];
                    local[i * npc + j] +=
                        w * (phi[i] * phi[j] * (1.0 + dt * alpha) + diff * gdot);
                }
                local_rhs[i] += w * phi[i] * (old_q + dt * f);
            }
        }

        let base = cell * npc * npc;
        for i in 0..npc {
            for j in 0..npc {
                a.values[ws.scatter[base + i * npc + j]] += local[i * npc + j];
            }
            rhs[nodes[i]] += local_rhs[i];
        }
    }

    match bc {
        BoundaryCondition::NoFlux => {}
        BoundaryCondition::Neumann(g) => {
            for f in 0..mesh.n_facets() {
                let (fnodes, label) = mesh.facet(f);
                if mesh.dim == 1 {
                    let v = fnodes[0];
                    let x = mesh.vertices[v];
                    rhs[v] += dt * p.nu[c] * sys.n_field[v] * g(c, label, x, sys.t);
                } else {
                    let (va, vb) = (fnodes[0], fnodes[1]);
                    let (pa, pb) = (mesh.vertices[va], mesh.vertices[vb]);
                    let len = ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt();
                    for &(xi, w) in &quad_1d {
                        let x = [pa[0] + xi * (pb[0] - pa[0]), pa[1] + xi * (pb[1] - pa[1])];
                        let nq = (1.0 - xi) * sys.n_field[va] + xi * sys.n_field[vb];
                        let gq = dt * p.nu[c] * nq * g(c, label, x, sys.t) * w * len;
                        rhs[va] += gq * (1.0 - xi);
                        rhs[vb] += gq * xi;
                    }
                }
            }
        }
        BoundaryCondition::Dirichlet(values) => {
            for &v in &ws.boundary_vertices {
                let (start, end) = (a.row_ptr[v], a.row_ptr[v + 1]);
                for k in start..end {
                    a.values[k] = if a.col_idx[k] == v { 1.0 } else { 0.0 };
                }
                rhs[v] = values(c, mesh.vertices[v], sys.t);
            }
        }
    }

    (a, rhs)
}

fn solve_linear(
    a: &CsrMatrix,
    b: &[f64],
    solver: &LinearSolver,
    c: usize,
    t: f64,
    report: &mut StepReport,
) -> Result<Vec<f64>, SolveError> {
    match solver {
        LinearSolver::Direct => Ok(LuFactors::factor(a)?.solve(b)),
        LinearSolver::Krylov { pc, decomp, coarse, coarse_decomp, outer, inner } => {
            let (m, setup) =
                make_preconditioner(*pc, a, decomp, coarse.as_ref(), coarse_decomp.as_ref(), inner)?;
            report.pc_setup_seconds += setup.local_factor_seconds + setup.coarse_setup_seconds;
            // Zero initial guess: warm starts live at the Picard level only,
            // so per-solve iteration counts stay comparable across sweeps.
            let x0 = vec![0.0; b.len()];
            let (x, rep) = if pc.needs_flexible() {
                fgmres(a, b, &m, outer, &x0)
            } else {
                gmres(a, b, &m, outer, &x0)
            };
            report.krylov_iterations += rep.iterations;
            if let Some(cc) = m.coarse() {
                report.coarse_inner_iterations.extend(cc.take_inner_iterations());
            }
            if !rep.converged {
                return Err(SolveError::Linear {
                    compartment: c,
                    t,
                    reason: format!(
                        "Krylov solver stopped after {} iterations, residual {:e}",
                        rep.iterations, rep.final_residual_norm
                    ),
                });
            }
            Ok(x)
        }
    }
}

fn stacked_norm(state: &State) -> f64 {
    state.iter().flat_map(|f| f.iter()).map(|v| v * v).sum::<f64>().sqrt()
}

/// One backward-Euler step by Picard iteration with a sequential
/// compartment sweep. Returns the new state; non-convergence of the Picard
/// loop is reported, not fatal.
#[allow(clippy::too_many_arguments)]
pub fn picard_step(
    mesh: &Mesh,
    ws: &FemWorkspace,
    params: &ModelParameters,
    spec: &ProblemSpec,
    old: &State,
    dt: f64,
    t_new: f64,
    picard: &PicardConfig,
    solver: &LinearSolver,
) -> Result<(State, StepReport), SolveError> {
    let mut report = StepReport::default();
    let denom = {
        let d = stacked_norm(old);
        if d > 0.0 {
            d
        } else {
            1.0
        }
    };
    let mut cur: State = old.clone();
    for k in 0..picard.max_iters {
        let prev = cur.clone();
        let n_field: Vec<f64> =
            (0..ws.n()).map(|v| (0..N_COMPARTMENTS).map(|c| cur[c][v]).sum()).collect();
        let sys = CompartmentSystem { mesh, params, dt, t: t_new, n_field: &n_field };
        for c in 0..N_COMPARTMENTS {
            let t0 = Instant::now();
            let (a, b) = assemble_compartment(&sys, ws, c, &cur, &old[c], spec);
            report.assemble_seconds += t0.elapsed().as_secs_f64();
            let t0 = Instant::now();
            cur[c] = solve_linear(&a, &b, solver, c, t_new, &mut report)?;
            report.solve_seconds += t0.elapsed().as_secs_f64();
        }
        report.picard_iterations = k + 1;
        let mut diff2 = 0.0;
        for c in 0..N_COMPARTMENTS {
            diff2 += cur[c]
                .iter()
                .zip(&prev[c])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
        }
        if diff2.sqrt() / denom < picard.tol {
            report.picard_converged = true;
            break;
        }
    }
    Ok((cur, report))
}

/// Record of one completed time step.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    /// ∫ u_c dx per compartment.
    pub totals: [f64; N_COMPARTMENTS],
    pub report: StepReport,
}

/// ∫ field dx by exact P1 quadrature (cell measure × nodal mean).
pub fn integrate_field(mesh: &Mesh, field: &[f64]) -> f64 {
    let npc = mesh.dim + 1;
    (0..mesh.n_cells())
        .map(|c| {
            let nodes = mesh.cell(c);
            let mean = nodes.iter().map(|&v| field[v]).sum::<f64>() / npc as f64;
            mesh.cell_measure(c) * mean
        })
        .sum()
}

/// March `n_steps` backward-Euler steps from `state0`, invoking `on_step`
/// after each one.
#[allow(clippy::too_many_arguments)]
pub fn run_simulation(
    mesh: &Mesh,
    params: &ModelParameters,
    spec: &ProblemSpec,
    state0: State,
    dt: f64,
    n_steps: usize,
    picard: &PicardConfig,
    solver: &LinearSolver,
    mut on_step: impl FnMut(&StepRecord, &State),
) -> Result<(State, Vec<StepRecord>), SolveError> {
    let ws = FemWorkspace::new(mesh);
    let mut state = state0;
    let mut records = Vec::with_capacity(n_steps);
    for step in 0..n_steps {
        let t_new = (step + 1) as f64 * dt;
        let (next, report) =
            picard_step(mesh, &ws, params, spec, &state, dt, t_new, picard, solver)?;
        state = next;
        let mut totals = [0.0; N_COMPARTMENTS];
        for c in 0..N_COMPARTMENTS {
            totals[c] = integrate_field(mesh, &state[c]);
        }
        let record = StepRecord { step: step + 1, t: t_new, totals, report };
        on_step(&record, &state);
        records.push(record);
    }
    Ok((state, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomp::{add_overlap, partition};
    use crate::mesh::{interval_mesh, unit_square_mesh};

    fn quiet_params() -> ModelParameters {
        ModelParameters {
            allee: 0.0,
            beta_e: 0.0,
            beta_i: 0.0,
            nu: [0.0; 5],
            sigma: 0.0,
            gamma_e: 0.0,
            gamma_r: 0.0,
            gamma_d: 0.0,
        }
    }

    fn baseline_params() -> ModelParameters {
        ModelParameters {
            allee: 0.0,
            beta_e: 3.78e-4,
            beta_i: 3.78e-4,
            nu: [3.94e-6, 3.94e-6, 1e-8, 3.94e-6, 0.0],
            sigma: 1.0 / 7.0,
            gamma_e: 1.0 / 6.0,
            gamma_r: 1.0 / 24.0,
            gamma_d: 1.0 / 160.0,
        }
    }

    fn gaussian_state(mesh: &Mesh) -> State {
        let n = mesh.n_vertices();
        let mut s = vec![0.0; n];
        let mut i = vec![0.0; n];
        for (v, p) in mesh.vertices.iter().enumerate() {
            let r2 = (p[0] - 0.5).powi(2) + (p[1] - 0.5).powi(2);
            i[v] = 200.0 * (-10.0 * r2).exp();
            s[v] = 2000.0 - i[v];
        }
        [s, vec![0.0; n], i, vec![0.0; n], vec![0.0; n]]
    }

    #[test]
    fn element_matrix_matches_hand_computation() {
        // Unit right triangle (0,0)-(1,0)-(0,1), zero reaction, unit N via
        // constant fields summing to 1, pure mass + diffusion.
        let mesh = Mesh::new(
            2,
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![0, 1, 2],
            vec![],
            vec![],
        )
        .unwrap();
        let ws = FemWorkspace::new(&mesh);
        let mut p = quiet_params();
        p.nu[C_S] = 2.0;
        let n = mesh.n_vertices();
        let one = vec![1.0; n];
        let cur: State =
            [one.clone(), vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        let n_field = vec![1.0; n];
        let sys =
            CompartmentSystem { mesh: &mesh, params: &p, dt: 1.0, t: 0.0, n_field: &n_field };
        let (a, rhs) = assemble_compartment(
            &sys,
            &ws,
            C_S,
            &cur,
            &vec![0.0; n],
            &ProblemSpec::no_flux(),
        );
        // Mass matrix: area/12 · (1 + δ_ij) with area = 1/2.
        // Stiffness for ∇φ = (−1,−1), (1,0), (0,1), scaled by Δt·ν·N = 2:
        // K = [[1, −1/2, −1/2], [−1/2, 1/2, 0], [−1/2, 0, 1/2]] × 2.
        let m = |i: usize, j: usize| 1.0 / 24.0 * if i == j { 2.0 } else { 1.0 };
        let k = [[2.0, -1.0, -1.0], [-1.0, 1.0, 0.0], [-1.0, 0.0, 1.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((a.get(i, j) - (m(i, j) + k[i][j])).abs() < 1e-14, "entry ({i},{j})");
            }
            assert!(rhs[i].abs() < 1e-15);
        }
    }

    #[test]
    fn frozen_dynamics_fixed_point() {
        let mesh = unit_square_mesh(4).unwrap();
        let state0 = gaussian_state(&mesh);
        let ws = FemWorkspace::new(&mesh);
        let (state, rep) = picard_step(
            &mesh,
            &ws,
            &quiet_params(),
            &ProblemSpec::no_flux(),
            &state0,
            0.1,
            0.1,
            &PicardConfig::default(),
            &LinearSolver::Direct,
        )
        .unwrap();
        assert!(rep.picard_converged);
        assert_eq!(rep.picard_iterations, 1);
        for c in 0..N_COMPARTMENTS {
            for (a, b) in state[c].iter().zip(&state0[c]) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn mass_conserved_under_no_flux() {
        let mesh = unit_square_mesh(8).unwrap();
        let state0 = gaussian_state(&mesh);
        let total0: f64 = (0..N_COMPARTMENTS).map(|c| integrate_field(&mesh, &state0[c])).sum();
        let picard = PicardConfig { tol: 1e-12, max_iters: 100 };
        let (state, recs) = run_simulation(
            &mesh,
            &baseline_params(),
            &ProblemSpec::no_flux(),
            state0,
            0.5,
            4,
            &picard,
            &LinearSolver::Direct,
            |_, _| {},
        )
        .unwrap();
        assert!(recs.iter().all(|r| r.report.picard_converged));
        let total: f64 = (0..N_COMPARTMENTS).map(|c| integrate_field(&mesh, &state[c])).sum();
        assert!(
            ((total - total0) / total0).abs() < 1e-9,
            "mass drift {:e}",
            (total - total0) / total0
        );
        // Epidemic actually progressed.
        let i_total = integrate_field(&mesh, &state[C_I]);
        assert!(i_total > recs[0].totals[C_I] * 0.0 && state[C_E].iter().any(|&v| v > 0.0));
    }

    #[test]
    fn no_transmission_decays_monotonically() {
        let mesh = unit_square_mesh(4).unwrap();
        let mut p = baseline_params();
        p.beta_e = 0.0;
        p.beta_i = 0.0;
        let state0 = gaussian_state(&mesh);
        let s0 = integrate_field(&mesh, &state0[C_S]);
        let mut i_prev = integrate_field(&mesh, &state0[C_I]);
        let (state, recs) = run_simulation(
            &mesh,
            &p,
            &ProblemSpec::no_flux(),
            state0,
            0.25,
            8,
            &PicardConfig::default(),
            &LinearSolver::Direct,
            |_, _| {},
        )
        .unwrap();
        for r in &recs {
            assert!(r.totals[C_I] < i_prev, "infected must decay without transmission");
            i_prev = r.totals[C_I];
        }
        assert!((integrate_field(&mesh, &state[C_S]) - s0).abs() / s0 < 1e-10);
        assert!(recs.last().unwrap().totals[C_D] > 0.0);
        assert!(recs.last().unwrap().totals[C_R] > 0.0);
    }

    #[test]
    fn diagonal_symmetry_preserved() {
        // IC symmetric under (x,y) ↦ (y,x) on the structured mesh stays
        // symmetric: vertex (i,j) maps to (j,i).
        let n = 6;
        let mesh = unit_square_mesh(n).unwrap();
        let state0 = gaussian_state(&mesh);
        let (state, _) = run_simulation(
            &mesh,
            &baseline_params(),
            &ProblemSpec::no_flux(),
            state0,
            0.5,
            2,
            &PicardConfig { tol: 1e-12, max_iters: 100 },
            &LinearSolver::Direct,
            |_, _| {},
        )
        .unwrap();
        let idx = |i: usize, j: usize| j * (n + 1) + i;
        for c in 0..N_COMPARTMENTS {
            for j in 0..=n {
                for i in 0..=n {
                    let (a, b) = (state[c][idx(i, j)], state[c][idx(j, i)]);
                    assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "compartment {c}");
                }
            }
        }
    }

    #[test]
    fn direct_and_krylov_paths_agree() {
        let mesh = unit_square_mesh(8).unwrap();
        let d = add_overlap(&partition(&mesh, 4), &mesh, 2);
        let krylov = LinearSolver::Krylov {
            pc: PcKind::OneLevelRas,
            decomp: d,
            coarse: None,
            coarse_decomp: None,
            outer: KrylovConfig { rtol: 1e-12, ..Default::default() },
            inner: KrylovConfig::default(),
        };
        let picard = PicardConfig { tol: 1e-10, max_iters: 100 };
        let mut out = Vec::new();
        for solver in [LinearSolver::Direct, krylov] {
            let (state, recs) = run_simulation(
                &mesh,
                &baseline_params(),
                &ProblemSpec::no_flux(),
                gaussian_state(&mesh),
                0.5,
                2,
                &picard,
                &solver,
                |_, _| {},
            )
            .unwrap();
            if matches!(solver, LinearSolver::Krylov { .. }) {
                let total: usize = recs.iter().map(|r| r.report.krylov_iterations).sum();
                assert!(total > 0, "krylov iterations must be accounted");
            }
            out.push(state);
        }
        for c in 0..N_COMPARTMENTS {
            for (a, b) in out[0][c].iter().zip(&out[1][c]) {
                assert!((a - b).abs() <= 1e-6 * a.abs().max(1.0));
            }
        }
    }

    #[test]
    fn dirichlet_rows_pin_boundary_values() {
        let mesh = interval_mesh(8, 1.0).unwrap();
        let n = mesh.n_vertices();
        let state0: State = std::array::from_fn(|_| vec![1.0; n]);
        let bc: FieldFn = Box::new(|c, _x, _t| (c + 2) as f64);
        let (state, _) = run_simulation(
            &mesh,
            &quiet_params(),
            &ProblemSpec { bc: BoundaryCondition::Dirichlet(bc), forcing: None, beta_scale: None },
            state0,
            0.1,
            1,
            &PicardConfig::default(),
            &LinearSolver::Direct,
            |_, _| {},
        )
        .unwrap();
        for c in 0..N_COMPARTMENTS {
            assert!((state[c][0] - (c + 2) as f64).abs() < 1e-12);
            assert!((state[c][n - 1] - (c + 2) as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn neumann_influx_adds_mass() {
        // Constant state, positive prescribed flux on the left boundary of
        // the interval: total susceptible mass must increase by
        // ≈ Δt·ν·N·g (1D boundary integral is a point value).
        let mesh = interval_mesh(16, 1.0).unwrap();
        let n = mesh.n_vertices();
        let mut p = quiet_params();
        p.nu[C_S] = 1e-2;
        let state0: State = std::array::from_fn(|c| vec![if c == C_S { 5.0 } else { 0.0 }; n]);
        let g: FluxFn = Box::new(|c, label, _x, _t| {
            if c == C_S && label == crate::mesh::LABEL_LEFT {
                2.0
            } else {
                0.0
            }
        });
        let dt = 0.05;
        let (state, _) = run_simulation(
            &mesh,
            &p,
            &ProblemSpec { bc: BoundaryCondition::Neumann(g), forcing: None, beta_scale: None },
            state0,
            dt,
            1,
            &PicardConfig { tol: 1e-12, max_iters: 50 },
            &LinearSolver::Direct,
            |_, _| {},
        )
        .unwrap();
        let gain = integrate_field(&mesh, &state[C_S]) - 5.0;
        let expected = dt * p.nu[C_S] * 5.0 * 2.0; // Δt ν N g at the endpoint
        assert!(
            (gain - expected).abs() < 0.05 * expected,
            "gain {gain:e} vs expected {expected:e}"
        );
    }

    #[test]
    fn allee_suppresses_transmission_below_threshold() {
        // With N far below A the factor (1 − A/N) is strongly negative, so
        // the S→E flux reverses sign and susceptibles are not depleted.
        let mesh = unit_square_mesh(3).unwrap();
        let n = mesh.n_vertices();
        let mut p = baseline_params();
        p.allee = 500.0;
        p.beta_e = 3.78e-4;
        p.beta_i = 3.78e-4;
        let mk = |s: f64, i: f64| -> State {
            [vec![s; n], vec![0.0; n], vec![i; n], vec![0.0; n], vec![0.0; n]]
        };
        let picard = PicardConfig { tol: 1e-12, max_iters: 200 };
        let run = |state0: State| {
            run_simulation(
                &mesh,
                &p,
                &ProblemSpec::no_flux(),
                state0,
                0.1,
                1,
                &picard,
                &LinearSolver::Direct,
                |_, _| {},
            )
            .unwrap()
            .0
        };
        let below = run(mk(90.0, 10.0)); // N = 100 < A
        let above = run(mk(1800.0, 200.0)); // N = 2000 > A
        let ds_below = integrate_field(&mesh, &below[C_S]) - 90.0;
        let ds_above = integrate_field(&mesh, &above[C_S]) - 1800.0;
        assert!(ds_below >= 0.0, "below threshold S must not decrease, got {ds_below:e}");
        assert!(ds_above < 0.0, "above threshold the epidemic spreads");
    }

    #[test]
    fn two_grid_solver_runs_with_coarse_accounting() {
        let pair = crate::mesh::refine_uniform(&unit_square_mesh(8).unwrap());
        let d = add_overlap(&partition(&pair.fine, 4), &pair.fine, 2);
        let cs = crate::decomp::build_coarse_space(&pair);
        let solver = LinearSolver::Krylov {
            pc: PcKind::TwoGridRasV3,
            decomp: d,
            coarse: Some(cs),
            coarse_decomp: None,
            outer: KrylovConfig { rtol: 1e-10, ..Default::default() },
            inner: KrylovConfig::default(),
        };
        let (_, recs) = run_simulation(
            &pair.fine,
            &baseline_params(),
            &ProblemSpec::no_flux(),
            gaussian_state(&pair.fine),
            0.5,
            1,
            &PicardConfig::default(),
            &solver,
            |_, _| {},
        )
        .unwrap();
        let r = &recs[0].report;
        assert!(r.picard_converged);
        // One coarse apply per outer iteration (plus none elsewhere).
        assert_eq!(r.coarse_inner_iterations.len(), r.krylov_iterations);
        assert!(r.coarse_inner_iterations.iter().all(|&it| it >= 1));
    }
}
