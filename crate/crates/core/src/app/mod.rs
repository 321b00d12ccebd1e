//! Application layer: scenario resolution, synthetic-geography generators,
//! output writers, and the scalability benchmark harness.

pub mod bench;
pub mod config;
pub mod output;

use std::path::Path;

use thiserror::Error;

use crate::decomp::{add_overlap, build_coarse_space, partition, CoarseSpace, Decomposition};
use crate::mesh::{read_mesh, refine_uniform, unit_square_mesh, Mesh, MeshError};
use crate::seird::{
    LinearSolver, ModelParameters, PicardConfig, ProblemSpec, SolveError, State, C_I, C_S,
    N_COMPARTMENTS,
};
use crate::sparsela::KrylovConfig;
use config::{multi_gaussian_ic, ConfigError, IcSpec, MeshSpec, Scenario};

#[derive(Debug, Error)]
pub enum AppError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Invalid(String),
}

/// A scenario resolved into concrete objects, ready to run.
pub struct Prepared {
    pub mesh: Mesh,
    pub state0: State,
    pub spec: ProblemSpec,
    pub solver: LinearSolver,
    pub params: ModelParameters,
    pub picard: PicardConfig,
    pub dt: f64,
    pub steps: usize,
    pub output_cadence: usize,
}

impl Prepared {
    pub fn dofs(&self) -> usize {
        N_COMPARTMENTS * self.mesh.n_vertices()
    }
}

/// Build meshes, decompositions, the coarse space, the initial state, and
/// the solver from a resolved scenario.
pub fn prepare(scenario: &Scenario) -> Result<Prepared, AppError> {
    // Two-grid preconditioners need a nested coarse mesh, so generated
    // square meshes are built by refining the half-resolution mesh.
    let (mesh, pair) = match &scenario.mesh {
        MeshSpec::Square { n } => {
            if scenario.pc.is_two_grid() {
                if n % 2 != 0 {
                    return Err(AppError::Invalid(format!(
                        "two-grid preconditioners need an even mesh.n for nesting, got {n}"
                    )));
                }
                let pair = refine_uniform(&unit_square_mesh(n / 2)?);
                (pair.fine.clone(), Some(pair))
            } else {
                (unit_square_mesh(*n)?, None)
            }
        }
        MeshSpec::File { path } => {
            if scenario.pc.is_two_grid() {
                return Err(AppError::Invalid(
                    "two-grid preconditioners require a generated square mesh (nested coarse grid); \
                     use pc = ras1/asm with mesh files"
                        .into(),
                ));
            }
            (read_mesh(path)?, None)
        }
    };

    let solver = if scenario.pc == crate::schwarz::PcKind::None && scenario.subdomains <= 1 {
        LinearSolver::Direct
    } else {
        let decomp = make_decomp(&mesh, scenario.subdomains, scenario.overlap);
        let (coarse, coarse_decomp): (Option<CoarseSpace>, Option<Decomposition>) = match &pair {
            Some(p) => (
                Some(build_coarse_space(p)),
                Some(make_decomp(&p.coarse, scenario.subdomains, scenario.overlap)),
            ),
            None => (None, None),
        };
        LinearSolver::Krylov {
            pc: scenario.pc,
            decomp,
            coarse,
            coarse_decomp,
            outer: scenario.outer.clone(),
            inner: KrylovConfig::default(),
        }
    };

    let state0 = build_initial_state(&mesh, &scenario.ic)?;
    let spec = ProblemSpec {
        bc: crate::seird::BoundaryCondition::NoFlux,
        forcing: None,
        beta_scale: scenario.beta_field.map(|bf| bf.to_beta_fn()),
    };
    Ok(Prepared {
        mesh,
        state0,
        spec,
        solver,
        params: scenario.params,
        picard: scenario.picard,
        dt: scenario.dt,
        steps: scenario.steps,
        output_cadence: scenario.output_cadence,
    })
}

fn make_decomp(mesh: &Mesh, subdomains: usize, overlap: usize) -> Decomposition {
    let base = partition(mesh, subdomains.max(1));
    if overlap >= 1 && subdomains > 1 {
        add_overlap(&base, mesh, overlap)
    } else {
        base
    }
}

fn build_initial_state(mesh: &Mesh, ic: &IcSpec) -> Result<State, AppError> {
    let nv = mesh.n_vertices();
    let (s, i) = match ic {
        IcSpec::CenterGaussian { total_density, decay } => {
            let ([lx, ly], [hx, hy]) = mesh.bounding_box();
            let center = [(lx + hx) / 2.0, (ly + hy) / 2.0];
            let i = config::gaussian_ic(mesh, center, 0.1 * total_density, *decay);
            let s: Vec<f64> = i.iter().map(|&iv| total_density - iv).collect();
            (s, i)
        }
        IcSpec::Uniform { total_density, infected_fraction } => {
            let density = total_density / mesh.total_measure();
            let i = vec![infected_fraction * density; nv];
            let s = vec![(1.0 - infected_fraction) * density; nv];
            (s, i)
        }
        IcSpec::MultiGaussian { pulses, infected_fraction } => {
            let n = multi_gaussian_ic(mesh, pulses)?;
            let i: Vec<f64> = n.iter().map(|&v| infected_fraction * v).collect();
            let s: Vec<f64> = n.iter().map(|&v| (1.0 - infected_fraction) * v).collect();
            (s, i)
        }
    };
    let mut state: State = std::array::from_fn(|_| vec![0.0; nv]);
    state[C_S] = s;
    state[C_I] = i;
    Ok(state)
}

/// Run a prepared scenario, writing the time-series CSV and cadenced VTK
/// snapshots into `out_dir`.
pub fn run_prepared(p: &Prepared, out_dir: &Path) -> Result<Vec<crate::seird::StepRecord>, AppError> {
    std::fs::create_dir_all(out_dir)?;
    let cadence = p.output_cadence;
    let mesh = &p.mesh;
    let mut snapshot_err: Option<std::io::Error> = None;
    let (_, records) = crate::seird::run_simulation(
        mesh,
        &p.params,
        &p.spec,
        p.state0.clone(),
        p.dt,
        p.steps,
        &p.picard,
        &p.solver,
        |rec, state| {
            if cadence > 0 && rec.step % cadence == 0 && snapshot_err.is_none() {
                let path = out_dir.join(format!("fields_{}.vtk", rec.step));
                if let Err(e) = output::write_vtk(&path, mesh, state) {
                    snapshot_err = Some(e);
                }
            }
        },
    )?;
    if let Some(e) = snapshot_err {
        return Err(AppError::Io(e));
    }
    output::write_timeseries(&out_dir.join("timeseries.csv"), &records)?;
    Ok(records)
}
