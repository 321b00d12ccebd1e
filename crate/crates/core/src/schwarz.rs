//! Overlapping Schwarz preconditioners: one-level ASM and RAS built from
//! per-subdomain direct solves, and the multiplicative two-grid RAS with a
//! direct, GMRES+RAS, or GMRES+AMG coarse solver.

use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::amg::{amg_setup, AmgError, AmgHierarchy, AmgOptions};
use crate::decomp::{build_restrictions, CoarseSpace, Decomposition, Restriction};
use crate::sparsela::{gmres, CsrMatrix, KrylovConfig, LuError, LuFactors, Precond};

#[derive(Debug, Error)]
pub enum SchwarzError {
    #[error("singular local block on subdomain {subdomain}: {source}")]
    SingularLocal {
        subdomain: usize,
        #[source]
        source: LuError,
    },
    #[error("coarse operator factorization failed: {0}")]
    CoarseFactor(#[from] LuError),
    #[error("coarse AMG setup failed: {0}")]
    CoarseAmg(#[from] AmgError),
    #[error("two-grid preconditioner requires a coarse space")]
    MissingCoarseSpace,
    #[error("coarse GMRES+RAS solver requires a coarse-mesh decomposition")]
    MissingCoarseDecomposition,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OneLevelVariant {
    /// Additive Schwarz: overlap contributions added twice.
    Asm,
    /// Restricted additive Schwarz: partition-of-unity masking.
    Ras,
}

/// One-level Schwarz action `v ↦ Σ R_iᵀ [D_i] (R_i A R_iᵀ)⁻¹ R_i v`.
pub struct SchwarzPreconditioner {
    restrictions: Vec<Restriction>,
    local_lu: Vec<LuFactors>,
    variant: OneLevelVariant,
    n: usize,
}

/// Build the one-level preconditioner: extract and factor each principal
/// submatrix `R_i A R_iᵀ`.
pub fn build_one_level(
    a: &CsrMatrix,
    d: &Decomposition,
    variant: OneLevelVariant,
) -> Result<SchwarzPreconditioner, SchwarzError> {
    let n = a.n_rows;
    let restrictions = build_restrictions(d, n);
    let local_lu: Vec<Result<LuFactors, SchwarzError>> = restrictions
        .par_iter()
        .enumerate()
        .map(|(i, r)| {
            LuFactors::factor(&a.principal_submatrix(&r.dofs))
                .map_err(|source| SchwarzError::SingularLocal { subdomain: i, source })
        })
        .collect();
    let local_lu = local_lu.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(SchwarzPreconditioner { restrictions, local_lu, variant, n })
}

impl SchwarzPreconditioner {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Refactor the local blocks for a new matrix with the same
    /// decomposition (every Picard iteration changes A).
    pub fn refactor(&mut self, a: &CsrMatrix) -> Result<(), SchwarzError> {
        let fresh: Vec<Result<LuFactors, SchwarzError>> = self
            .restrictions
            .par_iter()
            .enumerate()
            .map(|(i, r)| {
                LuFactors::factor(&a.principal_submatrix(&r.dofs))
                    .map_err(|source| SchwarzError::SingularLocal { subdomain: i, source })
            })
            .collect();
        self.local_lu = fresh.into_iter().collect::<Result<Vec<_>, _>>()?;
        Ok(())
    }

    pub fn apply_into(&self, r: &[f64], z: &mut [f64]) {
        assert_eq!(r.len(), self.n);
        // Local solves fan out; the scatter is serial in subdomain order so
        // the result is independent of the thread count.
        let locals: Vec<Vec<f64>> = self
            .restrictions
            .par_iter()
            .zip(&self.local_lu)
            .map(|(rest, lu)| {
                let rl: Vec<f64> = rest.dofs.iter().map(|&g| r[g]).collect();
                lu.solve(&rl)
            })
            .collect();
        z.iter_mut().for_each(|v| *v = 0.0);
        for (rest, xl) in self.restrictions.iter().zip(&locals) {
            match self.variant {
                OneLevelVariant::Ras => {
                    for (k, &g) in rest.dofs.iter().enumerate() {
                        if rest.owned[k] {
                            z[g] = xl[k];
                        }
                    }
                }
                OneLevelVariant::Asm => {
                    for (k, &g) in rest.dofs.iter().enumerate() {
                        z[g] += xl[k];
                    }
                }
            }
        }
    }
}

impl Precond for SchwarzPreconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        self.apply_into(r, z);
    }
}

/// How the coarse problem `A_c⁻¹` inside the correction is solved.
pub enum CoarseSolver {
    Direct(LuFactors),
    /// Inner GMRES preconditioned by one-level RAS on the coarse matrix.
    GmresRas { pc: SchwarzPreconditioner, cfg: KrylovConfig },
    /// Inner GMRES preconditioned by one AMG V-cycle.
    GmresAmg { hierarchy: AmgHierarchy, cfg: KrylovConfig },
}

/// Coarse correction `Q = R₀ᵀ A_c⁻¹ R₀` with `A_c = R₀·A·Z` (Galerkin).
pub struct CoarseCorrection {
    pub coarse_space: CoarseSpace,
    pub ac: CsrMatrix,
    solver: CoarseSolver,
    /// Inner Krylov iterations of each coarse apply (empty for Direct).
    pub inner_iterations: Mutex<Vec<usize>>,
    /// Coarse solves that hit the inner iteration cap without converging;
    /// the last iterate is used regardless.
    pub inner_nonconverged: Mutex<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoarseSolverKind {
    Direct,
    GmresRas,
    GmresAmg,
}

impl CoarseCorrection {
    /// Assemble `A_c = R₀·A·Z` and set up the requested solver.
    /// `coarse_decomp` is required for [`CoarseSolverKind::GmresRas`];
    /// `inner_cfg` caps the inner iterations (default 100, rtol 1e-5).
    pub fn build(
        a: &CsrMatrix,
        coarse_space: &CoarseSpace,
        kind: CoarseSolverKind,
        coarse_decomp: Option<&Decomposition>,
        inner_cfg: &KrylovConfig,
    ) -> Result<Self, SchwarzError> {
        let ac = coarse_space.r0.matmul(a).matmul(&coarse_space.z);
        let inner = KrylovConfig {
            max_outer: inner_cfg.max_inner,
            restart: None,
            ..inner_cfg.clone()
        };
        let solver = match kind {
            CoarseSolverKind::Direct => CoarseSolver::Direct(LuFactors::factor(&ac)?),
            CoarseSolverKind::GmresRas => {
                let d = coarse_decomp.ok_or(SchwarzError::MissingCoarseDecomposition)?;
                let pc = build_one_level(&ac, d, OneLevelVariant::Ras)?;
                CoarseSolver::GmresRas { pc, cfg: inner }
            }
            CoarseSolverKind::GmresAmg => {
                let hierarchy = amg_setup(&ac, AmgOptions::default())?;
                CoarseSolver::GmresAmg { hierarchy, cfg: inner }
            }
        };
        Ok(Self {
            coarse_space: coarse_space.clone(),
            ac,
            solver,
            inner_iterations: Mutex::new(Vec::new()),
            inner_nonconverged: Mutex::new(0),
        })
    }

    /// `w ↦ R₀ᵀ·(A_c⁻¹ approximately)·R₀·w`.
    pub fn apply(&self, w: &[f64]) -> Vec<f64> {
        let rc = self.coarse_space.r0.spmv(w);
        let xc = match &self.solver {
            CoarseSolver::Direct(lu) => lu.solve(&rc),
            CoarseSolver::GmresRas { pc, cfg } => {
                let (x, rep) = gmres(&self.ac, &rc, pc, cfg, &vec![0.0; rc.len()]);
                self.record(&rep);
                x
            }
            CoarseSolver::GmresAmg { hierarchy, cfg } => {
                let m = |r: &[f64], z: &mut [f64]| z.copy_from_slice(&hierarchy.vcycle(r));
                let (x, rep) = gmres(&self.ac, &rc, &m, cfg, &vec![0.0; rc.len()]);
                self.record(&rep);
                x
            }
        };
        self.coarse_space.z.spmv(&xc)
    }

    fn record(&self, rep: &crate::sparsela::KrylovReport) {
        self.inner_iterations.lock().unwrap().push(rep.iterations);
        if !rep.converged {
            *self.inner_nonconverged.lock().unwrap() += 1;
        }
    }

    pub fn kind(&self) -> CoarseSolverKind {
        match self.solver {
            CoarseSolver::Direct(_) => CoarseSolverKind::Direct,
            CoarseSolver::GmresRas { .. } => CoarseSolverKind::GmresRas,
            CoarseSolver::GmresAmg { .. } => CoarseSolverKind::GmresAmg,
        }
    }

    /// Drain and return the recorded per-apply inner iteration counts.
    pub fn take_inner_iterations(&self) -> Vec<usize> {
        std::mem::take(&mut self.inner_iterations.lock().unwrap())
    }
}

/// Multiplicative two-grid composition from a zero initial guess:
/// `z₁ = M·r`, `z₂ = z₁ + Q(r − A·z₁)`, `z = z₂ + M(r − A·z₂)`.
/// This three-step procedure is the implemented definition; the closed-form
/// expansion exists only as a test oracle.
pub fn apply_two_grid(
    m_ras: &dyn Precond,
    q: &dyn Fn(&[f64]) -> Vec<f64>,
    a: &CsrMatrix,
    r: &[f64],
) -> Vec<f64> {
    let n = r.len();
    let mut z1 = vec![0.0; n];
    m_ras.apply(r, &mut z1);
    let az1 = a.spmv(&z1);
    let r1: Vec<f64> = (0..n).map(|i| r[i] - az1[i]).collect();
    let qz = q(&r1);
    let z2: Vec<f64> = (0..n).map(|i| z1[i] + qz[i]).collect();
    let az2 = a.spmv(&z2);
    let r2: Vec<f64> = (0..n).map(|i| r[i] - az2[i]).collect();
    let mut z3 = vec![0.0; n];
    m_ras.apply(&r2, &mut z3);
    (0..n).map(|i| z2[i] + z3[i]).collect()
}

/// Two-grid preconditioner: one-level RAS pre/post-smoother around the
/// coarse correction.
pub struct TwoGridPreconditioner {
    pub a: CsrMatrix,
    pub smoother: SchwarzPreconditioner,
    pub coarse: CoarseCorrection,
}

impl Precond for TwoGridPreconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let q = |w: &[f64]| self.coarse.apply(w);
        z.copy_from_slice(&apply_two_grid(&self.smoother, &q, &self.a, r));
    }
}

/// Preconditioner kinds exposed on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcKind {
    None,
    OneLevelAsm,
    OneLevelRas,
    TwoGridRas,
    TwoGridRasV2,
    TwoGridRasV3,
}

impl PcKind {
    /// V2/V3 wrap an inner iterative solve, so their action changes between
    /// applications and the outer solver must be FGMRES.
    pub fn needs_flexible(&self) -> bool {
        matches!(self, PcKind::TwoGridRasV2 | PcKind::TwoGridRasV3)
    }

    pub fn is_two_grid(&self) -> bool {
        matches!(self, PcKind::TwoGridRas | PcKind::TwoGridRasV2 | PcKind::TwoGridRasV3)
    }
}

/// Composed preconditioner plus setup-time accounting.
pub enum AnyPrecond {
    Identity,
    OneLevel(SchwarzPreconditioner),
    TwoGrid(TwoGridPreconditioner),
}

impl Precond for AnyPrecond {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        match self {
            AnyPrecond::Identity => z.copy_from_slice(r),
            AnyPrecond::OneLevel(p) => p.apply(r, z),
            AnyPrecond::TwoGrid(p) => p.apply(r, z),
        }
    }
}

impl AnyPrecond {
    pub fn coarse(&self) -> Option<&CoarseCorrection> {
        match self {
            AnyPrecond::TwoGrid(p) => Some(&p.coarse),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SetupReport {
    pub local_factor_seconds: f64,
    pub coarse_setup_seconds: f64,
}

/// Build the requested preconditioner for `a`. Two-grid kinds require
/// `coarse_space`; V2 additionally requires `coarse_decomp`.
pub fn make_preconditioner(
    kind: PcKind,
    a: &CsrMatrix,
    decomp: &Decomposition,
    coarse_space: Option<&CoarseSpace>,
    coarse_decomp: Option<&Decomposition>,
    inner_cfg: &KrylovConfig,
) -> Result<(AnyPrecond, SetupReport), SchwarzError> {
    let mut report = SetupReport::default();
    match kind {
        PcKind::None => Ok((AnyPrecond::Identity, report)),
        PcKind::OneLevelAsm | PcKind::OneLevelRas => {
            let variant = if kind == PcKind::OneLevelAsm {
                OneLevelVariant::Asm
            } else {
                OneLevelVariant::Ras
            };
            let t0 = Instant::now();
            let p = build_one_level(a, decomp, variant)?;
            report.local_factor_seconds = t0.elapsed().as_secs_f64();
            Ok((AnyPrecond::OneLevel(p), report))
        }
        PcKind::TwoGridRas | PcKind::TwoGridRasV2 | PcKind::TwoGridRasV3 => {
            let cs = coarse_space.ok_or(SchwarzError::MissingCoarseSpace)?;
            let t0 = Instant::now();
            let smoother = build_one_level(a, decomp, OneLevelVariant::Ras)?;
            report.local_factor_seconds = t0.elapsed().as_secs_f64();
            let solver_kind = match kind {
                PcKind::TwoGridRas => CoarseSolverKind::Direct,
                PcKind::TwoGridRasV2 => CoarseSolverKind::GmresRas,
                _ => CoarseSolverKind::GmresAmg,
            };
            let t0 = Instant::now();
            let coarse = CoarseCorrection::build(a, cs, solver_kind, coarse_decomp, inner_cfg)?;
            report.coarse_setup_seconds = t0.elapsed().as_secs_f64();
            Ok((AnyPrecond::TwoGrid(TwoGridPreconditioner { a: a.clone(), smoother, coarse }), report))
        }
    }
}
