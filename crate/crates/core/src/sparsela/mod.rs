//! Sparse linear algebra: CSR matrices, a banded direct solver, Krylov
//! methods (GMRES/FGMRES with right preconditioning), and a damped Jacobi
//! smoother.

mod csr;
mod krylov;
mod lu;

pub use csr::CsrMatrix;
pub use krylov::{
    fgmres, gmres, jacobi_smooth, stopping_check, IdentityPrecond, KrylovConfig, KrylovReport,
    LinOp, Precond, StopCheck,
};
pub use lu::{lu_solve, LuError, LuFactors};
