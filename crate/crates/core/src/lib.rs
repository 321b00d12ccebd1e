//! Finite-element solver for reaction–diffusion epidemic compartment
//! models (SEIRD), built around overlapping-Schwarz preconditioned Krylov
//! solvers: one-level ASM/RAS and two-grid RAS with direct, GMRES+RAS, or
//! GMRES+AMG coarse solves, inside a Picard / backward-Euler time loop.

pub mod amg;
pub mod app;
pub mod decomp;
pub mod mesh;
pub mod schwarz;
pub mod seird;
pub mod verify;
pub mod sparsela;
