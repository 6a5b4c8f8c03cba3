//! Data-driven reduced-order modeling for parametric PDE eigenvalue
//! problems.
//!
//! The offline stage solves a P1 finite-element eigenproblem at sampled
//! parameters, compresses the eigenvectors with POD, and trains Gaussian
//! process regressors on the eigenvalues and reduced coefficients. The
//! online stage answers queries at new parameters with confidence bands,
//! without touching the full-order operators.

pub mod assemble;
pub mod eigen;
pub mod exec;
pub mod gpr;
pub mod linalg;
pub mod mesh;
pub mod newton;
pub mod pod;
pub mod problems;
pub mod rom;
pub mod sampling;
