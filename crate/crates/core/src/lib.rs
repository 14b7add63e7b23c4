//! Numerical laboratory for ergodic matrix-valued Jacobi operators
//!
//! ```text
//! (Hu)_n = D_{n-1} u_{n-1} + D_n u_{n+1} + V_n u_n,   u_n ∈ ℂˡ
//! ```
//!
//! with real symmetric invertible hopping blocks `D_n` and real symmetric
//! potentials `V_n` generated by an ergodic base. The crate computes
//! Lyapunov spectra of the associated symplectic cocycle, Weyl–Titchmarsh
//! matrices by coefficient stripping, Jost solutions and Green kernels, the
//! integrated density of states of Dirichlet truncations, and the identities
//! that tie them together (Thouless formula, Kotani mean identity, rank of
//! the boundary imaginary part as an absolutely continuous multiplicity).

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

#[cfg(feature = "cli")]
pub mod cli;
pub mod cocycle;
pub mod ergodic;
mod error;
pub mod linalg;
pub mod operator;
pub mod spectral;
pub mod weyl;

pub use error::{LabError, Result};
pub use linalg::C64;
