//! Anisotropic p-adaptive discontinuous Galerkin spectral element solver
//! for 2D conservation laws, with truncation-error estimation driving the
//! choice of polynomial degrees.

pub mod adapt;
pub mod basis;
pub mod dgsem;
pub mod driver;
pub mod error;
pub mod mesh;
pub mod physics;
pub mod postproc;
pub mod tauest;
pub mod timeloop;

pub use error::{Error, Result};
