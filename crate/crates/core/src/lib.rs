//! Isogeometric Galerkin solver for the 2D Poisson equation with a
//! harmonic-map moving mesh driver.

pub mod assembly;
pub mod cli;
pub mod config;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod splines;

pub use error::{Error, ErrorCategory, Result, SolverError};
pub mod movemesh;
pub mod postproc;
pub mod problems;
