//! Monotone finite-difference solver for Dirichlet problems of uniformly
//! elliptic Isaacs equations on planar domains.

pub mod banded;
pub mod config;
pub mod decomposition;
pub mod error;
pub mod grid;
pub mod harness;
pub mod io;
pub mod operators;
pub mod problem;
pub mod run;
pub mod solver;

pub use error::{Error, Result};
