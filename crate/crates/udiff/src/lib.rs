//! Numerical laboratory for ultra-differentiable Hamiltonian perturbation theory.

pub mod cli;
pub mod diophantine;
pub mod error;
pub mod flows;
pub mod instability;
pub mod normal_forms;
pub mod quad;
pub mod series;
pub mod weights;

pub use error::{Error, Result};
