//! Impossibility bounds and sample-complexity experiments for universal
//! machine translation through a language-invariant representation.

pub mod affine;
pub mod cli;
pub mod discrete;
pub mod error;
pub mod evaluation;
pub mod experiments;
pub mod generative;
pub mod graph;
pub mod impossibility;
pub mod io;
pub mod seed;
pub mod trainer;

pub use error::{Error, Result};
