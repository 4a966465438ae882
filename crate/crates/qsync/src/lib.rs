//! Synchronization synthesis and simulation for non-Markovian linear
//! quantum systems in the quantum-expectation picture.
//!
//! The library models harmonic systems coupled to colored-noise baths
//! through a diagonal memory kernel, checks and synthesizes expectation
//! synchronization between two subsystems, certifies asymptotic stability
//! of the synchronization error, and integrates the governing Volterra
//! integro-differential equations.

pub mod cli;
pub mod config;
pub mod error;
pub mod kernel;
pub mod matops;
pub mod model;
pub mod solver;
pub mod sync;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
