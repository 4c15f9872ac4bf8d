//! Discrete dispersive propagators on uniform grids: Fourier-multiplier
//! symbols, grid projectors, discrete space-time norms, splitting solvers for
//! the nonlinear Schrödinger equation, and rate studies built on them.

pub mod checks;
pub mod config;
pub mod data_gen;
pub mod error;
pub mod experiments;
pub mod grid_fourier;
pub mod jfunctional;
pub mod norms;
pub mod projectors;
pub mod propagators;
pub mod quad;
pub mod symbols;

pub use error::{Error, Result};
