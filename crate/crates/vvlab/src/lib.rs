//! Numerical laboratory for 1-D viscous stochastic conservation laws at
//! vanishing viscosity: weighted norms, approximate identities, entropy
//! pairs, an explicit Engquist-Osher solver with entropy-production
//! tracking, the stochastic interaction identity, and translation-modulus
//! estimators with Monte Carlo rate fits.

pub mod cli;
pub mod config;
pub mod entropy;
pub mod error;
pub mod estimators;
pub mod grid;
pub mod interaction;
pub mod mollifiers;
pub mod numeric;
pub mod output;
pub mod solver;
pub mod weights;

pub use error::{Error, Result};
