//! Numerical kernel and stochastic search machinery for solving truncated
//! crossing equations with integral constraints.

pub mod config;
pub mod environment;
pub mod error;
pub mod experiment;
pub mod model;
pub mod plot;
pub mod points;
pub mod precompute;
pub mod quadrature;
pub mod sac;
pub mod search;
pub mod specfun;
pub mod stats;

pub use error::{Error, Result};
