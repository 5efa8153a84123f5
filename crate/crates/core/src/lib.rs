//! Maximum-likelihood estimation of linear-regression parameters for random
//! fields driven by a Wiener sheet or an Ornstein–Uhlenbeck sheet, observed
//! on a planar domain bounded by monotone curves.

pub mod cli;
pub mod config;
pub mod error;
pub mod estimation;
pub mod experiment;
pub mod geometry;
pub mod jet;
pub mod quadrature;
pub mod random_fields;
pub mod regressors;
pub mod stochastic_integrals;

pub use error::{CurveId, Error, Result};
