//! Two-dimensional spectral submanifolds of damped polynomial vector fields
//! and their conservative limit.
//!
//! The pipeline is: [`model`] (vector field, ε-jets, series arithmetic),
//! [`spectral`] (eigen-data and assumption checks), [`expansion`]
//! (order-by-order Fourier–Taylor solution), [`correction`] (tail correction
//! by fixed-point iteration) and [`verify`] (independent checks).

pub mod cli;
pub mod correction;
pub mod error;
pub mod expansion;
pub mod model;
pub mod spectral;
pub mod verify;

pub use error::{Result, SsmError};
