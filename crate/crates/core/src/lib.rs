//! Profit-maximizing production plans for items whose breakage rate grows
//! with the heaped stock level.
//!
//! - [`model`]: parameters, rate functions, trajectory evaluation
//! - [`analytic`]: closed-form extremals for linear holding cost
//! - [`bvp`]: finite-difference Newton solver for the general extremal
//! - [`transcription`]: direct optimizer over sampled controls with adjoint gradients
//! - [`experiment`]: config parsing, runs, sweeps and CSV artifacts

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod bvp;
pub mod error;
pub mod experiment;
pub mod model;
pub mod quadrature;
pub mod transcription;

pub use error::{Error, Result};
pub use model::{ModelInstance, Trajectory};
