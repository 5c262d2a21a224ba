//! Parameter estimation for stochastic differential equation models from
//! gridded probability density data.
//!
//! A candidate parameter vector is scored by substituting a measured
//! stationary density into the discretized stationary Fokker–Planck equation
//! of the model and summing the squared residual over the grid. The exact
//! parameters make the continuous residual vanish, so minimizing the
//! discrete sum recovers them up to sampling noise and stencil error.
//!
//! The pipeline is:
//!
//! 1. [`simulator::simulate`] integrates a model into a stationary
//!    [`simulator::TimeSeries`];
//! 2. [`pdf::build_pdf`] bins it onto a [`grid::GridDomain`];
//! 3. [`residual::pdf_fitness`] evaluates the residual fitness `E`;
//! 4. [`estimator::estimate`] minimizes `E` over the free parameters.

pub mod error;
pub mod estimator;
pub mod grid;
pub mod io;
pub mod models;
pub mod optim;
pub mod pdf;
pub mod residual;
pub mod sde;
pub mod simulator;

pub use error::{Error, Result};
pub use sde::{ParamVector, SdeModel};
