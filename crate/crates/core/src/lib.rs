//! Exact simulation of continuous-time branching flows driven by coupled
//! Poisson random measures, with deterministic solvers for the cumulant
//! equations of their continuous-state and superprocess limits.
//!
//! * [`mechanisms`]: offspring laws, branching mechanisms, the discretization
//!   recipe and the convergence check of rescaled mechanisms.
//! * [`flowsim`]: event-driven simulation of one process and of the coupled
//!   flow across a level grid.
//! * [`cumulant`]: generating-function, cumulant and nonlocal cumulant solvers.
//! * [`experiments`]: Monte Carlo estimators and statistical audits.
//! * [`config`]: experiment configuration files.

// `!(x > 0.0)` is the idiom used throughout to reject NaN along with
// out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod cumulant;
pub mod error;
pub mod experiments;
pub mod flowsim;
pub mod mechanisms;
pub mod quadrature;

pub use error::{Error, Result};
