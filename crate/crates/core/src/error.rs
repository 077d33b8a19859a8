use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the mechanism catalog, the simulators and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {what} = {value} is outside its admissible range")]
    Domain { what: &'static str, value: f64 },

    #[error(
        "admissibility error at k = {k}: coefficient p_{index}(theta = {theta}) = {value:e} \
         is negative (sigma_k = {sigma})"
    )]
    Admissibility {
        k: u32,
        index: usize,
        theta: f64,
        value: f64,
        sigma: f64,
    },

    #[error("resource error: event cap of {cap} exceeded at t = {time} (supercritical blowup?)")]
    Resource { cap: u64, time: f64 },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("grid mismatch: expected {expected} entries, found {found}")]
    GridMismatch { expected: usize, found: usize },

    #[error("cumulant blowup at t = {time}: value {value:e} exceeds 1e12")]
    Blowup { time: f64, value: f64 },

    #[error("insufficient replicas: {got} < {need}")]
    InsufficientReplicas { got: usize, need: usize },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error in {path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
}
