//! Monte Carlo estimators and statistical audits: Laplace-functional
//! convergence, martingale-problem residuals, moment identities and
//! distributional comparisons.

mod audit;
mod convergence;
mod laplace;
mod martingale;
mod report;
mod runner;
mod stats;

use serde::Serialize;

pub use audit::{
    branching_test, distribution_tests, moment_audit, moment_audit_samples, single_samples,
    DistributionReport, MomentAudit, MomentRow, PgfRow, Samples, AUDIT_SE,
};
pub use convergence::{
    convergence_experiment, convergence_oracles, laplace_samples, ConvergenceReport, ConvergenceRow,
    ConvergenceSpec, LevelInfo, TrendRow,
};
pub use laplace::{estimate_laplace, LaplaceEstimate, TestFunction, MIN_REPLICAS};
pub use martingale::{
    generator_coefficients, martingale_residual, residual_samples, MartingaleReport, MartingaleRow,
    MartingaleSpec, CI_QUANTILE, MIN_PATH_REPLICAS,
};
pub use report::{write_json, TextReport};
pub use runner::run_replicas;
pub use stats::{empirical_pgf, spearman, Estimate};

/// Run-wide settings embedded in every report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunContext {
    pub master_seed: u64,
    pub config_hash: String,
    /// Worker threads; all cores when `None`. Results do not depend on it.
    pub workers: Option<usize>,
}
