//! Deterministic solvers: the offspring generating-function ODE, the
//! cumulant ODE of a continuous-state branching process, and the nonlocal
//! cumulant equation on a grid.

mod grid;
mod nonlocal;
mod ode;
mod oracle;

pub use grid::{GridFunction, UnitGrid};
pub use nonlocal::{eval_big_psi, laplace_prediction, solve_nonlocal_cumulant, NonlocalOperator};
pub use ode::{solve_cb_cumulant, solve_pgf_ode, OdeConfig, BLOWUP_THRESHOLD, CLAMP_WARN};
pub use oracle::{write_oracle_csv, OracleRow};
