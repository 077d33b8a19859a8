//! Exact event-driven simulation of single branching processes and of the
//! coupled flow across levels.

mod flow;
mod observer;
mod path;
mod rescale;
mod seed;
mod single;
mod state;

pub use flow::{simulate_flow, FlowKernel, DEFAULT_THETA_CELLS};
pub use observer::{Observer, Recorder, RunSummary, Snapshots, SupTracker};
pub use path::{EventKind, FlowEvent, FlowPath, PathHeader, PathVerification, PATH_FORMAT};
pub use rescale::{rescale, MeasureView, RescaledPath};
pub use seed::{SeedSpec, SimRng};
pub use single::{run_single, simulate_single, DEFAULT_EVENT_CAP};
pub use state::{FloatBits, FlowState, LevelGrid};
