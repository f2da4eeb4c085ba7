//! Execution of multi-agent path finding plans under an Action Dependency
//! Graph, with dynamic-obstacle delays, execution-state features, labeled
//! replanning-benefit datasets and a small feed-forward regressor that
//! decides when to replan.

pub mod adg;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod executor;
pub mod features;
pub mod kv;
pub mod mapf;
pub mod model;
pub mod planner;
pub mod time;

pub use error::{Error, Result};
pub use time::Time;
