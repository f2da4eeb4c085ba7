//! Grid environments, MAPF instances, plans and their validation.

mod grid;
mod instance;
mod solution;

pub use grid::{GridMap, VertexId, UNREACHABLE};
pub use instance::{generate_instance, AgentId, MapfInstance};
pub use solution::{
    cost_summary, validate_solution, Action, Conflict, ConflictKind, CostSummary, Solution,
};
