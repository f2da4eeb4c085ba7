//! Optimal 1-robust MAPF solver (Conflict-Based Search).
//!
//! A 1-robust solution never has two agents on the same vertex at the same
//! step or at two consecutive steps. The high level branches on the first
//! such conflict with single vertex-time constraints; the low level is a
//! time-expanded A* with a true-distance heuristic.

mod cbs;
mod low_level;

use std::time::Duration;

use thiserror::Error;

use crate::mapf::{MapfInstance, Solution, VertexId};

pub use cbs::Cbs;

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerConfig {
    /// Ratio ≥ 1. The solver always returns optimal solutions, which satisfy
    /// any bound.
    pub suboptimality_bound: f64,
    pub timeout: Duration,
    /// Maximum number of high-level nodes expanded.
    pub node_limit: usize,
    /// Seconds charged per low-level expansion when reporting solver runtime.
    pub seconds_per_expansion: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            suboptimality_bound: 1.0,
            timeout: Duration::from_secs(60),
            node_limit: 100_000,
            seconds_per_expansion: 1e-6,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<(), PlanError> {
        if !(self.suboptimality_bound >= 1.0) {
            return Err(PlanError::Invalid("suboptimality bound must be >= 1".into()));
        }
        if self.timeout.is_zero() {
            return Err(PlanError::Invalid("timeout must be positive".into()));
        }
        if self.node_limit == 0 {
            return Err(PlanError::Invalid("node limit must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("timed out; best lower bound on cost {best_bound}")]
    Timeout { best_bound: u64 },
    #[error("node limit reached; best lower bound on cost {best_bound}")]
    NodeLimit { best_bound: u64 },
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("invalid planner input: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PlanStats {
    pub high_level_expanded: usize,
    pub high_level_generated: usize,
    pub low_level_expanded: usize,
}

#[derive(Debug, Clone)]
pub struct PlanOutcome {
    pub solution: Solution,
    /// Objective value: sum of plan lengths (times the step cost) plus any
    /// idle offsets paid.
    pub cost: u64,
    pub stats: PlanStats,
    /// Wall-clock time spent in the solver.
    pub wall: Duration,
}

impl PlanOutcome {
    /// Deterministic solver runtime derived from search effort.
    pub fn effort_seconds(&self, cfg: &PlannerConfig) -> f64 {
        self.stats.low_level_expanded as f64 * cfg.seconds_per_expansion
    }
}

pub fn solve_1robust(instance: &MapfInstance, cfg: &PlannerConfig) -> Result<PlanOutcome, PlanError> {
    Cbs::new(instance, None)?.solve(cfg)
}

/// Plans from mid-execution `positions` toward the instance goals.
pub fn solve_from_state(
    instance: &MapfInstance,
    positions: &[VertexId],
    cfg: &PlannerConfig,
) -> Result<PlanOutcome, PlanError> {
    let inst = instance
        .with_starts(positions)
        .map_err(|e| PlanError::Invalid(e.to_string()))?;
    Cbs::new(&inst, None)?.solve(cfg)
}

/// Like [`solve_from_state`], but every step costs `step_cost` and an agent
/// that starts on its goal pays `idle_offsets[k]` extra if its plan is
/// non-empty. With offsets set to the time each parked agent has already
/// spent on its goal, the objective equals the executed sum of costs of
/// the whole run.
pub fn solve_from_state_weighted(
    instance: &MapfInstance,
    positions: &[VertexId],
    idle_offsets: &[u64],
    step_cost: u64,
    cfg: &PlannerConfig,
) -> Result<PlanOutcome, PlanError> {
    let inst = instance
        .with_starts(positions)
        .map_err(|e| PlanError::Invalid(e.to_string()))?;
    if idle_offsets.len() != inst.num_agents() {
        return Err(PlanError::Invalid("one idle offset per agent required".into()));
    }
    Cbs::new(&inst, Some((idle_offsets.to_vec(), step_cost)))?.solve(cfg)
}
