use std::fmt::{self, Write as _};

use super::grid::VertexId;
use super::instance::{AgentId, MapfInstance};
use crate::error::{Error, Result};

/// `a_i^k = (v_i, v_{i+1})`; `index` is 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Action {
    pub agent: AgentId,
    pub index: usize,
    pub from: VertexId,
    pub to: VertexId,
}

impl Action {
    pub fn is_wait(&self) -> bool {
        self.from == self.to
    }
}

/// Per-agent vertex sequences; `paths[k][t]` is agent `k`'s position at
/// step `t`. A path of `n + 1` vertices encodes a plan of `n` unit actions.
/// After its last step an agent stays at its final vertex forever.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Solution {
    paths: Vec<Vec<VertexId>>,
}

impl Solution {
    pub fn new(paths: Vec<Vec<VertexId>>) -> Result<Self> {
        if paths.iter().any(|p| p.is_empty()) {
            return Err(Error::Invalid("every path needs at least its start vertex".into()));
        }
        Ok(Solution { paths })
    }

    pub fn paths(&self) -> &[Vec<VertexId>] {
        &self.paths
    }

    pub fn into_paths(self) -> Vec<Vec<VertexId>> {
        self.paths
    }

    pub fn num_agents(&self) -> usize {
        self.paths.len()
    }

    /// `|π^k|`, the number of actions in the plan of agent `k`.
    pub fn plan_len(&self, agent: AgentId) -> usize {
        self.paths[agent].len() - 1
    }

    pub fn makespan_steps(&self) -> usize {
        (0..self.paths.len()).map(|k| self.plan_len(k)).max().unwrap_or(0)
    }

    pub fn position(&self, agent: AgentId, step: usize) -> VertexId {
        let p = &self.paths[agent];
        p[step.min(p.len() - 1)]
    }

    pub fn actions(&self, agent: AgentId) -> impl Iterator<Item = Action> + '_ {
        self.paths[agent]
            .windows(2)
            .enumerate()
            .map(move |(i, w)| Action {
                agent,
                index: i + 1,
                from: w[0],
                to: w[1],
            })
    }

    /// One line per agent, space-separated vertex ids per step.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for p in &self.paths {
            let line: Vec<String> = p.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }

    /// Inverse of `to_text`; blank lines and `#` comments are skipped.
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut paths = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let path = line
                .split_whitespace()
                .map(|s| s.parse::<VertexId>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::parse(ln + 1, "expected vertex ids"))?;
            paths.push(path);
        }
        Self::new(paths)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostSummary {
    pub soc: f64,
    pub makespan: f64,
}

/// Sum of costs and makespan with unit action durations.
pub fn cost_summary(sol: &Solution) -> CostSummary {
    let lens = (0..sol.num_agents()).map(|k| sol.plan_len(k) as f64);
    let soc = lens.clone().sum();
    let makespan = lens.fold(0.0, f64::max);
    CostSummary { soc, makespan }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConflictKind {
    /// Both agents at `vertex` at `step`.
    Vertex,
    /// `first` at `vertex` at `step`, `second` there at `step + 1`. Covers
    /// following, swap and cycle conflicts.
    Following,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Conflict {
    pub kind: ConflictKind,
    pub first: AgentId,
    pub second: AgentId,
    pub vertex: VertexId,
    pub step: usize,
}

impl fmt::Display for Conflict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:?} conflict: agents {} and {} at vertex {} step {}",
            self.kind, self.first, self.second, self.vertex, self.step
        )
    }
}

/// All violations of 1-robustness. Structural problems (wrong agent count,
/// off-grid vertices, illegal moves, wrong endpoints) are errors instead.
pub fn validate_solution(instance: &MapfInstance, sol: &Solution) -> Result<Vec<Conflict>> {
    if sol.num_agents() != instance.num_agents() {
        return Err(Error::Invalid(format!(
            "solution has {} plans for {} agents",
            sol.num_agents(),
            instance.num_agents()
        )));
    }
    let map = &instance.map;
    for (k, path) in sol.paths().iter().enumerate() {
        if let Some(&v) = path.iter().find(|&&v| !map.is_free(v)) {
            return Err(Error::Invalid(format!(
                "agent {k}: vertex {v} is out of bounds or blocked"
            )));
        }
        for w in path.windows(2) {
            if w[0] != w[1] && !map.adjacent(w[0], w[1]) {
                return Err(Error::Invalid(format!(
                    "agent {k}: illegal move {} -> {}",
                    w[0], w[1]
                )));
            }
        }
        let (s, g) = instance.agents[k];
        if path[0] != s || *path.last().unwrap() != g {
            return Err(Error::Invalid(format!("agent {k}: plan does not run start -> goal")));
        }
    }

    let horizon = sol.makespan_steps();
    let n = sol.num_agents();
    let mut conflicts = Vec::new();
    for t in 0..=horizon {
        for k in 0..n {
            for l in 0..n {
                if k == l {
                    continue;
                }
                let vk = sol.position(k, t);
                if k < l && vk == sol.position(l, t) {
                    conflicts.push(Conflict {
                        kind: ConflictKind::Vertex,
                        first: k,
                        second: l,
                        vertex: vk,
                        step: t,
                    });
                }
                if t < horizon && vk == sol.position(l, t + 1) {
                    conflicts.push(Conflict {
                        kind: ConflictKind::Following,
                        first: k,
                        second: l,
                        vertex: vk,
                        step: t,
                    });
                }
            }
        }
    }
    Ok(conflicts)
}
