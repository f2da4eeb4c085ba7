use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::time::Instant;

use super::low_level::SingleAgentQuery;
use super::{PlanError, PlanOutcome, PlanStats, PlannerConfig};
use crate::mapf::{AgentId, MapfInstance, Solution, VertexId, UNREACHABLE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Constraint {
    agent: AgentId,
    vertex: VertexId,
    step: usize,
}

/// First 1-robust conflict, expressed as the two constraints that resolve it.
#[derive(Debug, Clone, Copy)]
struct Split {
    left: Constraint,
    right: Constraint,
}

struct Node {
    id: usize,
    cost: u64,
    conflicts: usize,
    constraints: Vec<Constraint>,
    paths: Vec<Vec<VertexId>>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}

impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        (other.cost, other.conflicts, other.id).cmp(&(self.cost, self.conflicts, self.id))
    }
}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Conflict-Based Search over 1-robust conflicts.
pub struct Cbs {
    instance: MapfInstance,
    dist: Vec<Vec<u32>>,
    idle_offsets: Option<(Vec<u64>, u64)>,
}

impl Cbs {
    pub fn new(instance: &MapfInstance, idle_offsets: Option<(Vec<u64>, u64)>) -> Result<Self, PlanError> {
        let dist: Vec<Vec<u32>> = instance
            .agents
            .iter()
            .map(|&(_, g)| instance.map.distances_from(g))
            .collect();
        for (k, &(s, _)) in instance.agents.iter().enumerate() {
            if dist[k][s] == UNREACHABLE {
                return Err(PlanError::Infeasible(format!("agent {k} cannot reach its goal")));
            }
        }
        Ok(Cbs {
            instance: instance.clone(),
            dist,
            idle_offsets,
        })
    }

    fn path_cost(&self, agent: AgentId, path: &[VertexId]) -> u64 {
        let len = (path.len() - 1) as u64;
        let (s, g) = self.instance.agents[agent];
        match &self.idle_offsets {
            Some((off, step)) if len > 0 && s == g => len * step + off[agent],
            Some((_, step)) => len * step,
            None => len,
        }
    }

    fn plan_agent(
        &self,
        agent: AgentId,
        constraints: &[Constraint],
        paths: &[Vec<VertexId>],
        stats: &mut PlanStats,
    ) -> Option<Vec<VertexId>> {
        let forbidden: HashSet<(VertexId, usize)> = constraints
            .iter()
            .filter(|c| c.agent == agent)
            .map(|c| (c.vertex, c.step))
            .collect();
        let others: Vec<&[VertexId]> = paths
            .iter()
            .enumerate()
            .filter(|&(l, _)| l != agent)
            .map(|(_, p)| p.as_slice())
            .collect();
        let (start, goal) = self.instance.agents[agent];
        SingleAgentQuery {
            map: &self.instance.map,
            start,
            goal,
            dist: &self.dist[agent],
            forbidden: &forbidden,
            others: &others,
        }
        .search(&mut stats.low_level_expanded)
    }

    pub fn solve(&self, cfg: &PlannerConfig) -> Result<PlanOutcome, PlanError> {
        cfg.validate()?;
        let started = Instant::now();
        let mut stats = PlanStats::default();
        let n = self.instance.num_agents();

        let mut paths: Vec<Vec<VertexId>> = Vec::with_capacity(n);
        for k in 0..n {
            let p = self
                .plan_agent(k, &[], &paths, &mut stats)
                .ok_or_else(|| PlanError::Infeasible(format!("agent {k} has no path")))?;
            paths.push(p);
        }
        let mut open = BinaryHeap::new();
        let root = self.make_node(0, Vec::new(), paths);
        stats.high_level_generated = 1;
        open.push(root);

        while let Some(node) = open.pop() {
            let split = match first_conflict(&node.paths) {
                None => {
                    return Ok(PlanOutcome {
                        solution: Solution::new(node.paths).expect("paths are non-empty"),
                        cost: node.cost,
                        stats,
                        wall: started.elapsed(),
                    })
                }
                Some((split, _)) => split,
            };
            if stats.high_level_expanded >= cfg.node_limit {
                return Err(PlanError::NodeLimit {
                    best_bound: node.cost,
                });
            }
            if started.elapsed() > cfg.timeout {
                return Err(PlanError::Timeout {
                    best_bound: node.cost,
                });
            }
            stats.high_level_expanded += 1;

            for c in [split.left, split.right] {
                let mut constraints = node.constraints.clone();
                constraints.push(c);
                let Some(path) = self.plan_agent(c.agent, &constraints, &node.paths, &mut stats)
                else {
                    continue;
                };
                let mut paths = node.paths.clone();
                paths[c.agent] = path;
                stats.high_level_generated += 1;
                open.push(self.make_node(stats.high_level_generated, constraints, paths));
            }
        }
        Err(PlanError::Infeasible("constraint tree exhausted".into()))
    }

    fn make_node(&self, id: usize, constraints: Vec<Constraint>, paths: Vec<Vec<VertexId>>) -> Node {
        let cost = paths
            .iter()
            .enumerate()
            .map(|(k, p)| self.path_cost(k, p))
            .sum();
        let conflicts = first_conflict(&paths).map_or(0, |(_, count)| count);
        Node {
            id,
            cost,
            conflicts,
            constraints,
            paths,
        }
    }
}

fn at(path: &[VertexId], t: usize) -> VertexId {
    path[t.min(path.len() - 1)]
}

/// Earliest 1-robust conflict and the total number of conflicting
/// (pair, step) combinations.
fn first_conflict(paths: &[Vec<VertexId>]) -> Option<(Split, usize)> {
    let horizon = paths.iter().map(|p| p.len() - 1).max().unwrap_or(0);
    let n = paths.len();
    let mut first = None;
    let mut count = 0;
    for t in 0..=horizon {
        for k in 0..n {
            let vk = at(&paths[k], t);
            for l in 0..n {
                if k == l {
                    continue;
                }
                if k < l && vk == at(&paths[l], t) {
                    count += 1;
                    first.get_or_insert(Split {
                        left: Constraint { agent: k, vertex: vk, step: t },
                        right: Constraint { agent: l, vertex: vk, step: t },
                    });
                }
                if t < horizon && vk == at(&paths[l], t + 1) {
                    count += 1;
                    first.get_or_insert(Split {
                        left: Constraint { agent: k, vertex: vk, step: t },
                        right: Constraint { agent: l, vertex: vk, step: t + 1 },
                    });
                }
            }
        }
    }
    first.map(|s| (s, count))
}
