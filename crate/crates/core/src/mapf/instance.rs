use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::grid::{GridMap, VertexId, UNREACHABLE};
use crate::error::{Error, Result};

pub type AgentId = usize;

/// A grid plus an ordered list of `(start, goal)` pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MapfInstance {
    pub map: GridMap,
    pub agents: Vec<(VertexId, VertexId)>,
}

impl MapfInstance {
    pub fn new(map: GridMap, agents: Vec<(VertexId, VertexId)>) -> Result<Self> {
        for (k, &(s, g)) in agents.iter().enumerate() {
            if !map.is_free(s) || !map.is_free(g) {
                return Err(Error::Invalid(format!(
                    "agent {k}: start or goal is not a free cell"
                )));
            }
        }
        check_distinct(agents.iter().map(|a| a.0), "start")?;
        check_distinct(agents.iter().map(|a| a.1), "goal")?;
        Ok(MapfInstance { map, agents })
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn starts(&self) -> Vec<VertexId> {
        self.agents.iter().map(|a| a.0).collect()
    }

    pub fn goals(&self) -> Vec<VertexId> {
        self.agents.iter().map(|a| a.1).collect()
    }

    /// Same map and goals, new start positions.
    pub fn with_starts(&self, starts: &[VertexId]) -> Result<Self> {
        if starts.len() != self.agents.len() {
            return Err(Error::Invalid(format!(
                "{} positions for {} agents",
                starts.len(),
                self.agents.len()
            )));
        }
        let agents = starts
            .iter()
            .zip(&self.agents)
            .map(|(&s, &(_, g))| (s, g))
            .collect();
        Self::new(self.map.clone(), agents)
    }

    /// Plain-text form: `agents N` followed by `sx sy gx gy` per agent.
    pub fn to_text(&self) -> String {
        let mut out = format!("agents {}\n", self.agents.len());
        for &(s, g) in &self.agents {
            let (sx, sy) = self.map.coords(s);
            let (gx, gy) = self.map.coords(g);
            let _ = writeln!(out, "{sx} {sy} {gx} {gy}");
        }
        out
    }

    pub fn parse_text(map: GridMap, text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (ln, header) = lines
            .next()
            .ok_or_else(|| Error::parse(1, "empty instance file"))?;
        let count: usize = header
            .trim()
            .strip_prefix("agents")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::parse(ln + 1, "expected `agents N`"))?;
        let mut agents = Vec::with_capacity(count);
        for (ln, line) in lines {
            let nums: Vec<usize> = line
                .split_whitespace()
                .map(|s| s.parse())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::parse(ln + 1, "expected four non-negative integers"))?;
            let [sx, sy, gx, gy] = nums[..] else {
                return Err(Error::parse(ln + 1, "expected `sx sy gx gy`"));
            };
            if sx >= map.width() || gx >= map.width() || sy >= map.height() || gy >= map.height() {
                return Err(Error::parse(ln + 1, "coordinates out of bounds"));
            }
            agents.push((map.vertex(sx, sy), map.vertex(gx, gy)));
        }
        if agents.len() != count {
            return Err(Error::parse(
                ln + 1,
                format!("header declares {count} agents, found {}", agents.len()),
            ));
        }
        Self::new(map, agents)
    }
}

fn check_distinct(it: impl Iterator<Item = VertexId>, what: &str) -> Result<()> {
    let mut seen: Vec<VertexId> = it.collect();
    let n = seen.len();
    seen.sort_unstable();
    seen.dedup();
    if seen.len() != n {
        return Err(Error::Invalid(format!("duplicate {what} vertices")));
    }
    Ok(())
}

const PLACEMENT_ATTEMPTS: usize = 64;

/// Random start/goal assignment, deterministic in `(map, agent_count, seed)`.
/// Every goal lies in the connected component of its start.
pub fn generate_instance(map: &GridMap, agent_count: usize, seed: u64) -> Result<MapfInstance> {
    if map.free_count() < 2 * agent_count {
        return Err(Error::Generation(format!(
            "{} free cells cannot host {agent_count} agents",
            map.free_count()
        )));
    }
    let component = components(map);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let free: Vec<VertexId> = map.free_vertices().collect();

    'attempt: for _ in 0..PLACEMENT_ATTEMPTS {
        let mut starts = free.clone();
        starts.shuffle(&mut rng);
        starts.truncate(agent_count);
        let mut goals_pool = free.clone();
        goals_pool.shuffle(&mut rng);
        let mut taken = vec![false; goals_pool.len()];
        let mut agents = Vec::with_capacity(agent_count);
        for &s in &starts {
            let pick = goals_pool
                .iter()
                .enumerate()
                .position(|(i, &g)| !taken[i] && component[g] == component[s]);
            match pick {
                Some(i) => {
                    taken[i] = true;
                    agents.push((s, goals_pool[i]));
                }
                None => continue 'attempt,
            }
        }
        return MapfInstance::new(map.clone(), agents);
    }
    Err(Error::Generation(format!(
        "no connected placement for {agent_count} agents after {PLACEMENT_ATTEMPTS} attempts"
    )))
}

fn components(map: &GridMap) -> Vec<usize> {
    let mut label = vec![usize::MAX; map.num_cells()];
    let mut next = 0;
    for v in map.free_vertices() {
        if label[v] != usize::MAX {
            continue;
        }
        for (u, &d) in map.distances_from(v).iter().enumerate() {
            if d != UNREACHABLE {
                label[u] = next;
            }
        }
        next += 1;
    }
    label
}
