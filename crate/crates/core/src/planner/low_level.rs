//! Time-expanded A* for one agent under vertex-time constraints.

use std::cmp::{Ordering, Reverse};
use std::collections::hash_map::Entry;
use std::collections::{BinaryHeap, HashMap, HashSet};

use crate::mapf::{GridMap, VertexId, UNREACHABLE};

#[derive(Debug, PartialEq, Eq)]
struct Entry_ {
    f: usize,
    conflicts: u32,
    t: usize,
    v: VertexId,
}

impl Ord for Entry_ {
    // min-heap on (f, conflicts), deeper first, then vertex id
    fn cmp(&self, other: &Self) -> Ordering {
        (other.f, other.conflicts, Reverse(other.t), other.v).cmp(&(
            self.f,
            self.conflicts,
            Reverse(self.t),
            self.v,
        ))
    }
}

impl PartialOrd for Entry_ {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub(crate) struct SingleAgentQuery<'a> {
    pub map: &'a GridMap,
    pub start: VertexId,
    pub goal: VertexId,
    /// Distances to `goal`.
    pub dist: &'a [u32],
    /// Vertex-time pairs this agent must avoid.
    pub forbidden: &'a HashSet<(VertexId, usize)>,
    /// Paths of the other agents, used only to break ties toward fewer
    /// 1-robust conflicts.
    pub others: &'a [&'a [VertexId]],
}

fn at(path: &[VertexId], t: usize) -> VertexId {
    path[t.min(path.len() - 1)]
}

impl SingleAgentQuery<'_> {
    fn conflicts_at(&self, v: VertexId, t: usize) -> u32 {
        self.others
            .iter()
            .map(|p| {
                u32::from(at(p, t) == v)
                    + u32::from(t > 0 && at(p, t - 1) == v)
                    + u32::from(at(p, t + 1) == v)
            })
            .sum()
    }

    /// Shortest path that ends on the goal after its last goal constraint,
    /// or `None` if the constraints leave no such path.
    pub fn search(&self, expansions: &mut usize) -> Option<Vec<VertexId>> {
        if self.dist[self.start] == UNREACHABLE || self.forbidden.contains(&(self.start, 0)) {
            return None;
        }
        let last_goal = self
            .forbidden
            .iter()
            .filter(|(v, _)| *v == self.goal)
            .map(|&(_, t)| t)
            .max();
        let last_any = self.forbidden.iter().map(|&(_, t)| t).max().unwrap_or(0);
        let cap = last_any + 1 + self.map.free_count();

        let mut open = BinaryHeap::new();
        let mut best: HashMap<(VertexId, usize), (u32, Option<VertexId>)> = HashMap::new();
        let mut closed: HashSet<(VertexId, usize)> = HashSet::new();
        best.insert((self.start, 0), (0, None));
        open.push(Entry_ {
            f: self.dist[self.start] as usize,
            conflicts: 0,
            t: 0,
            v: self.start,
        });

        while let Some(Entry_ { conflicts, t, v, .. }) = open.pop() {
            if !closed.insert((v, t)) {
                continue;
            }
            *expansions += 1;
            if v == self.goal && last_goal.is_none_or(|c| t > c) {
                return Some(self.reconstruct(&best, v, t));
            }
            let nt = t + 1;
            if nt > cap {
                continue;
            }
            for n in std::iter::once(v).chain(self.map.neighbors(v)) {
                let h = self.dist[n];
                if h == UNREACHABLE || self.forbidden.contains(&(n, nt)) || closed.contains(&(n, nt))
                {
                    continue;
                }
                let c = conflicts + self.conflicts_at(n, nt);
                let improved = match best.entry((n, nt)) {
                    Entry::Vacant(e) => {
                        e.insert((c, Some(v)));
                        true
                    }
                    Entry::Occupied(mut e) if c < e.get().0 => {
                        e.insert((c, Some(v)));
                        true
                    }
                    Entry::Occupied(_) => false,
                };
                if improved {
                    open.push(Entry_ {
                        f: nt + h as usize,
                        conflicts: c,
                        t: nt,
                        v: n,
                    });
                }
            }
        }
        None
    }

    fn reconstruct(
        &self,
        best: &HashMap<(VertexId, usize), (u32, Option<VertexId>)>,
        mut v: VertexId,
        mut t: usize,
    ) -> Vec<VertexId> {
        let mut path = vec![v];
        while let Some(p) = best[&(v, t)].1 {
            path.push(p);
            v = p;
            t -= 1;
        }
        path.reverse();
        path
    }
}
