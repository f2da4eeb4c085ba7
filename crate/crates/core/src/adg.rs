//! Action Dependency Graph: construction from a 1-robust plan, execution
//! gating and propagation of estimated start/completion times.

use std::collections::{BTreeMap, BinaryHeap};
use std::cmp::Reverse;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::mapf::{Action, AgentId, Solution, VertexId};
use crate::time::Time;

pub type NodeId = usize;

/// Estimate given to a running action that has overrun its planned end:
/// `now + OVERRUN_TICK`. An executable action that has not started by `now`
/// gets the same treatment for its start.
pub const OVERRUN_TICK: Time = Time::from_ticks(100);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeStatus {
    Pending,
    Running,
    Completed,
}

impl NodeStatus {
    fn as_str(self) -> &'static str {
        match self {
            NodeStatus::Pending => "pending",
            NodeStatus::Running => "running",
            NodeStatus::Completed => "completed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdgNode {
    pub action: Action,
    pub status: NodeStatus,
    pub planned_start: Time,
    pub planned_end: Time,
    pub est_start: Time,
    pub est_end: Time,
    /// `None` stands for the +∞ "not yet happened" sentinel.
    pub actual_start: Option<Time>,
    pub actual_end: Option<Time>,
}

impl AdgNode {
    pub fn planned_duration(&self) -> Time {
        self.planned_end - self.planned_start
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeKind {
    /// Consecutive actions of one agent.
    Type1,
    /// Cross-agent precedence on a shared vertex.
    Type2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AdgEdge {
    pub kind: EdgeKind,
    pub from: NodeId,
    pub to: NodeId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdgEvent {
    Started(Time),
    Completed(Time),
}

/// Planned and expected slack of one Type-2 edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeSlack {
    pub edge: usize,
    pub planned: Time,
    pub expected: Time,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Adg {
    nodes: Vec<AdgNode>,
    edges: Vec<AdgEdge>,
    preds: Vec<Vec<NodeId>>,
    succs: Vec<Vec<NodeId>>,
    agent_nodes: Vec<Vec<NodeId>>,
    topo: Vec<NodeId>,
    topo_pos: Vec<usize>,
    origin: Time,
    last_event: Time,
    // time of the latest refresh; executable pending nodes never start earlier
    clock: Time,
}

/// Builds the ADG of `sol` with unit (1 s) actions starting at time 0.
pub fn build_adg(sol: &Solution) -> Result<Adg> {
    Adg::build(sol, Time::ZERO, Time::from_secs(1))
}

/// One maximal stay of an agent on a vertex.
struct Visit {
    agent: AgentId,
    enter_step: usize,
    /// Action index that moved the agent onto the vertex (`None` at its start).
    entering: Option<usize>,
    /// Action index that moves it off again (`None` if it never leaves).
    leaving: Option<usize>,
}

fn visits(sol: &Solution) -> BTreeMap<VertexId, Vec<Visit>> {
    let mut out: BTreeMap<VertexId, Vec<Visit>> = BTreeMap::new();
    for (k, path) in sol.paths().iter().enumerate() {
        let mut t = 0;
        while t < path.len() {
            let v = path[t];
            let mut last = t;
            while last + 1 < path.len() && path[last + 1] == v {
                last += 1;
            }
            out.entry(v).or_default().push(Visit {
                agent: k,
                enter_step: t,
                entering: (t > 0).then_some(t),
                leaving: (last + 1 < path.len()).then_some(last + 1),
            });
            t = last + 1;
        }
    }
    for list in out.values_mut() {
        list.sort_by_key(|v| (v.enter_step, v.agent));
    }
    out
}

impl Adg {
    /// `origin` is the planned start time of every agent's first action.
    pub fn build(sol: &Solution, origin: Time, action_duration: Time) -> Result<Self> {
        let mut nodes = Vec::new();
        let mut agent_nodes = Vec::with_capacity(sol.num_agents());
        for k in 0..sol.num_agents() {
            let mut ids = Vec::with_capacity(sol.plan_len(k));
            for a in sol.actions(k) {
                let ts = origin + action_duration * (a.index as i64 - 1);
                let tc = ts + action_duration;
                ids.push(nodes.len());
                nodes.push(AdgNode {
                    action: a,
                    status: NodeStatus::Pending,
                    planned_start: ts,
                    planned_end: tc,
                    est_start: ts,
                    est_end: tc,
                    actual_start: None,
                    actual_end: None,
                });
            }
            agent_nodes.push(ids);
        }

        let mut edges = Vec::new();
        for ids in &agent_nodes {
            for w in ids.windows(2) {
                edges.push(AdgEdge {
                    kind: EdgeKind::Type1,
                    from: w[0],
                    to: w[1],
                });
            }
        }

        // (k, l) -> list of (leaving index of k, entering index of l)
        let mut pairs: BTreeMap<(AgentId, AgentId), Vec<(usize, usize)>> = BTreeMap::new();
        for (v, list) in visits(sol) {
            for w in list.windows(2) {
                let (a, b) = (&w[0], &w[1]);
                if a.agent == b.agent {
                    continue;
                }
                let leave = a.leaving.ok_or_else(|| {
                    Error::Adg(format!(
                        "agent {} enters vertex {v} where agent {} stays forever",
                        b.agent, a.agent
                    ))
                })?;
                let enter = b.entering.ok_or_else(|| {
                    Error::Adg(format!("agent {} starts on occupied vertex {v}", b.agent))
                })?;
                pairs.entry((a.agent, b.agent)).or_default().push((leave, enter));
            }
        }
        for ((k, l), list) in pairs {
            for &(i, j) in &list {
                let implied = list
                    .iter()
                    .any(|&(i2, j2)| (i2, j2) != (i, j) && i2 >= i && j2 <= j);
                if !implied {
                    edges.push(AdgEdge {
                        kind: EdgeKind::Type2,
                        from: agent_nodes[k][i - 1],
                        to: agent_nodes[l][j - 1],
                    });
                }
            }
        }
        edges.sort_by_key(|e| (e.kind != EdgeKind::Type1, e.from, e.to));
        edges.dedup();

        let mut preds = vec![Vec::new(); nodes.len()];
        let mut succs = vec![Vec::new(); nodes.len()];
        for e in &edges {
            preds[e.to].push(e.from);
            succs[e.from].push(e.to);
        }
        let topo = topological_order(&preds, &succs)?;
        let mut topo_pos = vec![0; nodes.len()];
        for (pos, &n) in topo.iter().enumerate() {
            topo_pos[n] = pos;
        }
        Ok(Adg {
            nodes,
            edges,
            preds,
            succs,
            agent_nodes,
            topo,
            topo_pos,
            origin,
            last_event: origin,
            clock: origin,
        })
    }

    pub fn nodes(&self) -> &[AdgNode] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &AdgNode {
        &self.nodes[id]
    }

    pub fn edges(&self) -> &[AdgEdge] {
        &self.edges
    }

    pub fn type2_edges(&self) -> impl Iterator<Item = (usize, &AdgEdge)> {
        self.edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.kind == EdgeKind::Type2)
    }

    /// Type-2 edges whose source action has completed.
    pub fn satisfied_type2(&self) -> impl Iterator<Item = (usize, &AdgEdge)> {
        self.type2_edges()
            .filter(|(_, e)| self.nodes[e.from].status == NodeStatus::Completed)
    }

    pub fn predecessors(&self, id: NodeId) -> &[NodeId] {
        &self.preds[id]
    }

    pub fn successors(&self, id: NodeId) -> &[NodeId] {
        &self.succs[id]
    }

    pub fn num_agents(&self) -> usize {
        self.agent_nodes.len()
    }

    /// Node ids of agent `k`'s actions, in plan order.
    pub fn agent_nodes(&self, k: AgentId) -> &[NodeId] {
        &self.agent_nodes[k]
    }

    pub fn topological_order(&self) -> &[NodeId] {
        &self.topo
    }

    pub fn origin(&self) -> Time {
        self.origin
    }

    pub fn last_event_time(&self) -> Time {
        self.last_event
    }

    /// `(p^k, e^k)`: number of finished and of assigned actions of agent `k`.
    pub fn progress(&self, k: AgentId) -> (usize, usize) {
        let ids = &self.agent_nodes[k];
        let finished = ids
            .iter()
            .take_while(|&&n| self.nodes[n].status == NodeStatus::Completed)
            .count();
        let assigned = ids
            .iter()
            .take_while(|&&n| self.nodes[n].status != NodeStatus::Pending)
            .count();
        (finished, assigned)
    }

    pub fn is_executable(&self, id: NodeId) -> bool {
        self.nodes[id].status == NodeStatus::Pending
            && self.preds[id]
                .iter()
                .all(|&p| self.nodes[p].status == NodeStatus::Completed)
    }

    /// Pending actions whose predecessors have all completed, ascending.
    pub fn executable_actions(&self) -> Vec<NodeId> {
        (0..self.nodes.len()).filter(|&n| self.is_executable(n)).collect()
    }

    pub fn all_completed(&self) -> bool {
        self.nodes.iter().all(|n| n.status == NodeStatus::Completed)
    }

    pub fn record_event(&mut self, id: NodeId, event: AdgEvent) -> Result<()> {
        let time = match event {
            AdgEvent::Started(t) | AdgEvent::Completed(t) => t,
        };
        if time < self.last_event {
            return Err(Error::Adg(format!(
                "event at {time} s precedes last event at {} s",
                self.last_event
            )));
        }
        match event {
            AdgEvent::Started(t) => {
                if !self.is_executable(id) {
                    return Err(Error::Adg(format!("node {id} started while not executable")));
                }
                let n = &mut self.nodes[id];
                let d = n.planned_duration();
                n.status = NodeStatus::Running;
                n.actual_start = Some(t);
                n.est_start = t;
                n.est_end = t + d;
            }
            AdgEvent::Completed(t) => {
                let n = &mut self.nodes[id];
                match (n.status, n.actual_start) {
                    (NodeStatus::Running, Some(s)) if t >= s => {}
                    _ => {
                        return Err(Error::Adg(format!(
                            "node {id} completed while not running or before its start"
                        )))
                    }
                }
                n.status = NodeStatus::Completed;
                n.actual_end = Some(t);
                n.est_end = t;
            }
        }
        self.last_event = time;
        self.propagate_from(self.topo_pos[id]);
        Ok(())
    }

    /// Moves the estimated end of running actions that have overrun their
    /// planned duration to `now + OVERRUN_TICK` and re-propagates.
    pub fn refresh(&mut self, now: Time) {
        self.clock = self.clock.max(now);
        let mut first = None;
        for (id, n) in self.nodes.iter_mut().enumerate() {
            if n.status != NodeStatus::Running {
                continue;
            }
            let start = n.actual_start.expect("running node has a start");
            let target = if now > start + n.planned_duration() {
                now + OVERRUN_TICK
            } else {
                start + n.planned_duration()
            };
            if target != n.est_end {
                n.est_end = target;
                let pos = self.topo_pos[id];
                first = Some(first.map_or(pos, |f: usize| f.min(pos)));
            }
        }
        for id in 0..self.nodes.len() {
            if self.is_executable(id) {
                let pos = self.topo_pos[id];
                first = Some(first.map_or(pos, |f: usize| f.min(pos)));
            }
        }
        if let Some(pos) = first {
            self.propagate_from(pos);
        }
    }

    /// Recomputes every pending node from position `start` of the
    /// topological order onward:
    /// `t̂_s = max(t̂_c(pred))`, `t̂_c = t̂_s + planned duration`. A node
    /// that could have started before the last refresh but has not is
    /// expected to start one tick after it.
    pub fn propagate_from(&mut self, start: usize) {
        for pos in start..self.topo.len() {
            let id = self.topo[pos];
            if self.nodes[id].status != NodeStatus::Pending {
                continue;
            }
            let mut ready = self.preds[id]
                .iter()
                .map(|&p| self.nodes[p].est_end)
                .max()
                .unwrap_or(self.nodes[id].planned_start);
            if ready < self.clock && self.is_executable(id) {
                ready = self.clock + OVERRUN_TICK;
            }
            let n = &mut self.nodes[id];
            n.est_start = ready;
            n.est_end = ready + n.planned_duration();
        }
    }

    /// End time of the action before `id` in its agent's plan, or the
    /// execution start when `id` is the agent's first action.
    fn previous_end(&self, id: NodeId, f: impl Fn(&AdgNode) -> Time) -> Time {
        let a = self.nodes[id].action;
        if a.index == 1 {
            self.origin
        } else {
            f(&self.nodes[self.agent_nodes[a.agent][a.index - 2]])
        }
    }

    /// Planned slack `δ(e) = t_c(a_i^k) − t_c(a_{j−1}^l)` and expected
    /// slack `δ̂(e)` from estimates, for every Type-2 edge.
    pub fn edge_slacks(&self) -> Vec<EdgeSlack> {
        self.type2_edges()
            .map(|(idx, e)| EdgeSlack {
                edge: idx,
                planned: self.nodes[e.from].planned_end - self.previous_end(e.to, |n| n.planned_end),
                expected: self.nodes[e.from].est_end - self.previous_end(e.to, |n| n.est_end),
            })
            .collect()
    }

    /// Text dump: one line per node
    /// `agent idx from to status t_s t_c t̂_s t̂_c t̄_s t̄_c` (unset times as
    /// `-`), then one line per edge `kind src dst`.
    pub fn dump(&self) -> String {
        let opt = |t: Option<Time>| t.map_or_else(|| "-".to_string(), |t| t.to_string());
        let mut out = String::new();
        for n in &self.nodes {
            let a = n.action;
            let _ = writeln!(
                out,
                "{} {} {} {} {} {} {} {} {} {} {}",
                a.agent,
                a.index,
                a.from,
                a.to,
                n.status.as_str(),
                n.planned_start,
                n.planned_end,
                n.est_start,
                n.est_end,
                opt(n.actual_start),
                opt(n.actual_end)
            );
        }
        for e in &self.edges {
            let kind = match e.kind {
                EdgeKind::Type1 => 1,
                EdgeKind::Type2 => 2,
            };
            let _ = writeln!(out, "{kind} {} {}", e.from, e.to);
        }
        out
    }
}

fn topological_order(preds: &[Vec<NodeId>], succs: &[Vec<NodeId>]) -> Result<Vec<NodeId>> {
    let mut indeg: Vec<usize> = preds.iter().map(Vec::len).collect();
    let mut ready: BinaryHeap<Reverse<NodeId>> = indeg
        .iter()
        .enumerate()
        .filter(|(_, &d)| d == 0)
        .map(|(n, _)| Reverse(n))
        .collect();
    let mut order = Vec::with_capacity(preds.len());
    while let Some(Reverse(n)) = ready.pop() {
        order.push(n);
        for &s in &succs[n] {
            indeg[s] -= 1;
            if indeg[s] == 0 {
                ready.push(Reverse(s));
            }
        }
    }
    if order.len() != preds.len() {
        return Err(Error::Adg("cyclic dependency between actions".into()));
    }
    Ok(order)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn secs(s: f64) -> Time {
        Time::from_secs_f64(s)
    }

    /// Red 0: D->F; blue 1: B->C->D on `B C D / @ @ F`.
    fn crossing() -> Adg {
        build_adg(&Solution::new(vec![vec![2, 5], vec![0, 1, 2]]).unwrap()).unwrap()
    }

    #[test]
    fn crossing_has_single_type2_edge() {
        let adg = crossing();
        let t2: Vec<_> = adg.type2_edges().map(|(_, e)| (e.from, e.to)).collect();
        // node 0 = DF (red), node 2 = CD (blue)
        assert_eq!(t2, vec![(0, 2)]);
        assert_eq!(adg.node(0).action.from, 2);
        assert_eq!(adg.node(2).action.to, 2);
        assert_eq!(adg.edges().len(), 2);
    }

    #[test]
    fn single_agent_is_a_chain() {
        let adg = build_adg(&Solution::new(vec![vec![0, 1, 2, 2, 3]]).unwrap()).unwrap();
        assert_eq!(adg.type2_edges().count(), 0);
        assert_eq!(adg.edges().len(), 3);
    }

    #[test]
    fn initial_frontier_and_gating() {
        let mut adg = crossing();
        assert_eq!(adg.executable_actions(), vec![0, 1]);
        adg.record_event(1, AdgEvent::Started(secs(0.0))).unwrap();
        adg.record_event(0, AdgEvent::Started(secs(0.0))).unwrap();
        adg.record_event(1, AdgEvent::Completed(secs(1.0))).unwrap();
        assert!(!adg.executable_actions().contains(&2));
        adg.record_event(0, AdgEvent::Completed(secs(1.0))).unwrap();
        assert_eq!(adg.executable_actions(), vec![2]);
        adg.record_event(2, AdgEvent::Started(secs(1.0))).unwrap();
        adg.record_event(2, AdgEvent::Completed(secs(2.0))).unwrap();
        assert!(adg.executable_actions().is_empty());
        assert!(adg.all_completed());
    }

    #[test]
    fn event_errors() {
        let mut adg = crossing();
        assert!(adg.record_event(2, AdgEvent::Started(secs(0.0))).is_err());
        assert!(adg.record_event(0, AdgEvent::Completed(secs(1.0))).is_err());
        adg.record_event(0, AdgEvent::Started(secs(2.0))).unwrap();
        assert!(adg.record_event(1, AdgEvent::Started(secs(1.0))).is_err());
        assert!(adg.record_event(0, AdgEvent::Started(secs(3.0))).is_err());
    }

    #[test]
    fn on_schedule_keeps_planned_estimates() {
        let sol = Solution::new(vec![vec![2, 5], vec![0, 1, 2]]).unwrap();
        let mut adg = build_adg(&sol).unwrap();
        let mut now = 0;
        while !adg.all_completed() {
            let t = Time::from_secs(now);
            for id in adg.executable_actions() {
                adg.record_event(id, AdgEvent::Started(t)).unwrap();
            }
            let t1 = Time::from_secs(now + 1);
            let running: Vec<_> = (0..adg.nodes().len())
                .filter(|&i| adg.node(i).status == NodeStatus::Running)
                .collect();
            for id in running {
                adg.record_event(id, AdgEvent::Completed(t1)).unwrap();
            }
            for n in adg.nodes() {
                assert_eq!((n.est_start, n.est_end), (n.planned_start, n.planned_end));
            }
            now += 1;
        }
        for n in adg.nodes() {
            assert_eq!(n.actual_start, Some(n.planned_start));
            assert_eq!(n.actual_end, Some(n.planned_end));
        }
    }

    #[test]
    fn chain_delay_shifts_everything_downstream() {
        let mut adg = build_adg(&Solution::new(vec![vec![0, 1, 2, 3, 4]]).unwrap()).unwrap();
        adg.record_event(0, AdgEvent::Started(secs(0.0))).unwrap();
        adg.record_event(0, AdgEvent::Completed(secs(6.0))).unwrap();
        for id in 1..4 {
            let n = adg.node(id);
            assert_eq!(n.est_end - n.planned_end, secs(5.0));
        }
    }

    #[test]
    fn delayed_source_shifts_type2_target() {
        let mut adg = crossing();
        adg.record_event(0, AdgEvent::Started(secs(0.0))).unwrap();
        adg.record_event(1, AdgEvent::Started(secs(0.0))).unwrap();
        adg.record_event(1, AdgEvent::Completed(secs(1.0))).unwrap();
        adg.record_event(0, AdgEvent::Completed(secs(3.0))).unwrap();
        let cd = adg.node(2);
        assert_eq!(cd.est_start, cd.planned_start + secs(2.0));
    }

    #[test]
    fn overrun_refresh_never_leaves_estimates_in_the_past() {
        let mut adg = build_adg(&Solution::new(vec![vec![0, 1, 2]]).unwrap()).unwrap();
        adg.record_event(0, AdgEvent::Started(secs(0.0))).unwrap();
        adg.refresh(secs(0.5));
        assert_eq!(adg.node(0).est_end, secs(1.0));
        adg.refresh(secs(2.5));
        assert_eq!(adg.node(0).est_end, secs(2.6));
        assert_eq!(adg.node(1).est_start, secs(2.6));
        let before = adg.clone();
        adg.propagate_from(0);
        assert_eq!(adg, before);
    }

    #[test]
    fn held_back_action_is_expected_next_tick() {
        let mut adg = build_adg(&Solution::new(vec![vec![0, 1, 2]]).unwrap()).unwrap();
        adg.record_event(0, AdgEvent::Started(secs(0.0))).unwrap();
        adg.record_event(0, AdgEvent::Completed(secs(1.0))).unwrap();
        adg.refresh(secs(1.0));
        assert_eq!(adg.node(1).est_start, secs(1.0));
        adg.refresh(secs(3.0));
        assert_eq!(adg.node(1).est_start, secs(3.1));
        assert_eq!(adg.node(1).est_end, secs(4.1));
        adg.record_event(1, AdgEvent::Started(secs(3.5))).unwrap();
        assert_eq!(adg.node(1).est_end, secs(4.5));
    }

    #[test]
    fn slacks() {
        let mut adg = crossing();
        let s = adg.edge_slacks();
        // δ(DF, CD) = t_c(DF) − t_c(BC) = 1 − 1
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].planned, Time::ZERO);
        assert_eq!(s[0].expected, s[0].planned);
        adg.record_event(0, AdgEvent::Started(secs(0.0))).unwrap();
        adg.record_event(1, AdgEvent::Started(secs(0.0))).unwrap();
        adg.record_event(1, AdgEvent::Completed(secs(1.0))).unwrap();
        adg.record_event(0, AdgEvent::Completed(secs(4.0))).unwrap();
        let s = adg.edge_slacks();
        assert_eq!(s[0].expected - s[0].planned, secs(3.0));
    }

    #[test]
    fn dump_format() {
        let adg = crossing();
        let text = adg.dump();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "0 1 2 5 pending 0 1 0 1 - -");
        assert_eq!(lines[3], "1 1 2");
        assert_eq!(lines[4], "2 0 2");
    }

    #[test]
    fn invalid_plan_is_rejected() {
        // agent 1 walks onto agent 0's resting goal
        let sol = Solution::new(vec![vec![1], vec![0, 1, 2]]).unwrap();
        assert!(build_adg(&sol).is_err());
    }
}
