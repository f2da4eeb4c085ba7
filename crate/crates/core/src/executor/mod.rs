//! Deterministic discrete-event simulation of ADG-gated plan execution with
//! one dynamic obstacle and at most one replanning.
//!
//! Processing order within one instant: obstacle disappearance, action
//! completions, obstacle appearance, replanning trigger and handover, then
//! action starts. An action starts as soon as the ADG allows it, unless its
//! destination currently holds the obstacle; then the start is deferred to
//! the obstacle's disappearance.

mod obstacle;
mod trace;

use std::collections::{BTreeMap, BTreeSet};

use log::{debug, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::adg::{Adg, AdgEvent, NodeId};
use crate::error::{Error, Result};
use crate::mapf::{AgentId, MapfInstance, Solution, VertexId};
use crate::planner::{solve_from_state_weighted, PlannerConfig};
use crate::time::Time;

pub use obstacle::{obstacle_candidates, sample_obstacle, ObstacleEvent, OBSTACLE_BUFFER_STEPS};
pub use trace::{TraceEvent, TraceKind};

/// Extra random duration added to every action. Testing hook for the
/// safety properties; production scenarios leave it unset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Jitter {
    pub seed: u64,
    pub max_extra: Time,
}

#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub instance: MapfInstance,
    pub solution: Solution,
    pub obstacle: Option<ObstacleEvent>,
    pub replan_time: Option<Time>,
    pub planner: PlannerConfig,
    pub action_duration: Time,
    pub jitter: Option<Jitter>,
}

impl ScenarioConfig {
    pub fn new(instance: MapfInstance, solution: Solution) -> Self {
        ScenarioConfig {
            instance,
            solution,
            obstacle: None,
            replan_time: None,
            planner: PlannerConfig::default(),
            action_duration: Time::from_secs(1),
            jitter: None,
        }
    }

    pub fn with_obstacle(mut self, obstacle: Option<ObstacleEvent>) -> Self {
        self.obstacle = obstacle;
        self
    }

    pub fn with_replan(mut self, t: Option<Time>) -> Self {
        self.replan_time = t;
        self
    }
}

/// Two agents holding one vertex during overlapping intervals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OccupancyViolation {
    pub vertex: VertexId,
    pub agents: (AgentId, AgentId),
    pub intervals: ((Time, Time), (Time, Time)),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    /// Sum over agents of their final goal-arrival times, in seconds.
    pub executed_soc: f64,
    pub finish_times: Vec<Time>,
    pub trace: Vec<TraceEvent>,
    /// Solver runtime `t_r` of the replan call (seconds, effort-based); 0
    /// without replanning.
    pub replan_runtime: f64,
    /// Agents that had not finished their plan at the replan trigger.
    pub unfinished_at_replan: usize,
    pub replan_triggered_at: Option<Time>,
    pub replan_handover_at: Option<Time>,
    /// ADG state at the replan trigger, before the handover.
    pub snapshot: Option<Adg>,
    pub violations: Vec<OccupancyViolation>,
}

impl ScenarioResult {
    pub fn makespan(&self) -> Time {
        self.finish_times.iter().copied().max().unwrap_or(Time::ZERO)
    }

    pub fn trace_text(&self) -> String {
        self.trace.iter().map(|e| format!("{e}\n")).collect()
    }
}

/// `SOC^eirp_t = SOC^eir_t + t_r · (agents unfinished at t)`.
pub fn overhead_adjusted_soc(result: &ScenarioResult) -> f64 {
    result.executed_soc + result.replan_runtime * result.unfinished_at_replan as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ObstacleState {
    Waiting,
    Present,
    Gone,
}

#[derive(Debug, Clone, Copy)]
struct Running {
    node: NodeId,
    end: Time,
}

struct Sim<'a> {
    cfg: &'a ScenarioConfig,
    adg: Adg,
    now: Time,
    position: Vec<VertexId>,
    running: Vec<Option<Running>>,
    finish: Vec<Time>,
    obstacle: ObstacleState,
    trace: Vec<TraceEvent>,
    jitter_rng: Option<(ChaCha8Rng, Time)>,
    // per vertex: (agent, enter, leave); open visits have leave = None
    occupancy: Visits,
    replan_pending: bool,
    result_snapshot: Option<Adg>,
    unfinished_at_replan: usize,
    replan_triggered_at: Option<Time>,
    replan_handover_at: Option<Time>,
    replan_runtime: f64,
    // deferred starts already written to the trace
    blocked_noted: BTreeSet<NodeId>,
}

/// Runs one scenario to completion.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioResult> {
    if cfg.action_duration <= Time::ZERO {
        return Err(Error::Invalid("action duration must be positive".into()));
    }
    if cfg.solution.num_agents() != cfg.instance.num_agents() {
        return Err(Error::Invalid("solution and instance disagree on agent count".into()));
    }
    let adg = Adg::build(&cfg.solution, Time::ZERO, cfg.action_duration)?;
    let n = cfg.instance.num_agents();
    let position = cfg.instance.starts();
    let mut occupancy: BTreeMap<VertexId, Vec<_>> = BTreeMap::new();
    for (k, &v) in position.iter().enumerate() {
        occupancy.entry(v).or_default().push((k, Time::ZERO, None));
    }
    let mut sim = Sim {
        cfg,
        adg,
        now: Time::ZERO,
        position,
        running: vec![None; n],
        finish: vec![Time::ZERO; n],
        obstacle: if cfg.obstacle.is_some() {
            ObstacleState::Waiting
        } else {
            ObstacleState::Gone
        },
        trace: Vec::new(),
        jitter_rng: cfg
            .jitter
            .map(|j| (ChaCha8Rng::seed_from_u64(j.seed), j.max_extra)),
        occupancy,
        replan_pending: false,
        result_snapshot: None,
        unfinished_at_replan: 0,
        replan_triggered_at: None,
        replan_handover_at: None,
        replan_runtime: 0.0,
        blocked_noted: BTreeSet::new(),
    };
    sim.run()?;
    let violations = sim.violations();
    let executed_soc = sim.finish.iter().map(|t| t.as_secs_f64()).sum();
    Ok(ScenarioResult {
        executed_soc,
        finish_times: sim.finish,
        trace: sim.trace,
        replan_runtime: sim.replan_runtime,
        unfinished_at_replan: sim.unfinished_at_replan,
        replan_triggered_at: sim.replan_triggered_at,
        replan_handover_at: sim.replan_handover_at,
        snapshot: sim.result_snapshot,
        violations,
    })
}

impl Sim<'_> {
    fn run(&mut self) -> Result<()> {
        // hard stop far beyond any sensible execution
        let limit = Time::from_secs(
            10 * (self.cfg.solution.makespan_steps() as i64 + 1) * (self.cfg.instance.num_agents() as i64 + 1)
                + 10_000,
        );
        loop {
            self.obstacle_disappear();
            self.complete_due();
            self.obstacle_appear();
            self.replan_trigger();
            self.replan_handover()?;
            if !self.replan_pending {
                self.start_executable()?;
            }
            if self.finished() {
                return Ok(());
            }
            let next = self.next_event_time().ok_or_else(|| {
                Error::Scenario(format!(
                    "deadlock at {} s with unfinished agents; last trace lines:\n{}",
                    self.now,
                    self.trace
                        .iter()
                        .rev()
                        .take(8)
                        .map(|e| e.to_string())
                        .collect::<Vec<_>>()
                        .join("\n")
                ))
            })?;
            if next > limit {
                return Err(Error::Scenario(format!("execution exceeded {limit} s")));
            }
            self.now = next;
        }
    }

    fn finished(&self) -> bool {
        !self.replan_pending
            && self.running.iter().all(Option::is_none)
            && self.adg.all_completed()
            && (self.cfg.replan_time.is_none() || self.replan_triggered_at.is_some())
    }

    fn next_event_time(&self) -> Option<Time> {
        let mut next: Option<Time> = None;
        let mut consider = |t: Time| {
            if t > self.now {
                next = Some(next.map_or(t, |n: Time| n.min(t)));
            }
        };
        for r in self.running.iter().flatten() {
            consider(r.end);
        }
        if let Some(o) = self.cfg.obstacle {
            match self.obstacle {
                ObstacleState::Waiting => {
                    consider(o.appear);
                    consider(o.disappear);
                }
                ObstacleState::Present => consider(o.disappear),
                ObstacleState::Gone => {}
            }
        }
        if let (Some(r), None) = (self.cfg.replan_time, self.replan_triggered_at) {
            consider(r);
        }
        next
    }

    fn log(&mut self, kind: TraceKind, agent: Option<AgentId>, idx: Option<usize>, from: Option<VertexId>, to: Option<VertexId>) {
        self.trace.push(TraceEvent {
            time: self.now,
            kind,
            agent,
            action_idx: idx,
            from,
            to,
        });
    }

    fn vertex_busy(&self, v: VertexId) -> bool {
        (0..self.position.len()).any(|k| match self.running[k] {
            Some(r) => {
                let a = self.adg.node(r.node).action;
                a.from == v || a.to == v
            }
            None => self.position[k] == v,
        })
    }

    fn obstacle_disappear(&mut self) {
        let Some(o) = self.cfg.obstacle else { return };
        if self.obstacle != ObstacleState::Gone && self.now >= o.disappear {
            if self.obstacle == ObstacleState::Waiting {
                warn!("obstacle at vertex {} never found its vertex free", o.vertex);
            }
            self.obstacle = ObstacleState::Gone;
            self.log(TraceKind::ObstacleDisappear, None, None, Some(o.vertex), Some(o.vertex));
        }
    }

    fn obstacle_appear(&mut self) {
        let Some(o) = self.cfg.obstacle else { return };
        if self.obstacle == ObstacleState::Waiting && self.now >= o.appear {
            if self.vertex_busy(o.vertex) {
                debug!("obstacle appearance deferred at {} s: vertex {} occupied", self.now, o.vertex);
                return;
            }
            self.obstacle = ObstacleState::Present;
            self.log(TraceKind::ObstacleAppear, None, None, Some(o.vertex), Some(o.vertex));
        }
    }

    fn complete_due(&mut self) {
        for k in 0..self.running.len() {
            let Some(r) = self.running[k] else { continue };
            if r.end != self.now {
                continue;
            }
            self.adg
                .record_event(r.node, AdgEvent::Completed(self.now))
                .expect("completion of a running node in time order");
            self.running[k] = None;
            let a = self.adg.node(r.node).action;
            self.position[k] = a.to;
            let last_of_plan = a.index == self.adg.agent_nodes(k).len();
            if !a.is_wait() || last_of_plan {
                self.finish[k] = self.now;
            }
            if !a.is_wait() {
                self.close_visit(a.from, k);
            }
            self.log(TraceKind::Complete, Some(k), Some(a.index), Some(a.from), Some(a.to));
        }
        self.adg.refresh(self.now);
    }

    fn start_executable(&mut self) -> Result<()> {
        self.adg.refresh(self.now);
        let duration = self.cfg.action_duration;
        for id in self.adg.executable_actions() {
            let a = self.adg.node(id).action;
            if self.running[a.agent].is_some() {
                continue;
            }
            if let Some(o) = self.cfg.obstacle {
                if self.obstacle == ObstacleState::Present && o.vertex == a.to && !a.is_wait() {
                    if self.blocked_noted.insert(id) {
                        self.log(TraceKind::Blocked, Some(a.agent), Some(a.index), Some(a.from), Some(a.to));
                    }
                    continue;
                }
            }
            self.adg
                .record_event(id, AdgEvent::Started(self.now))
                .map_err(|e| Error::Scenario(e.to_string()))?;
            self.log(TraceKind::Start, Some(a.agent), Some(a.index), Some(a.from), Some(a.to));
            let extra = match &mut self.jitter_rng {
                Some((rng, max)) if max.ticks() > 0 => Time::from_ticks(rng.gen_range(0..=max.ticks())),
                _ => Time::ZERO,
            };
            if !a.is_wait() {
                self.occupancy
                    .entry(a.to)
                    .or_default()
                    .push((a.agent, self.now, None));
            }
            self.running[a.agent] = Some(Running {
                node: id,
                end: self.now + duration + extra,
            });
        }
        self.adg.refresh(self.now);
        Ok(())
    }

    fn close_visit(&mut self, v: VertexId, agent: AgentId) {
        if let Some(list) = self.occupancy.get_mut(&v) {
            if let Some(entry) = list
                .iter_mut()
                .rev()
                .find(|(k, _, leave)| *k == agent && leave.is_none())
            {
                entry.2 = Some(self.now);
            }
        }
    }

    fn replan_trigger(&mut self) {
        let Some(r) = self.cfg.replan_time else { return };
        if self.replan_triggered_at.is_some() || self.now < r {
            return;
        }
        self.adg.refresh(self.now);
        self.result_snapshot = Some(self.adg.clone());
        self.unfinished_at_replan = (0..self.position.len())
            .filter(|&k| {
                let (p, _) = self.adg.progress(k);
                p != self.adg.agent_nodes(k).len()
            })
            .count();
        self.replan_triggered_at = Some(self.now);
        self.replan_pending = true;
        self.log(TraceKind::Replan, None, None, None, None);
    }

    fn replan_handover(&mut self) -> Result<()> {
        if !self.replan_pending || self.running.iter().any(Option::is_some) {
            return Ok(());
        }
        let goals = self.cfg.instance.goals();
        let offsets: Vec<u64> = (0..self.position.len())
            .map(|k| {
                if self.position[k] == goals[k] {
                    (self.now - self.finish[k]).ticks().max(0) as u64
                } else {
                    0
                }
            })
            .collect();
        let outcome = solve_from_state_weighted(
            &self.cfg.instance,
            &self.position,
            &offsets,
            self.cfg.action_duration.ticks() as u64,
            &self.cfg.planner,
        )
        .map_err(|e| Error::Scenario(format!("replanning at {} s failed: {e}", self.now)))?;
        debug!(
            "replanned at {} s in {:?} ({} low-level expansions)",
            self.now, outcome.wall, outcome.stats.low_level_expanded
        );
        self.replan_runtime = outcome.effort_seconds(&self.cfg.planner);
        self.adg = Adg::build(&outcome.solution, self.now, self.cfg.action_duration)?;
        self.blocked_noted.clear();
        self.replan_pending = false;
        self.replan_handover_at = Some(self.now);
        Ok(())
    }

    fn violations(&self) -> Vec<OccupancyViolation> {
        find_overlaps(&self.occupancy)
    }
}

type Visits = BTreeMap<VertexId, Vec<(AgentId, Time, Option<Time>)>>;

/// Pairs of visits by different agents to one vertex whose intervals
/// overlap strictly. Open visits extend forever.
fn find_overlaps(occupancy: &Visits) -> Vec<OccupancyViolation> {
    let mut out = Vec::new();
    let far = Time::from_ticks(i64::MAX);
    for (&v, list) in occupancy {
        for (i, &(k, s1, e1)) in list.iter().enumerate() {
            for &(l, s2, e2) in &list[i + 1..] {
                if k == l {
                    continue;
                }
                let (e1, e2) = (e1.unwrap_or(far), e2.unwrap_or(far));
                if s1 < e2 && s2 < e1 {
                    out.push(OccupancyViolation {
                        vertex: v,
                        agents: (k, l),
                        intervals: ((s1, e1), (s2, e2)),
                    });
                }
            }
        }
    }
    out
}
