//! The 42-dimensional execution-state feature vector computed from an ADG
//! snapshot at query time `t`.

use std::ops::Range;
use std::sync::OnceLock;

use crate::adg::{Adg, AdgNode, NodeStatus};
use crate::mapf::{AgentId, MapfInstance, Solution};
use crate::time::Time;

pub const NUM_FEATURES: usize = 42;

/// Window lengths of the parameterized features, ascending.
pub const WINDOWS: [usize; 7] = [1, 3, 5, 7, 10, 15, 20];

/// Canonical feature names, in vector order. Also the dataset CSV header.
pub fn feature_names() -> &'static [String] {
    static NAMES: OnceLock<Vec<String>> = OnceLock::new();
    NAMES.get_or_init(|| {
        let mut names: Vec<String> = [
            "map_height",
            "map_width",
            "agents_count",
            "planned_soc",
            "planned_makespan",
            "replan_time",
            "unfinished_agents",
            "progress_gap",
            "highest_plan_delay",
            "highest_exp_plan_delay",
            "total_plan_delay",
            "total_exp_plan_delay",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        for family in [
            "highest_action_delay",
            "highest_exp_action_delay",
            "total_action_delay",
            "total_exp_action_delay",
        ] {
            names.extend(WINDOWS.iter().map(|n| format!("{family}_n{n}")));
        }
        names.push("highest_slack_increase".into());
        names.push("waiting_agents".into());
        debug_assert_eq!(names.len(), NUM_FEATURES);
        names
    })
}

/// Position of a feature by name.
pub fn feature_index(name: &str) -> Option<usize> {
    feature_names().iter().position(|n| n == name)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector(pub [f64; NUM_FEATURES]);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        feature_index(name).map(|i| self.0[i])
    }
}

/// Per agent `(p, e)`: count of finished and of assigned actions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProgressState {
    pub agents: Vec<(usize, usize)>,
}

impl ProgressState {
    pub fn from_adg(adg: &Adg) -> Self {
        ProgressState {
            agents: (0..adg.num_agents()).map(|k| adg.progress(k)).collect(),
        }
    }

    /// 1-based action index ranges of the last `n` finished and the last `n`
    /// assigned actions of agent `k`.
    pub fn window_sets(&self, k: AgentId, n: usize) -> (Range<usize>, Range<usize>) {
        assert!(n >= 1, "window length must be positive");
        let (p, e) = self.agents[k];
        let window = |last: usize| last.saturating_sub(n - 1).max(1)..last + 1;
        (window(p), window(e))
    }
}

fn secs(t: Time) -> f64 {
    t.as_secs_f64()
}

/// Computes the feature vector at time `t` from a snapshot of the ADG that
/// drives execution of `sol`.
pub fn extract_features(adg: &Adg, instance: &MapfInstance, sol: &Solution, t: Time) -> FeatureVector {
    let n_agents = sol.num_agents();
    let state = ProgressState::from_adg(adg);
    let node = |k: AgentId, idx: usize| -> &AdgNode { adg.node(adg.agent_nodes(k)[idx - 1]) };

    let plan_lens: Vec<usize> = (0..n_agents).map(|k| sol.plan_len(k)).collect();
    let mut f = Vec::with_capacity(NUM_FEATURES);
    f.push(instance.map.height() as f64);
    f.push(instance.map.width() as f64);
    f.push(n_agents as f64);
    f.push(plan_lens.iter().sum::<usize>() as f64);
    f.push(plan_lens.iter().copied().max().unwrap_or(0) as f64);
    f.push(secs(t));

    let unfinished = (0..n_agents).filter(|&k| state.agents[k].0 != plan_lens[k]).count();
    f.push(unfinished as f64);
    let ps = state.agents.iter().map(|&(p, _)| p);
    let gap = ps.clone().max().unwrap_or(0) - ps.min().unwrap_or(0);
    f.push(gap as f64);

    // plan delays: agents without a finished (assigned) action are skipped
    let actual_plan: Vec<Time> = (0..n_agents)
        .filter(|&k| state.agents[k].0 > 0)
        .map(|k| {
            let a = node(k, state.agents[k].0);
            a.actual_end.expect("finished action has an end") - a.planned_end
        })
        .collect();
    let expected_plan: Vec<Time> = (0..n_agents)
        .filter(|&k| state.agents[k].1 > 0)
        .map(|k| {
            let a = node(k, state.agents[k].1);
            a.est_end - a.planned_end
        })
        .collect();
    f.push(secs(max_or_zero(&actual_plan)));
    f.push(secs(max_or_zero(&expected_plan)));
    f.push(secs(sum(&actual_plan)));
    f.push(secs(sum(&expected_plan)));

    // window sums per agent and window length
    let actual_delay = |a: &AdgNode| {
        a.actual_end.expect("finished") - a.actual_start.expect("started") - a.planned_duration()
    };
    let expected_delay = |a: &AdgNode| a.est_end - a.est_start - a.planned_duration();
    let mut finished_windows = Vec::with_capacity(WINDOWS.len());
    let mut assigned_windows = Vec::with_capacity(WINDOWS.len());
    for &n in &WINDOWS {
        let mut fin = Vec::with_capacity(n_agents);
        let mut asg = Vec::with_capacity(n_agents);
        for k in 0..n_agents {
            let (p_set, e_set) = state.window_sets(k, n);
            fin.push(p_set.map(|i| actual_delay(node(k, i))).fold(Time::ZERO, |s, d| s + d));
            asg.push(e_set.map(|i| expected_delay(node(k, i))).fold(Time::ZERO, |s, d| s + d));
        }
        finished_windows.push(fin);
        assigned_windows.push(asg);
    }
    f.extend(finished_windows.iter().map(|w| secs(max_or_zero(w))));
    f.extend(assigned_windows.iter().map(|w| secs(max_or_zero(w))));
    f.extend(finished_windows.iter().map(|w| secs(sum(w))));
    f.extend(assigned_windows.iter().map(|w| secs(sum(w))));

    let increases: Vec<Time> = adg
        .edge_slacks()
        .into_iter()
        .filter(|s| adg.node(adg.edges()[s.edge].from).status != NodeStatus::Completed)
        .map(|s| s.expected - s.planned)
        .collect();
    f.push(secs(max_or_zero(&increases)));

    let waiting = state.agents.iter().filter(|&&(p, e)| p == e).count();
    f.push(waiting as f64);

    FeatureVector(f.try_into().expect("exactly 42 features"))
}

fn max_or_zero(xs: &[Time]) -> Time {
    xs.iter().copied().max().unwrap_or(Time::ZERO)
}

fn sum(xs: &[Time]) -> Time {
    xs.iter().fold(Time::ZERO, |s, &x| s + x)
}
