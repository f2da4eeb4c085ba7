mod common;

use common::scenarios::{quick_planner, random_planned};
use common::trace_replay::replay_features;
use replan_core::adg::{Adg, AdgEvent};
use replan_core::executor::{run_scenario, sample_obstacle, Jitter, ScenarioConfig};
use replan_core::features::{extract_features, feature_index, feature_names, WINDOWS};
use replan_core::mapf::{GridMap, MapfInstance, Solution};
use replan_core::Time;

fn assert_close(lib: &[f64], oracle: &[f64], ctx: &str) {
    assert_eq!(lib.len(), oracle.len());
    for (i, (a, b)) in lib.iter().zip(oracle).enumerate() {
        assert!((a - b).abs() <= 1e-9, "{ctx}: {} lib {a} oracle {b}", feature_names()[i]);
    }
}

#[test]
fn features_match_trace_replay() {
    let mut traces = 0;
    let mut nonzero_slack = 0;
    for seed in 0..400u64 {
        let Some((inst, sol)) = random_planned(seed, 10, 6) else { continue };
        let obstacle = sample_obstacle(&sol, seed).ok();
        let jitter = (seed % 3 == 0).then_some(Jitter {
            seed,
            max_extra: Time::from_ticks(800),
        });
        for tenths in [5, 23, 40, 61, 87] {
            let t = Time::from_ticks(tenths * 100);
            let cfg = ScenarioConfig {
                planner: quick_planner(),
                jitter,
                ..ScenarioConfig::new(inst.clone(), sol.clone())
            }
            .with_obstacle(obstacle)
            .with_replan(Some(t));
            let Ok(r) = run_scenario(&cfg) else { continue };
            let snap = r.snapshot.as_ref().unwrap();
            let lib = extract_features(snap, &inst, &sol, t);
            let oracle = replay_features(&inst, &sol, &r.trace, t.ticks(), 1000);
            assert_close(lib.as_slice(), &oracle, &format!("seed {seed} t {t}"));
            if lib.get("highest_slack_increase").unwrap() > 0.0 {
                nonzero_slack += 1;
            }
            traces += 1;
        }
    }
    assert!(traces >= 50, "only {traces} traces");
    assert!(nonzero_slack > 0, "corpus never exercises slack increase");
}

#[test]
fn zero_delay_execution_has_no_delay_features() {
    let mut checked = 0;
    for seed in 0..50 {
        let Some((inst, sol)) = random_planned(seed, 8, 5) else { continue };
        for tenths in (0..=sol.makespan_steps() as i64 * 10).step_by(7) {
            let t = Time::from_ticks(tenths * 100);
            let cfg = ScenarioConfig {
                planner: quick_planner(),
                ..ScenarioConfig::new(inst.clone(), sol.clone())
            }
            .with_replan(Some(t));
            let r = run_scenario(&cfg).unwrap();
            let f = extract_features(r.snapshot.as_ref().unwrap(), &inst, &sol, t);
            let start = feature_index("highest_plan_delay").unwrap();
            let end = feature_index("highest_slack_increase").unwrap();
            assert!(f.0[start..=end].iter().all(|&x| x == 0.0), "seed {seed} t {t}: {:?}", f.0);
            checked += 1;
        }
    }
    assert!(checked > 100);
}

#[test]
fn window_totals_grow_with_window_length() {
    for seed in 0..80 {
        let Some((inst, sol)) = random_planned(seed, 10, 6) else { continue };
        let Ok(o) = sample_obstacle(&sol, seed + 1) else { continue };
        let t = o.disappear;
        let cfg = ScenarioConfig {
            planner: quick_planner(),
            ..ScenarioConfig::new(inst.clone(), sol.clone())
        }
        .with_obstacle(Some(o))
        .with_replan(Some(t));
        let Ok(r) = run_scenario(&cfg) else { continue };
        let f = extract_features(r.snapshot.as_ref().unwrap(), &inst, &sol, t);
        for family in ["total_action_delay", "total_exp_action_delay", "highest_action_delay"] {
            let vals: Vec<f64> = WINDOWS
                .iter()
                .map(|n| f.get(&format!("{family}_n{n}")).unwrap())
                .collect();
            assert!(vals.windows(2).all(|w| w[0] <= w[1]), "{family}: {vals:?}");
        }
    }
}

/// Three agents on separate rows; their most recent actions overran by
/// 1, 3 and 5 s, and agent 2 also lost 2 s on its first action.
#[test]
fn staggered_delays_on_three_agents() {
    let map = GridMap::open(6, 3);
    let inst = MapfInstance::new(map, vec![(0, 5), (6, 11), (12, 17)]).unwrap();
    let sol = Solution::new(vec![(0..6).collect(), (6..12).collect(), (12..18).collect()]).unwrap();
    let mut adg = Adg::build(&sol, Time::ZERO, Time::from_secs(1)).unwrap();
    let s = Time::from_secs;
    let ids = |adg: &Adg, k: usize| adg.agent_nodes(k).to_vec();
    let (a0, a1, a2) = (ids(&adg, 0), ids(&adg, 1), ids(&adg, 2));
    // events must be fed in time order
    let mut events = vec![
        (s(0), a0[0], true),
        (s(0), a1[0], true),
        (s(0), a2[0], true),
        (s(1), a0[0], false),
        (s(1), a1[0], false),
        (s(3), a2[0], false),
        (s(1), a0[1], true),
        (s(1), a1[1], true),
        (s(3), a2[1], true),
        (s(3), a0[1], false),
        (s(5), a1[1], false),
        (s(9), a2[1], false),
    ];
    events.sort_by_key(|e| e.0);
    for (t, id, start) in events {
        let ev = if start { AdgEvent::Started(t) } else { AdgEvent::Completed(t) };
        adg.record_event(id, ev).unwrap();
    }
    let f = extract_features(&adg, &inst, &sol, s(9));
    // latest finished actions are action 2 of every agent, planned to end at 2 s
    assert_eq!(f.get("total_plan_delay"), Some(1.0 + 3.0 + 7.0));
    assert_eq!(f.get("highest_plan_delay"), Some(7.0));
    assert_eq!(f.get("highest_action_delay_n1"), Some(5.0));
    assert_eq!(f.get("total_action_delay_n1"), Some(1.0 + 3.0 + 5.0));
    // widening the window adds the 2 s first-action overrun of agent 2
    assert_eq!(f.get("total_action_delay_n3"), Some(11.0));
    assert_eq!(f.get("highest_action_delay_n3"), Some(7.0));
    assert_eq!(f.get("waiting_agents"), Some(3.0));
    assert_eq!(f.get("progress_gap"), Some(0.0));
}
