//! Recomputes the feature vector straight from a plan and an execution
//! trace, without touching the library's dependency graph.
//!
//! Works in integer milliseconds and builds its own cross-agent
//! dependencies from a time-indexed occupancy table.

use std::collections::{BTreeMap, HashMap};

use replan_core::executor::{TraceEvent, TraceKind};
use replan_core::mapf::{MapfInstance, Solution};

const OVERRUN_MS: i64 = 100;
const WINDOWS: [usize; 7] = [1, 3, 5, 7, 10, 15, 20];

#[derive(Clone, Copy, Default)]
struct Act {
    start: Option<i64>,
    end: Option<i64>,
}

/// Dependencies as `(agent k, action i) -> (agent l, action j)` (1-based).
pub fn cross_dependencies(sol: &Solution) -> Vec<((usize, usize), (usize, usize))> {
    let makespan = sol.paths().iter().map(|p| p.len() - 1).max().unwrap_or(0);
    // vertex -> time-ordered list of agents present at each step
    let mut table: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
    for step in 0..=makespan {
        for (k, path) in sol.paths().iter().enumerate() {
            let v = path[step.min(path.len() - 1)];
            table.entry(v).or_default().push((step, k));
        }
    }
    let mut raw: HashMap<(usize, usize), Vec<(usize, usize)>> = HashMap::new();
    for (_, occ) in table {
        // collapse runs of the same agent to (agent, first step, last step)
        let mut runs: Vec<(usize, usize, usize)> = Vec::new();
        for (step, k) in occ {
            match runs.last_mut() {
                Some(r) if r.0 == k && r.2 + 1 == step => r.2 = step,
                _ => runs.push((k, step, step)),
            }
        }
        for pair in runs.windows(2) {
            let (k, _, k_last) = pair[0];
            let (l, l_first, _) = pair[1];
            if k == l {
                continue;
            }
            // k leaves with action k_last + 1, l enters with action l_first
            raw.entry((k, l)).or_default().push((k_last + 1, l_first));
        }
    }
    let mut out = Vec::new();
    for ((k, l), mut list) in raw {
        list.sort();
        list.dedup();
        for &(i, j) in &list {
            let dominated = list.iter().any(|&(i2, j2)| (i2, j2) != (i, j) && i2 >= i && j2 <= j);
            if !dominated {
                out.push(((k, i), (l, j)));
            }
        }
    }
    out.sort();
    out
}

/// Feature vector at time `t_ms` from the events of `trace` up to the first
/// replan line (or all of it), with actions of `dur_ms` each.
pub fn replay_features(
    instance: &MapfInstance,
    sol: &Solution,
    trace: &[TraceEvent],
    t_ms: i64,
    dur_ms: i64,
) -> Vec<f64> {
    let n = sol.num_agents();
    let lens: Vec<usize> = sol.paths().iter().map(|p| p.len() - 1).collect();
    let mut acts: Vec<Vec<Act>> = lens.iter().map(|&m| vec![Act::default(); m]).collect();
    for ev in trace {
        if ev.kind == TraceKind::Replan || ev.time.ticks() > t_ms {
            break;
        }
        let (Some(k), Some(i)) = (ev.agent, ev.action_idx) else { continue };
        match ev.kind {
            TraceKind::Start => acts[k][i - 1].start = Some(ev.time.ticks()),
            TraceKind::Complete => acts[k][i - 1].end = Some(ev.time.ticks()),
            _ => {}
        }
    }
    let planned_end = |i: usize| i as i64 * dur_ms;
    let deps = cross_dependencies(sol);
    let mut incoming: HashMap<(usize, usize), Vec<(usize, usize)>> = HashMap::new();
    for &(src, dst) in &deps {
        incoming.entry(dst).or_default().push(src);
    }

    // estimated (start, end) per action, memoized recursion over predecessors
    fn estimate(
        k: usize,
        i: usize,
        acts: &[Vec<Act>],
        incoming: &HashMap<(usize, usize), Vec<(usize, usize)>>,
        memo: &mut HashMap<(usize, usize), (i64, i64)>,
        t_ms: i64,
        dur_ms: i64,
    ) -> (i64, i64) {
        if let Some(&r) = memo.get(&(k, i)) {
            return r;
        }
        let a = acts[k][i - 1];
        let r = match (a.start, a.end) {
            (Some(s), Some(e)) => (s, e),
            (Some(s), None) => {
                let e = if t_ms > s + dur_ms { t_ms + OVERRUN_MS } else { s + dur_ms };
                (s, e)
            }
            _ => {
                let mut preds: Vec<(usize, usize)> = incoming.get(&(k, i)).cloned().unwrap_or_default();
                if i > 1 {
                    preds.push((k, i - 1));
                }
                // no predecessors: planned start; otherwise latest estimated end
                let mut s = if preds.is_empty() { (i as i64 - 1) * dur_ms } else { i64::MIN };
                for &(pk, pi) in &preds {
                    s = s.max(estimate(pk, pi, acts, incoming, memo, t_ms, dur_ms).1);
                }
                // could have started already but has not
                let startable = preds.iter().all(|&(pk, pi)| acts[pk][pi - 1].end.is_some());
                if startable && s < t_ms {
                    s = t_ms + OVERRUN_MS;
                }
                (s, s + dur_ms)
            }
        };
        memo.insert((k, i), r);
        r
    }
    let mut memo = HashMap::new();
    let mut est = |k: usize, i: usize| estimate(k, i, &acts, &incoming, &mut memo, t_ms, dur_ms);

    let p: Vec<usize> = acts.iter().map(|a| a.iter().take_while(|x| x.end.is_some()).count()).collect();
    let e: Vec<usize> = acts.iter().map(|a| a.iter().take_while(|x| x.start.is_some()).count()).collect();
    let s = |ms: i64| ms as f64 / 1000.0;

    let mut f = vec![
        instance.map.height() as f64,
        instance.map.width() as f64,
        n as f64,
        lens.iter().sum::<usize>() as f64,
        *lens.iter().max().unwrap() as f64,
        s(t_ms),
        (0..n).filter(|&k| p[k] != lens[k]).count() as f64,
        (p.iter().max().unwrap() - p.iter().min().unwrap()) as f64,
    ];

    let mut hp = 0;
    let mut tp = 0;
    let mut hep = 0;
    let mut tep = 0;
    for k in 0..n {
        if p[k] > 0 {
            let d = acts[k][p[k] - 1].end.unwrap() - planned_end(p[k]);
            hp = hp.max(d);
            tp += d;
        }
        if e[k] > 0 {
            let d = est(k, e[k]).1 - planned_end(e[k]);
            hep = hep.max(d);
            tep += d;
        }
    }
    f.extend([s(hp), s(hep), s(tp), s(tep)]);

    let mut rows = [[0i64; 7]; 4];
    for (w, &len) in WINDOWS.iter().enumerate() {
        for k in 0..n {
            let mut fin = 0;
            for i in (1..=p[k]).rev().take(len) {
                let a = acts[k][i - 1];
                fin += a.end.unwrap() - a.start.unwrap() - dur_ms;
            }
            let mut asg = 0;
            for i in (1..=e[k]).rev().take(len) {
                let (s0, e0) = est(k, i);
                asg += e0 - s0 - dur_ms;
            }
            rows[0][w] = rows[0][w].max(fin);
            rows[1][w] = rows[1][w].max(asg);
            rows[2][w] += fin;
            rows[3][w] += asg;
        }
    }
    for row in rows {
        f.extend(row.iter().map(|&x| s(x)));
    }

    let mut slack: Option<i64> = None;
    for &((k, i), (l, j)) in &deps {
        if acts[k][i - 1].end.is_some() {
            continue;
        }
        let planned = planned_end(i) - if j > 1 { planned_end(j - 1) } else { 0 };
        let expected = est(k, i).1 - if j > 1 { est(l, j - 1).1 } else { 0 };
        slack = Some(slack.map_or(expected - planned, |m| m.max(expected - planned)));
    }
    f.push(s(slack.unwrap_or(0)));
    f.push((0..n).filter(|&k| p[k] == e[k]).count() as f64);
    f
}
