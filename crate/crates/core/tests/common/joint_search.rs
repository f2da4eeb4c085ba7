//! Exhaustive joint-state search for the optimal 1-robust sum of costs.
//!
//! State: every agent's vertex, which agents have committed to staying on
//! their goal forever, and whether any step has been taken. One step moves
//! all uncommitted agents at once and costs one per uncommitted agent.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use replan_core::mapf::{GridMap, MapfInstance, VertexId};

type State = (Vec<VertexId>, u32, bool);

fn moves(map: &GridMap, v: VertexId) -> Vec<VertexId> {
    let mut out = vec![v];
    let (x, y) = (v % map.width(), v / map.width());
    let w = map.width();
    if x + 1 < w {
        out.push(v + 1);
    }
    if x > 0 {
        out.push(v - 1);
    }
    if y + 1 < map.height() {
        out.push(v + w);
    }
    if y > 0 {
        out.push(v - w);
    }
    out.retain(|&n| map.is_free(n));
    out
}

/// Optimal sum of costs, or `None` when no 1-robust solution exists.
/// With `idle_offsets`, an agent that starts on its goal and moves at all
/// pays its offset on top of its arrival time.
pub fn optimal_soc(instance: &MapfInstance, idle_offsets: Option<&[u64]>) -> Option<u64> {
    let n = instance.num_agents();
    let goals = instance.goals();
    let starts = instance.starts();
    let full: u32 = (1u32 << n) - 1;

    let mut dist: HashMap<State, u64> = HashMap::new();
    let mut heap = BinaryHeap::new();

    let at_goal: Vec<usize> = (0..n).filter(|&k| starts[k] == goals[k]).collect();
    for subset in 0..(1u32 << at_goal.len()) {
        let mut mask = 0u32;
        let mut cost = 0u64;
        for (i, &k) in at_goal.iter().enumerate() {
            if subset & (1 << i) != 0 {
                mask |= 1 << k;
            } else if let Some(off) = idle_offsets {
                cost += off[k];
            }
        }
        let s: State = (starts.clone(), mask, false);
        if dist.get(&s).is_none_or(|&d| cost < d) {
            dist.insert(s.clone(), cost);
            heap.push(Reverse((cost, s)));
        }
    }

    while let Some(Reverse((cost, state))) = heap.pop() {
        if dist.get(&state).is_some_and(|&d| d < cost) {
            continue;
        }
        let (pos, mask, moved) = &state;
        if *mask == full {
            return Some(cost);
        }
        let mut next: Vec<(State, u64)> = Vec::new();
        if *moved {
            for k in 0..n {
                if mask & (1 << k) == 0 && pos[k] == goals[k] {
                    next.push(((pos.clone(), mask | (1 << k), true), cost));
                }
            }
        }
        let uncommitted = (0..n).filter(|&k| mask & (1 << k) == 0).count() as u64;
        let options: Vec<Vec<VertexId>> = (0..n)
            .map(|k| {
                if mask & (1 << k) != 0 {
                    vec![pos[k]]
                } else {
                    moves(&instance.map, pos[k])
                }
            })
            .collect();
        let mut choice = vec![0usize; n];
        'outer: loop {
            let q: Vec<VertexId> = (0..n).map(|k| options[k][choice[k]]).collect();
            let ok = (0..n).all(|k| {
                (0..n).all(|l| k == l || (q[k] != q[l] && q[k] != pos[l]))
            });
            if ok {
                next.push(((q, *mask, true), cost + uncommitted));
            }
            for k in 0..n {
                choice[k] += 1;
                if choice[k] < options[k].len() {
                    continue 'outer;
                }
                choice[k] = 0;
            }
            break;
        }
        for (s, c) in next {
            if dist.get(&s).is_none_or(|&d| c < d) {
                dist.insert(s.clone(), c);
                heap.push(Reverse((c, s)));
            }
        }
    }
    None
}
