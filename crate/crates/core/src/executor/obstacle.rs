use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mapf::{Solution, VertexId};
use crate::time::{Time, TICKS_PER_SECOND};

/// Steps between the obstacle's appearance and the planned arrival it
/// targets; also the minimum time it stays.
pub const OBSTACLE_BUFFER_STEPS: usize = 3;

/// A single vertex blocked during `[appear, disappear)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ObstacleEvent {
    pub vertex: VertexId,
    pub appear: Time,
    pub disappear: Time,
}

impl ObstacleEvent {
    pub fn validate(&self, makespan: Time) -> Result<()> {
        let buffer = Time::from_secs(OBSTACLE_BUFFER_STEPS as i64);
        if self.disappear < self.appear + buffer {
            return Err(Error::Invalid(
                "obstacle must stay at least 3 s after it appears".into(),
            ));
        }
        if self.appear + buffer > makespan {
            return Err(Error::Invalid(
                "obstacle must appear at least 3 s before the planned makespan".into(),
            ));
        }
        Ok(())
    }
}

/// `(appear step, vertex)` pairs where the vertex is free at the appear step
/// under the planned trajectories and some agent is planned to move onto it
/// exactly three steps later.
pub fn obstacle_candidates(sol: &Solution) -> Vec<(usize, Vec<VertexId>)> {
    let makespan = sol.makespan_steps();
    if makespan < 2 * OBSTACLE_BUFFER_STEPS {
        return Vec::new();
    }
    (0..=makespan - OBSTACLE_BUFFER_STEPS)
        .map(|a| {
            let target = a + OBSTACLE_BUFFER_STEPS;
            let mut vs: Vec<VertexId> = sol
                .paths()
                .iter()
                .filter(|p| target < p.len() && p[target - 1] != p[target])
                .map(|p| p[target])
                .filter(|&v| (0..sol.num_agents()).all(|l| sol.position(l, a) != v))
                .collect();
            vs.sort_unstable();
            vs.dedup();
            (a, vs)
        })
        .collect()
}

/// Seeded obstacle: a random appearance step in `[0, makespan − 3]`, a
/// random qualifying vertex for it, and a disappearance time drawn on a
/// 0.1 s grid from `[appear + 3, makespan]`.
pub fn sample_obstacle(sol: &Solution, seed: u64) -> Result<ObstacleEvent> {
    let makespan = sol.makespan_steps();
    if makespan < 2 * OBSTACLE_BUFFER_STEPS {
        return Err(Error::Sampling(format!(
            "makespan {makespan} s leaves no room for the 3 s buffers"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut candidates = obstacle_candidates(sol);
    candidates.shuffle(&mut rng);
    let (appear, vertices) = candidates
        .into_iter()
        .find(|(_, vs)| !vs.is_empty())
        .ok_or_else(|| Error::Sampling("no vertex is entered 3 s after a free instant".into()))?;
    let vertex = *vertices.choose(&mut rng).expect("non-empty");

    let tenth = TICKS_PER_SECOND / 10;
    let lo = (appear + OBSTACLE_BUFFER_STEPS) as i64 * 10;
    let hi = makespan as i64 * 10;
    let disappear = Time::from_ticks(rng.gen_range(lo..=hi) * tenth);
    Ok(ObstacleEvent {
        vertex,
        appear: Time::from_secs(appear as i64),
        disappear,
    })
}
