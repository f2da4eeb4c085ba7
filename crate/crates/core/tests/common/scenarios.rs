//! Random small scenarios shared by the execution tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use replan_core::mapf::{generate_instance, GridMap, MapfInstance, Solution};
use replan_core::planner::{solve_1robust, PlannerConfig};

pub fn quick_planner() -> PlannerConfig {
    PlannerConfig {
        node_limit: 5_000,
        ..PlannerConfig::default()
    }
}

/// A random grid of at most `max_side`² cells with up to 20 % blocked
/// cells, a random instance on it and its optimal plan. `None` when the
/// draw is unusable (disconnected or too hard for the quick planner).
pub fn random_planned(seed: u64, max_side: usize, max_agents: usize) -> Option<(MapfInstance, Solution)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = rng.gen_range(4..=max_side);
    let h = rng.gen_range(4..=max_side);
    let density = rng.gen_range(0.0..0.2);
    let blocked: Vec<bool> = (0..w * h).map(|_| rng.gen_bool(density)).collect();
    let map = GridMap::new(w, h, blocked).ok()?;
    let agents = rng.gen_range(1..=max_agents);
    let inst = generate_instance(&map, agents, rng.gen()).ok()?;
    let sol = solve_1robust(&inst, &quick_planner()).ok()?.solution;
    Some((inst, sol))
}
