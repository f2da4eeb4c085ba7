use std::fs;
use std::path::Path;

use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{GenerationConfig, LabeledRecord};
use crate::error::{Error, Result};
use crate::executor::{run_scenario, sample_obstacle, ObstacleEvent, ScenarioConfig, ScenarioResult};
use crate::features::extract_features;
use crate::mapf::{generate_instance, GridMap, MapfInstance, Solution};
use crate::planner::solve_1robust;
use crate::time::Time;

/// A skipped combination and why.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Failure {
    pub map: String,
    pub agents: usize,
    pub inst_seed: u64,
    pub obs_seed: Option<u64>,
    pub replan_seed: Option<u64>,
    pub reason: &'static str,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct GenerationOutput {
    /// Sorted by `(map, agents, inst_seed, obs_seed, replan_seed)`.
    pub records: Vec<LabeledRecord>,
    pub failures: Vec<Failure>,
}

impl GenerationOutput {
    pub fn write_failures(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["map", "agents", "inst_seed", "obs_seed", "replan_seed", "reason", "detail"])?;
        let opt = |v: Option<u64>| v.map_or_else(|| "-".to_string(), |x| x.to_string());
        for f in &self.failures {
            w.write_record([
                f.map.clone(),
                f.agents.to_string(),
                f.inst_seed.to_string(),
                opt(f.obs_seed),
                opt(f.replan_seed),
                f.reason.to_string(),
                f.detail.clone(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Invalid(e.to_string()))?;
        super::write_atomic(path, &bytes)
    }
}

/// SplitMix64 over a sequence of words; used to derive every seed of the
/// generator from the config seed and the record coordinates.
pub fn mix_seed(parts: &[u64]) -> u64 {
    let mut h: u64 = 0x243F_6A88_85A3_08D3;
    for &p in parts {
        h = h.wrapping_add(p).wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = h;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h = z ^ (z >> 31);
    }
    h
}

fn name_hash(name: &str) -> u64 {
    mix_seed(&name.bytes().map(u64::from).collect::<Vec<_>>())
}

/// Replanning time on a 0.1 s grid. The pre-appearance draw is uniform over
/// `[1, appear)` (or `[0, appear)` when the obstacle appears at 1 s) and is
/// `None` for an obstacle present from the start; the others are uniform
/// over `[appear, min(disappear + 3, horizon)]`.
pub fn sample_replan_time(o: &ObstacleEvent, horizon: Time, before_appearance: bool, rng: &mut impl Rng) -> Option<Time> {
    let tenth = 100;
    let appear = o.appear.ticks() / tenth;
    let tenths = if before_appearance {
        if appear == 0 {
            return None;
        }
        let lo = if appear > 10 { 10 } else { 0 };
        rng.gen_range(lo..appear)
    } else {
        let hi = ((o.disappear + Time::from_secs(3)).min(horizon)).ticks() / tenth;
        rng.gen_range(appear..=hi.max(appear))
    };
    Some(Time::from_ticks(tenths * tenth))
}

struct Planned {
    map_name: String,
    instance: MapfInstance,
    solution: Solution,
    inst_seed: u64,
    soc_e: f64,
}

struct Disturbed<'a> {
    planned: &'a Planned,
    obs_seed: u64,
    obstacle: ObstacleEvent,
}

fn failure(p: &Planned, obs: Option<u64>, replan: Option<u64>, reason: &'static str, detail: String) -> Failure {
    Failure {
        map: p.map_name.clone(),
        agents: p.instance.num_agents(),
        inst_seed: p.inst_seed,
        obs_seed: obs,
        replan_seed: replan,
        reason,
        detail,
    }
}

/// Runs the whole generation. `jobs = 0` uses all cores; the output does
/// not depend on `jobs`.
pub fn generate_dataset(cfg: &GenerationConfig, jobs: usize) -> Result<GenerationOutput> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?;
    pool.install(|| generate_in_pool(cfg))
}

fn generate_in_pool(cfg: &GenerationConfig) -> Result<GenerationOutput> {
    let mut maps = Vec::new();
    for spec in &cfg.maps {
        let text = fs::read_to_string(&spec.path).map_err(|e| Error::io(&spec.path, e))?;
        maps.push(GridMap::parse_movingai(&text)?);
    }
    let combos: Vec<(usize, usize)> = cfg
        .maps
        .iter()
        .enumerate()
        .flat_map(|(i, m)| m.agent_counts.iter().map(move |&c| (i, c)))
        .collect();

    // solvable instances, skipping and replacing failed seeds
    let per_combo: Vec<(Vec<Planned>, Vec<Failure>)> = combos
        .par_iter()
        .map(|&(mi, count)| find_instances(cfg, &cfg.maps[mi].name, &maps[mi], count))
        .collect();
    let mut failures = Vec::new();
    let mut planned = Vec::new();
    for (p, f) in per_combo {
        planned.extend(p);
        failures.extend(f);
    }
    info!("{} instances planned", planned.len());

    let per_instance: Vec<(Vec<Disturbed>, Vec<Failure>)> =
        planned.par_iter().map(|p| find_obstacles(cfg, p)).collect();
    let mut disturbed = Vec::new();
    for (d, f) in per_instance {
        disturbed.extend(d);
        failures.extend(f);
    }

    let per_pair: Vec<(Vec<LabeledRecord>, Vec<Failure>)> =
        disturbed.par_iter().map(|d| run_pair(cfg, d)).collect();
    let mut records = Vec::new();
    for (r, f) in per_pair {
        records.extend(r);
        failures.extend(f);
    }
    records.sort_by(|a, b| a.key().cmp(&b.key()));
    failures.sort();
    info!("{} records, {} failures", records.len(), failures.len());
    Ok(GenerationOutput { records, failures })
}

/// Derived seed of candidate instance `ordinal` for one (map, count).
pub fn instance_seed(base: u64, map_name: &str, agents: usize, ordinal: u64) -> u64 {
    mix_seed(&[base, name_hash(map_name), agents as u64, ordinal])
}

fn find_instances(cfg: &GenerationConfig, name: &str, map: &GridMap, count: usize) -> (Vec<Planned>, Vec<Failure>) {
    let mut found = Vec::new();
    let mut failures = Vec::new();
    let placeholder = |ordinal: u64, reason: &'static str, detail: String| Failure {
        map: name.to_string(),
        agents: count,
        inst_seed: ordinal,
        obs_seed: None,
        replan_seed: None,
        reason,
        detail,
    };
    let mut ordinal = 0u64;
    while found.len() < cfg.instances {
        if ordinal as usize >= cfg.max_attempts {
            warn!("{name}/{count}: only {} of {} instances found", found.len(), cfg.instances);
            failures.push(placeholder(ordinal, "quota_unmet", format!("{} instances", found.len())));
            break;
        }
        let seed = instance_seed(cfg.seed, name, count, ordinal);
        let inst = match generate_instance(map, count, seed) {
            Ok(i) => i,
            Err(e) => {
                failures.push(placeholder(ordinal, "generation", e.to_string()));
                ordinal += 1;
                continue;
            }
        };
        match solve_1robust(&inst, &cfg.planner) {
            Ok(out) if out.solution.makespan_steps() >= 6 => {
                let base = run_scenario(&ScenarioConfig {
                    planner: cfg.planner.clone(),
                    ..ScenarioConfig::new(inst.clone(), out.solution.clone())
                });
                match base {
                    Ok(r) => found.push(Planned {
                        map_name: name.to_string(),
                        instance: inst,
                        solution: out.solution,
                        inst_seed: ordinal,
                        soc_e: r.executed_soc,
                    }),
                    Err(e) => failures.push(placeholder(ordinal, "scenario_failed", e.to_string())),
                }
            }
            Ok(out) => failures.push(placeholder(
                ordinal,
                "short_plan",
                format!("makespan {}", out.solution.makespan_steps()),
            )),
            Err(e) => failures.push(placeholder(ordinal, "unsolvable", e.to_string())),
        }
        ordinal += 1;
    }
    (found, failures)
}

fn find_obstacles<'a>(cfg: &GenerationConfig, p: &'a Planned) -> (Vec<Disturbed<'a>>, Vec<Failure>) {
    let mut found = Vec::new();
    let mut failures = Vec::new();
    let mut o = 0u64;
    while found.len() < cfg.obstacle_seeds {
        if o as usize >= cfg.max_attempts {
            failures.push(failure(p, Some(o), None, "quota_unmet", format!("{} obstacles", found.len())));
            break;
        }
        match sample_obstacle(&p.solution, mix_seed(&[p.inst_seed, o])) {
            Ok(ev) if ev.appear == Time::ZERO => {
                failures.push(failure(p, Some(o), None, "obstacle_at_start", "no time before appearance".into()))
            }
            Ok(ev) => found.push(Disturbed {
                planned: p,
                obs_seed: o,
                obstacle: ev,
            }),
            Err(e) => failures.push(failure(p, Some(o), None, "no_obstacle_site", e.to_string())),
        }
        o += 1;
    }
    (found, failures)
}

fn run_pair(cfg: &GenerationConfig, d: &Disturbed) -> (Vec<LabeledRecord>, Vec<Failure>) {
    let p = d.planned;
    let base = ScenarioConfig {
        planner: cfg.planner.clone(),
        ..ScenarioConfig::new(p.instance.clone(), p.solution.clone())
    }
    .with_obstacle(Some(d.obstacle));
    let mut records = Vec::new();
    let mut failures = Vec::new();
    let hit: ScenarioResult = match run_scenario(&base) {
        Ok(r) => r,
        Err(e) => {
            failures.push(failure(p, Some(d.obs_seed), None, "scenario_failed", e.to_string()));
            return (records, failures);
        }
    };
    for r in 0..cfg.replan_seeds as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[cfg.seed, p.inst_seed, d.obs_seed, r]));
        let t = sample_replan_time(&d.obstacle, hit.makespan(), r == 0, &mut rng)
            .expect("obstacles at time 0 are rejected earlier");
        match run_scenario(&base.clone().with_replan(Some(t))) {
            Ok(res) => {
                let snapshot = res.snapshot.as_ref().expect("replan scenario keeps a snapshot");
                let soc_eirp = crate::executor::overhead_adjusted_soc(&res);
                records.push(LabeledRecord {
                    features: extract_features(snapshot, &p.instance, &p.solution, t),
                    y: hit.executed_soc - res.executed_soc,
                    soc_e: p.soc_e,
                    soc_ei: hit.executed_soc,
                    soc_eir: res.executed_soc,
                    soc_eirp,
                    map: p.map_name.clone(),
                    agents: p.instance.num_agents(),
                    inst_seed: p.inst_seed,
                    obs_seed: d.obs_seed,
                    replan_seed: r,
                    replan_t: t.as_secs_f64(),
                });
            }
            Err(e) => failures.push(failure(p, Some(d.obs_seed), Some(r), "replan_failed", e.to_string())),
        }
    }
    (records, failures)
}
