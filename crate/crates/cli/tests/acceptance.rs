//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit when
//! any criterion fails. Criterion 9 runs the desk-scale pipeline through
//! the `replan` binary, criterion 4 checks the records it generated.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use common::joint_search::optimal_soc;
use common::scenarios::{quick_planner, random_planned};
use common::trace_replay::replay_features;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use replan_core::dataset::load_records;
use replan_core::executor::{overhead_adjusted_soc, run_scenario, sample_obstacle, Jitter, ScenarioConfig};
use replan_core::features::extract_features;
use replan_core::mapf::{cost_summary, GridMap, MapfInstance};
use replan_core::model::{Network, TrainConfig, HIDDEN};
use replan_core::planner::{solve_1robust, PlannerConfig};
use replan_core::Time;

const TAU: f64 = 1.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn run_repro(config: &Path, out: &Path, jobs: usize) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_replan"))
        .args(["repro", "--config"])
        .arg(config)
        .arg("--out-dir")
        .arg(out)
        .args(["--jobs", &jobs.to_string()])
        .env("RUST_LOG", "warn")
        .status()
        .map_err(|e| format!("cannot run replan: {e}"))?;
    if status.success() {
        Ok(())
    } else {
        Err(format!("replan repro exited with {status}"))
    }
}

fn read_report(path: &Path) -> BTreeMap<String, String> {
    fs::read_to_string(path)
        .unwrap_or_default()
        .lines()
        .filter_map(|l| l.split_once(": "))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}

fn safety() -> Outcome {
    let started = Instant::now();
    let mut scenarios = 0;
    let mut violations = 0;
    let mut seed = 0u64;
    while scenarios < 1000 && seed < 20_000 {
        seed += 1;
        let Some((inst, sol)) = random_planned(seed, 16, 6) else { continue };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let obstacle = sample_obstacle(&sol, rng.gen()).ok();
        let replan = rng
            .gen_bool(0.5)
            .then(|| Time::from_ticks(100 * rng.gen_range(1..=10 * sol.makespan_steps().max(1) as i64)));
        let cfg = ScenarioConfig {
            planner: quick_planner(),
            jitter: Some(Jitter {
                seed: rng.gen(),
                max_extra: Time::from_ticks(rng.gen_range(0..=1500)),
            }),
            ..ScenarioConfig::new(inst, sol)
        }
        .with_obstacle(obstacle)
        .with_replan(replan);
        match run_scenario(&cfg) {
            Ok(r) => {
                violations += r.violations.len();
                scenarios += 1;
            }
            // a replan the quick planner cannot finish proves nothing either way
            Err(replan_core::Error::Scenario(m)) if m.contains("replanning") => {}
            Err(e) => return outcome(false, format!("seed {seed}: {e}")),
        }
    }
    let elapsed = started.elapsed();
    outcome(
        scenarios >= 1000 && violations == 0 && elapsed < Duration::from_secs(300),
        format!("{scenarios} scenarios, {violations} violations, {:.1} s", elapsed.as_secs_f64()),
    )
}

fn grids() -> Vec<(&'static str, GridMap)> {
    vec![
        ("3x3 open", GridMap::open(3, 3)),
        ("3x3 blocked", GridMap::from_rows(&["...", ".@.", "..."]).unwrap()),
        ("4x4 open", GridMap::open(4, 4)),
        ("4x4 blocked", GridMap::from_rows(&["....", ".@..", "..@.", "...."]).unwrap()),
    ]
}

fn planner_optimality() -> Outcome {
    let started = Instant::now();
    let cfg = PlannerConfig {
        node_limit: 50_000,
        ..PlannerConfig::default()
    };
    let mut checked = 0;
    for (name, map) in grids() {
        let free: Vec<usize> = (0..map.width() * map.height()).filter(|&v| map.is_free(v)).collect();
        for agents in 2..=3usize {
            let mut rng = ChaCha8Rng::seed_from_u64(agents as u64 * 1000 + free.len() as u64);
            for _ in 0..40 {
                let mut pick = free.clone();
                let mut draw = || pick.swap_remove(rng.gen_range(0..pick.len()));
                let starts: Vec<usize> = (0..agents).map(|_| draw()).collect();
                let mut goals_pool = free.clone();
                let goals: Vec<usize> = (0..agents)
                    .map(|_| goals_pool.swap_remove(rng.gen_range(0..goals_pool.len())))
                    .collect();
                let inst = MapfInstance::new(map.clone(), starts.into_iter().zip(goals).collect()).unwrap();
                let oracle = optimal_soc(&inst, None);
                let planned = solve_1robust(&inst, &cfg).ok().map(|o| o.cost);
                if planned != oracle {
                    return outcome(false, format!("{name} {:?}: planner {planned:?}, oracle {oracle:?}", inst.agents));
                }
                checked += 1;
            }
        }
    }
    let elapsed = started.elapsed();
    outcome(
        checked >= 200 && elapsed < Duration::from_secs(600),
        format!("{checked} instances agree, {:.1} s", elapsed.as_secs_f64()),
    )
}

fn zero_delay_fidelity() -> Outcome {
    let mut checked = 0;
    let mut seed = 10_000u64;
    while checked < 100 {
        seed += 1;
        let Some((inst, sol)) = random_planned(seed, 12, 6) else { continue };
        let r = match run_scenario(&ScenarioConfig::new(inst, sol.clone())) {
            Ok(r) => r,
            Err(e) => return outcome(false, format!("seed {seed}: {e}")),
        };
        let planned = cost_summary(&sol).soc;
        if r.executed_soc != planned {
            return outcome(false, format!("seed {seed}: executed {} vs planned {planned}", r.executed_soc));
        }
        checked += 1;
    }
    outcome(true, format!("{checked} instances, executed SOC == planned SOC"))
}

fn record_invariants(dataset: &Path) -> Outcome {
    let records = match load_records(dataset) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("no records: {e}")),
    };
    let mut soc_ei: BTreeMap<(String, usize, u64, u64), f64> = BTreeMap::new();
    for r in &records {
        if r.soc_e > r.soc_ei {
            return outcome(false, format!("soc_e {} > soc_ei {} on {}/{}", r.soc_e, r.soc_ei, r.map, r.inst_seed));
        }
        let key = (r.map.clone(), r.agents, r.inst_seed, r.obs_seed);
        if let Some(&prev) = soc_ei.get(&key) {
            if prev != r.soc_ei {
                return outcome(false, format!("soc_ei differs across replan seeds for {key:?}"));
            }
        } else {
            soc_ei.insert(key, r.soc_ei);
        }
    }
    outcome(
        !records.is_empty(),
        format!("{} records, {} (instance, obstacle) pairs", records.len(), soc_ei.len()),
    )
}

fn feature_oracle() -> Outcome {
    let mut traces = 0;
    let mut worst: f64 = 0.0;
    for seed in 500..900u64 {
        let Some((inst, sol)) = random_planned(seed, 10, 6) else { continue };
        let obstacle = sample_obstacle(&sol, seed).ok();
        for tenths in [7, 19, 33, 52, 74] {
            let t = Time::from_ticks(tenths * 100);
            let cfg = ScenarioConfig {
                planner: quick_planner(),
                jitter: (seed % 2 == 0).then_some(Jitter {
                    seed,
                    max_extra: Time::from_ticks(600),
                }),
                ..ScenarioConfig::new(inst.clone(), sol.clone())
            }
            .with_obstacle(obstacle)
            .with_replan(Some(t));
            let Ok(r) = run_scenario(&cfg) else { continue };
            let Some(snap) = r.snapshot.as_ref() else { continue };
            let lib = extract_features(snap, &inst, &sol, t);
            let oracle = replay_features(&inst, &sol, &r.trace, t.ticks(), 1000);
            for (a, b) in lib.as_slice().iter().zip(&oracle) {
                worst = worst.max((a - b).abs());
            }
            traces += 1;
        }
    }
    outcome(
        traces >= 50 && worst <= 1e-9,
        format!("{traces} traces, max abs difference {worst:e}"),
    )
}

fn learning_rate_schedule() -> Outcome {
    let cfg = TrainConfig::default();
    let got = [cfg.learning_rate_at(0), cfg.learning_rate_at(100), cfg.learning_rate_at(250)];
    let want = [0.001, 0.00096, 0.0009216];
    outcome(got == want, format!("lr(0, 100, 250) = {got:?}"))
}

fn gradient_check() -> Outcome {
    let mut sizes = vec![42];
    sizes.extend_from_slice(&HIDDEN);
    sizes.push(1);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let h = 1e-6;
    let mut draws = 0;
    let mut worst: f64 = 0.0;
    while draws < 20 {
        let mut net = Network::he_uniform(&sizes, &mut rng);
        for p in net.params.iter_mut() {
            *p += rng.gen_range(-0.05..0.05);
        }
        let x: Vec<f64> = (0..42).map(|_| rng.gen_range(-1.0..1.0)).collect();
        // central differences are meaningless across a ReLU kink
        if net.min_hidden_margin(&x) < 1e-3 {
            continue;
        }
        let cache = net.forward_cached(&x);
        let mut grad = vec![0.0; net.params.len()];
        net.backward(&cache, 1.0, &mut grad);
        let mut numeric = vec![0.0; net.params.len()];
        for i in 0..net.params.len() {
            let orig = net.params[i];
            net.params[i] = orig + h;
            let up = net.forward(&x);
            net.params[i] = orig - h;
            let down = net.forward(&x);
            net.params[i] = orig;
            numeric[i] = (up - down) / (2.0 * h);
        }
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for l in 0..net.num_layers() {
            let range = net.weight_offset(l)..net.bias_offset(l) + sizes[l + 1];
            let diff: Vec<f64> = range.clone().map(|i| numeric[i] - grad[i]).collect();
            let scale = norm(&numeric[range.clone()]).max(norm(&grad[range]));
            worst = worst.max(norm(&diff) / scale);
        }
        draws += 1;
    }
    outcome(worst < 1e-5, format!("{draws} draws, worst per-layer relative error {worst:e}"))
}

fn overhead_accounting() -> Outcome {
    let map = GridMap::open(3, 1);
    let inst = MapfInstance::new(map, vec![(0, 2)]).unwrap();
    let sol = replan_core::mapf::Solution::new(vec![vec![0, 1, 2]]).unwrap();
    let template = run_scenario(&ScenarioConfig::new(inst, sol)).unwrap();
    // (executed SOC, solver runtime, unfinished agents, expected adjusted SOC)
    let cases = [
        (100.0, 0.5, 3, 101.5),
        (100.0, 0.5, 0, 100.0),
        (100.0, 0.0, 3, 100.0),
        (57.0, 0.25, 4, 58.0),
        (2.0, 0.125, 1, 2.125),
        (347.5, 1.5, 10, 362.5),
        (64.0, 0.0625, 16, 65.0),
        (12.5, 2.0, 5, 22.5),
        (0.0, 0.75, 8, 6.0),
        (1000.0, 0.001953125, 2, 1000.00390625),
    ];
    let mut bad = Vec::new();
    for (i, &(soc, tr, unfinished, want)) in cases.iter().enumerate() {
        let mut r = template.clone();
        r.executed_soc = soc;
        r.replan_runtime = tr;
        r.unfinished_at_replan = unfinished;
        if overhead_adjusted_soc(&r) != want {
            bad.push(i);
        }
    }
    outcome(bad.is_empty(), format!("{} constructed results, mismatches {bad:?}", cases.len()))
}

fn desk_scale(out: &Path) -> Outcome {
    let started = Instant::now();
    let config = workspace_root().join("configs/accept.cfg");
    if let Err(e) = run_repro(&config, out, 0) {
        return outcome(false, e);
    }
    let elapsed = started.elapsed();
    let records = match load_records(&out.join("dataset.csv")) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("dataset unreadable: {e}")),
    };
    let positive = records.iter().filter(|r| r.y >= TAU).count() as f64 / records.len().max(1) as f64;
    let report = read_report(&out.join("report.txt"));
    let num = |k: &str| report.get(k).and_then(|v| v.parse::<f64>().ok());
    let (Some(recovery), Some(random), Some(specificity)) = (
        num("recovery_rate"),
        num("random_trigger_recovery_rate"),
        num("specificity"),
    ) else {
        return outcome(false, "report is missing recovery, random-trigger recovery or specificity");
    };
    let pass = records.len() >= 600
        && (0.03..=0.15).contains(&positive)
        && recovery >= 0.60
        && recovery > random
        && specificity >= 0.90
        && elapsed < Duration::from_secs(7200);
    outcome(
        pass,
        format!(
            "{} records, positive fraction {positive:.4}, recovery {recovery:.4} vs random {random:.4}, specificity {specificity:.4}, {:.1} s",
            records.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn determinism(scratch: &Path) -> Outcome {
    let config = workspace_root().join("configs/desk.cfg");
    let a = scratch.join("run_a");
    let b = scratch.join("run_b");
    for (dir, jobs) in [(&a, 1), (&b, 3)] {
        if let Err(e) = run_repro(&config, dir, jobs) {
            return outcome(false, e);
        }
    }
    let mut names: Vec<String> = match fs::read_dir(&a) {
        Ok(it) => it.filter_map(|e| e.ok()).map(|e| e.file_name().to_string_lossy().into_owned()).collect(),
        Err(e) => return outcome(false, e.to_string()),
    };
    names.sort();
    for required in ["dataset.csv", "model.txt", "report.txt"] {
        if !names.iter().any(|n| n == required) {
            return outcome(false, format!("{required} not written"));
        }
    }
    for n in &names {
        if fs::read(a.join(n)).ok() != fs::read(b.join(n)).ok() {
            return outcome(false, format!("{n} differs between runs"));
        }
    }
    outcome(true, format!("{} output files byte-identical across two runs", names.len()))
}

fn main() {
    let scratch = tempfile::tempdir().expect("temporary directory");
    let desk_out = scratch.path().join("accept");

    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let nine = desk_scale(&desk_out);
    results.push((1, "safety: no 1-robust violations", safety()));
    results.push((2, "planner optimality vs joint search", planner_optimality()));
    results.push((3, "zero-delay fidelity", zero_delay_fidelity()));
    results.push((4, "obstacle monotonicity and replan-seed invariance", record_invariants(&desk_out.join("dataset.csv"))));
    results.push((5, "feature oracle", feature_oracle()));
    results.push((6, "learning-rate schedule", learning_rate_schedule()));
    results.push((7, "gradient check", gradient_check()));
    results.push((8, "overhead accounting", overhead_accounting()));
    results.push((9, "desk-scale end-to-end", nine));
    results.push((10, "pipeline determinism", determinism(scratch.path())));

    let mut failed = 0;
    for (n, name, o) in &results {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {n:>2} {tag}: {name} ({})", o.detail);
        failed += usize::from(!o.pass);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
