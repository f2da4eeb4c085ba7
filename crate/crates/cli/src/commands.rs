use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use log::info;
use replan_core::dataset::{
    generate_dataset, load_records, save_records, split_dataset, write_atomic, GenerationConfig, LabeledRecord,
};
use replan_core::eval::{importance_csv, savings_report, write_evaluation, DecisionReport};
use replan_core::executor::{overhead_adjusted_soc, run_scenario, sample_obstacle, ScenarioConfig};
use replan_core::kv::KvFile;
use replan_core::mapf::{cost_summary, generate_instance, validate_solution, GridMap, MapfInstance, Solution};
use replan_core::model::{kfold_cv, permutation_importance, train, MlpModel, TrainConfig, TrainReport};
use replan_core::planner::{solve_1robust, PlannerConfig};
use replan_core::{Error, Result, Time};

use crate::{Command, PlannerArgs};

const MAP_TAG: &str = "# map ";

fn planner_cfg(a: &PlannerArgs) -> Result<PlannerConfig> {
    let cfg = PlannerConfig {
        node_limit: a.node_limit,
        timeout: Duration::try_from_secs_f64(a.timeout_s)
            .map_err(|_| Error::Invalid("timeout must be a non-negative number of seconds".into()))?,
        seconds_per_expansion: a.seconds_per_expansion,
        ..PlannerConfig::default()
    };
    cfg.validate().map_err(|e| Error::Invalid(e.to_string()))?;
    Ok(cfg)
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn load_map(path: &Path) -> Result<GridMap> {
    GridMap::parse_movingai(&read(path)?)
}

fn seeds_line(pairs: &[(&str, String)]) {
    let text: Vec<String> = pairs.iter().map(|(k, v)| format!("{k}={v}")).collect();
    eprintln!("seeds: {}", text.join(" "));
}

fn config_dir(path: &Path) -> PathBuf {
    path.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf)
}

fn xy(records: &[LabeledRecord]) -> (Vec<&[f64]>, Vec<f64>) {
    (
        records.iter().map(|r| r.features.as_slice()).collect(),
        records.iter().map(|r| r.y).collect(),
    )
}

pub fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Plan {
            map,
            agents,
            seed,
            out,
            planner,
        } => plan(&map, agents, seed, &out, &planner_cfg(&planner)?),
        Command::Simulate {
            sol,
            map,
            obstacle_seed,
            replan_t,
            trace,
            planner,
        } => simulate(&sol, map.as_deref(), obstacle_seed, replan_t, trace.as_deref(), &planner_cfg(&planner)?),
        Command::GenDataset { config, out, jobs } => {
            let cfg = GenerationConfig::from_kv(&KvFile::load(&config)?, &config_dir(&config))?;
            seeds_line(&[("generation", cfg.seed.to_string())]);
            gen_dataset(&cfg, &out, jobs).map(|_| ())
        }
        Command::Train {
            data,
            out,
            config,
            seed,
            cv_folds,
        } => {
            let mut cfg = match &config {
                Some(p) => TrainConfig::from_kv(&KvFile::load(p)?)?,
                None => TrainConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            seeds_line(&[("train", cfg.seed.to_string())]);
            let records = load_records(&data)?;
            let history = out.with_extension("history.csv");
            train_model(&records, &cfg, &out, &history)?;
            if let Some(k) = cv_folds {
                println!("{}", cross_validate(&records, k, &cfg)?);
            }
            Ok(())
        }
        Command::Evaluate {
            model,
            data,
            out_dir,
            tau,
        } => {
            let model = MlpModel::load(&model)?;
            let records = load_records(&data)?;
            let report = evaluate(&model, &records, tau, &out_dir)?;
            print!("{}", report.to_text());
            Ok(())
        }
        Command::Importance {
            model,
            data,
            out,
            repeats,
            seed,
        } => {
            seeds_line(&[("importance", seed.to_string())]);
            let model = MlpModel::load(&model)?;
            let records = load_records(&data)?;
            importance(&model, &records, repeats, seed, &out)
        }
        Command::Repro { config, out_dir, jobs } => repro(&config, &out_dir, jobs),
    }
}

fn plan(map_path: &Path, agents: usize, seed: u64, out: &Path, cfg: &PlannerConfig) -> Result<()> {
    if agents == 0 {
        return Err(Error::Invalid("at least one agent is required".into()));
    }
    seeds_line(&[("instance", seed.to_string())]);
    let map = load_map(map_path)?;
    let inst = generate_instance(&map, agents, seed)?;
    let outcome = solve_1robust(&inst, cfg)?;
    let conflicts = validate_solution(&inst, &outcome.solution)?;
    debug_assert!(conflicts.is_empty());
    let cost = cost_summary(&outcome.solution);
    // absolute, so `simulate` finds the map from any working directory
    let recorded = fs::canonicalize(map_path).unwrap_or_else(|_| map_path.to_path_buf());
    let text = format!(
        "{MAP_TAG}{}\n# agents {agents} seed {seed}\n{}",
        recorded.display(),
        outcome.solution.to_text()
    );
    write_atomic(out, text.as_bytes())?;
    println!("soc: {}", cost.soc);
    println!("makespan: {}", cost.makespan);
    println!("high_level_expanded: {}", outcome.stats.high_level_expanded);
    Ok(())
}

fn simulate(
    sol_path: &Path,
    map: Option<&Path>,
    obstacle_seed: Option<u64>,
    replan_t: Option<f64>,
    trace: Option<&Path>,
    planner: &PlannerConfig,
) -> Result<()> {
    let text = read(sol_path)?;
    let map_path = match map {
        Some(m) => m.to_path_buf(),
        None => text
            .lines()
            .find_map(|l| l.strip_prefix(MAP_TAG))
            .map(|p| PathBuf::from(p.trim()))
            .ok_or_else(|| Error::Invalid("solution names no map; pass --map".into()))?,
    };
    let map = load_map(&map_path)?;
    let sol = Solution::parse_text(&text)?;
    let agents = sol
        .paths()
        .iter()
        .map(|p| (p[0], *p.last().expect("non-empty path")))
        .collect();
    let inst = MapfInstance::new(map, agents)?;
    if !validate_solution(&inst, &sol)?.is_empty() {
        return Err(Error::Invalid("solution is not 1-robust".into()));
    }
    if let Some(s) = obstacle_seed {
        seeds_line(&[("obstacle", s.to_string())]);
    }
    let obstacle = obstacle_seed.map(|s| sample_obstacle(&sol, s)).transpose()?;
    let replan = match replan_t {
        Some(t) if !(t >= 0.0 && t.is_finite()) => {
            return Err(Error::Invalid("replan time must be a non-negative number".into()))
        }
        Some(t) => Some(Time::from_secs_f64(t)),
        None => None,
    };
    let cfg = ScenarioConfig {
        planner: planner.clone(),
        ..ScenarioConfig::new(inst, sol.clone())
    }
    .with_obstacle(obstacle)
    .with_replan(replan);
    let result = run_scenario(&cfg)?;
    match trace {
        Some(p) => write_atomic(p, result.trace_text().as_bytes())?,
        None => print!("{}", result.trace_text()),
    }
    if let Some(o) = obstacle {
        println!("obstacle: vertex {} appear {} disappear {}", o.vertex, o.appear, o.disappear);
    }
    println!("planned_soc: {}", cost_summary(&sol).soc);
    println!("executed_soc: {}", result.executed_soc);
    println!("makespan: {}", result.makespan());
    if replan.is_some() {
        println!("replan_runtime_s: {:.6}", result.replan_runtime);
        println!("unfinished_at_replan: {}", result.unfinished_at_replan);
        println!("overhead_adjusted_soc: {:.6}", overhead_adjusted_soc(&result));
    }
    Ok(())
}

fn gen_dataset(cfg: &GenerationConfig, out: &Path, jobs: usize) -> Result<Vec<LabeledRecord>> {
    let output = generate_dataset(cfg, jobs)?;
    save_records(out, &output.records)?;
    output.write_failures(&out.with_extension("failures.csv"))?;
    info!(
        "wrote {} records ({} expected), {} skipped combinations",
        output.records.len(),
        cfg.expected_records(),
        output.failures.len()
    );
    Ok(output.records)
}

fn history_csv(report: &TrainReport) -> String {
    let mut out = String::from("epoch,train_mae_scaled,val_mae_scaled,learning_rate\n");
    for h in &report.history {
        let _ = writeln!(out, "{},{},{},{}", h.epoch, h.train_mae, h.val_mae, h.learning_rate);
    }
    out
}

fn train_model(records: &[LabeledRecord], cfg: &TrainConfig, out: &Path, history: &Path) -> Result<MlpModel> {
    let (x, y) = xy(records);
    let (model, report) = train(&x, &y, cfg)?;
    model.save(out)?;
    write_atomic(history, history_csv(&report).as_bytes())?;
    info!(
        "best validation MAE {:.6} (scaled) at epoch {} of {}; training MAE {:.6} s",
        report.best_val_mae,
        report.best_epoch,
        report.history.len(),
        model.mae(&x, &y)
    );
    Ok(model)
}

fn cross_validate(records: &[LabeledRecord], k: usize, cfg: &TrainConfig) -> Result<String> {
    let (x, y) = xy(records);
    let folds = kfold_cv(&x, &y, k, cfg)?;
    let mean = |f: &dyn Fn(&replan_core::model::FoldResult) -> f64| {
        let v: Vec<f64> = folds.iter().map(f).collect();
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let sd = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt();
        (m, sd)
    };
    let (ms, ss) = mean(&|f| f.mae_scaled);
    let (mt, st) = mean(&|f| f.mae_seconds);
    let mut out = String::new();
    for f in &folds {
        let _ = writeln!(out, "fold {}: size {} mae_scaled {:.6} mae_s {:.6}", f.fold, f.size, f.mae_scaled, f.mae_seconds);
    }
    let _ = writeln!(out, "cv_mae_scaled: {ms:.6} +- {ss:.6}");
    let _ = write!(out, "cv_mae_s: {mt:.6} +- {st:.6}");
    Ok(out)
}

fn evaluate(model: &MlpModel, records: &[LabeledRecord], tau: f64, out_dir: &Path) -> Result<DecisionReport> {
    let (x, _) = xy(records);
    let preds = model.predict_all(&x);
    let report = savings_report(records, &preds, tau)?;
    write_evaluation(out_dir, records, &report)?;
    Ok(report)
}

fn importance(model: &MlpModel, records: &[LabeledRecord], repeats: usize, seed: u64, out: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(Error::Invalid("importance needs a non-empty test set".into()));
    }
    let (x, y) = xy(records);
    let (base, imp) = permutation_importance(model, &x, &y, repeats, seed);
    write_atomic(out, importance_csv(base, &imp).as_bytes())
}

fn repro(config: &Path, out_dir: &Path, jobs: usize) -> Result<()> {
    let kv = KvFile::load(config)?;
    let gen = GenerationConfig::from_kv(&kv, &config_dir(config))?;
    let train_cfg = TrainConfig::from_kv(&kv)?;
    let fraction: f64 = kv.get_or("split.train_fraction", 0.7)?;
    let split_seed: u64 = kv.get_or("split.seed", 0)?;
    let tau: f64 = kv.get_or("eval.tau", 1.0)?;
    let repeats: usize = kv.get_or("importance.repeats", 5)?;
    let imp_seed: u64 = kv.get_or("importance.seed", 0)?;
    let folds: usize = kv.get_or("cv.folds", 0)?;
    let seeds = [
        ("generation", gen.seed.to_string()),
        ("split", split_seed.to_string()),
        ("train", train_cfg.seed.to_string()),
        ("importance", imp_seed.to_string()),
    ];
    seeds_line(&seeds);

    let records = gen_dataset(&gen, &out_dir.join("dataset.csv"), jobs)?;
    let (train_set, test_set) = split_dataset(&records, fraction, split_seed)?;
    save_records(&out_dir.join("train.csv"), &train_set)?;
    save_records(&out_dir.join("test.csv"), &test_set)?;
    info!("split {} train / {} test", train_set.len(), test_set.len());

    let model = train_model(
        &train_set,
        &train_cfg,
        &out_dir.join("model.txt"),
        &out_dir.join("training_history.csv"),
    )?;
    if folds > 0 {
        let text = cross_validate(&train_set, folds, &train_cfg)?;
        write_atomic(&out_dir.join("cv.txt"), format!("{text}\n").as_bytes())?;
    }
    let report = evaluate(&model, &test_set, tau, out_dir)?;
    importance(&model, &test_set, repeats, imp_seed, &out_dir.join("fig_perm_importance.csv"))?;
    let positives = records.iter().filter(|r| r.y >= tau).count();
    let mut summary = String::new();
    for (k, v) in &seeds {
        let _ = writeln!(summary, "seed_{k}: {v}");
    }
    let _ = writeln!(summary, "records: {}", records.len());
    let _ = writeln!(summary, "positive_records: {positives}");
    let _ = writeln!(summary, "train_records: {}", train_set.len());
    let _ = writeln!(summary, "test_records: {}", test_set.len());
    write_atomic(&out_dir.join("summary.txt"), summary.as_bytes())?;
    print!("{summary}{}", report.to_text());
    Ok(())
}
