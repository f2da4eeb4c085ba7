use std::path::{Path, PathBuf};
use std::time::Duration;

use crate::error::{Error, Result};
use crate::kv::KvFile;
use crate::planner::PlannerConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct MapSpec {
    pub name: String,
    pub path: PathBuf,
    pub agent_counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationConfig {
    pub maps: Vec<MapSpec>,
    pub instances: usize,
    pub obstacle_seeds: usize,
    pub replan_seeds: usize,
    pub seed: u64,
    pub planner: PlannerConfig,
    /// Candidate seeds tried per (map, agent count) or per instance before
    /// giving up on filling the quota.
    pub max_attempts: usize,
}

impl GenerationConfig {
    /// Reads `map.<name> = <path>` / `agents.<name> = 5,8` pairs plus the
    /// scalar keys. Relative map paths resolve against `base_dir`.
    pub fn from_kv(kv: &KvFile, base_dir: &Path) -> Result<Self> {
        let mut maps = Vec::new();
        for key in kv.keys() {
            let Some(name) = key.strip_prefix("map.") else { continue };
            let path = PathBuf::from(kv.require(key)?);
            let path = if path.is_relative() { base_dir.join(path) } else { path };
            let counts = kv.require(&format!("agents.{name}"))?;
            let agent_counts = counts
                .split(',')
                .map(|c| {
                    c.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::Invalid(format!("agents.{name}: bad count {c:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            maps.push(MapSpec {
                name: name.to_string(),
                path,
                agent_counts,
            });
        }
        let cfg = GenerationConfig {
            maps,
            instances: kv.get_or("instances", 1)?,
            obstacle_seeds: kv.get_or("obstacle_seeds", 1)?,
            replan_seeds: kv.get_or("replan_seeds", 1)?,
            seed: kv.get_or("seed", 0)?,
            planner: planner_from_kv(kv)?,
            max_attempts: kv.get_or("max_attempts", 200)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.maps.is_empty() {
            return Err(Error::Invalid("no maps configured".into()));
        }
        if self.maps.iter().any(|m| m.agent_counts.is_empty() || m.agent_counts.contains(&0)) {
            return Err(Error::Invalid("every map needs positive agent counts".into()));
        }
        if self.instances == 0 || self.obstacle_seeds == 0 || self.replan_seeds == 0 || self.max_attempts == 0 {
            return Err(Error::Invalid("all counts must be at least 1".into()));
        }
        self.planner.validate().map_err(|e| Error::Invalid(e.to_string()))
    }

    /// Number of records a run produces when nothing fails.
    pub fn expected_records(&self) -> usize {
        let combos: usize = self.maps.iter().map(|m| m.agent_counts.len()).sum();
        combos * self.instances * self.obstacle_seeds * self.replan_seeds
    }
}

/// `planner.timeout_s`, `planner.node_limit`, `planner.suboptimality_bound`,
/// `planner.seconds_per_expansion`; defaults for missing keys.
pub fn planner_from_kv(kv: &KvFile) -> Result<PlannerConfig> {
    let d = PlannerConfig::default();
    Ok(PlannerConfig {
        suboptimality_bound: kv.get_or("planner.suboptimality_bound", d.suboptimality_bound)?,
        timeout: Duration::from_secs_f64(kv.get_or("planner.timeout_s", d.timeout.as_secs_f64())?),
        node_limit: kv.get_or("planner.node_limit", d.node_limit)?,
        seconds_per_expansion: kv.get_or("planner.seconds_per_expansion", d.seconds_per_expansion)?,
    })
}
