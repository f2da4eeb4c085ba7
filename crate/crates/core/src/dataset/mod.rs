//! Labeled replanning-benefit corpus: generation, CSV persistence and
//! train/test splitting.

mod config;
mod generate;

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::{feature_names, FeatureVector, NUM_FEATURES};

pub use config::{planner_from_kv, GenerationConfig, MapSpec};
pub use generate::{
    generate_dataset, instance_seed, mix_seed, sample_replan_time, Failure, GenerationOutput,
};

/// Columns following the features, in order.
pub const META_COLUMNS: [&str; 11] = [
    "y",
    "soc_e",
    "soc_ei",
    "soc_eir",
    "soc_eirp",
    "map",
    "agents",
    "inst_seed",
    "obs_seed",
    "replan_seed",
    "replan_t",
];

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRecord {
    pub features: FeatureVector,
    /// Savings from replanning, `soc_ei − soc_eir` (seconds).
    pub y: f64,
    pub soc_e: f64,
    pub soc_ei: f64,
    pub soc_eir: f64,
    pub soc_eirp: f64,
    pub map: String,
    pub agents: usize,
    pub inst_seed: u64,
    pub obs_seed: u64,
    pub replan_seed: u64,
    pub replan_t: f64,
}

impl LabeledRecord {
    pub fn key(&self) -> (&str, usize, u64, u64, u64) {
        (&self.map, self.agents, self.inst_seed, self.obs_seed, self.replan_seed)
    }

    /// Overhead-adjusted savings `soc_ei − soc_eirp`.
    pub fn y_with_overhead(&self) -> f64 {
        self.soc_ei - self.soc_eirp
    }
}

pub fn csv_header() -> Vec<String> {
    feature_names()
        .iter()
        .cloned()
        .chain(META_COLUMNS.iter().map(|s| s.to_string()))
        .collect()
}

pub fn write_records<W: Write>(out: W, records: &[LabeledRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header())?;
    for r in records {
        let mut row: Vec<String> = r.features.0.iter().map(|x| x.to_string()).collect();
        row.extend([
            r.y.to_string(),
            r.soc_e.to_string(),
            r.soc_ei.to_string(),
            r.soc_eir.to_string(),
            r.soc_eirp.to_string(),
            r.map.clone(),
            r.agents.to_string(),
            r.inst_seed.to_string(),
            r.obs_seed.to_string(),
            r.replan_seed.to_string(),
            r.replan_t.to_string(),
        ]);
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Writes to a sibling temporary file and renames it into place.
pub fn save_records(path: &Path, records: &[LabeledRecord]) -> Result<()> {
    let mut buf = Vec::new();
    write_records(&mut buf, records)?;
    write_atomic(path, &buf)
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn read_records(text: &str) -> Result<Vec<LabeledRecord>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != csv_header() {
        return Err(Error::parse(1, "dataset header does not match the feature schema"));
    }
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let line = i + 2;
        let num = |j: usize| -> Result<f64> {
            row[j]
                .parse::<f64>()
                .map_err(|_| Error::parse(line, format!("column {} is not a number", header[j])))
        };
        let int = |j: usize| -> Result<u64> {
            row[j]
                .parse::<u64>()
                .map_err(|_| Error::parse(line, format!("column {} is not an integer", header[j])))
        };
        let mut f = [0.0; NUM_FEATURES];
        for (j, slot) in f.iter_mut().enumerate() {
            *slot = num(j)?;
        }
        let m = NUM_FEATURES;
        out.push(LabeledRecord {
            features: FeatureVector(f),
            y: num(m)?,
            soc_e: num(m + 1)?,
            soc_ei: num(m + 2)?,
            soc_eir: num(m + 3)?,
            soc_eirp: num(m + 4)?,
            map: row[m + 5].to_string(),
            agents: int(m + 6)? as usize,
            inst_seed: int(m + 7)?,
            obs_seed: int(m + 8)?,
            replan_seed: int(m + 9)?,
            replan_t: num(m + 10)?,
        });
    }
    Ok(out)
}

pub fn load_records(path: &Path) -> Result<Vec<LabeledRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_records(&text)
}

/// Seeded shuffle, then the first `⌊fraction·n⌋` records train and the rest
/// test.
pub fn split_dataset<T: Clone>(records: &[T], train_fraction: f64, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Invalid("train fraction must lie in (0, 1)".into()));
    }
    let mut idx: Vec<usize> = (0..records.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    // the epsilon keeps products like 0.7 · 12000 from landing one below
    let n_train = ((train_fraction * records.len() as f64) + 1e-9).floor() as usize;
    let train = idx[..n_train].iter().map(|&i| records[i].clone()).collect();
    let test = idx[n_train..].iter().map(|&i| records[i].clone()).collect();
    Ok((train, test))
}
