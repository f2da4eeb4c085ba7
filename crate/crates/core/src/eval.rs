//! Threshold decisions, confusion metrics, realized savings and the
//! per-figure CSV data.

use std::fmt::Write as _;
use std::path::Path;

use crate::dataset::{write_atomic, LabeledRecord};
use crate::error::{Error, Result};
use crate::features::feature_names;
use crate::model::FeatureImportance;

/// Replan iff the predicted saving reaches the threshold.
pub fn decide(pred: f64, tau: f64) -> bool {
    pred >= tau
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    TruePositive,
    FalsePositive,
    TrueNegative,
    FalseNegative,
}

impl Outcome {
    pub fn of(decision: bool, truth: bool) -> Self {
        match (decision, truth) {
            (true, true) => Outcome::TruePositive,
            (true, false) => Outcome::FalsePositive,
            (false, false) => Outcome::TrueNegative,
            (false, true) => Outcome::FalseNegative,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::TruePositive => "TP",
            Outcome::FalsePositive => "FP",
            Outcome::TrueNegative => "TN",
            Outcome::FalseNegative => "FN",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den != 0.0).then(|| num / den)
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn sensitivity(&self) -> Option<f64> {
        ratio(self.tp as f64, (self.tp + self.fn_) as f64)
    }

    pub fn specificity(&self) -> Option<f64> {
        ratio(self.tn as f64, (self.tn + self.fp) as f64)
    }

    pub fn precision(&self) -> Option<f64> {
        ratio(self.tp as f64, (self.tp + self.fp) as f64)
    }

    pub fn f1(&self) -> Option<f64> {
        let (p, r) = (self.precision()?, self.sensitivity()?);
        ratio(2.0 * p * r, p + r)
    }
}

/// Confusion counts of `decisions` against truth classes `y ≥ tau`.
pub fn confusion_metrics(decisions: &[bool], y: &[f64], tau: f64) -> Result<Confusion> {
    if decisions.len() != y.len() {
        return Err(Error::Invalid("decision and truth counts differ".into()));
    }
    let mut c = Confusion::default();
    for (&d, &v) in decisions.iter().zip(y) {
        match Outcome::of(d, v >= tau) {
            Outcome::TruePositive => c.tp += 1,
            Outcome::FalsePositive => c.fp += 1,
            Outcome::TrueNegative => c.tn += 1,
            Outcome::FalseNegative => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// Equal-width bins anchored at multiples of `width`.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn build(values: &[f64], width: f64) -> Self {
        assert!(width > 0.0, "bin width must be positive");
        if values.is_empty() {
            return Histogram {
                edges: vec![0.0, width],
                counts: vec![0],
            };
        }
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let first = (lo / width).floor() as i64;
        let last = (hi / width).floor() as i64;
        let bins = (last - first + 1) as usize;
        let mut counts = vec![0; bins];
        for v in values {
            let b = ((v / width).floor() as i64 - first) as usize;
            counts[b.min(bins - 1)] += 1;
        }
        let edges = (0..=bins).map(|i| (first + i as i64) as f64 * width).collect();
        Histogram { edges, counts }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", self.edges[i], self.edges[i + 1], c);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordDecision {
    pub predicted: f64,
    pub y: f64,
    pub y_overhead: f64,
    pub decision: bool,
    pub outcome: Outcome,
}

/// Savings of one decision policy, with and without the planning overhead.
#[derive(Debug, Clone, PartialEq)]
pub struct Savings {
    /// Σ y over records where the policy replans.
    pub realized: f64,
    /// Σ y over records whose true saving reaches the threshold.
    pub potential: f64,
    pub recovery: Option<f64>,
}

impl Savings {
    fn new(realized: f64, potential: f64) -> Self {
        Savings {
            realized,
            potential,
            recovery: (potential > 0.0).then(|| realized / potential),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionReport {
    pub tau: f64,
    pub rows: Vec<RecordDecision>,
    pub confusion: Confusion,
    pub replans: usize,
    pub positives: usize,
    pub savings: Savings,
    pub savings_overhead: Savings,
    /// Expected savings of a policy that replans on a uniformly random
    /// subset of the same size.
    pub random_trigger: Savings,
    pub mean_saving_per_replan: Option<f64>,
    pub mean_saving_per_positive: Option<f64>,
    /// Σ realized y relative to Σ (soc_ei − soc_e) over replanned records.
    pub relative_savings: Option<f64>,
    /// Records with soc_ei == soc_e, left out of the relative histogram.
    pub no_increase: usize,
}

/// Relative saving `y / (soc_ei − soc_e)`, `None` without a cost increase.
pub fn relative_saving(r: &LabeledRecord) -> Option<f64> {
    let inc = r.soc_ei - r.soc_e;
    (inc != 0.0).then(|| r.y / inc)
}

pub fn savings_report(records: &[LabeledRecord], predictions: &[f64], tau: f64) -> Result<DecisionReport> {
    if records.len() != predictions.len() {
        return Err(Error::Invalid("record and prediction counts differ".into()));
    }
    let rows: Vec<RecordDecision> = records
        .iter()
        .zip(predictions)
        .map(|(r, &p)| {
            let d = decide(p, tau);
            RecordDecision {
                predicted: p,
                y: r.y,
                y_overhead: r.y_with_overhead(),
                decision: d,
                outcome: Outcome::of(d, r.y >= tau),
            }
        })
        .collect();
    let decisions: Vec<bool> = rows.iter().map(|r| r.decision).collect();
    let ys: Vec<f64> = records.iter().map(|r| r.y).collect();
    let confusion = confusion_metrics(&decisions, &ys, tau)?;

    let sum = |f: &dyn Fn(&RecordDecision) -> Option<f64>| rows.iter().filter_map(f).sum::<f64>();
    let realized = sum(&|r| r.decision.then_some(r.y));
    let potential = sum(&|r| (r.y >= tau).then_some(r.y));
    let realized_o = sum(&|r| r.decision.then_some(r.y_overhead));
    let potential_o = sum(&|r| (r.y_overhead >= tau).then_some(r.y_overhead));
    let replans = decisions.iter().filter(|&&d| d).count();
    let positives = confusion.tp + confusion.fn_;
    let n = records.len().max(1) as f64;
    let random_realized = replans as f64 / n * ys.iter().sum::<f64>();

    let increase: f64 = records
        .iter()
        .zip(&decisions)
        .filter(|(_, &d)| d)
        .map(|(r, _)| r.soc_ei - r.soc_e)
        .sum();
    Ok(DecisionReport {
        tau,
        confusion,
        replans,
        positives,
        savings: Savings::new(realized, potential),
        savings_overhead: Savings::new(realized_o, potential_o),
        random_trigger: Savings::new(random_realized, potential),
        mean_saving_per_replan: ratio(realized, replans as f64),
        mean_saving_per_positive: ratio(potential, positives as f64),
        relative_savings: ratio(realized, increase),
        no_increase: records.iter().filter(|r| relative_saving(r).is_none()).count(),
        rows,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| format!("{x:.6}"))
}

impl DecisionReport {
    /// `key: value` lines.
    pub fn to_text(&self) -> String {
        let c = &self.confusion;
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k}: {v}");
        };
        kv("records", self.rows.len().to_string());
        kv("tau_s", format!("{:.6}", self.tau));
        kv("positives", self.positives.to_string());
        kv("replans", self.replans.to_string());
        kv("tp", c.tp.to_string());
        kv("fp", c.fp.to_string());
        kv("tn", c.tn.to_string());
        kv("fn", c.fn_.to_string());
        kv("sensitivity", opt(c.sensitivity()));
        kv("specificity", opt(c.specificity()));
        kv("precision", opt(c.precision()));
        kv("f1", opt(c.f1()));
        kv("realized_savings_s", format!("{:.6}", self.savings.realized));
        kv("potential_savings_s", format!("{:.6}", self.savings.potential));
        kv("recovery_rate", opt(self.savings.recovery));
        kv("realized_savings_overhead_s", format!("{:.6}", self.savings_overhead.realized));
        kv("potential_savings_overhead_s", format!("{:.6}", self.savings_overhead.potential));
        kv("recovery_rate_overhead", opt(self.savings_overhead.recovery));
        kv("random_trigger_savings_s", format!("{:.6}", self.random_trigger.realized));
        kv("random_trigger_recovery_rate", opt(self.random_trigger.recovery));
        kv("mean_saving_per_replan_s", opt(self.mean_saving_per_replan));
        kv("mean_saving_per_positive_s", opt(self.mean_saving_per_positive));
        kv("relative_savings", opt(self.relative_savings));
        kv("no_increase_records", self.no_increase.to_string());
        out
    }
}

pub const FIGURE_FILES: [&str; 7] = [
    "fig_soc_scenarios.csv",
    "fig_soc_increase_hist.csv",
    "fig_savings_hist.csv",
    "fig_pred_vs_true.csv",
    "fig_realized_abs.csv",
    "fig_realized_rel.csv",
    "fig_perm_importance.csv",
];

/// Absolute-saving histogram bin width (seconds).
pub const ABS_BIN: f64 = 1.0;
/// Relative-saving histogram bin width.
pub const REL_BIN: f64 = 0.05;

/// Figure data derived from the evaluated records: every figure file but
/// the importance one, as `(file name, contents)`.
pub fn figure_data(records: &[LabeledRecord], report: &DecisionReport) -> Vec<(&'static str, String)> {
    let mut scen = String::from("map,agents,inst_seed,obs_seed,replan_seed,replan_t,soc_e,soc_ei,soc_eir,soc_eirp\n");
    for r in records {
        let _ = writeln!(
            scen,
            "{},{},{},{},{},{},{},{},{},{}",
            r.map, r.agents, r.inst_seed, r.obs_seed, r.replan_seed, r.replan_t, r.soc_e, r.soc_ei, r.soc_eir, r.soc_eirp
        );
    }
    let increase: Vec<f64> = records.iter().map(|r| r.soc_ei - r.soc_e).collect();
    let savings: Vec<f64> = records.iter().map(|r| r.y).collect();
    let mut pvt = String::from("predicted,y,y_overhead,decision,class\n");
    for row in &report.rows {
        let _ = writeln!(
            pvt,
            "{},{},{},{},{}",
            row.predicted,
            row.y,
            row.y_overhead,
            u8::from(row.decision),
            row.outcome.as_str()
        );
    }
    let replanned: Vec<&LabeledRecord> = records
        .iter()
        .zip(&report.rows)
        .filter(|(_, d)| d.decision)
        .map(|(r, _)| r)
        .collect();
    let abs: Vec<f64> = replanned.iter().map(|r| r.y).collect();
    let abs_o: Vec<f64> = replanned.iter().map(|r| r.y_with_overhead()).collect();
    let mut realized_abs = String::from("series,bin_lo,bin_hi,count\n");
    for (name, vals) in [("without_overhead", &abs), ("with_overhead", &abs_o)] {
        let h = Histogram::build(vals, ABS_BIN);
        for (i, c) in h.counts.iter().enumerate() {
            let _ = writeln!(realized_abs, "{name},{},{},{c}", h.edges[i], h.edges[i + 1]);
        }
    }
    let rel: Vec<f64> = replanned.iter().filter_map(|r| relative_saving(r)).collect();
    let no_inc = replanned.len() - rel.len();
    let mut realized_rel = Histogram::build(&rel, REL_BIN).to_csv();
    let _ = writeln!(realized_rel, "no_increase,no_increase,{no_inc}");
    vec![
        ("fig_soc_scenarios.csv", scen),
        ("fig_soc_increase_hist.csv", Histogram::build(&increase, ABS_BIN).to_csv()),
        ("fig_savings_hist.csv", Histogram::build(&savings, ABS_BIN).to_csv()),
        ("fig_pred_vs_true.csv", pvt),
        ("fig_realized_abs.csv", realized_abs),
        ("fig_realized_rel.csv", realized_rel),
    ]
}

pub fn importance_csv(baseline_mae: f64, importance: &[FeatureImportance]) -> String {
    let names = feature_names();
    let mut out = format!("feature,mean_increase_s,std_s\n# baseline_mae_s {baseline_mae}\n");
    for f in importance {
        let name = names.get(f.feature).map_or_else(|| format!("x{}", f.feature), |n| n.clone());
        let _ = writeln!(out, "{name},{},{}", f.mean, f.std);
    }
    out
}

/// Writes the report text and figure CSVs into `dir`.
pub fn write_evaluation(dir: &Path, records: &[LabeledRecord], report: &DecisionReport) -> Result<()> {
    write_atomic(&dir.join("report.txt"), report.to_text().as_bytes())?;
    for (name, text) in figure_data(records, report) {
        write_atomic(&dir.join(name), text.as_bytes())?;
    }
    Ok(())
}
