use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::MlpModel;
use crate::dataset::mix_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureImportance {
    pub feature: usize,
    /// Mean MAE increase (seconds) over the repeats.
    pub mean: f64,
    pub std: f64,
    /// Per-repeat increases, reported raw (may be negative).
    pub repeats: Vec<f64>,
}

/// Baseline test MAE and, per feature, the MAE increase after shuffling
/// that column. Each feature has its own seeded stream, so the result does
/// not depend on thread scheduling.
pub fn permutation_importance<R: AsRef<[f64]> + Sync>(
    model: &MlpModel,
    x: &[R],
    y: &[f64],
    repeats: usize,
    seed: u64,
) -> (f64, Vec<FeatureImportance>) {
    assert!(!x.is_empty(), "test set must not be empty");
    let base = model.mae(x, y);
    let dims = x[0].as_ref().len();
    let rows: Vec<Vec<f64>> = x.iter().map(|r| r.as_ref().to_vec()).collect();
    let out = (0..dims)
        .into_par_iter()
        .map(|j| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[seed, j as u64]));
            let mut work = rows.clone();
            let column: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            let deltas: Vec<f64> = (0..repeats)
                .map(|_| {
                    let mut perm = column.clone();
                    perm.shuffle(&mut rng);
                    for (r, v) in work.iter_mut().zip(&perm) {
                        r[j] = *v;
                    }
                    model.mae(&work, y) - base
                })
                .collect();
            let mean = deltas.iter().sum::<f64>() / repeats.max(1) as f64;
            let var = deltas.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / repeats.max(1) as f64;
            FeatureImportance {
                feature: j,
                mean,
                std: var.sqrt(),
                repeats: deltas,
            }
        })
        .collect();
    (base, out)
}
