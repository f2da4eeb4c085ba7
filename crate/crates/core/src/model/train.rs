use log::debug;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::mlp::Network;
use super::scaler::RobustScaler;
use super::{MlpModel, HIDDEN};
use crate::error::{Error, Result};
use crate::kv::KvFile;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub validation_split: f64,
    pub learning_rate: f64,
    pub decay_rate: f64,
    /// Optimizer steps between learning-rate decays.
    pub decay_steps: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 64,
            max_epochs: 500,
            patience: 100,
            validation_split: 0.2,
            learning_rate: 0.001,
            decay_rate: 0.96,
            decay_steps: 100,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Reads `train.*` keys, defaults for missing ones.
    pub fn from_kv(kv: &KvFile) -> Result<Self> {
        let d = TrainConfig::default();
        let cfg = TrainConfig {
            batch_size: kv.get_or("train.batch_size", d.batch_size)?,
            max_epochs: kv.get_or("train.max_epochs", d.max_epochs)?,
            patience: kv.get_or("train.patience", d.patience)?,
            validation_split: kv.get_or("train.validation_split", d.validation_split)?,
            learning_rate: kv.get_or("train.learning_rate", d.learning_rate)?,
            decay_rate: kv.get_or("train.decay_rate", d.decay_rate)?,
            decay_steps: kv.get_or("train.decay_steps", d.decay_steps)?,
            beta1: kv.get_or("train.beta1", d.beta1)?,
            beta2: kv.get_or("train.beta2", d.beta2)?,
            epsilon: kv.get_or("train.epsilon", d.epsilon)?,
            seed: kv.get_or("train.seed", d.seed)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = self.batch_size > 0
            && self.max_epochs > 0
            && self.patience > 0
            && self.decay_steps > 0
            && self.learning_rate > 0.0
            && self.decay_rate > 0.0
            && self.epsilon > 0.0;
        if !positive {
            return Err(Error::Invalid("training parameters must be positive".into()));
        }
        if self.patience >= self.max_epochs {
            return Err(Error::Invalid("patience must be below the epoch limit".into()));
        }
        if !(self.validation_split > 0.0 && self.validation_split < 1.0) {
            return Err(Error::Invalid("validation split must lie in (0, 1)".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Invalid("Adam betas must lie in [0, 1)".into()));
        }
        Ok(())
    }

    /// Step decay: `η₀ · γ^⌊step / decay_steps⌋`.
    pub fn learning_rate_at(&self, step: usize) -> f64 {
        self.learning_rate * self.decay_rate.powi((step / self.decay_steps) as i32)
    }
}

/// Adam optimizer state over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    step: usize,
}

impl Adam {
    pub fn new(n: usize) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }

    /// Optimizer steps taken so far.
    pub fn steps(&self) -> usize {
        self.step
    }

    pub fn update(&mut self, params: &mut [f64], grad: &[f64], cfg: &TrainConfig) {
        let lr = cfg.learning_rate_at(self.step);
        self.step += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.step as i32);
        let c2 = 1.0 - cfg.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * grad[i];
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
            params[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + cfg.epsilon);
        }
    }
}

/// Mean absolute error of the network over scaled rows, and optionally its
/// gradient.
pub fn batch_mae(net: &Network, xs: &[&[f64]], ys: &[f64], grad: Option<&mut [f64]>) -> f64 {
    let n = xs.len() as f64;
    let mut loss = 0.0;
    match grad {
        None => {
            for (x, y) in xs.iter().zip(ys) {
                loss += (net.forward(x) - y).abs();
            }
        }
        Some(g) => {
            g.iter_mut().for_each(|v| *v = 0.0);
            for (x, y) in xs.iter().zip(ys) {
                let cache = net.forward_cached(x);
                let err = cache.output() - y;
                loss += err.abs();
                let dout = if err > 0.0 {
                    1.0 / n
                } else if err < 0.0 {
                    -1.0 / n
                } else {
                    0.0
                };
                net.backward(&cache, dout, g);
            }
        }
    }
    loss / n
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean batch loss (scaled units).
    pub train_mae: f64,
    pub val_mae: f64,
    pub learning_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_val_mae: f64,
    /// Indices (into the training input) held out for validation.
    pub validation_indices: Vec<usize>,
}

/// Fits scalers on all rows, holds out a seeded validation fraction, trains
/// with Adam on MAE of scaled targets and restores the best-validation
/// weights.
pub fn train<R: AsRef<[f64]>>(x: &[R], y: &[f64], cfg: &TrainConfig) -> Result<(MlpModel, TrainReport)> {
    cfg.validate()?;
    if x.len() != y.len() {
        return Err(Error::Training("feature and target counts differ".into()));
    }
    if x.len() < cfg.batch_size {
        return Err(Error::Training(format!("{} records is fewer than one batch", x.len())));
    }
    let dims = x[0].as_ref().len();
    let x_scaler = RobustScaler::fit(x)?;
    let y_scaler = RobustScaler::fit_column(y)?;
    let xs: Vec<Vec<f64>> = x.iter().map(|r| x_scaler.transform(r.as_ref())).collect();
    let ys: Vec<f64> = y.iter().map(|&v| y_scaler.transform(&[v])[0]).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.shuffle(&mut rng);
    let n_val = ((xs.len() as f64 * cfg.validation_split).round() as usize).clamp(1, xs.len() - 1);
    let (val_idx, train_idx) = order.split_at(n_val);
    let val_x: Vec<&[f64]> = val_idx.iter().map(|&i| xs[i].as_slice()).collect();
    let val_y: Vec<f64> = val_idx.iter().map(|&i| ys[i]).collect();
    let mut train_idx = train_idx.to_vec();

    let mut sizes = vec![dims];
    sizes.extend(HIDDEN);
    sizes.push(1);
    let mut net = Network::he_uniform(&sizes, &mut rng);
    let mut adam = Adam::new(net.params.len());
    let mut grad = vec![0.0; net.params.len()];
    let mut best = (f64::INFINITY, 0, net.params.clone());
    let mut history = Vec::new();

    for epoch in 0..cfg.max_epochs {
        train_idx.shuffle(&mut rng);
        let mut sum = 0.0;
        let mut batches = 0;
        for chunk in train_idx.chunks(cfg.batch_size) {
            let bx: Vec<&[f64]> = chunk.iter().map(|&i| xs[i].as_slice()).collect();
            let by: Vec<f64> = chunk.iter().map(|&i| ys[i]).collect();
            let loss = batch_mae(&net, &bx, &by, Some(&mut grad));
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Training(format!(
                    "non-finite loss at epoch {epoch}, step {}",
                    adam.steps()
                )));
            }
            adam.update(&mut net.params, &grad, cfg);
            sum += loss;
            batches += 1;
        }
        let val = batch_mae(&net, &val_x, &val_y, None);
        if !val.is_finite() {
            return Err(Error::Training(format!("non-finite validation loss at epoch {epoch}")));
        }
        history.push(EpochStats {
            epoch,
            train_mae: sum / batches as f64,
            val_mae: val,
            learning_rate: cfg.learning_rate_at(adam.steps()),
        });
        if val < best.0 {
            best = (val, epoch, net.params.clone());
        } else if epoch - best.1 >= cfg.patience {
            debug!("early stop at epoch {epoch}, best {} at {}", best.0, best.1);
            break;
        }
    }
    net.params = best.2;
    let model = MlpModel {
        net,
        x_scaler,
        y_scaler,
    };
    let report = TrainReport {
        history,
        best_epoch: best.1,
        best_val_mae: best.0,
        validation_indices: val_idx.to_vec(),
    };
    Ok((model, report))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub fold: usize,
    pub size: usize,
    /// MAE on the held-out fold in scaled target units.
    pub mae_scaled: f64,
    pub mae_seconds: f64,
}

/// Seeded fold assignment: shuffled indices cut into `k` contiguous parts,
/// the first `n mod k` one larger.
pub fn fold_partition(n: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut out = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = n / k + usize::from(f < n % k);
        out.push(idx[start..start + len].to_vec());
        start += len;
    }
    out
}

/// k-fold cross-validation; folds train in parallel.
pub fn kfold_cv<R: AsRef<[f64]> + Sync>(x: &[R], y: &[f64], k: usize, cfg: &TrainConfig) -> Result<Vec<FoldResult>> {
    if k < 2 || x.len() < k {
        return Err(Error::Invalid("need k >= 2 and at least k records".into()));
    }
    let folds = fold_partition(x.len(), k, cfg.seed);
    folds
        .par_iter()
        .enumerate()
        .map(|(f, held)| {
            let mut is_held = vec![false; x.len()];
            held.iter().for_each(|&i| is_held[i] = true);
            let tx: Vec<&[f64]> = (0..x.len()).filter(|&i| !is_held[i]).map(|i| x[i].as_ref()).collect();
            let ty: Vec<f64> = (0..x.len()).filter(|&i| !is_held[i]).map(|i| y[i]).collect();
            let (model, _) = train(&tx, &ty, cfg)?;
            let hx: Vec<&[f64]> = held.iter().map(|&i| x[i].as_ref()).collect();
            let hy: Vec<f64> = held.iter().map(|&i| y[i]).collect();
            Ok(FoldResult {
                fold: f,
                size: held.len(),
                mae_scaled: model.mae_scaled(&hx, &hy),
                mae_seconds: model.mae(&hx, &hy),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn learning_rate_schedule() {
        let cfg = TrainConfig::default();
        assert_eq!(cfg.learning_rate_at(0), 0.001);
        assert_eq!(cfg.learning_rate_at(99), 0.001);
        assert_eq!(cfg.learning_rate_at(100), 0.00096);
        assert_eq!(cfg.learning_rate_at(250), 0.0009216);
    }

    #[test]
    fn folds_partition_the_input() {
        let f = fold_partition(10, 2, 4);
        assert_eq!(f.iter().map(Vec::len).collect::<Vec<_>>(), vec![5, 5]);
        let f = fold_partition(8400, 5, 4);
        assert!(f.iter().all(|p| p.len() == 1680));
        let mut all: Vec<usize> = f.concat();
        all.sort();
        assert_eq!(all, (0..8400).collect::<Vec<_>>());
        let f = fold_partition(11, 3, 0);
        assert_eq!(f.iter().map(Vec::len).collect::<Vec<_>>(), vec![4, 4, 3]);
    }

    #[test]
    fn config_checks() {
        let mut c = TrainConfig::default();
        assert!(c.validate().is_ok());
        c.patience = 500;
        assert!(c.validate().is_err());
    }
}
