//! Replanning-benefit regressor: robust scaling, a small rectifier network
//! trained with Adam on mean absolute error, and permutation importance.

mod importance;
mod mlp;
mod scaler;
mod train;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub use importance::{permutation_importance, FeatureImportance};
pub use mlp::{ForwardCache, Network};
pub use scaler::{quantile_sorted, RobustScaler, MIN_SCALE};
pub use train::{
    batch_mae, fold_partition, kfold_cv, train, Adam, EpochStats, FoldResult, TrainConfig, TrainReport,
};

pub const HIDDEN: [usize; 3] = [64, 32, 16];

const FORMAT_TAG: &str = "replan-mlp v1";

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub net: Network,
    pub x_scaler: RobustScaler,
    pub y_scaler: RobustScaler,
}

impl MlpModel {
    pub fn input_dims(&self) -> usize {
        self.net.sizes()[0]
    }

    pub fn predict_scaled(&self, x_scaled: &[f64]) -> f64 {
        self.net.forward(x_scaled)
    }

    /// Prediction in target units.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.input_dims() {
            return Err(Error::Invalid(format!(
                "expected {} features, got {}",
                self.input_dims(),
                x.len()
            )));
        }
        let z = self.net.forward(&self.x_scaler.transform(x));
        Ok(self.y_scaler.inverse_transform(&[z])[0])
    }

    pub fn predict_all<R: AsRef<[f64]>>(&self, x: &[R]) -> Vec<f64> {
        x.iter()
            .map(|r| self.predict(r.as_ref()).expect("consistent input width"))
            .collect()
    }

    /// MAE in target units.
    pub fn mae<R: AsRef<[f64]>>(&self, x: &[R], y: &[f64]) -> f64 {
        let p = self.predict_all(x);
        p.iter().zip(y).map(|(a, b)| (a - b).abs()).sum::<f64>() / y.len() as f64
    }

    /// MAE in scaled target units.
    pub fn mae_scaled<R: AsRef<[f64]>>(&self, x: &[R], y: &[f64]) -> f64 {
        self.mae(x, y) / self.y_scaler.scale[0]
    }

    /// Text format: tag line, `layers` line, scaler vectors, then per layer
    /// one line per weight-matrix row followed by the bias line.
    pub fn to_text(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        let mut out = String::new();
        let sizes = self.net.sizes();
        let _ = writeln!(out, "{FORMAT_TAG}");
        let _ = writeln!(
            out,
            "layers {}",
            sizes.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" ")
        );
        let _ = writeln!(out, "x_center {}", join(&self.x_scaler.center));
        let _ = writeln!(out, "x_scale {}", join(&self.x_scaler.scale));
        let _ = writeln!(out, "y_center {}", join(&self.y_scaler.center));
        let _ = writeln!(out, "y_scale {}", join(&self.y_scaler.scale));
        for l in 0..self.net.num_layers() {
            let (inputs, outputs) = (sizes[l], sizes[l + 1]);
            let w = self.net.weight_offset(l);
            let _ = writeln!(out, "layer {l}");
            for o in 0..outputs {
                let _ = writeln!(out, "{}", join(&self.net.params[w + o * inputs..w + (o + 1) * inputs]));
            }
            let b = self.net.bias_offset(l);
            let _ = writeln!(out, "{}", join(&self.net.params[b..b + outputs]));
        }
        out
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| Error::parse(0, format!("model file ends before {what}")))
        };
        let (n, tag) = next("header")?;
        if tag != FORMAT_TAG {
            return Err(Error::parse(n, format!("expected `{FORMAT_TAG}`")));
        }
        let floats = |n: usize, s: &str| -> Result<Vec<f64>> {
            s.split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| Error::parse(n, format!("bad number `{t}`"))))
                .collect()
        };
        let labeled = |(n, line): (usize, &str), label: &str| -> Result<(usize, String)> {
            line.strip_prefix(label)
                .map(|rest| (n, rest.trim().to_string()))
                .ok_or_else(|| Error::parse(n, format!("expected `{label}`")))
        };
        let (n, sizes) = labeled(next("layers")?, "layers")?;
        let sizes: Vec<usize> = sizes
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::parse(n, "bad layer size")))
            .collect::<Result<_>>()?;
        if sizes.len() < 2 || sizes.last() != Some(&1) || sizes.contains(&0) {
            return Err(Error::parse(n, "layer sizes must be positive and end in 1"));
        }
        let mut vector = |label: &str, len: usize| -> Result<Vec<f64>> {
            let (n, rest) = labeled(next(label)?, label)?;
            let v = floats(n, &rest)?;
            if v.len() != len {
                return Err(Error::parse(n, format!("{label} needs {len} values")));
            }
            Ok(v)
        };
        let x_scaler = RobustScaler {
            center: vector("x_center", sizes[0])?,
            scale: vector("x_scale", sizes[0])?,
        };
        let y_scaler = RobustScaler {
            center: vector("y_center", 1)?,
            scale: vector("y_scale", 1)?,
        };
        let mut net = Network::zeros(&sizes);
        for l in 0..net.num_layers() {
            let (inputs, outputs) = (sizes[l], sizes[l + 1]);
            let (n, rest) = next("layer")?;
            if rest != format!("layer {l}") {
                return Err(Error::parse(n, format!("expected `layer {l}`")));
            }
            let w = net.weight_offset(l);
            for o in 0..outputs {
                let (n, row) = next("weights")?;
                let v = floats(n, row)?;
                if v.len() != inputs {
                    return Err(Error::parse(n, format!("weight row needs {inputs} values")));
                }
                net.params[w + o * inputs..w + (o + 1) * inputs].copy_from_slice(&v);
            }
            let (n, row) = next("bias")?;
            let v = floats(n, row)?;
            if v.len() != outputs {
                return Err(Error::parse(n, format!("bias needs {outputs} values")));
            }
            let b = net.bias_offset(l);
            net.params[b..b + outputs].copy_from_slice(&v);
        }
        Ok(MlpModel {
            net,
            x_scaler,
            y_scaler,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::dataset::write_atomic(path, self.to_text().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_text(&text)
    }
}
