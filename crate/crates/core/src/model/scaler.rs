use crate::error::{Error, Result};

/// IQRs below this are treated as zero and the column keeps unit scale.
pub const MIN_SCALE: f64 = 1e-9;

/// Per-column median centering and interquartile-range scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustScaler {
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
}

/// Quantile of sorted data with linear interpolation between order
/// statistics (`q` in [0, 1]).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

impl RobustScaler {
    pub fn fit<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::Training("scaler needs at least two rows".into()));
        }
        let dims = rows[0].as_ref().len();
        if rows.iter().any(|r| r.as_ref().len() != dims) {
            return Err(Error::Training("ragged input rows".into()));
        }
        let mut center = Vec::with_capacity(dims);
        let mut scale = Vec::with_capacity(dims);
        let mut col = Vec::with_capacity(rows.len());
        for j in 0..dims {
            col.clear();
            col.extend(rows.iter().map(|r| r.as_ref()[j]));
            if col.iter().any(|x| !x.is_finite()) {
                return Err(Error::Training(format!("column {j} has non-finite values")));
            }
            col.sort_by(f64::total_cmp);
            center.push(quantile_sorted(&col, 0.5));
            let iqr = quantile_sorted(&col, 0.75) - quantile_sorted(&col, 0.25);
            scale.push(if iqr > MIN_SCALE { iqr } else { 1.0 });
        }
        Ok(RobustScaler { center, scale })
    }

    pub fn fit_column(values: &[f64]) -> Result<Self> {
        let rows: Vec<[f64; 1]> = values.iter().map(|&v| [v]).collect();
        Self::fit(&rows)
    }

    pub fn dims(&self) -> usize {
        self.center.len()
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.center.iter().zip(&self.scale))
            .map(|(v, (c, s))| (v - c) / s)
            .collect()
    }

    pub fn inverse_transform(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.center.iter().zip(&self.scale))
            .map(|(v, (c, s))| v * s + c)
            .collect()
    }
}
