//! Min/max scaling of `(a, μ, U∞)` onto `[−1, 1]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl TargetScaler {
    /// Fits per-column bounds on `rows`.
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(Error::DegenerateInput(
                "cannot fit a scaler on no rows".into(),
            ));
        };
        let m = first.len();
        let mut min = vec![f64::INFINITY; m];
        let mut max = vec![f64::NEG_INFINITY; m];
        for r in rows {
            for j in 0..m {
                min[j] = min[j].min(r[j]);
                max[j] = max[j].max(r[j]);
            }
        }
        if let Some(j) = (0..m).find(|&j| !(max[j] > min[j])) {
            return Err(Error::DegenerateInput(format!(
                "target {j} is constant on the training split"
            )));
        }
        Ok(Self { min, max })
    }

    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, x)| 2.0 * (x - self.min[j]) / (self.max[j] - self.min[j]) - 1.0)
            .collect()
    }

    pub fn inverse(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, y)| (y + 1.0) * 0.5 * (self.max[j] - self.min[j]) + self.min[j])
            .collect()
    }
}
