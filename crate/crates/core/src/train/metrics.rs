//! Losses and scores.

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::tensor::{contract, map_real, mul_scalar, sub, sum_all, Tensor};

pub const PROB_FLOOR: f64 = 1e-12;

fn clamped_ln(x: f64) -> f64 {
    x.clamp(PROB_FLOOR, 1.0).ln()
}

/// `−Σ y_i ln(clamp(p_i, 1e−12, 1))` for one sample, both on index `out`.
pub fn cross_entropy(probs: &Tensor, onehot: &Tensor) -> Result<Tensor> {
    let logp = map_real(probs, clamped_ln, |x| {
        if (PROB_FLOOR..=1.0).contains(&x) {
            1.0 / x
        } else {
            0.0
        }
    })?;
    mul_scalar(&contract(&logp, onehot)?, &Tensor::scalar(-1.0))
}

/// Plain cross entropy averaged over a batch of `[p0, p1]` rows.
pub fn cross_entropy_values(probs: &[[f64; 2]], onehot: &[[f64; 2]]) -> Result<f64> {
    if probs.len() != onehot.len() || probs.is_empty() {
        return shape_err("cross entropy needs equally long, non-empty batches");
    }
    let total: f64 = probs
        .iter()
        .zip(onehot)
        .map(|(p, y)| -(y[0] * clamped_ln(p[0]) + y[1] * clamped_ln(p[1])))
        .sum();
    Ok(total / probs.len() as f64)
}

pub fn huber(e: f64, delta: f64) -> f64 {
    if e.abs() <= delta {
        0.5 * e * e
    } else {
        delta * (e.abs() - 0.5 * delta)
    }
}

fn huber_grad(e: f64, delta: f64) -> f64 {
    e.clamp(-delta, delta)
}

/// Huber loss summed over the entries of `pred − target`.
pub fn huber_loss(pred: &Tensor, target: &Tensor, delta: f64) -> Result<Tensor> {
    if !(delta > 0.0) {
        return Err(Error::Config(format!(
            "huber delta must be positive, got {delta}"
        )));
    }
    let e = sub(pred, target)?;
    sum_all(&map_real(
        &e,
        move |x| huber(x, delta),
        move |x| huber_grad(x, delta),
    )?)
}

/// Mean Huber loss over all entries.
pub fn huber_values(pred: &[f64], target: &[f64], delta: f64) -> Result<f64> {
    if pred.len() != target.len() || pred.is_empty() {
        return shape_err("huber loss needs equally long, non-empty inputs");
    }
    let total: f64 = pred
        .iter()
        .zip(target)
        .map(|(p, t)| huber(p - t, delta))
        .sum();
    Ok(total / pred.len() as f64)
}

/// Binary confusion counts with "unstable" (`true`) as the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn from_predictions(preds: &[bool], labels: &[bool]) -> Result<Self> {
        if preds.len() != labels.len() {
            return shape_err(format!(
                "{} predictions for {} labels",
                preds.len(),
                labels.len()
            ));
        }
        let mut c = Confusion::default();
        for (&p, &l) in preds.iter().zip(labels) {
            match (p, l) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        Ok(c)
    }

    pub fn f1(&self) -> f64 {
        let den = 2 * self.tp + self.fp + self.fn_;
        if den == 0 {
            0.0
        } else {
            2.0 * self.tp as f64 / den as f64
        }
    }
}

pub fn f1_score(preds: &[bool], labels: &[bool]) -> Result<f64> {
    Ok(Confusion::from_predictions(preds, labels)?.f1())
}

/// `1 − SS_res/SS_tot` per target column; returns (mean, per target).
pub fn r2_score(preds: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<(f64, Vec<f64>)> {
    if preds.len() != targets.len() {
        return shape_err("r2 needs as many predictions as targets");
    }
    if targets.len() < 2 {
        return Err(Error::DegenerateInput(
            "r2 needs at least two samples".into(),
        ));
    }
    let m = targets[0].len();
    if m == 0 || preds.iter().chain(targets).any(|r| r.len() != m) {
        return shape_err("r2 rows must share a non-zero width");
    }
    let n = targets.len() as f64;
    let per: Vec<f64> = (0..m)
        .map(|j| {
            let mean = targets.iter().map(|t| t[j]).sum::<f64>() / n;
            let ss_tot: f64 = targets.iter().map(|t| (t[j] - mean).powi(2)).sum();
            let ss_res: f64 = preds
                .iter()
                .zip(targets)
                .map(|(p, t)| (t[j] - p[j]).powi(2))
                .sum();
            if ss_tot == 0.0 {
                Err(Error::DegenerateInput(format!(
                    "target {j} has zero variance"
                )))
            } else {
                Ok(1.0 - ss_res / ss_tot)
            }
        })
        .collect::<Result<_>>()?;
    Ok((per.iter().sum::<f64>() / m as f64, per))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn huber_branches() {
        assert_eq!(huber(0.5, 1.0), 0.125);
        assert_eq!(huber(2.0, 1.0), 1.5);
        assert!((huber(1.0, 1.0) - huber(1.0 + 1e-15, 1.0)).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_tensor_matches_values() {
        let p = Tensor::real(&[2], &["out"], vec![0.3, 0.7]).unwrap();
        let y = Tensor::real(&[2], &["out"], vec![0.0, 1.0]).unwrap();
        let l = cross_entropy(&p, &y).unwrap().item();
        assert!((l - cross_entropy_values(&[[0.3, 0.7]], &[[0.0, 1.0]]).unwrap()).abs() < 1e-15);
        assert!((l + 0.7f64.ln()).abs() < 1e-15);
    }
}
