//! The training loop.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Task};
use super::metrics::{r2_score, Confusion};
use super::model::{Forward, ModelParams, PreparedData, Supervision};
use super::optim::{adam_step, AdamState};
use super::scaler::TargetScaler;
use crate::error::{Error, Result};
use crate::exec::ExecMode;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub eval_metric: f64,
    pub grad_var_mpo: f64,
    pub grad_var_vqc: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Failed { epoch: usize, reason: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// F1 for classification, mean R² for regression.
    pub metric: f64,
    pub confusion: Option<Confusion>,
    pub r2_per_target: Option<BTreeMap<String, f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub status: RunStatus,
    pub epochs: Vec<EpochRecord>,
    pub init_checksum: u64,
    pub scaler: Option<TargetScaler>,
    pub test: Option<Metrics>,
}

impl RunRecord {
    pub fn failed(&self) -> bool {
        matches!(self.status, RunStatus::Failed { .. })
    }

    /// Largest per-epoch evaluation metric; `None` for failed runs.
    pub fn best_eval(&self) -> Option<f64> {
        if self.failed() {
            return None;
        }
        self.epochs.iter().map(|e| e.eval_metric).reduce(f64::max)
    }
}

pub struct RunOutcome {
    pub record: RunRecord,
    pub params: ModelParams,
}

/// Index sets used by one training run.
#[derive(Clone, Copy, Debug)]
pub struct Splits<'a> {
    pub train: &'a [usize],
    pub eval: &'a [usize],
    pub test: Option<&'a [usize]>,
}

#[derive(Default)]
struct Moments {
    n: f64,
    sum: f64,
    sumsq: f64,
}

impl Moments {
    fn add(&mut self, g: &[f64]) {
        for x in g {
            self.n += 1.0;
            self.sum += x;
            self.sumsq += x * x;
        }
    }

    fn variance(&self) -> f64 {
        if self.n == 0.0 {
            return 0.0;
        }
        let mean = self.sum / self.n;
        (self.sumsq / self.n - mean * mean).max(0.0)
    }
}

/// Supervision for every sample, with targets scaled by `scaler`.
pub fn supervision(
    cfg: &ExperimentConfig,
    data: &PreparedData,
    scaler: Option<&TargetScaler>,
) -> Vec<Supervision> {
    match cfg.task {
        Task::Classify => data
            .labels
            .iter()
            .map(|&l| Supervision::Class(if l == 1 { [0.0, 1.0] } else { [1.0, 0.0] }))
            .collect(),
        _ => {
            let s = scaler.expect("regression needs a fitted scaler");
            data.params
                .iter()
                .map(|p| Supervision::Values(s.transform(&target_columns(cfg.task, p))))
                .collect()
        }
    }
}

fn target_columns(task: Task, p: &[f64]) -> Vec<f64> {
    task.targets().iter().map(|t| p[t.column()]).collect()
}

pub fn fit_scaler(
    cfg: &ExperimentConfig,
    data: &PreparedData,
    train: &[usize],
) -> Result<Option<TargetScaler>> {
    if cfg.task.is_classification() {
        return Ok(None);
    }
    let rows: Vec<Vec<f64>> = train
        .iter()
        .map(|&i| target_columns(cfg.task, &data.params[i]))
        .collect();
    TargetScaler::fit(&rows).map(Some)
}

/// Scores `params` on the listed samples.
pub fn evaluate(
    fwd: &Forward<'_>,
    params: &ModelParams,
    data: &PreparedData,
    sup: &[Supervision],
    idx: &[usize],
    mode: ExecMode,
) -> Result<Metrics> {
    let samples: Vec<_> = idx.iter().map(|&i| &data.samples[i]).collect();
    let out = fwd.predict(params, &samples, mode)?;
    match fwd.cfg.task {
        Task::Classify => {
            let preds: Vec<bool> = out.iter().map(|p| p[1] > p[0]).collect();
            let labels: Vec<bool> = idx.iter().map(|&i| data.labels[i] == 1).collect();
            let c = Confusion::from_predictions(&preds, &labels)?;
            Ok(Metrics {
                metric: c.f1(),
                confusion: Some(c),
                r2_per_target: None,
            })
        }
        task => {
            let targets: Vec<Vec<f64>> = idx
                .iter()
                .map(|&i| match &sup[i] {
                    Supervision::Values(v) => v.clone(),
                    Supervision::Class(_) => unreachable!(),
                })
                .collect();
            let (mean, per) = r2_score(&out, &targets)?;
            let names = task.targets().into_iter().map(|t| t.name().to_string());
            Ok(Metrics {
                metric: mean,
                confusion: None,
                r2_per_target: Some(names.zip(per).collect()),
            })
        }
    }
}

/// Trains from the configured initialisation. A non-finite loss or circuit
/// output ends the run early and is reported in the record, not as an error.
pub fn train(
    cfg: &ExperimentConfig,
    data: &PreparedData,
    splits: Splits<'_>,
    mode: ExecMode,
) -> Result<RunOutcome> {
    let fwd = Forward::new(cfg)?;
    if splits.train.is_empty() || splits.eval.is_empty() {
        return Err(Error::Config(
            "training and evaluation splits must be non-empty".into(),
        ));
    }
    if cfg.task.is_classification() {
        let has = |c: u8| splits.train.iter().any(|&i| data.labels[i] == c);
        if !has(0) || !has(1) {
            return Err(Error::DegenerateInput(
                "training split lacks one of the classes".into(),
            ));
        }
    }
    let scaler = fit_scaler(cfg, data, splits.train)?;
    let sup = supervision(cfg, data, scaler.as_ref());
    let mut params = ModelParams::init(cfg)?;
    let init_checksum = params.checksum();
    let n_mpo = params.mpo.len();
    let mut adam = AdamState::new(n_mpo + params.vqc.len());

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut order = splits.train.to_vec();
    let mut epochs = Vec::with_capacity(cfg.epochs);
    let mut status = RunStatus::Completed;

    'outer: for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let (mut mm, mut mv) = (Moments::default(), Moments::default());
        // summed in the fixed training order so the epoch loss does not
        // depend on the shuffle
        let mut losses = vec![0.0; data.len()];
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<_> = chunk.iter().map(|&i| (&data.samples[i], &sup[i])).collect();
            let g = match fwd.batch_grad(&params, &batch, mode) {
                Ok(g) => g,
                Err(e @ (Error::NumericalFailure(_) | Error::DegenerateInput(_))) => {
                    status = RunStatus::Failed {
                        epoch,
                        reason: e.to_string(),
                    };
                    break 'outer;
                }
                Err(e) => return Err(e),
            };
            let finite =
                g.loss.is_finite() && g.grad_mpo.iter().chain(&g.grad_vqc).all(|x| x.is_finite());
            if !finite {
                status = RunStatus::Failed {
                    epoch,
                    reason: "non-finite loss or gradient".into(),
                };
                break 'outer;
            }
            for (&i, &l) in chunk.iter().zip(&g.sample_losses) {
                losses[i] = l;
            }
            mm.add(&g.grad_mpo);
            mv.add(&g.grad_vqc);
            let mut flat: Vec<f64> = params.mpo.iter().chain(&params.vqc).copied().collect();
            let grads: Vec<f64> = g.grad_mpo.iter().chain(&g.grad_vqc).copied().collect();
            adam_step(&mut flat, &grads, &mut adam, cfg.learning_rate)?;
            params.mpo.copy_from_slice(&flat[..n_mpo]);
            params.vqc.copy_from_slice(&flat[n_mpo..]);
        }
        let eval = match evaluate(&fwd, &params, data, &sup, splits.eval, mode) {
            Ok(m) => m,
            Err(e @ Error::NumericalFailure(_)) => {
                status = RunStatus::Failed {
                    epoch,
                    reason: e.to_string(),
                };
                break;
            }
            Err(e) => return Err(e),
        };
        epochs.push(EpochRecord {
            epoch,
            train_loss: splits.train.iter().map(|&i| losses[i]).sum::<f64>() / order.len() as f64,
            eval_metric: eval.metric,
            grad_var_mpo: mm.variance(),
            grad_var_vqc: mv.variance(),
        });
    }

    let test = match (splits.test, &status) {
        (Some(t), RunStatus::Completed) => Some(evaluate(&fwd, &params, data, &sup, t, mode)?),
        _ => None,
    };
    Ok(RunOutcome {
        record: RunRecord {
            seed: cfg.seed,
            status,
            epochs,
            init_checksum,
            scaler,
            test,
        },
        params,
    })
}
