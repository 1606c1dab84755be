//! Cross-validated objective, random hyperparameter search and
//! seed-replicated retraining.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::model::{ModelParams, PreparedData};
use super::run::{train, RunRecord, Splits};
use super::split::{shuffle_split, stratified_holdout, Fold};
use crate::error::{Error, Result};
use crate::exec::ExecMode;
use crate::qsim::GateKind;

/// Test holdout fixed by `data_seed`; `eval` holds the test indices.
pub fn holdout(cfg: &ExperimentConfig, data: &PreparedData) -> Result<Fold> {
    stratified_holdout(&data.labels, cfg.test_fraction, cfg.data_seed)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    /// Best per-epoch evaluation metric of each fold; `None` if it failed.
    pub fold_scores: Vec<Option<f64>>,
    /// Mean of the fold scores, `None` if any fold failed.
    pub objective: Option<f64>,
}

pub fn aggregate_folds(scores: &[Option<f64>]) -> Option<f64> {
    let ok: Option<Vec<f64>> = scores.iter().copied().collect();
    ok.filter(|v| !v.is_empty())
        .map(|v| v.iter().sum::<f64>() / v.len() as f64)
}

/// Shuffle-split cross-validation restricted to `train`.
pub fn cv_objective(
    cfg: &ExperimentConfig,
    data: &PreparedData,
    train_idx: &[usize],
    mode: ExecMode,
) -> Result<CvResult> {
    let folds = shuffle_split(
        train_idx.len(),
        cfg.cv_folds,
        cfg.cv_eval_fraction,
        cfg.data_seed,
    )?;
    let mut fold_scores = Vec::with_capacity(folds.len());
    for f in &folds {
        let tr: Vec<usize> = f.train.iter().map(|&i| train_idx[i]).collect();
        let ev: Vec<usize> = f.eval.iter().map(|&i| train_idx[i]).collect();
        let out = train(
            cfg,
            data,
            Splits {
                train: &tr,
                eval: &ev,
                test: None,
            },
            mode,
        )?;
        fold_scores.push(out.record.best_eval());
    }
    let objective = aggregate_folds(&fold_scores);
    Ok(CvResult {
        fold_scores,
        objective,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub chi_mpo: Vec<usize>,
    /// `null` entries stand for exact state loading.
    pub k_mpd: Vec<Option<usize>>,
    pub vqc_layers: Vec<usize>,
    pub gate_kind: Vec<GateKind>,
    pub learning_rate: (f64, f64),
    pub batch_size: Vec<usize>,
    pub measure_layer: Vec<bool>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            chi_mpo: vec![2, 3, 4],
            k_mpd: vec![Some(1), Some(2), Some(3), None],
            vqc_layers: vec![1, 2, 3, 4],
            gate_kind: vec![GateKind::Sel2, GateKind::Su4],
            learning_rate: (1e-4, 1e-1),
            batch_size: vec![32, 64, 128],
            measure_layer: vec![true, false],
        }
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.learning_rate;
        if self.chi_mpo.is_empty()
            || self.k_mpd.is_empty()
            || self.vqc_layers.is_empty()
            || self.gate_kind.is_empty()
            || self.batch_size.is_empty()
            || self.measure_layer.is_empty()
        {
            return Err(Error::Config(
                "every search dimension needs at least one choice".into(),
            ));
        }
        if !(lo > 0.0 && hi >= lo) {
            return Err(Error::Config(format!(
                "learning rate range ({lo}, {hi}) is invalid"
            )));
        }
        Ok(())
    }

    fn pick<'a, T>(v: &'a [T], rng: &mut ChaCha8Rng) -> &'a T {
        &v[rng.gen_range(0..v.len())]
    }

    /// `budget` candidates drawn in a fixed order from `seed`; fields outside
    /// the space are copied from `base`.
    pub fn candidates(
        &self,
        base: &ExperimentConfig,
        budget: usize,
        seed: u64,
    ) -> Result<Vec<ExperimentConfig>> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (lo, hi) = self.learning_rate;
        Ok((0..budget)
            .map(|_| {
                let mut c = base.clone();
                c.chi_mpo = *Self::pick(&self.chi_mpo, &mut rng);
                c.k_mpd = *Self::pick(&self.k_mpd, &mut rng);
                c.vqc_layers = *Self::pick(&self.vqc_layers, &mut rng);
                c.gate_kind = *Self::pick(&self.gate_kind, &mut rng);
                c.learning_rate = (rng.gen_range(lo.ln()..=hi.ln())).exp();
                c.batch_size = *Self::pick(&self.batch_size, &mut rng);
                c.measure_layer = *Self::pick(&self.measure_layer, &mut rng);
                c
            })
            .collect())
    }
}

/// One line of the search ledger.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub index: usize,
    pub config: ExperimentConfig,
    pub fold_scores: Vec<Option<f64>>,
    pub objective: Option<f64>,
}

pub fn read_ledger(path: &Path) -> Result<Vec<LedgerEntry>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let f = File::open(path)?;
    let mut out = Vec::new();
    for line in BufReader::new(f).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

fn append_ledger(path: &Path, entry: &LedgerEntry) -> Result<()> {
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    f.lock()?;
    let mut line = serde_json::to_string(entry)?;
    line.push('\n');
    f.write_all(line.as_bytes())?;
    f.flush()?;
    f.unlock()?;
    Ok(())
}

/// Scores `budget` sampled candidates on the training part of the holdout,
/// appending each result to `ledger` as it finishes. Candidates already in
/// the ledger are not retrained. Returns all entries, best first; failed
/// candidates sort last.
pub fn hpo_search(
    space: &SearchSpace,
    base: &ExperimentConfig,
    budget: usize,
    seed: u64,
    data: &PreparedData,
    ledger: &Path,
    mode: ExecMode,
) -> Result<Vec<LedgerEntry>> {
    if budget == 0 {
        return Err(Error::Config("search budget must be at least 1".into()));
    }
    let split = holdout(base, data)?;
    let cands = space.candidates(base, budget, seed)?;
    let mut done = read_ledger(ledger)?;
    for (index, cfg) in cands.into_iter().enumerate() {
        if let Some(prev) = done.iter().find(|e| e.index == index) {
            if prev.config != cfg {
                return Err(Error::Config(format!(
                    "ledger entry {index} was produced by a different search"
                )));
            }
            continue;
        }
        let cv = cv_objective(&cfg, data, &split.train, mode)?;
        let entry = LedgerEntry {
            index,
            config: cfg,
            fold_scores: cv.fold_scores,
            objective: cv.objective,
        };
        append_ledger(ledger, &entry)?;
        done.push(entry);
    }
    done.retain(|e| e.index < budget);
    rank(&mut done);
    Ok(done)
}

pub fn rank(entries: &mut [LedgerEntry]) {
    entries.sort_by(|a, b| match (a.objective, b.objective) {
        (Some(x), Some(y)) => y.total_cmp(&x).then(a.index.cmp(&b.index)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.index.cmp(&b.index),
    });
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl Spread {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        Some(Self {
            mean: values.iter().sum::<f64>() / values.len() as f64,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            n: values.len(),
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FinalReport {
    pub config: ExperimentConfig,
    pub runs: Vec<RunRecord>,
    #[serde(skip)]
    pub params: Vec<ModelParams>,
    /// Test metric over the completed seeds.
    pub test_metric: Option<Spread>,
}

impl FinalReport {
    pub fn summarize(runs: &[RunRecord]) -> Option<Spread> {
        let vals: Vec<f64> = runs
            .iter()
            .filter_map(|r| r.test.as_ref().map(|t| t.metric))
            .collect();
        Spread::of(&vals)
    }
}

/// Trains `n_seeds` times on the full training split with seeds
/// `cfg.seed, cfg.seed + 1, …` and scores each run on the test split, which
/// also provides the per-epoch curves.
pub fn retrain_and_test(
    cfg: &ExperimentConfig,
    data: &PreparedData,
    train_idx: &[usize],
    test_idx: &[usize],
    n_seeds: usize,
    mode: ExecMode,
) -> Result<FinalReport> {
    if train_idx.iter().any(|i| test_idx.binary_search(i).is_ok()) {
        return Err(Error::Config("training and test splits overlap".into()));
    }
    let mut runs = Vec::with_capacity(n_seeds);
    let mut params = Vec::with_capacity(n_seeds);
    for s in 0..n_seeds {
        let mut c = cfg.clone();
        c.seed = cfg.seed.wrapping_add(s as u64);
        let out = train(
            &c,
            data,
            Splits {
                train: train_idx,
                eval: test_idx,
                test: Some(test_idx),
            },
            mode,
        )?;
        runs.push(out.record);
        params.push(out.params);
    }
    let test_metric = FinalReport::summarize(&runs);
    Ok(FinalReport {
        config: cfg.clone(),
        runs,
        params,
        test_metric,
    })
}
