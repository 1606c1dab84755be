//! Train/test holdout and shuffle-split folds.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub eval: Vec<usize>,
}

fn eval_count(n: usize, frac: f64) -> Result<usize> {
    if !(frac > 0.0 && frac < 1.0) {
        return Err(Error::Config(format!(
            "split fraction must lie in (0, 1), got {frac}"
        )));
    }
    let k = ((n as f64) * frac).round() as usize;
    Ok(k.clamp(1, n.saturating_sub(1).max(1)))
}

/// `folds` independent random partitions of `0..n`, each into a training
/// part and an evaluation part of `round(n·eval_frac)` indices.
pub fn shuffle_split(n: usize, folds: usize, eval_frac: f64, seed: u64) -> Result<Vec<Fold>> {
    if n < 5 {
        return Err(Error::Config(format!(
            "shuffle split needs at least 5 samples, got {n}"
        )));
    }
    if folds == 0 {
        return Err(Error::Config("at least one fold is required".into()));
    }
    let k = eval_count(n, eval_frac)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..folds)
        .map(|_| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng);
            let mut eval = idx[..k].to_vec();
            let mut train = idx[k..].to_vec();
            eval.sort_unstable();
            train.sort_unstable();
            Fold { train, eval }
        })
        .collect())
}

/// Holdout stratified by class: `round(frac·n_c)` of each class go to the
/// test side. Both outputs are sorted.
pub fn stratified_holdout(classes: &[u8], frac: f64, seed: u64) -> Result<Fold> {
    if classes.len() < 2 {
        return Err(Error::Config("holdout needs at least two samples".into()));
    }
    if !(frac > 0.0 && frac < 1.0) {
        return Err(Error::Config(format!(
            "test fraction must lie in (0, 1), got {frac}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keys: Vec<u8> = classes.to_vec();
    keys.sort_unstable();
    keys.dedup();
    let mut train = Vec::new();
    let mut test = Vec::new();
    for c in keys {
        let mut idx: Vec<usize> = (0..classes.len()).filter(|&i| classes[i] == c).collect();
        idx.shuffle(&mut rng);
        let k = ((idx.len() as f64) * frac).round() as usize;
        test.extend_from_slice(&idx[..k]);
        train.extend_from_slice(&idx[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    if train.is_empty() || test.is_empty() {
        return Err(Error::Config("holdout left one side empty".into()));
    }
    Ok(Fold { train, eval: test })
}
