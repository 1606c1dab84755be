//! Losses, metrics, optimiser, data splits and the training/search loops.

pub mod config;
pub mod hpo;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod run;
pub mod scaler;
pub mod split;

pub use config::{ExperimentConfig, ReadoutMode, Target, Task};
pub use hpo::{
    aggregate_folds, cv_objective, holdout, hpo_search, read_ledger, retrain_and_test, CvResult,
    FinalReport, LedgerEntry, SearchSpace, Spread,
};
pub use metrics::{cross_entropy, f1_score, huber_loss, r2_score, Confusion};
pub use model::{Forward, ModelParams, PreparedData, Supervision};
pub use optim::{adam_step, AdamState};
pub use run::{evaluate, train, EpochRecord, Metrics, RunOutcome, RunRecord, RunStatus, Splits};
pub use scaler::TargetScaler;
pub use split::{shuffle_split, stratified_holdout, Fold};
