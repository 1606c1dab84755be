//! Experiment configuration.

use serde::{Deserialize, Serialize};

use crate::encoding::EncodingConfig;
use crate::error::{Error, Result};
use crate::qsim::{CircuitPlan, GateKind, Readout, N_QUBITS};

/// Regression target column.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    A,
    Mu,
    UInf,
}

impl Target {
    pub const ALL: [Target; 3] = [Target::A, Target::Mu, Target::UInf];

    pub fn column(self) -> usize {
        match self {
            Target::A => 0,
            Target::Mu => 1,
            Target::UInf => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Target::A => "a",
            Target::Mu => "mu",
            Target::UInf => "u_inf",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Classify,
    RegressMulti,
    RegressUni(Target),
}

impl Task {
    pub fn targets(self) -> Vec<Target> {
        match self {
            Task::Classify => Vec::new(),
            Task::RegressMulti => Target::ALL.to_vec(),
            Task::RegressUni(t) => vec![t],
        }
    }

    pub fn is_classification(self) -> bool {
        self == Task::Classify
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadoutMode {
    ClassProbsLastQubit,
    ExpvalZ,
    ExpvalZz,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Task,
    /// Internal bond dimension of the trainable MPO.
    pub chi_mpo: usize,
    /// Disentangler layers used to load the encoded state; `null` loads the
    /// exact state.
    pub k_mpd: Option<usize>,
    pub vqc_layers: usize,
    pub gate_kind: GateKind,
    pub measure_layer: bool,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Drives parameter initialisation and batch shuffling.
    pub seed: u64,
    pub readout: ReadoutMode,
    #[serde(default = "default_huber_delta")]
    pub huber_delta: f64,
    #[serde(default)]
    pub encoding: EncodingConfig,
    /// Noise added to the identity-initialised MPO cores.
    #[serde(default = "default_sigma")]
    pub mpo_init_sigma: f64,
    /// Standard deviation of the Gaussian circuit-parameter initialisation.
    #[serde(default = "default_sigma")]
    pub vqc_init_sigma: f64,
    /// Fixes the test holdout and the cross-validation folds.
    #[serde(default)]
    pub data_seed: u64,
    #[serde(default = "default_fraction")]
    pub test_fraction: f64,
    #[serde(default = "default_folds")]
    pub cv_folds: usize,
    #[serde(default = "default_fraction")]
    pub cv_eval_fraction: f64,
}

fn default_huber_delta() -> f64 {
    1.0
}
fn default_sigma() -> f64 {
    0.1
}
fn default_fraction() -> f64 {
    0.2
}
fn default_folds() -> usize {
    5
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            task: Task::Classify,
            chi_mpo: 2,
            k_mpd: Some(1),
            vqc_layers: 4,
            gate_kind: GateKind::Su4,
            measure_layer: false,
            learning_rate: 0.01,
            batch_size: 128,
            epochs: 30,
            seed: 0,
            readout: ReadoutMode::ClassProbsLastQubit,
            huber_delta: 1.0,
            encoding: EncodingConfig::default(),
            mpo_init_sigma: 0.1,
            vqc_init_sigma: 0.1,
            data_seed: 0,
            test_fraction: 0.2,
            cv_folds: 5,
            cv_eval_fraction: 0.2,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.chi_mpo == 0 {
            return bad("chi_mpo must be at least 1".into());
        }
        if self.k_mpd == Some(0) {
            return bad("k_mpd must be at least 1 (or null for the exact state)".into());
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning_rate must be finite and non-negative, got {}",
                self.learning_rate
            ));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if !(self.huber_delta > 0.0) {
            return bad("huber_delta must be positive".into());
        }
        if !(self.mpo_init_sigma >= 0.0 && self.vqc_init_sigma >= 0.0) {
            return bad("initialisation spreads must be non-negative".into());
        }
        for (name, f) in [
            ("test_fraction", self.test_fraction),
            ("cv_eval_fraction", self.cv_eval_fraction),
        ] {
            if !(f > 0.0 && f < 1.0) {
                return bad(format!("{name} must lie in (0, 1), got {f}"));
            }
        }
        if self.cv_folds == 0 {
            return bad("cv_folds must be at least 1".into());
        }
        if self.encoding.chi_out == 0 || self.encoding.mps6_max_bond == 0 {
            return bad("encoding bond caps must be at least 1".into());
        }
        match (self.task, self.readout) {
            (Task::Classify, ReadoutMode::ClassProbsLastQubit) => {}
            (Task::Classify, _) => return bad("classification reads class probabilities".into()),
            (_, ReadoutMode::ClassProbsLastQubit) => {
                return bad("regression reads Z or ZZ expectation values".into())
            }
            _ => {}
        }
        self.circuit_plan()?.validate()
    }

    /// Readout qubits: the last qubit for one output, qubits 5–7 for three
    /// Z outputs, and pairs (2,3), (4,5), (6,7) for three ZZ outputs.
    pub fn readout_spec(&self) -> Result<Readout> {
        let n = self.task.targets().len();
        let last = N_QUBITS - 1;
        Ok(match (self.readout, n) {
            (ReadoutMode::ClassProbsLastQubit, _) => Readout::ClassProbsLastQubit,
            (ReadoutMode::ExpvalZ, 1) => Readout::ExpvalZ(vec![last]),
            (ReadoutMode::ExpvalZ, 3) => Readout::ExpvalZ(vec![last - 2, last - 1, last]),
            (ReadoutMode::ExpvalZz, 1) => Readout::ExpvalZz(vec![(last - 1, last)]),
            (ReadoutMode::ExpvalZz, 3) => Readout::ExpvalZz(vec![(2, 3), (4, 5), (6, 7)]),
            _ => return Err(Error::Config(format!("no readout for {n} outputs"))),
        })
    }

    pub fn circuit_plan(&self) -> Result<CircuitPlan> {
        Ok(CircuitPlan {
            gate_kind: self.gate_kind,
            layers: self.vqc_layers,
            measure_layer: self.measure_layer,
            readout: self.readout_spec()?,
        })
    }
}
