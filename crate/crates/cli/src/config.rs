//! Config files read by the subcommands.

use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use hqtn::aero::{GridSpec, StructuralConstants};
use hqtn::train::{ExperimentConfig, SearchSpace};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatagenConfig {
    pub grid: GridSpec,
    pub consts: StructuralConstants,
    pub t_final: f64,
    pub n_samples: usize,
    pub seed: u64,
}

impl Default for DatagenConfig {
    fn default() -> Self {
        Self {
            grid: GridSpec::default(),
            consts: StructuralConstants::default(),
            t_final: 0.5,
            n_samples: 201,
            seed: 0,
        }
    }
}

impl DatagenConfig {
    pub fn validate(&self) -> CliResult<()> {
        self.consts.validate()?;
        if !(self.t_final > 0.0) || self.n_samples < 2 {
            return Err(CliError::Validation(
                "t_final must be positive and n_samples at least 2".into(),
            ));
        }
        for (name, ax) in [
            ("a", &self.grid.a),
            ("mu", &self.grid.mu),
            ("u_inf", &self.grid.u_inf),
        ] {
            if ax.count == 0 || !(ax.max >= ax.min) {
                return Err(CliError::Validation(format!(
                    "grid axis {name} is empty or reversed"
                )));
            }
        }
        Ok(())
    }
}

/// Config for `train`, `hpo`, `eval` and `report`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: ExperimentConfig,
    /// Independent trainings with seeds `experiment.seed + i`.
    #[serde(default = "one")]
    pub n_seeds: usize,
    #[serde(default)]
    pub search: SearchSpace,
    /// Seed of the candidate sampler.
    #[serde(default)]
    pub search_seed: u64,
}

fn one() -> usize {
    1
}

impl RunConfig {
    pub fn validate(&self) -> CliResult<()> {
        self.experiment.validate()?;
        self.search.validate()?;
        if self.n_seeds == 0 {
            return Err(CliError::Validation("n_seeds must be at least 1".into()));
        }
        Ok(())
    }
}

pub fn load<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))
}
