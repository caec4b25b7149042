//! TOML experiment files.
//!
//! ```toml
//! seed = 20240117
//! n = 1000
//! mc_reps = 100
//!
//! [prior]
//! atoms = [1.0, 4.0, 7.0]      # weights default to uniform
//!
//! [[likelihoods]]
//! kind = "gaussian"
//! variance = 1.0
//!
//! [[likelihoods]]
//! kind = "poisson"
//!
//! [[estimators]]
//! kind = "aurora"
//! g_split = 0.14
//! fission_reps = 100
//!
//! [figure]
//! grid_points = 201
//! interpolation = "step"
//! ```
//!
//! Every key is optional; omitted keys take the default simulation
//! settings (both likelihoods, all five estimators).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{
    default_estimators, EstimatorSpec, ExperimentConfig, FigureOptions, DEFAULT_MC_REPS, DEFAULT_N,
    DEFAULT_SEED,
};
use crate::isotonic::Interpolation;
use crate::model::{LikelihoodModel, PriorSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_mc_reps")]
    pub mc_reps: usize,
    #[serde(default = "default_prior")]
    pub prior: PriorSpec,
    #[serde(default = "default_likelihoods")]
    pub likelihoods: Vec<LikelihoodModel>,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<EstimatorSpec>,
    #[serde(default)]
    pub figure: FigureSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FigureSection {
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    #[serde(default)]
    pub interpolation: Interpolation,
}

impl Default for FigureSection {
    fn default() -> Self {
        let d = FigureOptions::default();
        FigureSection {
            grid_points: d.grid_points,
            interpolation: d.interpolation,
        }
    }
}

impl From<FigureSection> for FigureOptions {
    fn from(s: FigureSection) -> Self {
        FigureOptions {
            grid_points: s.grid_points,
            interpolation: s.interpolation,
        }
    }
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_n() -> usize {
    DEFAULT_N
}

fn default_mc_reps() -> usize {
    DEFAULT_MC_REPS
}

fn default_grid_points() -> usize {
    FigureOptions::default().grid_points
}

fn default_prior() -> PriorSpec {
    PriorSpec::uniform(vec![1.0, 4.0, 7.0]).expect("valid prior")
}

fn default_likelihoods() -> Vec<LikelihoodModel> {
    vec![
        LikelihoodModel::Gaussian { variance: 1.0 },
        LikelihoodModel::Poisson,
    ]
}

impl Default for ExperimentFile {
    fn default() -> Self {
        ExperimentFile {
            seed: DEFAULT_SEED,
            n: DEFAULT_N,
            mc_reps: DEFAULT_MC_REPS,
            prior: default_prior(),
            likelihoods: default_likelihoods(),
            estimators: default_estimators(),
            figure: FigureSection::default(),
        }
    }
}

/// Command-line values that replace file values when present.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub mc_reps: Option<usize>,
}

impl ExperimentFile {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ExperimentFile =
            toml::from_str(text).map_err(|e| Error::config(e.message().to_string()))?;
        file.experiments()?;
        Ok(file)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        ExperimentFile::from_toml_str(&text)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("experiment file serializes")
    }

    pub fn apply(&mut self, ov: &Overrides) {
        if let Some(s) = ov.seed {
            self.seed = s;
        }
        if let Some(m) = ov.mc_reps {
            self.mc_reps = m;
        }
    }

    /// One validated experiment per configured likelihood.
    pub fn experiments(&self) -> Result<Vec<ExperimentConfig>> {
        if self.likelihoods.is_empty() {
            return Err(Error::config("no likelihoods configured"));
        }
        if self.figure.grid_points < 2 {
            return Err(Error::config("figure.grid_points must be at least 2"));
        }
        self.likelihoods
            .iter()
            .map(|lik| {
                let cfg = ExperimentConfig {
                    prior: self.prior.clone(),
                    likelihood: *lik,
                    n: self.n,
                    mc_reps: self.mc_reps,
                    estimators: self.estimators.clone(),
                    base_seed: self.seed,
                };
                cfg.validate()?;
                Ok(cfg)
            })
            .collect()
    }
}
