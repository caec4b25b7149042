//! Empirical Bayes estimation from a single observation per unit.
//!
//! Each observation is split by data fission into two synthetic replicates;
//! regressing one replicate on the other with isotonic regression estimates
//! the posterior mean function without knowing the prior. The crate also
//! carries the comparison estimators (MLE, grid NPMLE, oracle Bayes) and a
//! reproducible Monte Carlo harness.

pub mod aurora;
pub mod baselines;
pub mod config;
pub mod csvio;
pub mod error;
pub mod fission;
pub mod harness;
pub mod isotonic;
pub mod model;
pub mod seed;

pub use aurora::{aurora_estimate, mse, AuroraConfig, EstimateVector};
pub use baselines::{fit_npmle, mle_estimate, npmle_estimate, oracle_bayes_estimate, NpmleFit};
pub use config::{ExperimentFile, Overrides};
pub use error::{Error, Result};
pub use fission::{
    fission_dataset, fission_gaussian, fission_poisson, tau_from_info_split, FissionConfig,
    FissionScheme, FissionedSample,
};
pub use harness::{
    export_figure_data, run_experiment, EstimatorSpec, ExperimentConfig, FigureData,
    SimulationReport,
};
pub use isotonic::{fit_isotonic, Interpolation, MonotoneStepFn};
pub use model::{
    bayes_posterior_mean, bayes_risk_mc, sample_dataset, Dataset, LikelihoodModel, PriorSpec,
};
