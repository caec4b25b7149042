//! Monte Carlo comparison of estimators on simulated datasets, and the
//! single-dataset bundle behind the replicate scatterplots.

use std::io;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aurora::{aurora_estimate, aurora_rep, mse, AuroraConfig, EstimateVector};
use crate::baselines::{
    fit_npmle, mle_estimate, npmle_estimate, oracle_bayes_estimate, DEFAULT_GRID_SIZE,
    DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use crate::csvio::fmt_f64;
use crate::error::{Error, Result};
use crate::fission::{FissionConfig, FissionScheme, FissionedSample};
use crate::isotonic::{Interpolation, MonotoneStepFn};
use crate::model::{bayes_posterior_mean, sample_dataset, Dataset, LikelihoodModel, PriorSpec};
use crate::seed::{derive_seed, DOMAIN_DATASET, DOMAIN_ESTIMATOR, DOMAIN_FISSION};

/// Information fractions given to `g` in the two standard settings.
pub const SMALL_TAU_SPLIT: f64 = 0.04;
pub const MEDIUM_TAU_SPLIT: f64 = 0.14;

pub const DEFAULT_N: usize = 1000;
pub const DEFAULT_MC_REPS: usize = 100;
pub const DEFAULT_FISSION_REPS: usize = 100;
pub const DEFAULT_SEED: u64 = 20_240_117;

fn default_grid_size() -> usize {
    DEFAULT_GRID_SIZE
}

fn default_max_iter() -> usize {
    DEFAULT_MAX_ITER
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

fn default_fission_reps() -> usize {
    DEFAULT_FISSION_REPS
}

/// One estimator in a comparison, with an optional report label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EstimatorSpec {
    /// `θ̂ = x`.
    Mle {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
    },
    Npmle {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
        #[serde(default = "default_grid_size")]
        grid_size: usize,
        #[serde(default = "default_max_iter")]
        max_iter: usize,
        #[serde(default = "default_tol")]
        tol: f64,
    },
    /// Isotonic regression on fissioned replicates, `g_split` being the share
    /// of Fisher information handed to the response replicate.
    Aurora {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
        g_split: f64,
        #[serde(default = "default_fission_reps")]
        fission_reps: usize,
    },
    OracleBayes {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
    },
}

impl EstimatorSpec {
    pub fn npmle() -> Self {
        EstimatorSpec::Npmle {
            label: None,
            grid_size: DEFAULT_GRID_SIZE,
            max_iter: DEFAULT_MAX_ITER,
            tol: DEFAULT_TOL,
        }
    }

    pub fn aurora(g_split: f64) -> Self {
        EstimatorSpec::Aurora {
            label: None,
            g_split,
            fission_reps: DEFAULT_FISSION_REPS,
        }
    }

    pub fn label(&self) -> String {
        match self {
            EstimatorSpec::Mle { label } => label.clone().unwrap_or_else(|| "mle".into()),
            EstimatorSpec::Npmle { label, .. } => label.clone().unwrap_or_else(|| "npmle".into()),
            EstimatorSpec::Aurora { label, g_split, .. } => label
                .clone()
                .unwrap_or_else(|| format!("aurora_g{g_split}")),
            EstimatorSpec::OracleBayes { label } => {
                label.clone().unwrap_or_else(|| "oracle_bayes".into())
            }
        }
    }

    fn validate(&self, lik: &LikelihoodModel) -> Result<()> {
        match *self {
            EstimatorSpec::Npmle { grid_size, tol, .. } => {
                if grid_size < 2 {
                    return Err(Error::config("npmle grid_size must be at least 2"));
                }
                if tol.is_nan() || tol < 0.0 {
                    return Err(Error::config("npmle tol must be nonnegative"));
                }
            }
            EstimatorSpec::Aurora {
                g_split,
                fission_reps,
                ..
            } => {
                fission_for(lik, g_split).map_err(|e| Error::config(e.to_string()))?;
                if fission_reps == 0 {
                    return Err(Error::config("aurora fission_reps must be at least 1"));
                }
            }
            EstimatorSpec::Mle { .. } | EstimatorSpec::OracleBayes { .. } => {}
        }
        Ok(())
    }

    /// Runs on one dataset. Returns the estimates and whether any inner
    /// iteration converged (always true for closed-form estimators).
    fn run(
        &self,
        data: &Dataset,
        prior: &PriorSpec,
        lik: &LikelihoodModel,
        seed: u64,
    ) -> Result<(EstimateVector, bool)> {
        Ok(match *self {
            EstimatorSpec::Mle { .. } => (mle_estimate(&data.xs), true),
            EstimatorSpec::OracleBayes { .. } => {
                (oracle_bayes_estimate(&data.xs, prior, lik)?, true)
            }
            EstimatorSpec::Npmle {
                grid_size,
                max_iter,
                tol,
                ..
            } => {
                let fit = fit_npmle(&data.xs, lik, grid_size, max_iter, tol)?;
                (npmle_estimate(&data.xs, &fit, lik)?, fit.converged)
            }
            EstimatorSpec::Aurora {
                g_split,
                fission_reps,
                ..
            } => {
                let cfg = AuroraConfig::new(fission_for(lik, g_split)?, fission_reps, seed)?;
                (aurora_estimate(&data.xs, &cfg)?, true)
            }
        })
    }
}

/// The fission scheme that matches `lik`, tuned to hand `g_split` of the
/// information to `g`.
pub fn fission_for(lik: &LikelihoodModel, g_split: f64) -> Result<FissionConfig> {
    match *lik {
        LikelihoodModel::Gaussian { variance } => {
            FissionConfig::from_info_split(FissionScheme::GaussianAdditive, g_split, variance)
        }
        LikelihoodModel::Poisson => {
            FissionConfig::from_info_split(FissionScheme::PoissonThinning, g_split, f64::NAN)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub prior: PriorSpec,
    pub likelihood: LikelihoodModel,
    pub n: usize,
    pub mc_reps: usize,
    pub estimators: Vec<EstimatorSpec>,
    pub base_seed: u64,
}

impl ExperimentConfig {
    /// Three-point prior on {1, 4, 7}, n = 1000, 100 replicates, and the five
    /// estimators MLE, NPMLE, Aurora at both splits, oracle Bayes.
    pub fn standard(likelihood: LikelihoodModel) -> Self {
        ExperimentConfig {
            prior: PriorSpec::uniform(vec![1.0, 4.0, 7.0]).expect("valid prior"),
            likelihood,
            n: DEFAULT_N,
            mc_reps: DEFAULT_MC_REPS,
            estimators: default_estimators(),
            base_seed: DEFAULT_SEED,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::config(format!(
                "n must be at least 2, got {}",
                self.n
            )));
        }
        if self.mc_reps == 0 {
            return Err(Error::config("mc_reps must be at least 1"));
        }
        if self.estimators.is_empty() {
            return Err(Error::config("no estimators configured"));
        }
        self.prior.validate_for(&self.likelihood)?;
        let mut labels = Vec::new();
        for est in &self.estimators {
            est.validate(&self.likelihood)?;
            let label = est.label();
            if labels.contains(&label) {
                return Err(Error::config(format!(
                    "duplicate estimator label {label:?}"
                )));
            }
            labels.push(label);
        }
        Ok(())
    }

    pub fn dataset_seed(&self, rep: usize) -> u64 {
        derive_seed(self.base_seed, DOMAIN_DATASET, rep as u64)
    }
}

pub fn default_estimators() -> Vec<EstimatorSpec> {
    vec![
        EstimatorSpec::Mle { label: None },
        EstimatorSpec::npmle(),
        EstimatorSpec::aurora(SMALL_TAU_SPLIT),
        EstimatorSpec::aurora(MEDIUM_TAU_SPLIT),
        EstimatorSpec::OracleBayes { label: None },
    ]
}

/// Outcome of one Monte Carlo replicate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepRecord {
    pub rep: usize,
    pub seed: u64,
    /// Fingerprint of the dataset every estimator in this replicate saw.
    pub dataset_checksum: u64,
    /// One entry per estimator, in configuration order.
    pub mse: Vec<f64>,
    pub converged: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorSummary {
    pub label: String,
    pub mean_mse: f64,
    /// Sample standard deviation of `per_rep_mse` over the square root of its length.
    pub se_mse: f64,
    pub per_rep_mse: Vec<f64>,
    /// Replicates where an iterative fit stopped at its iteration cap.
    pub non_converged_reps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub config: ExperimentConfig,
    pub estimators: Vec<EstimatorSummary>,
    pub reps: Vec<RepRecord>,
    pub wall_clock_secs: f64,
}

impl SimulationReport {
    pub fn summary(&self, label: &str) -> Option<&EstimatorSummary> {
        self.estimators.iter().find(|s| s.label == label)
    }
}

/// Mean and standard error of a sample.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Runs every estimator on `mc_reps` fresh datasets and aggregates the MSEs.
///
/// Replicates run in parallel on the current rayon pool and are reduced in
/// replicate order, so the numbers do not depend on the thread count.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<SimulationReport> {
    cfg.validate()?;
    let start = Instant::now();
    let reps: Vec<RepRecord> = (0..cfg.mc_reps)
        .into_par_iter()
        .map(|rep| {
            let seed = cfg.dataset_seed(rep);
            run_rep(cfg, rep, seed).map_err(|e| Error::Replicate {
                rep,
                seed,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;

    let estimators = cfg
        .estimators
        .iter()
        .enumerate()
        .map(|(k, est)| {
            let per_rep_mse: Vec<f64> = reps.iter().map(|r| r.mse[k]).collect();
            let (mean_mse, se_mse) = mean_and_se(&per_rep_mse);
            EstimatorSummary {
                label: est.label(),
                mean_mse,
                se_mse,
                per_rep_mse,
                non_converged_reps: reps.iter().filter(|r| !r.converged[k]).count(),
            }
        })
        .collect();

    Ok(SimulationReport {
        config: cfg.clone(),
        estimators,
        reps,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    })
}

fn run_rep(cfg: &ExperimentConfig, rep: usize, seed: u64) -> Result<RepRecord> {
    let data = sample_dataset(&cfg.prior, &cfg.likelihood, cfg.n, seed)?;
    let dataset_checksum = data.checksum();
    let mut mses = Vec::with_capacity(cfg.estimators.len());
    let mut converged = Vec::with_capacity(cfg.estimators.len());
    for (k, est) in cfg.estimators.iter().enumerate() {
        let est_seed = derive_seed(seed, DOMAIN_ESTIMATOR, k as u64);
        let (estimates, ok) = est.run(&data, &cfg.prior, &cfg.likelihood, est_seed)?;
        mses.push(mse(estimates.as_slice(), &data.thetas)?);
        converged.push(ok);
    }
    debug_assert_eq!(dataset_checksum, data.checksum());
    Ok(RepRecord {
        rep,
        seed,
        dataset_checksum,
        mse: mses,
        converged,
    })
}

pub const TABLE_HEADER: [&str; 7] = [
    "estimator",
    "likelihood",
    "mean_mse",
    "se_mse",
    "n",
    "mc_reps",
    "seed",
];

/// Writes one row per estimator per report, after a single header.
pub fn write_table_csv<W: io::Write>(reports: &[SimulationReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::numeric(format!("writing table: {e}"));
    w.write_record(TABLE_HEADER).map_err(err)?;
    for r in reports {
        for s in &r.estimators {
            w.write_record([
                s.label.clone(),
                r.config.likelihood.name().to_string(),
                fmt_f64(s.mean_mse),
                fmt_f64(s.se_mse),
                r.config.n.to_string(),
                r.config.mc_reps.to_string(),
                r.config.base_seed.to_string(),
            ])
            .map_err(err)?;
        }
    }
    w.flush()
        .map_err(|e| Error::numeric(format!("writing table: {e}")))
}

/// `E[θ | f = t]`, the regression function that `g` is unbiased for.
///
/// Gaussian fission gives `f | θ ~ N(θ, σ²(1+τ²))`, so this is the posterior
/// mean under that inflated variance. Poisson thinning gives
/// `(1-τ)f | θ ~ Poisson(θ(1-τ))`, handled by rescaling the prior atoms.
pub fn true_conditional_mean(prior: &PriorSpec, fission: &FissionConfig, t: f64) -> Result<f64> {
    let tau = fission.tau();
    let at = |e: Error| Error::numeric(format!("true mean curve at t = {t}: {e}"));
    match fission.scheme() {
        FissionScheme::GaussianAdditive => {
            let sigma2 = fission.sigma2().expect("gaussian scheme has a variance");
            let lik = LikelihoodModel::gaussian(sigma2 * (1.0 + tau * tau))?;
            bayes_posterior_mean(prior, &lik, t).map_err(at)
        }
        FissionScheme::PoissonThinning => {
            let keep = 1.0 - tau;
            let z = t * keep;
            let zr = z.round();
            if zr < 0.0 || (z - zr).abs() > 1e-6 * zr.max(1.0) {
                return Err(Error::input(format!(
                    "t = {t} is not a thinned count scaled by 1/(1-tau)"
                )));
            }
            let thinned = PriorSpec::new(
                prior.atoms().iter().map(|a| a * keep).collect(),
                prior.weights().to_vec(),
            )?;
            Ok(bayes_posterior_mean(&thinned, &LikelihoodModel::Poisson, zr).map_err(at)? / keep)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FigureOptions {
    /// Points on the Gaussian curve grid. Poisson curves use every attainable
    /// `f` up to the largest observed.
    pub grid_points: usize,
    pub interpolation: Interpolation,
}

impl Default for FigureOptions {
    fn default() -> Self {
        FigureOptions {
            grid_points: 201,
            interpolation: Interpolation::Step,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub t: f64,
    pub true_mean: f64,
    pub fitted_mean: f64,
}

#[derive(Debug, Clone)]
pub struct FigureData {
    pub fission: FissionConfig,
    pub dataset: Dataset,
    pub samples: Vec<FissionedSample>,
    pub fit: MonotoneStepFn,
    pub curve: Vec<CurvePoint>,
}

impl FigureData {
    pub fn write_scatter_csv<W: io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::numeric(format!("writing scatter: {e}"));
        w.write_record(["f", "g"]).map_err(err)?;
        for s in &self.samples {
            w.write_record([fmt_f64(s.f), fmt_f64(s.g)]).map_err(err)?;
        }
        w.flush()
            .map_err(|e| Error::numeric(format!("writing scatter: {e}")))
    }

    pub fn write_curve_csv<W: io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::numeric(format!("writing curve: {e}"));
        w.write_record(["t", "true_mean", "fitted_mean"])
            .map_err(err)?;
        for p in &self.curve {
            w.write_record([fmt_f64(p.t), fmt_f64(p.true_mean), fmt_f64(p.fitted_mean)])
                .map_err(err)?;
        }
        w.flush()
            .map_err(|e| Error::numeric(format!("writing curve: {e}")))
    }
}

pub fn export_figure_data(
    cfg: &ExperimentConfig,
    g_fraction: f64,
    seed: u64,
) -> Result<FigureData> {
    export_figure_data_with(cfg, g_fraction, seed, &FigureOptions::default())
}

/// Simulates one dataset, fissions it once, fits the isotonic mean function
/// and tabulates it against the true regression function.
pub fn export_figure_data_with(
    cfg: &ExperimentConfig,
    g_fraction: f64,
    seed: u64,
    opts: &FigureOptions,
) -> Result<FigureData> {
    let fission = fission_for(&cfg.likelihood, g_fraction)?;
    let mut cfg = cfg.clone();
    cfg.base_seed = seed;
    cfg.validate()?;
    if opts.grid_points < 2 {
        return Err(Error::config("figure grid needs at least 2 points"));
    }
    let dataset = sample_dataset(&cfg.prior, &cfg.likelihood, cfg.n, cfg.dataset_seed(0))?;
    let rep = aurora_rep(&dataset.xs, &fission, derive_seed(seed, DOMAIN_FISSION, 0))?;

    let f_lo = rep
        .samples
        .iter()
        .map(|s| s.f)
        .fold(f64::INFINITY, f64::min);
    let f_hi = rep
        .samples
        .iter()
        .map(|s| s.f)
        .fold(f64::NEG_INFINITY, f64::max);
    let ts: Vec<f64> = match fission.scheme() {
        FissionScheme::GaussianAdditive => {
            let m = opts.grid_points;
            (0..m)
                .map(|i| f_lo + (f_hi - f_lo) * i as f64 / (m - 1) as f64)
                .collect()
        }
        FissionScheme::PoissonThinning => {
            let keep = 1.0 - fission.tau();
            let z_max = (f_hi * keep).round() as u64;
            (0..=z_max).map(|z| z as f64 / keep).collect()
        }
    };
    let curve = ts
        .into_iter()
        .map(|t| {
            Ok(CurvePoint {
                t,
                true_mean: true_conditional_mean(&cfg.prior, &fission, t)?,
                fitted_mean: rep.fit.predict_with(t, opts.interpolation),
            })
        })
        .collect::<Result<_>>()?;

    Ok(FigureData {
        fission,
        dataset,
        samples: rep.samples,
        fit: rep.fit,
        curve,
    })
}
