//! Discrete priors, observation likelihoods, oracle posterior means and
//! synthetic data from the two-level model `θ ~ H`, `X | θ ~ p(· | θ)`.

use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::seed::{self, rng_from_seed};

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// A prior with finite support: strictly increasing atoms with probability weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPrior", into = "RawPrior")]
pub struct PriorSpec {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPrior {
    atoms: Vec<f64>,
    /// Uniform over the atoms when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
}

impl TryFrom<RawPrior> for PriorSpec {
    type Error = Error;

    fn try_from(raw: RawPrior) -> Result<Self> {
        match raw.weights {
            Some(w) => PriorSpec::new(raw.atoms, w),
            None => PriorSpec::uniform(raw.atoms),
        }
    }
}

impl From<PriorSpec> for RawPrior {
    fn from(p: PriorSpec) -> Self {
        RawPrior {
            atoms: p.atoms,
            weights: Some(p.weights),
        }
    }
}

impl PriorSpec {
    pub fn new(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::config("prior needs at least one atom"));
        }
        if atoms.len() != weights.len() {
            return Err(Error::config(format!(
                "prior has {} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        if let Some(a) = atoms.iter().find(|a| !a.is_finite()) {
            return Err(Error::config(format!("prior atom {a} is not finite")));
        }
        if atoms.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("prior atoms must be strictly increasing"));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::config(format!(
                "prior weight {w} is not a probability"
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::config(format!(
                "prior weights sum to {total}, not 1"
            )));
        }
        Ok(PriorSpec { atoms, weights })
    }

    pub fn uniform(atoms: Vec<f64>) -> Result<Self> {
        let k = atoms.len().max(1) as f64;
        let weights = vec![1.0 / k; atoms.len()];
        PriorSpec::new(atoms, weights)
    }

    pub fn point_mass(atom: f64) -> Result<Self> {
        PriorSpec::new(vec![atom], vec![1.0])
    }

    /// Builds a prior from a fitted mixing distribution, renormalizing the
    /// weights. Zero weights are kept.
    pub(crate) fn from_mixing(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::numeric("mixing weights do not normalize"));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        PriorSpec::new(atoms, weights)
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn min_atom(&self) -> f64 {
        self.atoms[0]
    }

    pub fn max_atom(&self) -> f64 {
        self.atoms[self.atoms.len() - 1]
    }

    pub fn mean(&self) -> f64 {
        self.atoms
            .iter()
            .zip(&self.weights)
            .map(|(a, w)| a * w)
            .sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.atoms
            .iter()
            .zip(&self.weights)
            .map(|(a, w)| w * (a - m) * (a - m))
            .sum()
    }

    /// Checks the prior can be paired with `lik`.
    pub fn validate_for(&self, lik: &LikelihoodModel) -> Result<()> {
        if matches!(lik, LikelihoodModel::Poisson) && self.min_atom() <= 0.0 {
            return Err(Error::config(format!(
                "Poisson model needs positive prior atoms, found {}",
                self.min_atom()
            )));
        }
        Ok(())
    }

    fn sample_atom<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.atoms.len() == 1 {
            return self.atoms[0];
        }
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (a, w) in self.atoms.iter().zip(&self.weights) {
            acc += w;
            if u < acc {
                return *a;
            }
        }
        // u landed in the rounding gap above the last partial sum
        let last = self.weights.iter().rposition(|w| *w > 0.0).unwrap_or(0);
        self.atoms[last]
    }
}

/// The observation model `p(x | θ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLikelihood", into = "RawLikelihood")]
pub enum LikelihoodModel {
    /// `Normal(θ, variance)`.
    Gaussian {
        variance: f64,
    },
    Poisson,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum RawLikelihood {
    Gaussian {
        #[serde(default = "unit_variance")]
        variance: f64,
    },
    Poisson,
}

fn unit_variance() -> f64 {
    1.0
}

impl TryFrom<RawLikelihood> for LikelihoodModel {
    type Error = Error;

    fn try_from(raw: RawLikelihood) -> Result<Self> {
        match raw {
            RawLikelihood::Gaussian { variance } => LikelihoodModel::gaussian(variance),
            RawLikelihood::Poisson => Ok(LikelihoodModel::Poisson),
        }
    }
}

impl From<LikelihoodModel> for RawLikelihood {
    fn from(l: LikelihoodModel) -> Self {
        match l {
            LikelihoodModel::Gaussian { variance } => RawLikelihood::Gaussian { variance },
            LikelihoodModel::Poisson => RawLikelihood::Poisson,
        }
    }
}

impl LikelihoodModel {
    pub fn gaussian(variance: f64) -> Result<Self> {
        if !(variance.is_finite() && variance > 0.0) {
            return Err(Error::config(format!(
                "Gaussian variance must be positive and finite, got {variance}"
            )));
        }
        Ok(LikelihoodModel::Gaussian { variance })
    }

    pub fn name(&self) -> &'static str {
        match self {
            LikelihoodModel::Gaussian { .. } => "gaussian",
            LikelihoodModel::Poisson => "poisson",
        }
    }

    /// Rejects observations outside the sample space of the model.
    pub fn check_observation(&self, x: f64) -> Result<()> {
        match self {
            LikelihoodModel::Gaussian { .. } if x.is_finite() => Ok(()),
            LikelihoodModel::Gaussian { .. } => {
                Err(Error::input(format!("observation {x} is not finite")))
            }
            LikelihoodModel::Poisson => check_count(x),
        }
    }

    /// `log p(x | θ)`; the observation is assumed valid for the model.
    pub fn log_density(&self, x: f64, theta: f64) -> f64 {
        match *self {
            LikelihoodModel::Gaussian { variance } => {
                let d = x - theta;
                -0.5 * (2.0 * std::f64::consts::PI * variance).ln() - d * d / (2.0 * variance)
            }
            LikelihoodModel::Poisson => {
                if x == 0.0 {
                    -theta
                } else {
                    x * theta.ln() - theta - ln_gamma(x + 1.0)
                }
            }
        }
    }

    fn sample<R: rand::Rng + ?Sized>(&self, theta: f64, rng: &mut R) -> f64 {
        match *self {
            LikelihoodModel::Gaussian { variance } => {
                let z: f64 = StandardNormal.sample(rng);
                theta + variance.sqrt() * z
            }
            LikelihoodModel::Poisson => Poisson::new(theta)
                .expect("Poisson rate validated positive")
                .sample(rng),
        }
    }
}

pub(crate) fn check_count(x: f64) -> Result<()> {
    if x.is_finite() && x >= 0.0 && x.fract() == 0.0 {
        Ok(())
    } else {
        Err(Error::input(format!(
            "observation {x} is not a nonnegative integer count"
        )))
    }
}

/// Latent means and their observations, with the seed that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub thetas: Vec<f64>,
    pub xs: Vec<f64>,
    pub seed: u64,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// Bitwise fingerprint of the latent means and observations.
    pub fn checksum(&self) -> u64 {
        seed::checksum(&self.thetas) ^ seed::checksum(&self.xs).rotate_left(1)
    }
}

pub fn sample_dataset(
    prior: &PriorSpec,
    lik: &LikelihoodModel,
    n: usize,
    seed: u64,
) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::config("dataset size must be at least 1"));
    }
    prior.validate_for(lik)?;
    let mut rng = rng_from_seed(seed);
    let mut thetas = Vec::with_capacity(n);
    let mut xs = Vec::with_capacity(n);
    for _ in 0..n {
        let theta = prior.sample_atom(&mut rng);
        xs.push(lik.sample(theta, &mut rng));
        thetas.push(theta);
    }
    Ok(Dataset { thetas, xs, seed })
}

/// Posterior mean `E[θ | X = x]` under `prior`.
///
/// Works in log space with the largest term factored out, so observations far
/// in the Gaussian tail still give a finite answer. Zero-weight atoms are
/// skipped.
pub fn bayes_posterior_mean(prior: &PriorSpec, lik: &LikelihoodModel, x: f64) -> Result<f64> {
    lik.check_observation(x)?;
    let mut max_log = f64::NEG_INFINITY;
    let mut terms = Vec::with_capacity(prior.len());
    for (&a, &w) in prior.atoms.iter().zip(&prior.weights) {
        if w > 0.0 {
            let l = w.ln() + lik.log_density(x, a);
            max_log = max_log.max(l);
            terms.push((a, l));
        }
    }
    if !max_log.is_finite() {
        return Err(Error::numeric(format!(
            "every prior component has zero likelihood at x = {x}"
        )));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for (a, l) in terms {
        let e = (l - max_log).exp();
        num += a * e;
        den += e;
    }
    let mean = num / den;
    if !mean.is_finite() {
        return Err(Error::numeric(format!(
            "posterior mean at x = {x} is {mean}"
        )));
    }
    Ok(mean.clamp(prior.min_atom(), prior.max_atom()))
}

/// Monte Carlo Bayes risk `E[(θ - E[θ | X])²]`, averaging the per-dataset MSE
/// of the oracle posterior mean over `reps` datasets of size `n`.
pub fn bayes_risk_mc(
    prior: &PriorSpec,
    lik: &LikelihoodModel,
    n: usize,
    reps: usize,
    seed: u64,
) -> Result<f64> {
    if reps == 0 {
        return Err(Error::config("bayes_risk_mc needs at least one replicate"));
    }
    let mut total = 0.0;
    for rep in 0..reps {
        let data = sample_dataset(
            prior,
            lik,
            n,
            seed::derive_seed(seed, seed::DOMAIN_DATASET, rep as u64),
        )?;
        let mut sse = 0.0;
        for (&x, &t) in data.xs.iter().zip(&data.thetas) {
            let d = bayes_posterior_mean(prior, lik, x)? - t;
            sse += d * d;
        }
        total += sse / n as f64;
    }
    Ok(total / reps as f64)
}
