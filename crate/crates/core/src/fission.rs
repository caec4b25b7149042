//! Data fission: splitting one observation into a pair of synthetic
//! replicates `(f, g)` whose conditional structure lets `g` act as an unbiased
//! response for `E[θ | f]`.
//!
//! Two constructions are provided:
//!
//! * Gaussian additive noise, `f = x + τZ`, `g = x - Z/τ` with
//!   `Z ~ Normal(0, σ²)`. Given θ, `f` and `g` are independent normals.
//! * Poisson thinning, `Z ~ Binomial(x, 1 - τ)`, `f = Z/(1 - τ)`,
//!   `g = (x - Z)/τ`. Given θ, the two counts are independent Poissons with
//!   rates `θ(1 - τ)` and `θτ`, so both rescaled replicates have mean θ.
//!
//! In both schemes a larger τ moves Fisher information from `f` to `g`.

use rand_distr::{Binomial, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::check_count;
use crate::seed::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FissionScheme {
    GaussianAdditive,
    PoissonThinning,
}

impl FissionScheme {
    pub fn name(&self) -> &'static str {
        match self {
            FissionScheme::GaussianAdditive => "gaussian",
            FissionScheme::PoissonThinning => "poisson",
        }
    }
}

/// Fission scheme with its noise scale τ and, for the Gaussian scheme, the
/// known observation variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FissionConfig {
    tau: f64,
    scheme: FissionScheme,
    sigma2: f64,
}

impl FissionConfig {
    pub fn gaussian(tau: f64, sigma2: f64) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::config(format!(
                "Gaussian fission needs tau > 0, got {tau}"
            )));
        }
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(Error::config(format!(
                "Gaussian fission needs sigma2 > 0, got {sigma2}"
            )));
        }
        Ok(FissionConfig {
            tau,
            scheme: FissionScheme::GaussianAdditive,
            sigma2,
        })
    }

    pub fn poisson(tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::config(format!(
                "Poisson thinning needs tau in (0, 1), got {tau}"
            )));
        }
        Ok(FissionConfig {
            tau,
            scheme: FissionScheme::PoissonThinning,
            sigma2: f64::NAN,
        })
    }

    /// Configures `scheme` so that `g` carries `g_fraction` of the Fisher
    /// information in `x`. `sigma2` is ignored for Poisson thinning.
    pub fn from_info_split(scheme: FissionScheme, g_fraction: f64, sigma2: f64) -> Result<Self> {
        let tau = tau_from_info_split(scheme, g_fraction)?;
        match scheme {
            FissionScheme::GaussianAdditive => FissionConfig::gaussian(tau, sigma2),
            FissionScheme::PoissonThinning => FissionConfig::poisson(tau),
        }
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn scheme(&self) -> FissionScheme {
        self.scheme
    }

    /// Observation variance; `None` for Poisson thinning.
    pub fn sigma2(&self) -> Option<f64> {
        match self.scheme {
            FissionScheme::GaussianAdditive => Some(self.sigma2),
            FissionScheme::PoissonThinning => None,
        }
    }

    /// Share of the Fisher information about θ carried by `g`.
    pub fn g_info_fraction(&self) -> f64 {
        match self.scheme {
            FissionScheme::GaussianAdditive => {
                let t2 = self.tau * self.tau;
                t2 / (1.0 + t2)
            }
            FissionScheme::PoissonThinning => self.tau,
        }
    }

    pub fn check_observation(&self, x: f64) -> Result<()> {
        match self.scheme {
            FissionScheme::GaussianAdditive if x.is_finite() => Ok(()),
            FissionScheme::GaussianAdditive => {
                Err(Error::input(format!("observation {x} is not finite")))
            }
            FissionScheme::PoissonThinning => check_count(x),
        }
    }

    fn split<R: rand::Rng + ?Sized>(&self, x: f64, rng: &mut R) -> FissionedSample {
        match self.scheme {
            FissionScheme::GaussianAdditive => {
                let z: f64 = StandardNormal.sample(rng);
                gaussian_split(x, self.tau, self.sigma2.sqrt() * z)
            }
            FissionScheme::PoissonThinning => {
                let z = sample_binomial(x as u64, 1.0 - self.tau, rng);
                poisson_split(x, self.tau, z as f64)
            }
        }
    }
}

/// One observation and its two fissioned replicates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FissionedSample {
    pub x: f64,
    pub f: f64,
    pub g: f64,
}

impl FissionedSample {
    /// Recovers `x` from `(f, g)`.
    pub fn reconstruct(&self, scheme: FissionScheme, tau: f64) -> f64 {
        match scheme {
            FissionScheme::GaussianAdditive => {
                let t2 = tau * tau;
                (self.f + t2 * self.g) / (1.0 + t2)
            }
            FissionScheme::PoissonThinning => (1.0 - tau) * self.f + tau * self.g,
        }
    }
}

/// Gaussian fission with the noise draw `noise` (already scaled by σ).
pub fn gaussian_split(x: f64, tau: f64, noise: f64) -> FissionedSample {
    FissionedSample {
        x,
        f: x + tau * noise,
        g: x - noise / tau,
    }
}

/// Poisson fission given `kept` of the `x` counts assigned to `f`.
pub fn poisson_split(x: f64, tau: f64, kept: f64) -> FissionedSample {
    FissionedSample {
        x,
        f: kept / (1.0 - tau),
        g: (x - kept) / tau,
    }
}

pub fn fission_gaussian<R: rand::Rng + ?Sized>(
    x: f64,
    tau: f64,
    sigma2: f64,
    rng: &mut R,
) -> Result<FissionedSample> {
    let cfg = FissionConfig::gaussian(tau, sigma2)?;
    cfg.check_observation(x)?;
    Ok(cfg.split(x, rng))
}

pub fn fission_poisson<R: rand::Rng + ?Sized>(
    x: f64,
    tau: f64,
    rng: &mut R,
) -> Result<FissionedSample> {
    let cfg = FissionConfig::poisson(tau)?;
    cfg.check_observation(x)?;
    Ok(cfg.split(x, rng))
}

/// τ for which `g` carries `g_fraction` of the Fisher information.
///
/// Gaussian: `f ~ N(θ, σ²(1+τ²))` and `g ~ N(θ, σ²(1+τ⁻²))`, so `g` holds
/// `τ²/(1+τ²)` of the total `1/σ²`. Poisson: the `g` count has rate `θτ`,
/// so its share is τ itself.
pub fn tau_from_info_split(scheme: FissionScheme, g_fraction: f64) -> Result<f64> {
    if !(g_fraction > 0.0 && g_fraction < 1.0) {
        return Err(Error::input(format!(
            "information fraction {g_fraction} is outside (0,1)"
        )));
    }
    Ok(match scheme {
        FissionScheme::GaussianAdditive => (g_fraction / (1.0 - g_fraction)).sqrt(),
        FissionScheme::PoissonThinning => g_fraction,
    })
}

/// Fissions every observation with one noise stream seeded by `seed`.
///
/// Inputs are validated up front; the error names the first bad index.
pub fn fission_dataset(xs: &[f64], cfg: &FissionConfig, seed: u64) -> Result<Vec<FissionedSample>> {
    for (i, &x) in xs.iter().enumerate() {
        cfg.check_observation(x)
            .map_err(|e| Error::input(format!("observation {i}: {e}")))?;
    }
    let mut rng = rng_from_seed(seed);
    Ok(xs.iter().map(|&x| cfg.split(x, &mut rng)).collect())
}

const INVERSION_MAX_TRIALS: u64 = 64;

/// Binomial draw: sequential CDF inversion for up to 64 trials, the
/// `rand_distr` sampler (BTPE) beyond that.
pub fn sample_binomial<R: rand::Rng + ?Sized>(trials: u64, p: f64, rng: &mut R) -> u64 {
    if trials == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return trials;
    }
    if trials > INVERSION_MAX_TRIALS {
        return Binomial::new(trials, p)
            .expect("p checked in (0,1)")
            .sample(rng);
    }
    let u: f64 = rng.random();
    let odds = p / (1.0 - p);
    let mut pmf = (1.0 - p).powi(trials as i32);
    let mut cdf = pmf;
    let mut k = 0;
    while u >= cdf && k < trials {
        pmf *= (trials - k) as f64 / (k + 1) as f64 * odds;
        k += 1;
        cdf += pmf;
    }
    k
}
