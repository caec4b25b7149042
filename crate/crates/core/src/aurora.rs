//! Empirical Bayes by regression on fissioned replicates.
//!
//! Each repetition fissions every observation into `(f, g)`, fits a
//! nondecreasing mean function of `g` on `f`, and evaluates it at each `f`.
//! The per-observation estimates are averaged over repetitions.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fission::{fission_dataset, FissionConfig, FissionedSample};
use crate::isotonic::{fit_isotonic_unweighted, MonotoneStepFn};
use crate::seed::{derive_seed, DOMAIN_FISSION};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuroraConfig {
    pub fission: FissionConfig,
    pub n_fission_reps: usize,
    pub base_seed: u64,
}

impl AuroraConfig {
    pub fn new(fission: FissionConfig, n_fission_reps: usize, base_seed: u64) -> Result<Self> {
        if n_fission_reps == 0 {
            return Err(Error::config("at least one fission repetition is required"));
        }
        Ok(AuroraConfig {
            fission,
            n_fission_reps,
            base_seed,
        })
    }

    /// Noise seed of fission repetition `rep`.
    pub fn rep_seed(&self, rep: usize) -> u64 {
        derive_seed(self.base_seed, DOMAIN_FISSION, rep as u64)
    }
}

/// Per-observation estimates of the latent means.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateVector(Vec<f64>);

impl EstimateVector {
    pub fn new(estimates: Vec<f64>) -> Result<Self> {
        if let Some(i) = estimates.iter().position(|v| !v.is_finite()) {
            return Err(Error::numeric(format!(
                "estimate {i} is not finite ({})",
                estimates[i]
            )));
        }
        Ok(EstimateVector(estimates))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Everything produced by one fission repetition.
#[derive(Debug, Clone)]
pub struct AuroraRep {
    pub samples: Vec<FissionedSample>,
    pub fit: MonotoneStepFn,
    /// `fit` evaluated at each sample's `f`.
    pub estimates: Vec<f64>,
}

/// A single fission-and-regress pass with noise seed `seed`.
pub fn aurora_rep(xs: &[f64], fission: &FissionConfig, seed: u64) -> Result<AuroraRep> {
    if xs.len() < 2 {
        return Err(Error::input(format!(
            "regression on fissioned replicates needs at least 2 observations, got {}",
            xs.len()
        )));
    }
    let samples = fission_dataset(xs, fission, seed)?;
    let f: Vec<f64> = samples.iter().map(|s| s.f).collect();
    let g: Vec<f64> = samples.iter().map(|s| s.g).collect();
    let fit = fit_isotonic_unweighted(&f, &g)?;
    let estimates = f.iter().map(|&v| fit.predict(v)).collect();
    Ok(AuroraRep {
        samples,
        fit,
        estimates,
    })
}

/// Estimates every latent mean by averaging `cfg.n_fission_reps` repetitions.
///
/// Repetitions run in parallel; the average is accumulated in repetition
/// order so the result does not depend on the thread count.
pub fn aurora_estimate(xs: &[f64], cfg: &AuroraConfig) -> Result<EstimateVector> {
    let per_rep: Vec<Vec<f64>> = (0..cfg.n_fission_reps)
        .into_par_iter()
        .map(|r| aurora_rep(xs, &cfg.fission, cfg.rep_seed(r)).map(|rep| rep.estimates))
        .collect::<Result<_>>()?;
    let mut sum = vec![0.0; xs.len()];
    for est in &per_rep {
        for (s, e) in sum.iter_mut().zip(est) {
            *s += e;
        }
    }
    let reps = cfg.n_fission_reps as f64;
    EstimateVector::new(sum.into_iter().map(|s| s / reps).collect())
}

/// Mean squared error of `estimates` against the true latent means.
pub fn mse(estimates: &[f64], thetas: &[f64]) -> Result<f64> {
    if estimates.len() != thetas.len() {
        return Err(Error::input(format!(
            "mse: {} estimates for {} latent means",
            estimates.len(),
            thetas.len()
        )));
    }
    if estimates.is_empty() {
        return Err(Error::input("mse of an empty vector"));
    }
    let sse: f64 = estimates
        .iter()
        .zip(thetas)
        .map(|(e, t)| (e - t) * (e - t))
        .sum();
    Ok(sse / estimates.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian_cfg(reps: usize, seed: u64) -> AuroraConfig {
        let fission = FissionConfig::gaussian(0.4, 1.0).unwrap();
        AuroraConfig::new(fission, reps, seed).unwrap()
    }

    fn noisy_xs(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = rng_from_seed(seed);
        (0..n)
            .map(|i| {
                let z: f64 = StandardNormal.sample(&mut rng);
                (i % 3) as f64 * 3.0 + 1.0 + z
            })
            .collect()
    }

    #[test]
    fn needs_two_points_and_one_rep() {
        let cfg = gaussian_cfg(3, 1);
        assert!(matches!(
            aurora_estimate(&[1.0], &cfg),
            Err(Error::Input(_))
        ));
        assert!(aurora_estimate(&[], &cfg).is_err());
        assert!(AuroraConfig::new(cfg.fission, 0, 1).is_err());
    }

    #[test]
    fn scheme_mismatch_propagates() {
        let cfg = AuroraConfig::new(FissionConfig::poisson(0.3).unwrap(), 2, 1).unwrap();
        assert!(matches!(
            aurora_estimate(&[1.0, 2.5, 3.0], &cfg),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn constant_data_gives_equal_estimates() {
        let xs = vec![2.5; 40];
        let est = aurora_estimate(&xs, &gaussian_cfg(5, 8)).unwrap();
        let first = est.as_slice()[0];
        assert!(est.as_slice().iter().all(|v| *v == first));
    }

    #[test]
    fn constant_data_estimates_center_on_the_constant() {
        // Over many seeds the common estimate is unbiased for the constant.
        let (c, n, seeds) = (2.5, 40, 400);
        let vals: Vec<f64> = (0..seeds)
            .map(|s| {
                aurora_estimate(&vec![c; n], &gaussian_cfg(1, s))
                    .unwrap()
                    .as_slice()[0]
            })
            .collect();
        let m = vals.iter().sum::<f64>() / seeds as f64;
        // g is decreasing in f for constant x, so each fit pools to mean(g),
        // which has variance 1/(τ²n)
        let se = 1.0 / (0.4 * ((n * seeds as usize) as f64).sqrt());
        assert!((m - c).abs() < 5.0 * se, "{m}");
    }

    #[test]
    fn two_reps_average_the_single_reps() {
        let xs = noisy_xs(60, 3);
        let cfg2 = gaussian_cfg(2, 77);
        let both = aurora_estimate(&xs, &cfg2).unwrap();
        let r0 = aurora_rep(&xs, &cfg2.fission, cfg2.rep_seed(0)).unwrap();
        let r1 = aurora_rep(&xs, &cfg2.fission, cfg2.rep_seed(1)).unwrap();
        for i in 0..xs.len() {
            assert_eq!(
                both.as_slice()[i],
                (r0.estimates[i] + r1.estimates[i]) / 2.0
            );
        }
        let cfg1 = gaussian_cfg(1, 77);
        assert_eq!(
            aurora_estimate(&xs, &cfg1).unwrap().as_slice(),
            &r0.estimates[..]
        );
    }

    #[test]
    fn within_rep_estimates_follow_f() {
        let xs = noisy_xs(200, 4);
        let rep = aurora_rep(&xs, &gaussian_cfg(1, 1).fission, 12).unwrap();
        let mut pairs: Vec<(f64, f64)> = rep
            .samples
            .iter()
            .map(|s| s.f)
            .zip(rep.estimates.iter().copied())
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert!(pairs.windows(2).all(|w| w[0].1 <= w[1].1));
    }

    #[test]
    fn estimates_stay_within_level_range() {
        let xs = noisy_xs(150, 5);
        let cfg = gaussian_cfg(6, 19);
        let est = aurora_estimate(&xs, &cfg).unwrap();
        let reps: Vec<_> = (0..6)
            .map(|r| aurora_rep(&xs, &cfg.fission, cfg.rep_seed(r)).unwrap())
            .collect();
        let lo = reps
            .iter()
            .map(|r| r.fit.min_level())
            .fold(f64::INFINITY, f64::min);
        let hi = reps
            .iter()
            .map(|r| r.fit.max_level())
            .fold(f64::NEG_INFINITY, f64::max);
        let g_lo = reps
            .iter()
            .flat_map(|r| r.samples.iter().map(|s| s.g))
            .fold(f64::INFINITY, f64::min);
        let g_hi = reps
            .iter()
            .flat_map(|r| r.samples.iter().map(|s| s.g))
            .fold(f64::NEG_INFINITY, f64::max);
        for v in est.as_slice() {
            assert!(*v >= lo - 1e-12 && *v <= hi + 1e-12);
            assert!(*v >= g_lo && *v <= g_hi);
        }
    }

    #[test]
    fn gaussian_shift_equivariance() {
        let xs = noisy_xs(120, 6);
        let cfg = gaussian_cfg(4, 31);
        let base = aurora_estimate(&xs, &cfg).unwrap();
        let c = 3.75;
        let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
        let moved = aurora_estimate(&shifted, &cfg).unwrap();
        for (a, b) in base.as_slice().iter().zip(moved.as_slice()) {
            assert!((b - a - c).abs() < 1e-9, "{a} {b}");
        }
    }

    #[test]
    fn deterministic_output() {
        let xs = noisy_xs(100, 7);
        let cfg = gaussian_cfg(8, 5);
        let a = aurora_estimate(&xs, &cfg).unwrap();
        let b = aurora_estimate(&xs, &cfg).unwrap();
        let bits =
            |v: &EstimateVector| v.as_slice().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn mse_cases() {
        let t = [1.0, 4.0, 7.0];
        assert_eq!(mse(&t, &t).unwrap(), 0.0);
        assert_eq!(mse(&[2.0, 5.0, 8.0], &t).unwrap(), 1.0);
        assert!(mse(&[1.0], &t).is_err());
        assert!(mse(&[], &[]).is_err());
    }

    #[test]
    fn estimate_vector_rejects_nan() {
        assert!(EstimateVector::new(vec![1.0, f64::NAN]).is_err());
    }
}
