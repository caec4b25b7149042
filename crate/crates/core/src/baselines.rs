//! Comparison estimators: the identity (MLE), the oracle posterior mean under
//! the true prior, and a grid NPMLE of the prior fit by EM.

use std::io;

use crate::aurora::EstimateVector;
use crate::csvio::fmt_f64;
use crate::error::{Error, Result};
use crate::model::{bayes_posterior_mean, LikelihoodModel, PriorSpec};

pub const DEFAULT_GRID_SIZE: usize = 300;
pub const DEFAULT_MAX_ITER: usize = 2000;
pub const DEFAULT_TOL: f64 = 1e-8;

/// Lowest grid point for the Poisson rate.
const POISSON_GRID_FLOOR: f64 = 0.01;

pub fn mle_estimate(xs: &[f64]) -> EstimateVector {
    EstimateVector::new(xs.to_vec()).expect("observations are finite")
}

/// Posterior mean under the true prior, observation by observation.
pub fn oracle_bayes_estimate(
    xs: &[f64],
    prior: &PriorSpec,
    lik: &LikelihoodModel,
) -> Result<EstimateVector> {
    prior.validate_for(lik)?;
    posterior_means(xs, prior, lik)
}

fn posterior_means(xs: &[f64], prior: &PriorSpec, lik: &LikelihoodModel) -> Result<EstimateVector> {
    let est = xs
        .iter()
        .map(|&x| bayes_posterior_mean(prior, lik, x))
        .collect::<Result<Vec<_>>>()?;
    EstimateVector::new(est)
}

/// A fitted mixing distribution on a fixed grid.
#[derive(Debug, Clone, PartialEq)]
pub struct NpmleFit {
    pub grid: Vec<f64>,
    pub weights: Vec<f64>,
    /// Average marginal log-likelihood at `weights`.
    pub loglik: f64,
    pub iterations: usize,
    /// False when `max_iter` was reached before the improvement fell below `tol`.
    pub converged: bool,
    /// Average log-likelihood at the start of every iteration, ending with `loglik`.
    pub trace: Vec<f64>,
}

impl NpmleFit {
    pub fn prior(&self) -> Result<PriorSpec> {
        PriorSpec::from_mixing(self.grid.clone(), self.weights.clone())
    }

    pub fn mean(&self) -> f64 {
        self.grid
            .iter()
            .zip(&self.weights)
            .map(|(g, w)| g * w)
            .sum()
    }

    /// Writes `grid,weight` rows with a header.
    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::numeric(format!("writing npmle fit: {e}"));
        w.write_record(["grid", "weight"]).map_err(err)?;
        for (g, wt) in self.grid.iter().zip(&self.weights) {
            w.write_record([fmt_f64(*g), fmt_f64(*wt)]).map_err(err)?;
        }
        w.flush()
            .map_err(|e| Error::numeric(format!("writing npmle fit: {e}")))
    }
}

/// Equispaced support grid for the mixing distribution.
pub fn npmle_grid(xs: &[f64], lik: &LikelihoodModel, grid_size: usize) -> Result<Vec<f64>> {
    if xs.is_empty() {
        return Err(Error::input("npmle needs at least one observation"));
    }
    if grid_size < 2 {
        return Err(Error::config(format!(
            "npmle grid needs at least 2 points, got {grid_size}"
        )));
    }
    for &x in xs {
        lik.check_observation(x)?;
    }
    let lo_x = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi_x = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = match *lik {
        LikelihoodModel::Gaussian { variance } => {
            if hi_x > lo_x {
                (lo_x, hi_x)
            } else {
                let pad = 3.0 * variance.sqrt();
                (lo_x - pad, hi_x + pad)
            }
        }
        LikelihoodModel::Poisson => {
            let lo = lo_x.max(POISSON_GRID_FLOOR);
            let hi = hi_x + 3.0 * hi_x.sqrt();
            (lo, if hi > lo { hi } else { lo + 1.0 })
        }
    };
    let step = (hi - lo) / (grid_size - 1) as f64;
    let mut grid: Vec<f64> = (0..grid_size).map(|k| lo + step * k as f64).collect();
    grid[grid_size - 1] = hi;
    Ok(grid)
}

/// Kiefer-Wolfowitz NPMLE restricted to [`npmle_grid`], fit by EM from
/// uniform weights.
///
/// Iterates `w_k <- w_k · mean_i[p(x_i|θ_k) / Σ_j w_j p(x_i|θ_j)]` until the
/// average log-likelihood gains less than `tol` in one step or `max_iter`
/// steps have run. Repeated observations are collapsed first.
pub fn fit_npmle(
    xs: &[f64],
    lik: &LikelihoodModel,
    grid_size: usize,
    max_iter: usize,
    tol: f64,
) -> Result<NpmleFit> {
    let grid = npmle_grid(xs, lik, grid_size)?;
    let k = grid.len();

    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct: Vec<(f64, f64)> = Vec::new();
    for x in sorted {
        match distinct.last_mut() {
            Some((v, c)) if *v == x => *c += 1.0,
            _ => distinct.push((x, 1.0)),
        }
    }
    let n = xs.len() as f64;

    // Row j holds p(x_j | θ_k) / max_k p(x_j | θ_k); row_log_max keeps the scale.
    let mut lmat = vec![0.0; distinct.len() * k];
    let mut row_log_max = Vec::with_capacity(distinct.len());
    for (j, &(x, _)) in distinct.iter().enumerate() {
        let row = &mut lmat[j * k..(j + 1) * k];
        for (r, &t) in row.iter_mut().zip(&grid) {
            *r = lik.log_density(x, t);
        }
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !m.is_finite() {
            return Err(Error::numeric(format!(
                "no grid point supports observation {x}"
            )));
        }
        for r in row.iter_mut() {
            *r = (*r - m).exp();
        }
        row_log_max.push(m);
    }
    let const_term: f64 = distinct
        .iter()
        .zip(&row_log_max)
        .map(|((_, c), m)| c * m)
        .sum::<f64>()
        / n;

    let mut weights = vec![1.0 / k as f64; k];
    let mut trace = Vec::new();
    let mut denom = vec![0.0; distinct.len()];
    let mut accum = vec![0.0; k];
    let mut converged = false;
    let mut iterations = 0;
    loop {
        let mut ll = 0.0;
        for (j, d) in denom.iter_mut().enumerate() {
            let row = &lmat[j * k..(j + 1) * k];
            *d = dot(row, &weights);
            ll += distinct[j].1 * d.ln();
        }
        let ll = ll / n + const_term;
        if !ll.is_finite() {
            return Err(Error::numeric(format!("EM log-likelihood became {ll}")));
        }
        if let Some(prev) = trace.last() {
            if ll - prev < tol {
                trace.push(ll);
                converged = true;
                break;
            }
        }
        trace.push(ll);
        if iterations == max_iter {
            break;
        }

        accum.iter_mut().for_each(|a| *a = 0.0);
        for (j, d) in denom.iter().enumerate() {
            let scale = distinct[j].1 / d;
            let row = &lmat[j * k..(j + 1) * k];
            for (a, l) in accum.iter_mut().zip(row) {
                *a += scale * l;
            }
        }
        for (w, a) in weights.iter_mut().zip(&accum) {
            *w *= a / n;
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        iterations += 1;
    }

    Ok(NpmleFit {
        grid,
        weights,
        loglik: *trace.last().expect("at least one evaluation"),
        iterations,
        converged,
        trace,
    })
}

/// Dot product with four independent partial sums, so the loop vectorizes.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, ra) = a.as_chunks::<4>();
    let (cb, rb) = b.as_chunks::<4>();
    for (x, y) in ca.iter().zip(cb) {
        for i in 0..4 {
            acc[i] += x[i] * y[i];
        }
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Posterior means under the fitted mixing distribution.
pub fn npmle_estimate(xs: &[f64], fit: &NpmleFit, lik: &LikelihoodModel) -> Result<EstimateVector> {
    posterior_means(xs, &fit.prior()?, lik)
}

#[cfg(test)]
mod tests {
    use super::*;

    const UNIT: LikelihoodModel = LikelihoodModel::Gaussian { variance: 1.0 };

    #[test]
    fn mle_is_identity() {
        assert_eq!(mle_estimate(&[1.0, 2.0, 3.0]).as_slice(), &[1.0, 2.0, 3.0]);
        assert!(mle_estimate(&[]).is_empty());
    }

    #[test]
    fn oracle_under_point_mass_is_constant() {
        let p = PriorSpec::point_mass(3.0).unwrap();
        let est = oracle_bayes_estimate(&[-1.0, 0.0, 9.0], &p, &UNIT).unwrap();
        assert_eq!(est.as_slice(), &[3.0, 3.0, 3.0]);
    }

    #[test]
    fn oracle_propagates_invalid_observation() {
        let p = PriorSpec::uniform(vec![1.0, 4.0, 7.0]).unwrap();
        assert!(oracle_bayes_estimate(&[1.0, 0.5], &p, &LikelihoodModel::Poisson).is_err());
    }

    #[test]
    fn grid_rules() {
        let g = npmle_grid(&[2.0, -1.0, 5.0], &UNIT, 7).unwrap();
        assert_eq!(g.first(), Some(&-1.0));
        assert_eq!(g.last(), Some(&5.0));
        assert!((g[1] - g[0] - 1.0).abs() < 1e-12);

        let p = npmle_grid(&[0.0, 4.0, 9.0], &LikelihoodModel::Poisson, 10).unwrap();
        assert_eq!(p[0], 0.01);
        assert_eq!(p[9], 18.0);

        let zeros = npmle_grid(&[0.0, 0.0], &LikelihoodModel::Poisson, 3).unwrap();
        assert!(zeros.windows(2).all(|w| w[0] < w[1]));

        let flat = npmle_grid(&[2.0; 4], &UNIT, 7).unwrap();
        assert_eq!((flat[0], flat[3], flat[6]), (-1.0, 2.0, 5.0));

        assert!(npmle_grid(&[], &UNIT, 10).is_err());
        assert!(npmle_grid(&[1.0], &UNIT, 1).is_err());
        assert!(npmle_grid(&[1.5], &LikelihoodModel::Poisson, 5).is_err());
    }

    #[test]
    fn constant_data_matches_best_single_atom() {
        let c = 2.0;
        let xs = vec![c; 50];
        let fit = fit_npmle(&xs, &UNIT, 7, 5000, 1e-14).unwrap();
        // brute force over single-atom priors on the same grid
        let best = fit
            .grid
            .iter()
            .map(|&t| UNIT.log_density(c, t))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((fit.loglik - best).abs() < 1e-6, "{} vs {best}", fit.loglik);
        let top = fit
            .weights
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(fit.grid[top], c);
    }

    #[test]
    fn em_trace_is_monotone() {
        let xs: Vec<f64> = (0..200).map(|i| f64::from(i % 17) * 0.37 - 1.0).collect();
        let fit = fit_npmle(&xs, &UNIT, 50, 500, 0.0).unwrap();
        assert!(fit.trace.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(fit.trace.len(), fit.iterations + 1);
        let s: f64 = fit.weights.iter().sum();
        assert!((s - 1.0).abs() < 1e-10);
        assert!(fit.weights.iter().all(|w| *w >= 0.0));
    }

    #[test]
    fn non_convergence_is_flagged() {
        let xs: Vec<f64> = (0..100).map(|i| f64::from(i % 11)).collect();
        let fit = fit_npmle(&xs, &UNIT, 40, 3, 1e-300).unwrap();
        assert!(!fit.converged);
        assert_eq!(fit.iterations, 3);
        let done = fit_npmle(&xs, &UNIT, 40, 10_000, 1e-6).unwrap();
        assert!(done.converged);
    }

    #[test]
    fn deterministic_fit() {
        let xs: Vec<f64> = (0..80).map(|i| f64::from((i * 7) % 13)).collect();
        let a = fit_npmle(&xs, &LikelihoodModel::Poisson, 30, 200, 1e-9).unwrap();
        let b = fit_npmle(&xs, &LikelihoodModel::Poisson, 30, 200, 1e-9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fitted_prior_beats_every_single_atom() {
        let xs: Vec<f64> = (0..120).map(|i| f64::from(i % 9) * 0.8).collect();
        let fit = fit_npmle(&xs, &UNIT, 60, 2000, 1e-10).unwrap();
        for &t in &fit.grid {
            let single = xs.iter().map(|&x| UNIT.log_density(x, t)).sum::<f64>() / xs.len() as f64;
            assert!(fit.loglik >= single - 1e-12);
        }
    }

    #[test]
    fn npmle_estimates_are_bounded_and_monotone() {
        let xs: Vec<f64> = (0..150).map(|i| f64::from((i * 13) % 23)).collect();
        let lik = LikelihoodModel::Poisson;
        let fit = fit_npmle(&xs, &lik, 80, 1000, 1e-9).unwrap();
        let mut sorted = xs.clone();
        sorted.sort_by(f64::total_cmp);
        let est = npmle_estimate(&sorted, &fit, &lik).unwrap();
        let (lo, hi) = (fit.grid[0], *fit.grid.last().unwrap());
        assert!(est.as_slice().iter().all(|v| *v >= lo && *v <= hi));
        assert!(est.as_slice().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn single_atom_fit_gives_constant_estimates() {
        let fit = NpmleFit {
            grid: vec![1.0, 2.0, 3.0],
            weights: vec![0.0, 1.0, 0.0],
            loglik: 0.0,
            iterations: 0,
            converged: true,
            trace: vec![0.0],
        };
        let est = npmle_estimate(&[-4.0, 2.0, 11.0], &fit, &UNIT).unwrap();
        assert_eq!(est.as_slice(), &[2.0, 2.0, 2.0]);
        let mut buf = Vec::new();
        fit.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 4);
    }
}
