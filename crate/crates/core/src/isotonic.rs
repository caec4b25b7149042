//! Weighted least-squares isotonic regression by pool-adjacent-violators.

use std::io;

use serde::{Deserialize, Serialize};

use crate::csvio::fmt_f64;
use crate::error::{Error, Result};

/// How [`MonotoneStepFn::predict_with`] evaluates between knots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    /// Level of the closest knot at or below the query point.
    #[default]
    Step,
    /// Straight line between neighbouring knots.
    Linear,
}

/// A fitted nondecreasing function: distinct, increasing knots with one level
/// each, held constant beyond the outermost knots.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneStepFn {
    knots: Vec<f64>,
    levels: Vec<f64>,
}

impl MonotoneStepFn {
    /// Validates and wraps knots and levels.
    pub fn new(knots: Vec<f64>, levels: Vec<f64>) -> Result<Self> {
        if knots.is_empty() || knots.len() != levels.len() {
            return Err(Error::input(format!(
                "step function needs equal, nonzero numbers of knots and levels (got {} and {})",
                knots.len(),
                levels.len()
            )));
        }
        if knots.iter().chain(&levels).any(|v| !v.is_finite()) {
            return Err(Error::input("step function values must be finite"));
        }
        if knots.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::input("knots must be strictly increasing"));
        }
        if levels.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::input("levels must be nondecreasing"));
        }
        Ok(MonotoneStepFn { knots, levels })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn min_level(&self) -> f64 {
        self.levels[0]
    }

    pub fn max_level(&self) -> f64 {
        self.levels[self.levels.len() - 1]
    }

    /// Right-continuous step evaluation.
    pub fn predict(&self, x0: f64) -> f64 {
        let idx = self.knots.partition_point(|k| *k <= x0);
        self.levels[idx.saturating_sub(1)]
    }

    pub fn predict_with(&self, x0: f64, mode: Interpolation) -> f64 {
        match mode {
            Interpolation::Step => self.predict(x0),
            Interpolation::Linear => {
                let idx = self.knots.partition_point(|k| *k <= x0);
                if idx == 0 {
                    return self.levels[0];
                }
                if idx == self.knots.len() {
                    return self.max_level();
                }
                let (x_lo, x_hi) = (self.knots[idx - 1], self.knots[idx]);
                let (y_lo, y_hi) = (self.levels[idx - 1], self.levels[idx]);
                let t = (x0 - x_lo) / (x_hi - x_lo);
                // stays inside [y_lo, y_hi] even with rounding
                (y_lo + t * (y_hi - y_lo)).clamp(y_lo, y_hi)
            }
        }
    }

    /// Writes `knot,level` rows with a header.
    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io_err = |e: csv::Error| Error::numeric(format!("writing step function: {e}"));
        w.write_record(["knot", "level"]).map_err(io_err)?;
        for (k, l) in self.knots.iter().zip(&self.levels) {
            w.write_record([fmt_f64(*k), fmt_f64(*l)]).map_err(io_err)?;
        }
        w.flush()
            .map_err(|e| Error::numeric(format!("writing step function: {e}")))
    }

    /// Reads the format produced by [`MonotoneStepFn::write_csv`].
    pub fn read_csv<R: io::Read>(input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(input);
        let headers = rdr
            .headers()
            .map_err(|e| Error::input(format!("step function csv: {e}")))?
            .clone();
        if headers.len() != 2 || &headers[0] != "knot" || &headers[1] != "level" {
            return Err(Error::input(
                "step function csv must have header knot,level",
            ));
        }
        let (mut knots, mut levels) = (Vec::new(), Vec::new());
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::input(format!("step function csv row {row}: {e}")))?;
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|_| {
                    Error::input(format!("step function csv row {row}: bad number {s:?}"))
                })
            };
            knots.push(parse(&rec[0])?);
            levels.push(parse(&rec[1])?);
        }
        MonotoneStepFn::new(knots, levels)
    }
}

/// One pooled block on the PAVA stack.
#[derive(Clone, Copy)]
struct Block {
    mean: f64,
    weight: f64,
    /// Number of distinct knots covered.
    len: usize,
}

/// Isotonic least-squares fit of `y` on `x` with weights `w`: minimizes
/// `Σ wᵢ (yᵢ - m(xᵢ))²` over nondecreasing `m`.
///
/// Tied `x` values are first pooled into one point (weighted mean response,
/// summed weight), so the fit does not depend on input order.
pub fn fit_isotonic(x: &[f64], y: &[f64], w: &[f64]) -> Result<MonotoneStepFn> {
    let n = x.len();
    if n == 0 {
        return Err(Error::input("isotonic regression needs at least one point"));
    }
    if y.len() != n || w.len() != n {
        return Err(Error::input(format!(
            "isotonic regression inputs differ in length: x {}, y {}, w {}",
            n,
            y.len(),
            w.len()
        )));
    }
    if let Some(i) = (0..n).find(|&i| !(x[i].is_finite() && y[i].is_finite())) {
        return Err(Error::input(format!(
            "non-finite value at index {i}: x = {}, y = {}",
            x[i], y[i]
        )));
    }
    if let Some(i) = w.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::input(format!(
            "weight at index {i} must be positive, got {}",
            w[i]
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&a, &b| x[a].total_cmp(&x[b]));

    let mut knots: Vec<f64> = Vec::with_capacity(n);
    let mut stack: Vec<Block> = Vec::with_capacity(n);
    let mut i = 0;
    while i < n {
        let xv = x[order[i]];
        let (mut sw, mut swy) = (0.0, 0.0);
        while i < n && x[order[i]] == xv {
            let j = order[i];
            sw += w[j];
            swy += w[j] * y[j];
            i += 1;
        }
        knots.push(xv);
        let mut cur = Block {
            mean: swy / sw,
            weight: sw,
            len: 1,
        };
        while let Some(top) = stack.last() {
            if top.mean <= cur.mean {
                break;
            }
            let top = stack.pop().expect("peeked");
            let weight = top.weight + cur.weight;
            cur = Block {
                mean: (top.mean * top.weight + cur.mean * cur.weight) / weight,
                weight,
                len: top.len + cur.len,
            };
        }
        stack.push(cur);
    }

    let mut levels = Vec::with_capacity(knots.len());
    for b in &stack {
        levels.extend(std::iter::repeat_n(b.mean, b.len));
    }
    // weighted sums near f64::MAX overflow
    MonotoneStepFn::new(knots, levels)
        .map_err(|e| Error::numeric(format!("isotonic fit overflowed: {e}")))
}

/// [`fit_isotonic`] with unit weights.
pub fn fit_isotonic_unweighted(x: &[f64], y: &[f64]) -> Result<MonotoneStepFn> {
    fit_isotonic(x, y, &vec![1.0; x.len()])
}
