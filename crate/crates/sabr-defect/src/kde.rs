//! Kernel density estimation for posterior marginals.
//!
//! Uses the Epanechnikov kernel K(u) = 3/4 (1 - u^2) on [-1, 1] with the
//! rule-of-thumb bandwidth h = 2.345 sigma_hat n^{-1/5}, Silverman's normal
//! reference rule rescaled to this kernel's efficiency constant.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::sample_std;

/// A density estimate tabulated on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityCurve {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
}

impl DensityCurve {
    /// Estimate the density of `samples` on `points` uniformly spaced grid
    /// nodes spanning [min - h, max + h]. Fails when the sample is empty or
    /// completely degenerate (zero spread gives no usable bandwidth).
    pub fn from_samples(samples: &[f64], points: usize) -> Result<Self> {
        if points < 2 {
            return Err(Error::invalid_input("density grid needs at least 2 points"));
        }
        let h = epanechnikov_bandwidth(samples)?;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &x in samples {
            lo = lo.min(x);
            hi = hi.max(x);
        }
        let (lo, hi) = (lo - h, hi + h);
        let step = (hi - lo) / (points - 1) as f64;
        let grid: Vec<f64> = (0..points).map(|i| lo + step * i as f64).collect();
        let density = kde_epanechnikov(samples, &grid, h)?;
        Ok(DensityCurve { grid, density })
    }
}

/// Rule-of-thumb bandwidth 2.345 sigma_hat n^{-1/5}. Errors on an empty
/// sample, a non-finite value, or zero spread.
pub fn epanechnikov_bandwidth(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::invalid_input("bandwidth of an empty sample"));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid_input("bandwidth requires finite samples"));
    }
    let sd = if samples.len() == 1 { 0.0 } else { sample_std(samples) };
    let h = 2.345 * sd * (samples.len() as f64).powf(-0.2);
    if h > 0.0 {
        Ok(h)
    } else {
        Err(Error::invalid_input(
            "sample has zero spread, no meaningful bandwidth exists",
        ))
    }
}

/// Evaluate the Epanechnikov kernel density estimate of `samples` at each
/// grid node: f(x) = (n h)^{-1} sum_i K((x - x_i) / h).
pub fn kde_epanechnikov(samples: &[f64], grid: &[f64], bandwidth: f64) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::invalid_input("kde of an empty sample"));
    }
    if !(bandwidth.is_finite() && bandwidth > 0.0) {
        return Err(Error::invalid_input(format!("bandwidth must be finite and > 0, got {bandwidth}")));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid_input("kde requires finite samples"));
    }
    let norm = 1.0 / (samples.len() as f64 * bandwidth);
    let out = grid
        .iter()
        .map(|&x| {
            let mut acc = 0.0;
            for &s in samples {
                let u = (x - s) / bandwidth;
                if u.abs() <= 1.0 {
                    acc += 0.75 * (1.0 - u * u);
                }
            }
            acc * norm
        })
        .collect();
    Ok(out)
}
