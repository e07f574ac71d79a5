//! Entropy-rate comparison between validated and non-validated pairs.
//!
//! Produces Gaussian kernel densities for the two groups on a common
//! grid, a two-sided permutation test for the difference of means, and
//! optional pointwise permutation envelopes for the density curves.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::infotheory::lz_entropy_rate;
use crate::symbolize::SymbolSeries;
use crate::{Error, Result};

/// Mean of the two per-series Lempel-Ziv entropy-rate estimates.
pub fn pair_entropy_rate(x: &SymbolSeries, y: &SymbolSeries) -> Result<f64> {
    let hx = lz_entropy_rate(x)?.value;
    let hy = lz_entropy_rate(y)?.value;
    Ok(0.5 * (hx + hy))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bandwidth {
    Auto,
    Value(f64),
}

/// Silverman's rule: 0.9 · min(sd, IQR/1.34) · n^(−1/5).
pub fn silverman_bandwidth(values: &[f64]) -> Result<f64> {
    let n = values.len();
    if n < 2 {
        return Err(Error::InvalidArgument {
            msg: "need at least 2 values for a bandwidth".into(),
        });
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let quantile = |p: f64| {
        let pos = p * (n as f64 - 1.0);
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
    };
    let iqr = quantile(0.75) - quantile(0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    if spread == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok(0.9 * spread * (n as f64).powf(-0.2))
}

/// Grid spanning the data range plus 4 bandwidths on each side; the
/// extra margin keeps the trapezoid integral within 1e-3 of one even
/// for tiny samples whose edge kernels dominate.
pub fn kde_grid(values: &[f64], h: f64, points: usize) -> Vec<f64> {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min) - 4.0 * h;
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 4.0 * h;
    let step = (hi - lo) / (points as f64 - 1.0);
    (0..points).map(|i| lo + step * i as f64).collect()
}

/// Gaussian kernel density of `values` evaluated on `grid`.
pub fn kde(values: &[f64], grid: &[f64], bandwidth: Bandwidth) -> Result<Vec<f64>> {
    if values.len() < 2 {
        return Err(Error::InvalidArgument {
            msg: "need at least 2 values for a density".into(),
        });
    }
    let h = match bandwidth {
        Bandwidth::Auto => silverman_bandwidth(values)?,
        Bandwidth::Value(h) if h > 0.0 => h,
        Bandwidth::Value(h) => {
            return Err(Error::InvalidArgument {
                msg: format!("bandwidth {h} must be positive"),
            })
        }
    };
    let norm = 1.0 / (values.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    Ok(grid
        .iter()
        .map(|&g| {
            values
                .iter()
                .map(|&v| (-0.5 * ((g - v) / h).powi(2)).exp())
                .sum::<f64>()
                * norm
        })
        .collect())
}

/// Two-sided permutation test for the difference of group means.
/// p = (1 + #{permuted |diff| >= observed |diff|}) / (n_permutations + 1).
pub fn permutation_test(
    group_a: &[f64],
    group_b: &[f64],
    n_permutations: usize,
    seed: u64,
) -> Result<f64> {
    if group_a.is_empty() || group_b.is_empty() {
        return Err(Error::InvalidArgument {
            msg: "both groups must be nonempty".into(),
        });
    }
    if n_permutations < 100 {
        return Err(Error::InvalidArgument {
            msg: format!("need at least 100 permutations, got {n_permutations}"),
        });
    }
    let na = group_a.len();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let observed = (mean(group_a) - mean(group_b)).abs();
    let mut pooled: Vec<f64> = group_a.iter().chain(group_b).copied().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut extreme = 0usize;
    for _ in 0..n_permutations {
        pooled.shuffle(&mut rng);
        let diff = (mean(&pooled[..na]) - mean(&pooled[na..])).abs();
        if diff >= observed {
            extreme += 1;
        }
    }
    Ok((1 + extreme) as f64 / (n_permutations + 1) as f64)
}

/// Pointwise 2.5%/97.5% envelope of KDE curves under group relabeling.
pub fn permutation_envelope(
    group_a: &[f64],
    group_b: &[f64],
    grid: &[f64],
    bandwidth: Bandwidth,
    n_permutations: usize,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let na = group_a.len();
    let mut pooled: Vec<f64> = group_a.iter().chain(group_b).copied().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut curves: Vec<Vec<f64>> = Vec::with_capacity(n_permutations);
    for _ in 0..n_permutations {
        pooled.shuffle(&mut rng);
        curves.push(kde(&pooled[..na], grid, bandwidth)?);
    }
    let mut lo = Vec::with_capacity(grid.len());
    let mut hi = Vec::with_capacity(grid.len());
    for g in 0..grid.len() {
        let mut col: Vec<f64> = curves.iter().map(|c| c[g]).collect();
        col.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let idx_lo = ((col.len() as f64) * 0.025).floor() as usize;
        let idx_hi = (((col.len() as f64) * 0.975).ceil() as usize).min(col.len()) - 1;
        lo.push(col[idx_lo]);
        hi.push(col[idx_hi]);
    }
    Ok((lo, hi))
}

/// Full comparison between validated-pair and non-validated-pair
/// entropy rates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupComparison {
    pub group_a: Vec<f64>,
    pub group_b: Vec<f64>,
    pub grid: Vec<f64>,
    pub kde_a: Vec<f64>,
    pub kde_b: Vec<f64>,
    pub band_lo: Vec<f64>,
    pub band_hi: Vec<f64>,
    pub perm_p: f64,
    pub n_permutations: usize,
    pub seed: u64,
}

pub fn compare_groups(
    group_a: &[f64],
    group_b: &[f64],
    bandwidth: Bandwidth,
    n_permutations: usize,
    seed: u64,
) -> Result<GroupComparison> {
    let all: Vec<f64> = group_a.iter().chain(group_b).copied().collect();
    let h = match bandwidth {
        Bandwidth::Auto => silverman_bandwidth(&all)?,
        Bandwidth::Value(v) => v,
    };
    let grid = kde_grid(&all, h, 256);
    let kde_a = kde(group_a, &grid, Bandwidth::Value(h))?;
    let kde_b = kde(group_b, &grid, Bandwidth::Value(h))?;
    let perm_p = permutation_test(group_a, group_b, n_permutations, seed)?;
    let (band_lo, band_hi) = permutation_envelope(
        group_a,
        group_b,
        &grid,
        Bandwidth::Value(h),
        n_permutations.min(500),
        seed.wrapping_add(1),
    )?;
    Ok(GroupComparison {
        group_a: group_a.to_vec(),
        group_b: group_b.to_vec(),
        grid,
        kde_a,
        kde_b,
        band_lo,
        band_hi,
        perm_p,
        n_permutations,
        seed,
    })
}
