//! Comparison estimators: the pointwise Poisson-likelihood estimator averaged
//! over k and points, its inverse-averaging variant, the correlation
//! dimension, and the log-log regression of mean k-NN distance on k.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::{sq_dist, PointCloud};
use crate::error::{Error, Result};
use crate::neighbors::{
    all_log_distance_ratios, distinct_points, log_distance_ratios, NeighborTable,
};
use crate::report::EstimateReport;
use crate::stats;

/// Inclusive neighbor-count range averaged by [`lb_estimate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LbConfig {
    pub k1: usize,
    pub k2: usize,
}

impl LbConfig {
    pub fn single(k: usize) -> Self {
        LbConfig { k1: k, k2: k }
    }

    fn validate(&self, table: &NeighborTable) -> Result<()> {
        if self.k1 < 2 || self.k1 > self.k2 {
            return Err(Error::InvalidConfig(format!(
                "need 2 <= k1 <= k2, got k1 = {}, k2 = {}",
                self.k1, self.k2
            )));
        }
        table.check_k(self.k2)
    }
}

/// Radius grid and fit window for [`correlation_dimension`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrDimConfig {
    /// Number of log-spaced radii between the 1st and 99th percentile of the
    /// pairwise distances.
    pub num_radii: usize,
    /// Start of the fitted window, as a fraction of the (log-spaced) grid.
    pub fit_lo_quantile: f64,
    /// End of the fitted window, as a fraction of the grid.
    pub fit_hi_quantile: f64,
}

impl Default for CorrDimConfig {
    fn default() -> Self {
        CorrDimConfig {
            num_radii: 32,
            fit_lo_quantile: 0.10,
            fit_hi_quantile: 0.50,
        }
    }
}

impl CorrDimConfig {
    fn validate(&self) -> Result<()> {
        if self.num_radii < 4 {
            return Err(Error::InvalidConfig(format!(
                "num_radii must be at least 4, got {}",
                self.num_radii
            )));
        }
        let (lo, hi) = (self.fit_lo_quantile, self.fit_hi_quantile);
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "fit window must satisfy 0 <= lo < hi <= 1, got [{lo}, {hi}]"
            )));
        }
        Ok(())
    }
}

/// `(k - 1) / S_k(x)`.
pub fn lb_pointwise(table: &NeighborTable, point: usize, k: usize) -> Result<f64> {
    let s = log_distance_ratios(table, point, k)?;
    if s <= 0.0 {
        return Err(Error::DegenerateNeighborhood { point });
    }
    Ok((k - 1) as f64 / s)
}

/// Pointwise estimates averaged over `k1..=k2` for each point, then over
/// points.
pub fn lb_estimate(table: &NeighborTable, cfg: LbConfig) -> Result<EstimateReport> {
    cfg.validate(table)?;
    let per_point = collect_in_order(
        (0..table.len())
            .into_par_iter()
            .map(|i| {
                let mut acc = 0.0;
                for k in cfg.k1..=cfg.k2 {
                    acc += lb_pointwise(table, i, k)?;
                }
                Ok(acc / (cfg.k2 - cfg.k1 + 1) as f64)
            })
            .collect(),
    )?;
    Ok(EstimateReport::closed_form(per_point))
}

/// Inverse-averaging estimate at fixed `k`: the reciprocal of the mean of
/// `S_k(x) / (k - 1)` over points.
pub fn inverse_mle_estimate(table: &NeighborTable, k: usize) -> Result<f64> {
    Ok(inverse_mle_report(table, k)?.aggregate)
}

/// Like [`inverse_mle_estimate`], keeping the pointwise `(k - 1) / S_k`
/// values whose harmonic mean forms the aggregate.
pub fn inverse_mle_report(table: &NeighborTable, k: usize) -> Result<EstimateReport> {
    let sums = all_log_distance_ratios(table, k)?;
    if let Some(point) = sums.iter().position(|&s| s <= 0.0) {
        return Err(Error::DegenerateNeighborhood { point });
    }
    let per_point: Vec<f64> = sums.iter().map(|s| (k - 1) as f64 / s).collect();
    let aggregate = inverse_average(&sums, k);
    Ok(EstimateReport {
        aggregate,
        ..EstimateReport::closed_form(per_point)
    })
}

fn inverse_average(sums: &[f64], k: usize) -> f64 {
    let km1 = (k - 1) as f64;
    1.0 / stats::mean(&sums.iter().map(|s| s / km1).collect::<Vec<_>>())
}

/// Fraction of point pairs strictly closer than `r`.
pub fn correlation_integral(cloud: &PointCloud, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::NonPositiveInput(r));
    }
    let n = cloud.len();
    let close: usize = (0..n)
        .into_par_iter()
        .map(|i| {
            let p = cloud.point(i);
            (i + 1..n)
                .filter(|&j| sq_dist(p, cloud.point(j)).sqrt() < r)
                .count()
        })
        .sum();
    Ok(close as f64 / (n * (n - 1) / 2) as f64)
}

/// All pairwise distances, sorted ascending.
fn sorted_pairwise_distances(cloud: &PointCloud) -> Vec<f64> {
    let n = cloud.len();
    let mut d: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let p = cloud.point(i);
            (i + 1..n).map(move |j| sq_dist(p, cloud.point(j)).sqrt())
        })
        .collect();
    d.par_sort_unstable_by(f64::total_cmp);
    d
}

fn quantile_of_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = (q * (sorted.len() - 1) as f64).round() as usize;
    sorted[pos]
}

/// Slope of `log C_n(r)` against `log r` over the configured window of the
/// radius grid.
///
/// Holds all `n (n - 1) / 2` pairwise distances in memory.
pub fn correlation_dimension(cloud: &PointCloud, cfg: CorrDimConfig) -> Result<f64> {
    cfg.validate()?;
    let distinct = distinct_points(cloud).len();
    if distinct < 3 {
        return Err(Error::TooFewPoints(distinct));
    }
    let pairs = sorted_pairwise_distances(cloud);
    let smallest_positive = pairs[pairs.partition_point(|&d| d <= 0.0)];
    let r_lo = quantile_of_sorted(&pairs, 0.01).max(smallest_positive);
    let r_hi = quantile_of_sorted(&pairs, 0.99).max(r_lo);
    let (ln_lo, ln_hi) = (r_lo.ln(), r_hi.ln());

    let last = (cfg.num_radii - 1) as f64;
    let total = pairs.len() as f64;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for i in 0..cfg.num_radii {
        let frac = i as f64 / last;
        if frac < cfg.fit_lo_quantile || frac > cfg.fit_hi_quantile {
            continue;
        }
        let ln_r = ln_lo + frac * (ln_hi - ln_lo);
        let r = ln_r.exp();
        let count = pairs.partition_point(|&d| d < r);
        if count == 0 {
            continue;
        }
        xs.push(ln_r);
        ys.push((count as f64 / total).ln());
    }
    // radii that collapse onto one value carry no slope information
    let spread = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - xs.iter().cloned().fold(f64::INFINITY, f64::min);
    if xs.len() < 2 || !(spread > 0.0) {
        return Err(Error::InsufficientFitPoints { usable: xs.len() });
    }
    Ok(stats::ols_slope(&xs, &ys))
}

/// Reciprocal slope of `log mean_i T_k(x_i)` regressed on `log k` for
/// `k1..=k2`.
pub fn knn_regression_dimension(table: &NeighborTable, k1: usize, k2: usize) -> Result<f64> {
    if k1 < 2 || k1 >= k2 {
        return Err(Error::InvalidConfig(format!(
            "need 2 <= k1 < k2, got k1 = {k1}, k2 = {k2}"
        )));
    }
    table.check_k(k2)?;
    let n = table.len() as f64;
    let (xs, ys): (Vec<f64>, Vec<f64>) = (k1..=k2)
        .map(|k| {
            let mean_tk = (0..table.len())
                .map(|i| table.kth_distance(i, k))
                .sum::<f64>()
                / n;
            ((k as f64).ln(), mean_tk.ln())
        })
        .unzip();
    let slope = stats::ols_slope(&xs, &ys);
    if !(slope > 0.0) || !slope.is_finite() {
        return Err(Error::DegenerateFit { slope });
    }
    Ok(1.0 / slope)
}

/// Collects per-point results, reporting the lowest-index failure.
pub(crate) fn collect_in_order<T>(items: Vec<Result<T>>) -> Result<Vec<T>> {
    items.into_iter().collect()
}
