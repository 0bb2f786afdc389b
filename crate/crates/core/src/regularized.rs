//! Divergence-regularized maximum-likelihood dimension estimation.
//!
//! Each point carries its own dimension estimate `m_x`. A sweep visits every
//! point and replaces `m_x` by the positive root of
//!
//! ```text
//! (S + 2γ) m² + (m̄₀ S − 2γ m̄₀ − k) m − m̄₀ k = 0
//! ```
//!
//! where `S = Σ_{j≤k} log(T_k / T_j)` is the local log-distance statistic and
//! `m̄₀` is the arithmetic mean of the current estimates at the `k` nearest
//! neighbors. The quadratic comes from the stationarity condition of the local
//! Poisson log-likelihood minus `γ D(m ‖ m̄₀)`, with the derivative of the
//! divergence linearized as `2 (m − m̄₀) / (m + m̄₀)`.
//!
//! The penalty weight `γ` starts small and grows geometrically after every
//! sweep up to a cap, moving the solution from the plain likelihood root
//! `k / S` toward agreement with the neighborhood.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neighbors::{all_log_distance_ratios, NeighborTable};
use crate::report::EstimateReport;

/// How the per-point estimates start out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Init {
    /// `(k - 1) / S_k(x)`, clamped to the configured bounds.
    LbWarmStart,
    /// Uniform on `[m_floor, min(d, m_ceiling)]` from a seeded ChaCha8 stream.
    SeededUniform { seed: u64 },
}

/// How `γ` changes after each sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GammaSchedule {
    /// `γ ← min(γ (1 + ε), cap)`.
    CappedGrowth,
    /// `γ ← max(γ (1 + ε), cap)`: jumps to the cap after the first sweep and
    /// keeps growing from there.
    LiteralMax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UpdateOrder {
    /// In-place, ascending point index; later points see earlier updates.
    GaussSeidel,
    /// Every update in a sweep reads the previous sweep's estimates.
    Jacobi,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularizedConfig {
    pub k: usize,
    pub gamma0: f64,
    pub epsilon: f64,
    pub gamma_cap: f64,
    pub max_iter: usize,
    /// Convergence threshold on the largest per-point change in one sweep.
    pub tol: f64,
    pub init: Init,
    pub m_floor: f64,
    pub m_ceiling: f64,
    pub schedule: GammaSchedule,
    pub order: UpdateOrder,
}

impl RegularizedConfig {
    /// Defaults for neighbor count `k` on data of ambient dimension `dim`.
    pub fn new(k: usize, dim: usize) -> Self {
        RegularizedConfig {
            k,
            gamma0: 0.05,
            epsilon: 0.05,
            gamma_cap: 1.0,
            max_iter: 100,
            tol: 1e-6,
            init: Init::LbWarmStart,
            m_floor: 1e-3,
            m_ceiling: 10.0 * dim as f64,
            schedule: GammaSchedule::CappedGrowth,
            order: UpdateOrder::GaussSeidel,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.k < 2 {
            return Err(Error::InvalidK(format!("k = {}, need k >= 2", self.k)));
        }
        if !(self.gamma_cap > 0.0 && self.gamma_cap.is_finite()) {
            return bad(format!(
                "gamma_cap must be positive, got {}",
                self.gamma_cap
            ));
        }
        // gamma0 = 0 switches the penalty off entirely
        if !(self.gamma0 >= 0.0 && self.gamma0 <= self.gamma_cap) {
            return bad(format!(
                "gamma0 must lie in [0, gamma_cap = {}], got {}",
                self.gamma_cap, self.gamma0
            ));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return bad(format!(
                "epsilon must be non-negative, got {}",
                self.epsilon
            ));
        }
        if !(self.tol > 0.0) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1".into());
        }
        if !(self.m_floor > 0.0 && self.m_floor < self.m_ceiling && self.m_ceiling.is_finite()) {
            return bad(format!(
                "need 0 < m_floor < m_ceiling, got [{}, {}]",
                self.m_floor, self.m_ceiling
            ));
        }
        Ok(())
    }

    fn next_gamma(&self, gamma: f64) -> f64 {
        let grown = gamma * (1.0 + self.epsilon);
        match self.schedule {
            GammaSchedule::CappedGrowth => grown.min(self.gamma_cap),
            GammaSchedule::LiteralMax => grown.max(self.gamma_cap),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularizedState {
    pub m: Vec<f64>,
    pub gamma: f64,
    pub iteration: usize,
    pub last_delta: f64,
}

/// `D(m ‖ m0) = m0 − m + m log(m / m0)`.
pub fn divergence(m: f64, m0: f64) -> Result<f64> {
    for v in [m, m0] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::NonPositiveInput(v));
        }
    }
    Ok(m0 - m + m * (m / m0).ln())
}

/// Mean of the current estimates over the `k` nearest neighbors of `point`
/// (the point itself excluded).
pub fn neighborhood_mean(
    state: &RegularizedState,
    table: &NeighborTable,
    point: usize,
    k: usize,
) -> f64 {
    neighbor_mean(&state.m, table, point, k)
}

#[inline]
fn neighbor_mean(m: &[f64], table: &NeighborTable, point: usize, k: usize) -> f64 {
    table.indices(point)[..k].iter().map(|&j| m[j]).sum::<f64>() / k as f64
}

/// Coefficients `(a, b, c)` of the per-point update polynomial.
pub fn update_coefficients(s: f64, k: usize, m0: f64, gamma: f64) -> (f64, f64, f64) {
    let k = k as f64;
    (s + 2.0 * gamma, m0 * s - 2.0 * gamma * m0 - k, -m0 * k)
}

/// The unique positive root of the update polynomial.
///
/// With `a > 0` and `c < 0` the roots have opposite signs. The positive one
/// is taken from whichever of `q / a` and `c / q` avoids cancellation.
pub fn quadratic_update(s: f64, k: usize, m0: f64, gamma: f64) -> Result<f64> {
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::NonPositiveInput(s));
    }
    if !(m0 > 0.0 && m0.is_finite()) {
        return Err(Error::NonPositiveInput(m0));
    }
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::NonPositiveInput(gamma));
    }
    if k < 2 {
        return Err(Error::InvalidK(format!("k = {k}, need k >= 2")));
    }
    let (a, b, c) = update_coefficients(s, k, m0, gamma);
    if a == 0.0 {
        return Err(Error::DegenerateQuadratic);
    }
    if gamma == 0.0 {
        // (S m − k)(m + m0) = 0
        return Ok(k as f64 / s);
    }
    debug_assert!(c / a < 0.0, "update polynomial must have one positive root");
    let sq = (b * b - 4.0 * a * c).sqrt();
    let root = if b >= 0.0 {
        c / (-0.5 * (b + sq))
    } else {
        (-0.5 * (b - sq)) / a
    };
    Ok(root)
}

/// `|a m² + b m + c| / max(|a m²|, |b m|, |c|)`.
pub fn normalized_residual(s: f64, k: usize, m0: f64, gamma: f64, m: f64) -> f64 {
    let (a, b, c) = update_coefficients(s, k, m0, gamma);
    let terms = [a * m * m, b * m, c];
    let scale = terms.iter().fold(0.0f64, |acc, t| acc.max(t.abs()));
    (terms[0] + terms[1] + terms[2]).abs() / scale
}

/// Sweep-by-sweep driver; [`run_regularized`] runs it to completion.
pub struct RegularizedSolver<'a> {
    table: &'a NeighborTable,
    cfg: RegularizedConfig,
    sums: Vec<f64>,
    state: RegularizedState,
    clamp_events: usize,
}

impl<'a> RegularizedSolver<'a> {
    pub fn new(table: &'a NeighborTable, cfg: RegularizedConfig) -> Result<Self> {
        cfg.validate()?;
        table.check_k(cfg.k)?;
        let sums = all_log_distance_ratios(table, cfg.k)?;
        if let Some(point) = sums.iter().position(|&s| s <= 0.0) {
            return Err(Error::DegenerateNeighborhood { point });
        }
        let m = match cfg.init {
            Init::LbWarmStart => sums
                .iter()
                .map(|s| ((cfg.k - 1) as f64 / s).clamp(cfg.m_floor, cfg.m_ceiling))
                .collect(),
            Init::SeededUniform { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let hi = (table.dim() as f64).min(cfg.m_ceiling);
                (0..table.len())
                    .map(|_| rng.random_range(cfg.m_floor..=hi))
                    .collect()
            }
        };
        Ok(RegularizedSolver {
            table,
            cfg,
            sums,
            state: RegularizedState {
                m,
                gamma: cfg.gamma0,
                iteration: 0,
                last_delta: f64::INFINITY,
            },
            clamp_events: 0,
        })
    }

    pub fn state(&self) -> &RegularizedState {
        &self.state
    }

    /// The `S_k` statistic of every point.
    pub fn log_ratio_sums(&self) -> &[f64] {
        &self.sums
    }

    fn update_one(&self, m: &[f64], point: usize) -> (f64, bool) {
        let m0 = neighbor_mean(m, self.table, point, self.cfg.k);
        // S > 0 was checked up front, so the polynomial is never degenerate
        let raw = quadratic_update(self.sums[point], self.cfg.k, m0, self.state.gamma)
            .expect("positive S and m0 give a well-posed update");
        let clamped = raw.clamp(self.cfg.m_floor, self.cfg.m_ceiling);
        (clamped, clamped != raw)
    }

    /// One pass over all points followed by the `γ` update. Returns the
    /// largest absolute change in any estimate.
    pub fn sweep(&mut self) -> f64 {
        let mut delta = 0.0f64;
        match self.cfg.order {
            UpdateOrder::GaussSeidel => {
                let mut m = std::mem::take(&mut self.state.m);
                for point in 0..m.len() {
                    let (next, clamped) = self.update_one(&m, point);
                    self.clamp_events += clamped as usize;
                    delta = delta.max((next - m[point]).abs());
                    m[point] = next;
                }
                self.state.m = m;
            }
            UpdateOrder::Jacobi => {
                let prev = &self.state.m;
                let next: Vec<(f64, bool)> = (0..prev.len())
                    .into_par_iter()
                    .map(|point| self.update_one(prev, point))
                    .collect();
                for (point, (value, clamped)) in next.into_iter().enumerate() {
                    self.clamp_events += clamped as usize;
                    delta = delta.max((value - self.state.m[point]).abs());
                    self.state.m[point] = value;
                }
            }
        }
        self.state.iteration += 1;
        self.state.last_delta = delta;
        self.state.gamma = self.cfg.next_gamma(self.state.gamma);
        delta
    }

    pub fn run(mut self) -> EstimateReport {
        while self.state.iteration < self.cfg.max_iter {
            if self.sweep() < self.cfg.tol {
                break;
            }
        }
        self.into_report()
    }

    pub fn into_report(self) -> EstimateReport {
        let converged = self.state.last_delta < self.cfg.tol;
        let mut report = EstimateReport::closed_form(self.state.m);
        report.iterations_used = self.state.iteration;
        report.converged = converged;
        report.gamma_final = self.state.gamma;
        report.clamp_events = self.clamp_events;
        report
    }
}

/// Runs sweeps until the largest per-point change drops below `cfg.tol` or
/// `cfg.max_iter` sweeps have been made.
pub fn run_regularized(table: &NeighborTable, cfg: RegularizedConfig) -> Result<EstimateReport> {
    Ok(RegularizedSolver::new(table, cfg)?.run())
}
