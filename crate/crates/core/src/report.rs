use serde::Serialize;

use crate::stats;

/// Per-point dimension estimates and their aggregate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub per_point: Vec<f64>,
    /// Arithmetic mean of `per_point`, except for the inverse-averaging
    /// estimator, whose aggregate is the harmonic mean.
    pub aggregate: f64,
    pub iterations_used: usize,
    pub converged: bool,
    pub gamma_final: f64,
    /// Number of updates that hit the floor or ceiling clamp.
    pub clamp_events: usize,
}

impl EstimateReport {
    /// Report for a closed-form estimator with an arithmetic-mean aggregate.
    pub(crate) fn closed_form(per_point: Vec<f64>) -> Self {
        let aggregate = stats::mean(&per_point);
        EstimateReport {
            per_point,
            aggregate,
            iterations_used: 0,
            converged: true,
            gamma_final: 0.0,
            clamp_events: 0,
        }
    }

    /// Unbiased across-point sample variance of the estimates.
    pub fn per_point_variance(&self) -> f64 {
        stats::sample_variance(&self.per_point)
    }
}
