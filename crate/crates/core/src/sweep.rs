//! Running several estimators over a range of neighbor counts.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::baseline::{
    correlation_dimension, inverse_mle_report, knn_regression_dimension, lb_estimate,
    CorrDimConfig, LbConfig,
};
use crate::cloud::PointCloud;
use crate::datasets::RNG_NAME;
use crate::error::{Error, Result};
use crate::neighbors::{build_neighbor_table, DedupPolicy, NeighborTable};
use crate::regularized::{run_regularized, Init, RegularizedConfig};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Method {
    RegMle,
    LbMle,
    InvMle,
    CorrDim,
    KnnReg,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::RegMle,
        Method::LbMle,
        Method::InvMle,
        Method::CorrDim,
        Method::KnnReg,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::RegMle => "reg-mle",
            Method::LbMle => "lb-mle",
            Method::InvMle => "inv-mle",
            Method::CorrDim => "corr-dim",
            Method::KnnReg => "knn-reg",
        }
    }

    /// Whether the method produces one estimate per neighbor count.
    pub fn uses_k(&self) -> bool {
        !matches!(self, Method::CorrDim)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "unknown method {s:?}; expected one of reg-mle, lb-mle, inv-mle, corr-dim, knn-reg"
                ))
            })
    }
}

/// Per-method settings that are not the neighbor count itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MethodOptions {
    /// Template for the regularized estimator; `k` is overwritten per call.
    pub reg: RegularizedConfig,
    /// Explicit `(k1, k2)` averaging range for `lb-mle`; defaults to `(k, k)`.
    pub lb_range: Option<(usize, usize)>,
    /// Lower end of the `knn-reg` fit; defaults to `max(2, ceil(k / 2))`.
    pub knn_k1: Option<usize>,
    pub corr: CorrDimConfig,
}

impl MethodOptions {
    pub fn new(dim: usize) -> Self {
        MethodOptions {
            reg: RegularizedConfig::new(2, dim),
            lb_range: None,
            knn_k1: None,
            corr: CorrDimConfig::default(),
        }
    }

    fn lb_config(&self, k: usize) -> LbConfig {
        self.lb_range
            .map_or(LbConfig::single(k), |(k1, k2)| LbConfig { k1, k2 })
    }

    fn knn_lower(&self, k: usize) -> usize {
        self.knn_k1.unwrap_or_else(|| k.div_ceil(2).max(2))
    }

    /// Largest neighbor count `method` reads at nominal `k`.
    pub fn table_k(&self, method: Method, k: usize) -> usize {
        match method {
            Method::LbMle => self.lb_config(k).k2,
            Method::CorrDim => 0,
            _ => k,
        }
    }
}

/// Result of one estimator call.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub aggregate: f64,
    /// Pointwise estimates, for the methods that have them.
    pub per_point: Option<Vec<f64>>,
    pub converged: bool,
}

impl Outcome {
    pub fn per_point_variance(&self) -> Option<f64> {
        self.per_point
            .as_deref()
            .map(stats::sample_variance)
            .filter(|v| v.is_finite())
    }
}

/// Runs one estimator at neighbor count `k` (ignored by `corr-dim`).
pub fn run_method(
    method: Method,
    cloud: &PointCloud,
    table: &NeighborTable,
    k: usize,
    opts: &MethodOptions,
) -> Result<Outcome> {
    let from_report = |r: crate::report::EstimateReport| Outcome {
        aggregate: r.aggregate,
        converged: r.converged,
        per_point: Some(r.per_point),
    };
    let scalar = |aggregate| Outcome {
        aggregate,
        per_point: None,
        converged: true,
    };
    match method {
        Method::RegMle => {
            run_regularized(table, RegularizedConfig { k, ..opts.reg }).map(from_report)
        }
        Method::LbMle => lb_estimate(table, opts.lb_config(k)).map(from_report),
        Method::InvMle => inverse_mle_report(table, k).map(from_report),
        Method::CorrDim => correlation_dimension(cloud, opts.corr).map(scalar),
        Method::KnnReg => knn_regression_dimension(table, opts.knn_lower(k), k).map(scalar),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepConfig {
    pub methods: Vec<Method>,
    pub k_min: usize,
    pub k_max: usize,
    pub options: MethodOptions,
    pub dedup: DedupPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub method: Method,
    /// `None` for methods that ignore `k`.
    pub k: Option<usize>,
    /// `None` when the cell failed.
    pub aggregate: Option<f64>,
    /// Unbiased across-point variance; `None` without pointwise estimates.
    pub variance: Option<f64>,
    pub converged: bool,
    pub seconds: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepMetadata {
    pub dataset: String,
    pub n: usize,
    pub dim: usize,
    pub rng: &'static str,
    pub seed: Option<u64>,
    pub config: SweepConfig,
    pub table_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub metadata: SweepMetadata,
}

impl SweepConfig {
    fn validate(&self, n: usize) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("no methods requested".into()));
        }
        if self.k_min < 2 {
            return Err(Error::InvalidK(format!(
                "k_min = {}, need k_min >= 2",
                self.k_min
            )));
        }
        if self.k_max < self.k_min {
            return Err(Error::InvalidK(format!(
                "k_max = {} is below k_min = {}",
                self.k_max, self.k_min
            )));
        }
        if self.k_max > n - 1 {
            return Err(Error::KTooLarge {
                k: self.k_max,
                max: n - 1,
            });
        }
        Ok(())
    }
}

/// Evaluates every `(method, k)` cell on one neighbor table built at
/// `k_max`. A failing cell becomes a row with no aggregate rather than
/// aborting the sweep. Rows come out in the requested method order, then by
/// ascending `k`.
pub fn sweep(cloud: &PointCloud, cfg: &SweepConfig, dataset: &str) -> Result<SweepResult> {
    cfg.validate(cloud.len())?;
    let mut methods = Vec::new();
    for &m in &cfg.methods {
        if !methods.contains(&m) {
            methods.push(m);
        }
    }

    let table_k = methods
        .iter()
        .filter(|m| m.uses_k())
        .map(|&m| {
            (cfg.k_min..=cfg.k_max)
                .map(|k| cfg.options.table_k(m, k))
                .max()
                .unwrap_or(0)
        })
        .max()
        .unwrap_or(0)
        .max(cfg.k_max)
        .min(cloud.len() - 1);
    let started = Instant::now();
    let table = build_neighbor_table(cloud, table_k, cfg.dedup)?;
    let table_seconds = started.elapsed().as_secs_f64();

    let cells: Vec<(Method, Option<usize>)> = methods
        .iter()
        .flat_map(|&m| {
            if m.uses_k() {
                (cfg.k_min..=cfg.k_max)
                    .map(|k| (m, Some(k)))
                    .collect::<Vec<_>>()
            } else {
                vec![(m, None)]
            }
        })
        .collect();

    let rows = cells
        .par_iter()
        .map(|&(method, k)| {
            let started = Instant::now();
            let result = run_method(method, cloud, &table, k.unwrap_or(0), &cfg.options);
            let seconds = started.elapsed().as_secs_f64();
            match result {
                Ok(out) => SweepRow {
                    method,
                    k,
                    aggregate: Some(out.aggregate),
                    variance: out.per_point_variance(),
                    converged: out.converged,
                    seconds,
                    error: None,
                },
                Err(e) => SweepRow {
                    method,
                    k,
                    aggregate: None,
                    variance: None,
                    converged: false,
                    seconds,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();

    let seed = match cfg.options.reg.init {
        Init::SeededUniform { seed } if methods.contains(&Method::RegMle) => Some(seed),
        _ => None,
    };
    Ok(SweepResult {
        rows,
        metadata: SweepMetadata {
            dataset: dataset.to_string(),
            n: cloud.len(),
            dim: cloud.dim(),
            rng: RNG_NAME,
            seed,
            config: cfg.clone(),
            table_seconds,
        },
    })
}

pub const SWEEP_CSV_HEADER: &str = "method,k,aggregate,variance,converged,seconds";

fn opt_real(v: Option<f64>) -> String {
    v.map(stats::fmt_real).unwrap_or_default()
}

impl SweepResult {
    /// Writes the figure table: one line per cell under [`SWEEP_CSV_HEADER`].
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{SWEEP_CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.method,
                r.k.map(|k| k.to_string()).unwrap_or_default(),
                opt_real(r.aggregate),
                opt_real(r.variance),
                r.converged,
                stats::fmt_real(r.seconds)
            )?;
        }
        out.flush()?;
        Ok(())
    }
}
