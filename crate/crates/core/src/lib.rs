//! Intrinsic dimension estimation from nearest-neighbor distances.
//!
//! The main estimator ([`run_regularized`]) refines per-point maximum
//! likelihood estimates with a divergence penalty that pulls each estimate
//! toward the mean of its neighbors. The pointwise likelihood estimator, its
//! inverse-averaging variant, the correlation dimension and a k-NN distance
//! regression are included for comparison, along with synthetic manifold
//! generators and a sweep harness.
//!
//! ```
//! use idest::{build_neighbor_table, generate, run_regularized, DedupPolicy, GeneratorSpec,
//!             ManifoldKind, RegularizedConfig};
//!
//! let cloud = generate(&GeneratorSpec::new(ManifoldKind::SwissRoll, 800, 1)).unwrap();
//! let table = build_neighbor_table(&cloud, 15, DedupPolicy::Error).unwrap();
//! let report = run_regularized(&table, RegularizedConfig::new(15, cloud.dim())).unwrap();
//! assert!((report.aggregate - 2.0).abs() < 0.5);
//! ```

// `!(x > 0.0)` is used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod cloud;
pub mod datasets;
pub mod error;
pub mod neighbors;
pub mod regularized;
pub mod report;
pub mod selftest;
pub mod stats;
pub mod sweep;

pub use baseline::{
    correlation_dimension, correlation_integral, inverse_mle_estimate, inverse_mle_report,
    knn_regression_dimension, lb_estimate, lb_pointwise, CorrDimConfig, LbConfig,
};
pub use cloud::PointCloud;
pub use datasets::{
    generate, load_csv, read_csv, save_csv, write_csv, GeneratorSpec, HeaderMode, ManifoldKind,
};
pub use error::{Error, Result};
pub use neighbors::{
    all_log_distance_ratios, brute_force_neighbor_table, build_neighbor_table, log_distance_ratios,
    DedupPolicy, NeighborTable,
};
pub use regularized::{
    divergence, neighborhood_mean, quadratic_update, run_regularized, GammaSchedule, Init,
    RegularizedConfig, RegularizedSolver, RegularizedState, UpdateOrder,
};
pub use report::EstimateReport;
pub use sweep::{run_method, sweep, Method, MethodOptions, Outcome, SweepConfig, SweepResult};
