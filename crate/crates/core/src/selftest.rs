//! Quick internal consistency checks: oracle equivalence of the neighbor
//! search, the zero-penalty reduction of the regularized update, and
//! invariance of every estimator under rigid motions and scaling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::baseline::lb_pointwise;
use crate::cloud::PointCloud;
use crate::datasets::{generate, GeneratorSpec, ManifoldKind};
use crate::error::Result;
use crate::neighbors::{brute_force_neighbor_table, build_neighbor_table, DedupPolicy};
use crate::regularized::{run_regularized, RegularizedConfig};
use crate::sweep::{run_method, Method, MethodOptions};

#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Random orthogonal `d × d` matrix (row-major) by Gram–Schmidt on Gaussian
/// columns.
pub fn random_orthogonal(d: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(d);
    while q.len() < d {
        let mut v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        for u in &q {
            let dot: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
            for (vi, ui) in v.iter_mut().zip(u) {
                *vi -= dot * ui;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            q.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    q.concat()
}

/// `x ↦ R x + t`.
pub fn rigid_motion(cloud: &PointCloud, rotation: &[f64], shift: &[f64]) -> Result<PointCloud> {
    let d = cloud.dim();
    cloud.map_points(d, |p, out| {
        for (i, o) in out.iter_mut().enumerate() {
            let row = &rotation[i * d..(i + 1) * d];
            *o = row.iter().zip(p).map(|(r, x)| r * x).sum::<f64>() + shift[i];
        }
    })
}

pub fn scaled(cloud: &PointCloud, c: f64) -> Result<PointCloud> {
    cloud.map_points(cloud.dim(), |p, out| {
        for (o, x) in out.iter_mut().zip(p) {
            *o = c * x;
        }
    })
}

fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn oracle_check() -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut mismatches = 0;
    for _ in 0..8 {
        let n = rng.random_range(20..200);
        let d = rng.random_range(1..8);
        let coords = (0..n * d).map(|_| rng.random::<f64>()).collect();
        let cloud = PointCloud::new(coords, n, d)?;
        let k = rng.random_range(1..n.min(25));
        let fast = build_neighbor_table(&cloud, k, DedupPolicy::Error)?;
        let slow = brute_force_neighbor_table(&cloud, k)?;
        if fast != slow {
            mismatches += 1;
        }
    }
    Ok(Check {
        name: "knn oracle equivalence".into(),
        passed: mismatches == 0,
        detail: format!("{mismatches} of 8 random clouds differ"),
    })
}

fn zero_penalty_check() -> Result<Check> {
    let cloud = generate(&GeneratorSpec::new(
        ManifoldKind::Gaussian { dim: 3 },
        300,
        5,
    ))?;
    let k = 12;
    let table = build_neighbor_table(&cloud, k, DedupPolicy::Error)?;
    let cfg = RegularizedConfig {
        gamma0: 0.0,
        epsilon: 0.0,
        max_iter: 1,
        m_ceiling: 1e9,
        ..RegularizedConfig::new(k, 3)
    };
    let report = run_regularized(&table, cfg)?;
    let mut worst = 0.0f64;
    for (p, &m) in report.per_point.iter().enumerate() {
        let expected = lb_pointwise(&table, p, k)? * k as f64 / (k - 1) as f64;
        worst = worst.max(rel_diff(m, expected));
    }
    Ok(Check {
        name: "zero-penalty reduction".into(),
        passed: worst <= 1e-12,
        detail: format!("max relative deviation from k/S: {worst:e}"),
    })
}

fn invariance_check() -> Result<Check> {
    let cloud = generate(&GeneratorSpec::new(ManifoldKind::SwissRoll, 400, 11))?;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let rot = random_orthogonal(3, &mut rng);
    let shift: Vec<f64> = (0..3).map(|_| rng.random_range(-50.0..50.0)).collect();
    let variants = [
        rigid_motion(&cloud, &rot, &shift)?,
        scaled(&cloud, 0.01)?,
        scaled(&cloud, 100.0)?,
    ];
    let k = 12;
    let opts = MethodOptions::new(3);
    let base_table = build_neighbor_table(&cloud, k, DedupPolicy::Error)?;
    let mut worst = 0.0f64;
    for method in Method::ALL {
        let base = run_method(method, &cloud, &base_table, k, &opts)?;
        for v in &variants {
            let t = build_neighbor_table(v, k, DedupPolicy::Error)?;
            let other = run_method(method, v, &t, k, &opts)?;
            worst = worst.max(rel_diff(base.aggregate, other.aggregate));
            if let (Some(a), Some(b)) = (&base.per_point, &other.per_point) {
                for (x, y) in a.iter().zip(b) {
                    worst = worst.max(rel_diff(*x, *y));
                }
            }
        }
    }
    Ok(Check {
        name: "rigid-motion and scaling invariance".into(),
        passed: worst <= 1e-9,
        detail: format!("max relative change over all estimators: {worst:e}"),
    })
}

type CheckFn = fn() -> Result<Check>;

/// Runs every check; an error inside a check counts as a failure.
pub fn run_selftest() -> Vec<Check> {
    let checks: [(&str, CheckFn); 3] = [
        ("knn oracle equivalence", oracle_check),
        ("zero-penalty reduction", zero_penalty_check),
        ("rigid-motion and scaling invariance", invariance_check),
    ];
    checks
        .iter()
        .map(|(name, f)| {
            f().unwrap_or_else(|e| Check {
                name: name.to_string(),
                passed: false,
                detail: format!("error: {e}"),
            })
        })
        .collect()
}
