//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use idest::regularized::normalized_residual;
use idest::selftest::{random_orthogonal, rigid_motion, scaled};
use idest::{
    all_log_distance_ratios, brute_force_neighbor_table, build_neighbor_table,
    correlation_dimension, generate, inverse_mle_report, lb_estimate, lb_pointwise,
    quadratic_update, run_method, run_regularized, CorrDimConfig, DedupPolicy, GeneratorSpec,
    LbConfig, ManifoldKind, Method, MethodOptions, PointCloud, RegularizedConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Verdict {
    Verdict { passed, detail }
}

fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn table(cloud: &PointCloud, k: usize) -> idest::NeighborTable {
    build_neighbor_table(cloud, k, DedupPolicy::Error).unwrap()
}

fn knn_oracle() -> Verdict {
    let started = Instant::now();
    let mut worst_dist = 0.0f64;
    let mut index_mismatches = 0;
    for seed in 0..25u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + 37 * seed);
        let n = rng.random_range(20..=300);
        let d = rng.random_range(1..=10);
        let k = rng.random_range(1..=30.min(n - 1));
        let coords: Vec<f64> = if seed % 2 == 0 {
            (0..n * d).map(|_| rng.random::<f64>()).collect()
        } else {
            (0..n * d)
                .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal) * 10.0)
                .collect()
        };
        let cloud = PointCloud::new(coords, n, d).unwrap();
        let fast = table(&cloud, k);
        let slow = brute_force_neighbor_table(&cloud, k).unwrap();
        for i in 0..n {
            for (a, b) in fast.distances(i).iter().zip(slow.distances(i)) {
                worst_dist = worst_dist.max((a - b).abs());
            }
            if fast.indices(i) != slow.indices(i) {
                index_mismatches += 1;
            }
        }
    }
    let secs = started.elapsed().as_secs_f64();
    verdict(
        worst_dist <= 1e-12 && index_mismatches == 0 && secs < 10.0,
        format!(
            "25 clouds: max distance gap {worst_dist:e}, {index_mismatches} index rows differ, {secs:.2} s"
        ),
    )
}

fn zero_penalty() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let s = 10f64.powf(rng.random_range(-2.0..3.0));
        let k = rng.random_range(2..=100);
        let want = k as f64 / s;
        for _ in 0..3 {
            let m0 = 10f64.powf(rng.random_range(-2.0..2.0));
            worst = worst.max(rel_diff(quadratic_update(s, k, m0, 0.0).unwrap(), want));
        }
    }

    // the same reduction through one warm-started sweep over 100 neighborhoods
    let cloud = generate(&GeneratorSpec::new(
        ManifoldKind::Gaussian { dim: 4 },
        100,
        3,
    ))
    .unwrap();
    let k = 9;
    let t = table(&cloud, k);
    let cfg = RegularizedConfig {
        gamma0: 0.0,
        epsilon: 0.0,
        max_iter: 1,
        m_ceiling: 1e12,
        ..RegularizedConfig::new(k, 4)
    };
    let report = run_regularized(&t, cfg).unwrap();
    let mut worst_sweep = 0.0f64;
    for (p, &m) in report.per_point.iter().enumerate() {
        let lb = lb_pointwise(&t, p, k).unwrap();
        worst_sweep = worst_sweep.max(rel_diff(m, k as f64 / (k - 1) as f64 * lb));
    }
    verdict(
        worst <= 1e-12 && worst_sweep <= 1e-12,
        format!("max relative gap: root vs k/S {worst:e}, sweep vs k/(k-1)*LB {worst_sweep:e}"),
    )
}

fn root_residual() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    let mut errors = 0;
    for i in 0..100_000 {
        let s = 10f64.powf(rng.random_range(-4.0..4.0));
        let k = rng.random_range(2..=500);
        let m0 = 10f64.powf(rng.random_range(-3.0..3.0));
        let gamma = if i % 10 == 0 {
            0.0
        } else {
            10f64.powf(rng.random_range(-8.0..2.0))
        };
        match quadratic_update(s, k, m0, gamma) {
            Ok(m) if m > 0.0 && m.is_finite() => {
                worst = worst.max(normalized_residual(s, k, m0, gamma, m));
            }
            _ => errors += 1,
        }
    }
    verdict(
        worst <= 1e-9 && errors == 0,
        format!("1e5 tuples: max normalized residual {worst:e}, {errors} invalid roots"),
    )
}

struct GaussianGrid {
    cells: Vec<(u64, usize, f64, f64, f64)>,
    seconds: f64,
}

fn gaussian_grid() -> GaussianGrid {
    let started = Instant::now();
    let mut cells = Vec::new();
    for seed in 1..=5 {
        let cloud = generate(&GeneratorSpec::new(
            ManifoldKind::Gaussian { dim: 5 },
            1000,
            seed,
        ))
        .unwrap();
        let t = table(&cloud, 50);
        for k in [10, 20, 30, 40, 50] {
            let reg = run_regularized(&t, RegularizedConfig::new(k, 5)).unwrap();
            let lb = lb_estimate(&t, LbConfig::single(k)).unwrap();
            cells.push((
                seed,
                k,
                reg.aggregate,
                reg.per_point_variance(),
                lb.per_point_variance(),
            ));
        }
    }
    GaussianGrid {
        cells,
        seconds: started.elapsed().as_secs_f64(),
    }
}

fn gaussian_band(grid: &GaussianGrid) -> Verdict {
    let outside: Vec<String> = grid
        .cells
        .iter()
        .filter(|c| !(4.0..=6.0).contains(&c.2))
        .map(|c| format!("seed {} k {}: {:.3}", c.0, c.1, c.2))
        .collect();
    let lo = grid.cells.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
    let hi = grid
        .cells
        .iter()
        .map(|c| c.2)
        .fold(f64::NEG_INFINITY, f64::max);
    verdict(
        outside.is_empty() && grid.seconds < 60.0,
        format!(
            "aggregates in [{lo:.3}, {hi:.3}], {} of 25 outside [4, 6] {outside:?}, {:.2} s",
            outside.len(),
            grid.seconds
        ),
    )
}

fn variance_reduction(grid: &GaussianGrid) -> Verdict {
    let wins = grid.cells.iter().filter(|c| c.3 <= c.4).count();
    let ratio: f64 = grid.cells.iter().map(|c| c.4 / c.3).sum::<f64>() / grid.cells.len() as f64;
    verdict(
        wins * 5 >= grid.cells.len() * 4,
        format!("reg variance <= lb variance in {wins} of 25 cells, mean lb/reg ratio {ratio:.2}"),
    )
}

fn two_manifolds() -> Verdict {
    let started = Instant::now();
    let mut details = Vec::new();
    let mut ok = true;
    for kind in [ManifoldKind::SwissRoll, ManifoldKind::SCurve] {
        let cloud = generate(&GeneratorSpec::new(kind, 2000, 1)).unwrap();
        let t = table(&cloud, 30);
        let aggs: Vec<f64> = (10..=30)
            .map(|k| {
                run_regularized(&t, RegularizedConfig::new(k, 3))
                    .unwrap()
                    .aggregate
            })
            .collect();
        let inside = aggs.iter().filter(|a| (1.7..=2.3).contains(*a)).count();
        ok &= inside * 10 >= aggs.len() * 9;
        details.push(format!("{}: {inside} of 21 k in [1.7, 2.3]", kind.name()));
    }
    let secs = started.elapsed().as_secs_f64();
    verdict(
        ok && secs < 30.0,
        format!("{}, {secs:.2} s", details.join("; ")),
    )
}

fn helix() -> Verdict {
    let cloud = generate(&GeneratorSpec::new(ManifoldKind::Helix3d, 1000, 1)).unwrap();
    let t = table(&cloud, 25);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for k in 10..=25 {
        let values = [
            run_regularized(&t, RegularizedConfig::new(k, 3))
                .unwrap()
                .aggregate,
            lb_estimate(&t, LbConfig::single(k)).unwrap().aggregate,
            inverse_mle_report(&t, k).unwrap().aggregate,
        ];
        for v in values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    verdict(
        lo >= 0.8 && hi <= 1.3,
        format!("reg-mle, lb-mle, inv-mle over k 10..=25 span [{lo:.3}, {hi:.3}]"),
    )
}

/// Local maxima of a lightly smoothed histogram with 0.1-wide bins on
/// [0, 4), highest first.
fn histogram_modes(values: &[f64]) -> Vec<(f64, f64)> {
    const WIDTH: f64 = 0.1;
    const BINS: usize = 40;
    let mut counts = [0.0; BINS];
    for &v in values {
        let b = (v / WIDTH).floor();
        if b >= 0.0 && (b as usize) < BINS {
            counts[b as usize] += 1.0;
        }
    }
    let kernel = [1.0, 2.0, 3.0, 2.0, 1.0];
    let smooth: Vec<f64> = (0..BINS)
        .map(|i| {
            kernel
                .iter()
                .enumerate()
                .filter_map(|(j, w)| {
                    let idx = (i + j).checked_sub(2)?;
                    counts.get(idx).map(|c| w * c)
                })
                .sum::<f64>()
                / 9.0
        })
        .collect();
    let mut modes: Vec<(f64, f64)> = (1..BINS - 1)
        .filter(|&i| smooth[i] > smooth[i - 1] && smooth[i] >= smooth[i + 1])
        .map(|i| ((i as f64 + 0.5) * WIDTH, smooth[i]))
        .collect();
    modes.sort_by(|a, b| b.1.total_cmp(&a.1));
    modes
}

fn composite() -> Verdict {
    let cloud = generate(&GeneratorSpec::new(ManifoldKind::Composite, 20_000, 1)).unwrap();
    let t = table(&cloud, 15);
    let report = run_regularized(&t, RegularizedConfig::new(15, 3)).unwrap();
    let modes = histogram_modes(&report.per_point);
    let top: Vec<f64> = modes.iter().take(2).map(|m| m.0).collect();
    let near = |target: f64| top.iter().any(|m| (m - target).abs() <= 0.4);
    verdict(
        top.len() == 2 && near(1.0) && near(2.0),
        format!(
            "modes {:?}",
            modes
                .iter()
                .take(4)
                .map(|m| format!("{:.2} ({:.0})", m.0, m.1))
                .collect::<Vec<_>>()
        ),
    )
}

fn corr_dim() -> Verdict {
    let square = generate(&GeneratorSpec::new(
        ManifoldKind::UniformCube {
            intrinsic: 2,
            ambient: 2,
        },
        2000,
        1,
    ))
    .unwrap();
    let segment = generate(&GeneratorSpec::new(
        ManifoldKind::UniformCube {
            intrinsic: 1,
            ambient: 1,
        },
        2000,
        1,
    ))
    .unwrap();
    let a = correlation_dimension(&square, CorrDimConfig::default()).unwrap();
    let b = correlation_dimension(&segment, CorrDimConfig::default()).unwrap();
    verdict(
        (1.8..=2.2).contains(&a) && (0.9..=1.1).contains(&b),
        format!("unit square {a:.4}, unit segment {b:.4}"),
    )
}

fn gamma_statistic() -> Verdict {
    let cloud = generate(&GeneratorSpec::new(
        ManifoldKind::UniformCube {
            intrinsic: 2,
            ambient: 2,
        },
        5000,
        1,
    ))
    .unwrap();
    let k = 20;
    let sums = all_log_distance_ratios(&table(&cloud, k), k).unwrap();
    let mean = 2.0 * sums.iter().sum::<f64>() / sums.len() as f64;
    let gap = (mean - 19.0).abs() / 19.0;
    verdict(
        gap <= 0.05,
        format!("mean 2 S = {mean:.4}, {:.2}% from 19", 100.0 * gap),
    )
}

fn invariance() -> Verdict {
    let cloud = generate(&GeneratorSpec::new(ManifoldKind::SwissRoll, 1000, 5)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let rot = random_orthogonal(3, &mut rng);
    let shift: Vec<f64> = (0..3).map(|_| rng.random_range(-100.0..100.0)).collect();
    let variants = [
        (
            "rotation+translation",
            rigid_motion(&cloud, &rot, &shift).unwrap(),
        ),
        ("scale 0.01", scaled(&cloud, 0.01).unwrap()),
        ("scale 1", scaled(&cloud, 1.0).unwrap()),
        ("scale 100", scaled(&cloud, 100.0).unwrap()),
    ];
    let k = 15;
    let opts = MethodOptions::new(3);
    let base_table = table(&cloud, k);
    let mut worst = 0.0f64;
    let mut worst_at = String::new();
    for method in Method::ALL {
        let base = run_method(method, &cloud, &base_table, k, &opts).unwrap();
        for (label, v) in &variants {
            let out = run_method(method, v, &table(v, k), k, &opts).unwrap();
            let mut gap = rel_diff(base.aggregate, out.aggregate);
            if let (Some(a), Some(b)) = (&base.per_point, &out.per_point) {
                gap = a
                    .iter()
                    .zip(b)
                    .map(|(x, y)| rel_diff(*x, *y))
                    .fold(gap, f64::max);
            }
            if gap > worst {
                worst = gap;
                worst_at = format!("{method}, {label}");
            }
        }
    }
    verdict(
        worst <= 1e-9,
        format!("max relative change {worst:e} ({worst_at}) over 5 estimators and 4 transforms"),
    )
}

fn run_cli(args: &[&str], dir: &Path, threads: &str) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_idest"))
        .args(args)
        .current_dir(dir)
        .env("IDEST_THREADS", threads)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(String::from_utf8_lossy(&out.stderr).into_owned())
    }
}

fn without_seconds(path: &Path) -> String {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head))
        .collect::<Vec<_>>()
        .join("\n")
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let sweep_args = |out: &'static str| {
        vec![
            "sweep",
            "roll.csv",
            "--methods",
            "reg-mle,lb-mle,inv-mle,corr-dim,knn-reg",
            "--k-min",
            "8",
            "--k-max",
            "20",
            "--init",
            "uniform",
            "--init-seed",
            "3",
            "-o",
            out,
        ]
    };
    let steps: [(Vec<&str>, &str); 4] = [
        (
            vec![
                "gen",
                "swiss-roll",
                "--n",
                "1500",
                "--seed",
                "4",
                "--noise",
                "0.05",
                "-o",
                "roll.csv",
            ],
            "1",
        ),
        (
            vec![
                "gen",
                "swiss-roll",
                "--n",
                "1500",
                "--seed",
                "4",
                "--noise",
                "0.05",
                "-o",
                "roll2.csv",
            ],
            "4",
        ),
        (sweep_args("a.csv"), "1"),
        (sweep_args("b.csv"), "4"),
    ];
    for (args, threads) in &steps {
        if let Err(e) = run_cli(args, d, threads) {
            return verdict(false, format!("`idest {}` failed: {e}", args.join(" ")));
        }
    }
    let gen_same =
        std::fs::read(d.join("roll.csv")).unwrap() == std::fs::read(d.join("roll2.csv")).unwrap();
    let a = without_seconds(&d.join("a.csv"));
    let b = without_seconds(&d.join("b.csv"));
    let rows = a.lines().count() - 1;
    verdict(
        gen_same && a == b && rows == 4 * 13 + 1,
        format!(
            "gen identical: {gen_same}; sweep on 1 vs 4 threads identical: {}; {rows} rows",
            a == b
        ),
    )
}

type Criterion<'a> = Box<dyn Fn() -> Verdict + 'a>;

fn main() {
    let started = Instant::now();
    let grid = catch_unwind(gaussian_grid).ok();
    let grid_ref = grid.as_ref();
    let criteria: Vec<(&str, Criterion)> = vec![
        ("kNN oracle equivalence", Box::new(knn_oracle)),
        ("zero-penalty reduction", Box::new(zero_penalty)),
        ("root residual", Box::new(root_residual)),
        (
            "5-D Gaussian bias band",
            Box::new(move || gaussian_band(grid_ref.expect("grid run panicked"))),
        ),
        (
            "variance reduction",
            Box::new(move || variance_reduction(grid_ref.expect("grid run panicked"))),
        ),
        ("swiss roll and S-curve", Box::new(two_manifolds)),
        ("helix", Box::new(helix)),
        ("composite manifold modes", Box::new(composite)),
        ("correlation dimension", Box::new(corr_dim)),
        ("log-ratio Gamma statistic", Box::new(gamma_statistic)),
        ("invariance", Box::new(invariance)),
        ("sweep determinism", Box::new(determinism)),
    ];

    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        failures += usize::from(!v.passed);
        let status = if v.passed { "PASS" } else { "FAIL" };
        println!("{status} [{:>2}] {name}: {}", i + 1, v.detail);
    }
    println!(
        "{} of {} criteria passed in {:.1} s",
        criteria.len() - failures,
        criteria.len(),
        started.elapsed().as_secs_f64()
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
