use idest::selftest::{random_orthogonal, rigid_motion, scaled};
use idest::{
    brute_force_neighbor_table, build_neighbor_table, generate, read_csv, run_method, sweep,
    write_csv, DedupPolicy, GeneratorSpec, HeaderMode, ManifoldKind, Method, MethodOptions,
    PointCloud, SweepConfig,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn cloud_strategy() -> impl Strategy<Value = PointCloud> {
    (2usize..60, 1usize..6).prop_flat_map(|(n, d)| {
        prop::collection::vec(-1e3f64..1e3, n * d)
            .prop_map(move |coords| PointCloud::new(coords, n, d).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tree_matches_brute_force(cloud in cloud_strategy(), k_frac in 0.0f64..1.0) {
        let k = 1 + ((cloud.len() - 2) as f64 * k_frac) as usize;
        let fast = build_neighbor_table(&cloud, k, DedupPolicy::Error);
        let slow = brute_force_neighbor_table(&cloud, k);
        match (fast, slow) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "disagree: {:?} vs {:?}", a.is_ok(), b.is_ok()),
        }
    }

    #[test]
    fn lattice_ties_match_brute_force(n in 5usize..40, seed in any::<u64>()) {
        // small integer grid: many equal distances, no duplicates
        let side = 8usize;
        let mut cells: Vec<usize> = (0..side * side).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rand::seq::SliceRandom::shuffle(cells.as_mut_slice(), &mut rng);
        let rows: Vec<[f64; 2]> = cells[..n]
            .iter()
            .map(|c| [(c % side) as f64, (c / side) as f64])
            .collect();
        let cloud = PointCloud::from_rows(&rows).unwrap();
        let k = (n - 1).min(12);
        prop_assert_eq!(
            build_neighbor_table(&cloud, k, DedupPolicy::Error).unwrap(),
            brute_force_neighbor_table(&cloud, k).unwrap()
        );
    }

    #[test]
    fn csv_round_trip_is_exact(cloud in cloud_strategy()) {
        let mut buf = Vec::new();
        write_csv(&cloud, &mut buf).unwrap();
        let back = read_csv(buf.as_slice(), HeaderMode::No).unwrap();
        prop_assert_eq!(back.as_slice(), cloud.as_slice());
        prop_assert_eq!(back.dim(), cloud.dim());
    }
}

#[test]
fn estimates_survive_isometries_and_scaling() {
    let cloud = generate(&GeneratorSpec::new(ManifoldKind::SCurve, 600, 2)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let rot = random_orthogonal(3, &mut rng);
    let moved = rigid_motion(&cloud, &rot, &[3.0, -7.0, 0.5]).unwrap();
    let opts = MethodOptions::new(3);
    for other in [
        moved,
        scaled(&cloud, 0.01).unwrap(),
        scaled(&cloud, 100.0).unwrap(),
    ] {
        for method in Method::ALL {
            let a = run_method(
                method,
                &cloud,
                &build_neighbor_table(&cloud, 12, DedupPolicy::Error).unwrap(),
                12,
                &opts,
            )
            .unwrap();
            let b = run_method(
                method,
                &other,
                &build_neighbor_table(&other, 12, DedupPolicy::Error).unwrap(),
                12,
                &opts,
            )
            .unwrap();
            let rel = (a.aggregate - b.aggregate).abs() / a.aggregate.abs();
            assert!(rel < 1e-9, "{method}: {} vs {}", a.aggregate, b.aggregate);
        }
    }
}

#[test]
fn shared_table_matches_per_k_rebuild() {
    let cloud = generate(&GeneratorSpec::new(ManifoldKind::Helix3d, 500, 8)).unwrap();
    let opts = MethodOptions::new(3);
    let cfg = SweepConfig {
        methods: vec![
            Method::RegMle,
            Method::LbMle,
            Method::InvMle,
            Method::KnnReg,
        ],
        k_min: 6,
        k_max: 14,
        options: opts,
        dedup: DedupPolicy::Error,
    };
    let result = sweep(&cloud, &cfg, "helix").unwrap();
    assert_eq!(result.rows.len(), 4 * 9);
    for row in &result.rows {
        let k = row.k.unwrap();
        let own = build_neighbor_table(&cloud, k, DedupPolicy::Error).unwrap();
        let direct = run_method(row.method, &cloud, &own, k, &opts).unwrap();
        assert_eq!(
            row.aggregate,
            Some(direct.aggregate),
            "{} k={k}",
            row.method
        );
    }
}
