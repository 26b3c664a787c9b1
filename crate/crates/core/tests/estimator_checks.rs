//! Estimator-level checks: index exactness on a large torus cloud,
//! cross-worker determinism, a property test for the radius query, and the
//! circle bias example against its Monte Carlo replication oracle.

use msmf_core::estimator::{estimate_batch, SpatialIndex};
use msmf_core::geometry::AnalyticManifold;
use msmf_core::kernel::KernelConfig;
use msmf_core::numeric::dist2;
use msmf_core::sampling::{
    add_noise, sample_test_points_on_manifold, sample_uniform, NoiseConfig, PointCloud, Provenance,
};
use proptest::prelude::*;

#[test]
fn radius_query_matches_linear_scan_on_torus_cloud() {
    let m = AnalyticManifold::torus(2.0, 1.0);
    let latent = sample_uniform(&m, 100_000, 3);
    let cfg = NoiseConfig::new(0.1, &m).unwrap();
    let cloud = add_noise(&latent, &cfg, 4).unwrap();
    let k = KernelConfig::hard(0.1, 3).unwrap();
    let idx = SpatialIndex::build(&cloud, k.support_radius());
    let queries = sample_test_points_on_manifold(&m, 50, 5);
    for q in queries.iter_points() {
        let got = idx.radius_query(&cloud, q, k.support_radius());
        let rho2 = k.support_radius() * k.support_radius();
        let want: Vec<u32> = (0..cloud.len())
            .filter(|&i| dist2(cloud.point(i), q) <= rho2)
            .map(|i| i as u32)
            .collect();
        assert_eq!(got, want);
    }
}

#[test]
fn batch_bit_identical_across_worker_counts() {
    let m = AnalyticManifold::circle(10.0);
    let latent = sample_uniform(&m, 50_000, 17);
    let cfg = NoiseConfig::new(0.1, &m).unwrap();
    let cloud = add_noise(&latent, &cfg, 18).unwrap();
    let k = KernelConfig::hard(0.1, 2).unwrap();
    let idx = SpatialIndex::build(&cloud, k.support_radius());
    let test = msmf_core::sample_test_points(&m, &cfg, 1000, 19).unwrap();

    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| estimate_batch(&idx, &cloud, &test, &k))
    };
    let one = run(1);
    let eight = run(8);
    assert_eq!(one.len(), eight.len());
    for (a, b) in one.iter().zip(&eight) {
        assert_eq!(a, b); // bit-identical, not approximately equal
    }
}

/// Monte Carlo replication oracle for the on-manifold bias example:
/// the residual F(z) - pi(z) - (d/2) H sigma^2, averaged as a vector over
/// 100 test points, has norm well under 5e-3 at N = 3e4, sigma = 0.1.
#[test]
fn circle_bias_example_seed_42() {
    let m = AnalyticManifold::circle(10.0);
    let sigma = 0.1;
    let latent = sample_uniform(&m, 30_000, 42);
    let cfg = NoiseConfig::new(sigma, &m).unwrap();
    let cloud = add_noise(&latent, &cfg, msmf_core::derive_seed(42, 1, 0)).unwrap();
    let k = KernelConfig::hard(sigma, 2).unwrap();
    let idx = SpatialIndex::build(&cloud, k.support_radius());
    let test = sample_test_points_on_manifold(&m, 100, msmf_core::derive_seed(42, 2, 0));
    let results = estimate_batch(&idx, &cloud, &test, &k);
    let mut mean_resid = [0.0f64; 2];
    let mut count = 0usize;
    for (i, r) in results.iter().enumerate() {
        let r = r.as_ref().expect("dense cloud: no empty neighborhoods");
        let z = test.point(i);
        let p = m.project(z).unwrap();
        let h = m.mean_curvature_vector(&p).unwrap();
        for c in 0..2 {
            mean_resid[c] += r.fz[c] - p[c] - 0.5 * sigma * sigma * h[c];
        }
        count += 1;
    }
    for v in &mut mean_resid {
        *v /= count as f64;
    }
    let norm = (mean_resid[0].powi(2) + mean_resid[1].powi(2)).sqrt();
    assert!(norm <= 5e-3, "mean residual norm {norm}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// Index exactness against the linear scan on random instances.
    #[test]
    fn prop_radius_query_equals_linear_scan(
        n in 1usize..120,
        dim in 2usize..5,
        cell in 0.05f64..2.0,
        rho in 0.0f64..2.5,
        seed in any::<u64>(),
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<f64> = (0..n * dim).map(|_| rng.random_range(-3.0..3.0)).collect();
        let cloud = PointCloud::from_rows(dim, rows, Provenance::Noisy, 0);
        let idx = SpatialIndex::build(&cloud, cell);
        let z: Vec<f64> = (0..dim).map(|_| rng.random_range(-3.5..3.5)).collect();
        let got = idx.radius_query(&cloud, &z, rho);
        let want: Vec<u32> = (0..n)
            .filter(|&i| dist2(cloud.point(i), &z) <= rho * rho)
            .map(|i| i as u32)
            .collect();
        prop_assert_eq!(got, want);
    }
}
