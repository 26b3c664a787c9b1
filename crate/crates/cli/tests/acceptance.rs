//! Acceptance suite: one test per criterion, each printing a PASS/FAIL
//! line with the measured quantities (run with `--nocapture` to see the
//! lines for passing tests).
//!
//! Criteria 5 and 6 assert bands that the single-step estimator cannot
//! meet at the pinned sample sizes (a one-step kernel average contracts a
//! normal offset v only to ~0.45 v when the bandwidth is proportional to
//! sigma, and the per-seed bias estimate carries an irreducible
//! sigma/sqrt(N) cloud-noise floor). They are expected to fail; the
//! assertions state the bands faithfully and the printed details carry the
//! measured values.

use msmf_cli::{local_average_residual, median_sup, run_sweep, SweepConfig};
use msmf_core::estimator::{estimate, estimate_batch, SpatialIndex};
use msmf_core::geometry::AnalyticManifold;
use msmf_core::kernel::{bandwidth_constant, KernelConfig};
use msmf_core::metrics::loglog_slope;
use msmf_core::numeric::{dist2, gauss_legendre_on};
use msmf_core::population::{density_expansion, DensityOracle, PopulationDensity};
use msmf_core::sampling::{
    add_noise, sample_test_points, sample_uniform, NoiseConfig, PointCloud, Provenance,
};
use msmf_core::{derive_seed, sup_distance_to_manifold};
use std::time::Instant;

fn report(id: u32, name: &str, pass: bool, detail: &str) {
    println!(
        "ACCEPTANCE {id:02} {name}: {detail} -> {}",
        if pass { "PASS" } else { "FAIL" }
    );
}

/// Exact Gamma at integer/half-integer arguments by the recurrence from
/// Gamma(1) = 1 and Gamma(1/2) = sqrt(pi); independent of the
/// series/continued-fraction incomplete-gamma code under test.
fn gamma_half_integer(two_s: u32) -> f64 {
    let mut val = if two_s.is_multiple_of(2) {
        1.0
    } else {
        std::f64::consts::PI.sqrt()
    };
    let mut k = if two_s.is_multiple_of(2) { 2 } else { 1 };
    while k + 2 <= two_s {
        val *= k as f64 / 2.0;
        k += 2;
    }
    val
}

#[test]
fn acceptance_01_bandwidth_constant() {
    let started = Instant::now();
    // Oracle: A and B reduced to radial integrals with the exact sphere
    // area 2 pi^(D/2) / Gamma(D/2), radial part by Gauss-Legendre.
    let (xs, ws) = gauss_legendre_on(128, 0.0, 1.0);
    let mut worst_rel: f64 = 0.0;
    for dim in 1..=10usize {
        let d = dim as f64;
        let surf = 2.0 * std::f64::consts::PI.powf(d / 2.0) / gamma_half_integer(dim as u32);
        let pref = (2.0 * std::f64::consts::PI).powf(-d / 2.0);
        let mut a = 0.0;
        let mut b = 0.0;
        for (&x, &w) in xs.iter().zip(&ws) {
            let f = (-x * x).exp() * w;
            a += x.powf(d - 1.0) * f;
            b += x.powf(d + 1.0) * f / d;
        }
        let a = pref * surf * a;
        let b = pref * surf * b;
        let oracle = (a / (2.0 * b)).sqrt();
        let got = bandwidth_constant(dim);
        worst_rel = worst_rel.max(((got - oracle) / oracle).abs());
    }
    let elapsed = started.elapsed();
    let pass = worst_rel <= 1e-6 && elapsed.as_secs_f64() < 1.0;
    report(
        1,
        "bandwidth-constant",
        pass,
        &format!(
            "max rel err vs quadrature oracle over D=1..10 = {worst_rel:.3e} (bound 1e-6), {:.0} ms (budget 1 s)",
            elapsed.as_secs_f64() * 1e3
        ),
    );
    assert!(pass);
}

#[test]
fn acceptance_02_local_average_rate() {
    let started = Instant::now();
    let radii = [0.2, 0.1, 0.05];
    let pairs: Vec<(f64, f64)> = radii
        .iter()
        .map(|&r| (r, local_average_residual(r)))
        .collect();
    let slope = loglog_slope(&pairs).unwrap();
    let elapsed = started.elapsed();
    let pass = (3.5..=4.5).contains(&slope) && elapsed.as_secs() < 30;
    report(
        2,
        "local-average-rate",
        pass,
        &format!(
            "log-log slope = {slope:.3} over r in {radii:?} (band 4 +- 0.5), residuals {:?}, {:.1} s (budget 30 s)",
            pairs.iter().map(|p| p.1).collect::<Vec<_>>(),
            elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn acceptance_03_density_expansion_ratio() {
    let started = Instant::now();
    let m = AnalyticManifold::circle(10.0);
    let sigma = 0.05;
    let oracle = DensityOracle::new(m, sigma, 512).unwrap();
    let noise = NoiseConfig::new(sigma, &m).unwrap();
    let tube = sample_test_points(&m, &noise, 100, 303).unwrap();
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for y in tube.iter_points() {
        let ratio = oracle.density(y) / density_expansion(&m, y, sigma).unwrap();
        lo = lo.min(ratio);
        hi = hi.max(ratio);
    }
    let elapsed = started.elapsed();
    let pass = lo >= 0.98 && hi <= 1.02 && elapsed.as_secs() < 60;
    report(
        3,
        "density-expansion-ratio",
        pass,
        &format!(
            "ratio range [{lo:.6}, {hi:.6}] over 100 tube points (band [0.98, 1.02]), {:.1} s (budget 60 s)",
            elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn acceptance_04_score_expansion() {
    let started = Instant::now();
    let m = AnalyticManifold::circle(10.0);
    let on = [10.0, 0.0];
    let h_mag = 0.5 / 10.0;
    let mut pts = Vec::new();
    let mut at_005 = (false, 0.0);
    for &sigma in &[0.1, 0.05, 0.025] {
        let oracle = DensityOracle::new(m, sigma, 512).unwrap();
        let s = oracle.score(&on);
        let err = ((s[0] + h_mag).powi(2) + s[1].powi(2)).sqrt();
        pts.push((sigma, err));
        if sigma == 0.05 {
            let mag = (s[0].powi(2) + s[1].powi(2)).sqrt();
            at_005 = (s[0] < 0.0, (mag - h_mag).abs() / h_mag);
        }
    }
    let slope = loglog_slope(&pts).unwrap();
    let elapsed = started.elapsed();
    let pass = slope >= 1.5 && at_005.0 && at_005.1 <= 0.10 && elapsed.as_secs() < 60;
    report(
        4,
        "score-expansion",
        pass,
        &format!(
            "remainder slope = {slope:.3} (need >= 1.5); at sigma=0.05 inward={} rel mag err={:.2e} (bound 0.10); {:.1} s (budget 60 s)",
            at_005.0, at_005.1, elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn acceptance_05_quadratic_decay() {
    let started = Instant::now();
    let sigmas = vec![0.5, 0.3, 0.1, 0.08, 0.05];
    let mut cfg = SweepConfig::new(AnalyticManifold::circle(10.0));
    cfg.sigmas = sigmas.clone();
    cfg.ns = vec![30_000];
    cfg.n0 = 100;
    cfg.seeds = 50;
    cfg.base_seed = 42;
    let out = run_sweep(&cfg).unwrap();
    let pairs: Vec<(f64, f64)> = sigmas
        .iter()
        .map(|&s| (s, median_sup(&out.rows, s, 30_000)))
        .collect();
    let slope = loglog_slope(&pairs).unwrap();
    let elapsed = started.elapsed();
    let pass = (1.6..=2.4).contains(&slope) && elapsed.as_secs() < 600;
    report(
        5,
        "quadratic-decay",
        pass,
        &format!(
            "log-log slope of median sup_error vs sigma = {slope:.3} (band [1.6, 2.4]); medians {:?}; {:.0} s (budget 600 s). A single kernel step contracts a normal offset v only to ~0.45 v at bandwidth proportional to sigma, so the sup over the [sigma/2, 2 sigma] test band scales linearly in sigma",
            pairs.iter().map(|p| p.1).collect::<Vec<_>>(),
            elapsed.as_secs_f64()
        ),
    );
    assert!(pass, "slope {slope:.3} outside [1.6, 2.4]");
}

#[test]
fn acceptance_06_bias_law() {
    let started = Instant::now();
    // circle part: on-manifold test points isolate the curvature bias
    let mut cfg = SweepConfig::new(AnalyticManifold::circle(10.0));
    cfg.sigmas = vec![0.1];
    cfg.ns = vec![30_000];
    cfg.n0 = 2000;
    cfg.seeds = 50;
    cfg.base_seed = 2025;
    cfg.test_on_manifold = true;
    let out = run_sweep(&cfg).unwrap();
    let grand_nb: f64 =
        out.rows.iter().map(|r| r.mean_normal_bias).sum::<f64>() / out.rows.len() as f64;
    let positive = out.rows.iter().filter(|r| r.mean_normal_bias > 0.0).count();
    let mean_tang: f64 =
        out.rows.iter().map(|r| r.mean_tangential).sum::<f64>() / out.rows.len() as f64;

    // sphere part
    let mut scfg = SweepConfig::new(AnalyticManifold::sphere(5.0));
    scfg.sigmas = vec![0.1];
    scfg.ns = vec![100_000];
    scfg.n0 = 1000;
    scfg.seeds = 10;
    scfg.base_seed = 2026;
    scfg.test_on_manifold = true;
    let sout = run_sweep(&scfg).unwrap();
    let sphere_nb: f64 =
        sout.rows.iter().map(|r| r.mean_normal_bias).sum::<f64>() / sout.rows.len() as f64;

    let elapsed = started.elapsed();
    let band_ok = (2.5e-4..=7.5e-4).contains(&grand_nb);
    let sign_ok = positive as f64 >= 0.95 * out.rows.len() as f64;
    let tang_ok = mean_tang < grand_nb;
    let sphere_ok = (1.0e-3..=3.0e-3).contains(&sphere_nb);
    let budget_ok = elapsed.as_secs() < 600;
    report(
        6,
        "bias-law",
        band_ok && sign_ok && tang_ok && sphere_ok && budget_ok,
        &format!(
            "circle grand mean normal bias = {grand_nb:.3e} in [2.5e-4, 7.5e-4]: {band_ok}; positive in {positive}/{} seeds (need >= 95%): {sign_ok}; mean tangential {mean_tang:.3e} < normal: {tang_ok}; sphere grand mean = {sphere_nb:.3e} in [1e-3, 3e-3]: {sphere_ok}; {:.0} s (budget 600 s). The per-seed sign test carries an irreducible cloud-noise floor sd ~ 1.14 sigma/sqrt(N) = 6.6e-4, the size of the 5e-4 signal itself",
            out.rows.len(),
            elapsed.as_secs_f64()
        ),
    );
    assert!(band_ok, "circle grand mean {grand_nb:.3e} outside band");
    assert!(tang_ok, "tangential {mean_tang:.3e} >= normal {grand_nb:.3e}");
    assert!(sphere_ok, "sphere grand mean {sphere_nb:.3e} outside band");
    assert!(budget_ok);
    assert!(
        sign_ok,
        "normal bias positive in only {positive}/{} seeds",
        out.rows.len()
    );
}

#[test]
fn acceptance_07_monotone_in_n() {
    let started = Instant::now();
    let ns = vec![300usize, 3_000, 30_000, 300_000];
    let mut cfg = SweepConfig::new(AnalyticManifold::circle(10.0));
    cfg.sigmas = vec![0.1];
    cfg.ns = ns.clone();
    cfg.n0 = 100;
    cfg.seeds = 50;
    cfg.base_seed = 7;
    let out = run_sweep(&cfg).unwrap();
    let meds: Vec<f64> = ns.iter().map(|&n| median_sup(&out.rows, 0.1, n)).collect();
    let strictly_dec = meds.windows(2).all(|w| w[1] < w[0]);
    let elapsed = started.elapsed();
    let pass = strictly_dec && elapsed.as_secs() < 900;
    report(
        7,
        "monotone-in-n",
        pass,
        &format!(
            "median sup_error over N {ns:?} = {meds:?}, strictly decreasing: {strictly_dec}; {:.0} s (budget 900 s)",
            elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn acceptance_08_curvature_trend() {
    let started = Instant::now();
    let radii = [1.0, 3.0, 5.0, 7.0, 9.0, 11.0];
    let mut meds = Vec::new();
    for &r in &radii {
        let mut cfg = SweepConfig::new(AnalyticManifold::circle(r));
        cfg.sigmas = vec![0.2];
        cfg.ns = vec![300_000];
        cfg.n0 = 100;
        cfg.seeds = 50;
        cfg.base_seed = 8;
        cfg.eps_frac = 0.1; // kappa = 1 needs the wide-tube sigma_0 bound
        let out = run_sweep(&cfg).unwrap();
        meds.push(median_sup(&out.rows, 0.2, 300_000));
    }
    // weakly decreasing, operationalized for Monte Carlo medians: each step
    // may tick up at most 0.5% (median flutter at 50 seeds), and the whole
    // sweep must drop by at least 5%
    let steps_ok = meds.windows(2).all(|w| w[1] <= w[0] * 1.005);
    let net_ok = meds.last().unwrap() < &(meds[0] * 0.95);
    let elapsed = started.elapsed();
    let pass = steps_ok && net_ok && elapsed.as_secs() < 1200;
    report(
        8,
        "curvature-trend",
        pass,
        &format!(
            "median sup_error over 1/kappa {radii:?} = {meds:?}; per-step weak decrease (0.5% slack): {steps_ok}; net decrease >= 5%: {net_ok}; {:.0} s (budget 1200 s)",
            elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}

/// One torus/quartic fit cell, returning (fitted sup, input-noise sup).
fn fit_cell(m: &AnalyticManifold, sigma: f64, n: usize, n0: usize, seed: u64) -> (f64, f64) {
    let noise = NoiseConfig::with_tube(sigma, m, 2.0, 0.1).unwrap();
    let latent = sample_uniform(m, n, derive_seed(seed, 21, 0));
    let cloud = add_noise(&latent, &noise, derive_seed(seed, 22, 0)).unwrap();
    let test = sample_test_points(m, &noise, n0, derive_seed(seed, 23, 0)).unwrap();
    let kernel = KernelConfig::hard(sigma, m.ambient_dim()).unwrap();
    let idx = SpatialIndex::build(&cloud, kernel.support_radius());
    let results = estimate_batch(&idx, &cloud, &test, &kernel);
    let mut fitted = PointCloud::new(m.ambient_dim(), Provenance::Test, 0);
    for r in results.into_iter().flatten() {
        fitted.push(&r.fz);
    }
    let sup = sup_distance_to_manifold(&fitted, m).unwrap();
    let noise_sup = sup_distance_to_manifold(&cloud, m).unwrap();
    (sup, noise_sup)
}

fn median_of(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[test]
fn acceptance_09_torus_and_quartic_fits() {
    let started = Instant::now();
    let mut all_pass = true;
    let mut detail = String::new();
    for (m, sigmas, n, runs) in [
        (
            AnalyticManifold::torus(2.0, 1.0),
            [0.18, 0.15, 0.12],
            25_000usize,
            15u64,
        ),
        (
            AnalyticManifold::FermatQuartic,
            [0.05, 0.04, 0.03],
            300_000,
            9,
        ),
    ] {
        let mut sups = Vec::new();
        for &sigma in &sigmas {
            let cells: Vec<(f64, f64)> = (0..runs)
                .map(|k| fit_cell(&m, sigma, n, 100, 9_000 + 100 * k + (sigma * 1e3) as u64))
                .collect();
            let med_sup = median_of(cells.iter().map(|c| c.0).collect());
            let med_noise = median_of(cells.iter().map(|c| c.1).collect());
            let bound = (med_noise / 3.0).max(5.0 * sigma * sigma);
            let ok = med_sup < bound;
            all_pass &= ok;
            detail.push_str(&format!(
                "{} sigma={sigma}: sup={med_sup:.4} bound=max({med_noise:.3}/3, 5s^2)={bound:.4} {}; ",
                m.name(),
                if ok { "ok" } else { "VIOLATED" }
            ));
            sups.push(med_sup);
        }
        let mono = sups.windows(2).all(|w| w[1] < w[0]);
        all_pass &= mono;
        detail.push_str(&format!("{} monotone over sigma: {mono}; ", m.name()));
    }
    let elapsed = started.elapsed();
    let budget_ok = elapsed.as_secs() < 1200;
    report(
        9,
        "torus-and-quartic-fits",
        all_pass && budget_ok,
        &format!("{detail}{:.0} s (budget 1200 s)", elapsed.as_secs_f64()),
    );
    assert!(all_pass && budget_ok);
}

#[test]
fn acceptance_10_concentration() {
    let started = Instant::now();
    let m = AnalyticManifold::circle(10.0);
    let sigma = 0.1;
    let noise = NoiseConfig::new(sigma, &m).unwrap();
    let kernel = KernelConfig::hard(sigma, 2).unwrap();
    let z = [10.05, 0.0];
    let sd_at = |n: usize, tag: u64| {
        let mut fs = Vec::new();
        for k in 0..200u64 {
            let latent = sample_uniform(&m, n, derive_seed(tag, 31, k));
            let cloud = add_noise(&latent, &noise, derive_seed(tag, 32, k)).unwrap();
            let idx = SpatialIndex::build(&cloud, kernel.support_radius());
            let r = estimate(&idx, &cloud, &z, &kernel).unwrap();
            fs.push(r.fz);
        }
        let mean: Vec<f64> = (0..2)
            .map(|c| fs.iter().map(|f| f[c]).sum::<f64>() / fs.len() as f64)
            .collect();
        (0..2)
            .map(|c| {
                fs.iter().map(|f| (f[c] - mean[c]).powi(2)).sum::<f64>() / (fs.len() - 1) as f64
            })
            .sum::<f64>()
            .sqrt()
    };
    let sd_small = sd_at(3_000, 1);
    let sd_large = sd_at(30_000, 2);
    let ratio = sd_small / sd_large;
    let elapsed = started.elapsed();
    let pass = (2.5..=4.5).contains(&ratio) && elapsed.as_secs() < 300;
    report(
        10,
        "concentration",
        pass,
        &format!(
            "sd(F) over 200 resamplings: N=3e3 -> {sd_small:.5}, N=3e4 -> {sd_large:.5}, ratio {ratio:.2} (band [2.5, 4.5]); {:.0} s (budget 300 s)",
            elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn acceptance_11_estimator_exactness() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1111);
    let mut checked = 0usize;
    for trial in 0..1000 {
        let dim = 2 + trial % 3;
        let n = 1 + rng.random_range(0..400usize);
        let rows: Vec<f64> = (0..n * dim).map(|_| rng.random_range(-3.0..3.0)).collect();
        let cloud = PointCloud::from_rows(dim, rows, Provenance::Noisy, 0);
        let cell = rng.random_range(0.05..1.5);
        let idx = SpatialIndex::build(&cloud, cell);
        let z: Vec<f64> = (0..dim).map(|_| rng.random_range(-3.5..3.5)).collect();
        let rho = rng.random_range(0.0..2.0);
        let got = idx.radius_query(&cloud, &z, rho);
        let want: Vec<u32> = (0..n)
            .filter(|&i| dist2(cloud.point(i), &z) <= rho * rho)
            .map(|i| i as u32)
            .collect();
        assert_eq!(got, want, "radius_query mismatch on trial {trial}");
        checked += 1;
    }

    // batch determinism across worker counts
    let m = AnalyticManifold::circle(10.0);
    let noise = NoiseConfig::new(0.1, &m).unwrap();
    let latent = sample_uniform(&m, 50_000, 51);
    let cloud = add_noise(&latent, &noise, 52).unwrap();
    let kernel = KernelConfig::hard(0.1, 2).unwrap();
    let idx = SpatialIndex::build(&cloud, kernel.support_radius());
    let test = sample_test_points(&m, &noise, 1000, 53).unwrap();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| estimate_batch(&idx, &cloud, &test, &kernel))
    };
    let bit_identical = run(1) == run(8);
    report(
        11,
        "estimator-exactness",
        bit_identical,
        &format!(
            "radius_query == linear scan on {checked} randomized instances; 1-worker vs 8-worker batch bit-identical: {bit_identical}"
        ),
    );
    assert!(bit_identical);
}
