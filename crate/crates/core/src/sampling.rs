//! Uniform sampling on the analytic manifolds, Gaussian noise corruption,
//! and tube test-point generation.
//!
//! # Reproducibility
//!
//! All generators are ChaCha8 streams derived as
//! `stream = splitmix(purpose ^ splitmix(block_index))` on top of the user
//! seed, and points are produced in fixed blocks of [`STREAM_BLOCK`] indices.
//! A cloud is therefore bit-identical for a given (manifold, n, seed)
//! regardless of how generation would be partitioned across workers, and
//! sweep drivers can derive fresh independent streams per trial with
//! [`derive_seed`].

use crate::geometry::{AnalyticManifold, GeometryError};
use crate::kernel::bandwidth_constant;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SamplingError {
    #[error("sigma must be positive, got {0}")]
    NonPositiveSigma(f64),
    #[error("sigma {sigma} exceeds the tube bound sigma0 = {sigma0} for this manifold")]
    SigmaAboveBound { sigma: f64, sigma0: f64 },
    #[error("test-point band 2*sigma = {band} must stay below the reach {reach}")]
    BandExceedsReach { band: f64, reach: f64 },
    #[error("expected a {expected:?} cloud, got {got:?}")]
    WrongProvenance { expected: Provenance, got: Provenance },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Where a cloud came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    /// Noise-free samples on the manifold.
    Latent,
    /// Latent samples plus ambient Gaussian noise.
    Noisy,
    /// Query points for the estimator.
    Test,
}

/// An ordered list of D-dimensional points (flat storage).
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    data: Vec<f64>,
    pub provenance: Provenance,
    pub seed: u64,
}

impl PointCloud {
    pub fn new(dim: usize, provenance: Provenance, seed: u64) -> Self {
        assert!(dim >= 1);
        Self {
            dim,
            data: Vec::new(),
            provenance,
            seed,
        }
    }

    pub fn from_rows(dim: usize, rows: Vec<f64>, provenance: Provenance, seed: u64) -> Self {
        assert!(dim >= 1 && rows.len().is_multiple_of(dim));
        assert!(rows.iter().all(|v| v.is_finite()), "points must be finite");
        Self {
            dim,
            data: rows,
            provenance,
            seed,
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_points(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn push(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.dim);
        self.data.extend_from_slice(p);
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }
}

/// Gaussian noise level plus the tube parameters of the sigma_0 bound
/// sigma <= (tau - eps) / (C + sqrt(2) c_D).
#[derive(Debug, Clone, Copy)]
pub struct NoiseConfig {
    pub sigma: f64,
    /// The tube-radius multiple C in Gamma = {|v| <= C sigma}; default 2.
    pub tube_c: f64,
    /// eps as a fraction of the reach; default 0.5.
    pub eps_frac: f64,
}

impl NoiseConfig {
    /// Config with the default tube parameters (C = 2, eps = tau/2),
    /// validated against the manifold's sigma_0 bound.
    pub fn new(sigma: f64, m: &AnalyticManifold) -> Result<Self, SamplingError> {
        Self::with_tube(sigma, m, 2.0, 0.5)
    }

    /// Config with explicit tube parameters (any eps in (0, tau) is valid
    /// theory-side; smaller eps admits larger sigma).
    pub fn with_tube(
        sigma: f64,
        m: &AnalyticManifold,
        tube_c: f64,
        eps_frac: f64,
    ) -> Result<Self, SamplingError> {
        if !sigma.is_finite() || sigma <= 0.0 {
            return Err(SamplingError::NonPositiveSigma(sigma));
        }
        assert!(tube_c > 0.0 && (0.0..1.0).contains(&eps_frac));
        let sigma0 = sigma_bound(m, tube_c, eps_frac);
        if sigma > sigma0 {
            return Err(SamplingError::SigmaAboveBound { sigma, sigma0 });
        }
        Ok(Self {
            sigma,
            tube_c,
            eps_frac,
        })
    }
}

/// sigma_0 = (tau - eps) / (C + sqrt(2) c_D) for a manifold.
pub fn sigma_bound(m: &AnalyticManifold, tube_c: f64, eps_frac: f64) -> f64 {
    let tau = m.reach();
    let cd = bandwidth_constant(m.ambient_dim());
    tau * (1.0 - eps_frac) / (tube_c + std::f64::consts::SQRT_2 * cd)
}

/// Points per RNG stream block; generation is deterministic per block.
pub const STREAM_BLOCK: usize = 4096;

const PURPOSE_LATENT: u64 = 0x4c41_5445;
const PURPOSE_NOISE: u64 = 0x4e4f_4953;
const PURPOSE_TEST: u64 = 0x5445_5354;

#[inline]
fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Derive an independent seed for a (purpose, trial) pair; used by sweep
/// drivers so cells can run in any order or in parallel.
pub fn derive_seed(base: u64, purpose: u64, index: u64) -> u64 {
    base ^ splitmix(purpose ^ splitmix(index))
}

fn block_rng(seed: u64, purpose: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(splitmix(purpose ^ splitmix(block)));
    rng
}

/// n i.i.d. points on the manifold, uniform with respect to the induced
/// volume measure; deterministic given the seed.
pub fn sample_uniform(m: &AnalyticManifold, n: usize, seed: u64) -> PointCloud {
    assert!(n >= 1);
    let mut cloud = PointCloud::new(m.ambient_dim(), Provenance::Latent, seed);
    let mut remaining = n;
    let mut block = 0u64;
    while remaining > 0 {
        let take = remaining.min(STREAM_BLOCK);
        let mut rng = block_rng(seed, PURPOSE_LATENT, block);
        for _ in 0..take {
            let p = sample_one(m, &mut rng);
            cloud.push(&p);
        }
        remaining -= take;
        block += 1;
    }
    cloud
}

fn sample_one(m: &AnalyticManifold, rng: &mut ChaCha8Rng) -> Vec<f64> {
    match *m {
        AnalyticManifold::Circle { radius } => {
            let t = rng.random_range(0.0..2.0 * PI);
            vec![radius * t.cos(), radius * t.sin()]
        }
        AnalyticManifold::Sphere { radius } => {
            // Archimedes: z uniform, azimuth uniform
            let u: f64 = rng.random_range(-1.0..1.0);
            let phi = rng.random_range(0.0..2.0 * PI);
            let s = (1.0 - u * u).sqrt();
            vec![radius * s * phi.cos(), radius * s * phi.sin(), radius * u]
        }
        AnalyticManifold::Torus { major, minor } => {
            // rejection on the meridian angle against the area element
            // (major + minor cos t), azimuth uniform
            loop {
                let t = rng.random_range(0.0..2.0 * PI);
                let u: f64 = rng.random::<f64>();
                if u * (major + minor) <= major + minor * t.cos() {
                    let phi = rng.random_range(0.0..2.0 * PI);
                    let w = major + minor * t.cos();
                    return vec![w * phi.cos(), w * phi.sin(), minor * t.sin()];
                }
            }
        }
        AnalyticManifold::FermatQuartic => quartic_sample_one(rng),
    }
}

/// One uniform point on the sampled quartic portion.
///
/// Patch = side with the smaller coordinate modulus, parametrized by that
/// coordinate over {|w| <= 1, Re(w^4) <= 1/2}; the other coordinate is one
/// of the four branches zeta (1 - w^4)^(1/4). The area element
/// (1 + |w|^6/|other|^6) dA is bounded by 2 on the patch, giving a simple
/// rejection scheme; the two patches are isometric under the coordinate
/// swap, so a fair patch coin keeps the law uniform.
fn quartic_sample_one(rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        // propose w uniform on the unit disk
        let a: f64 = rng.random_range(-1.0..1.0);
        let b: f64 = rng.random_range(-1.0..1.0);
        if a * a + b * b > 1.0 {
            continue;
        }
        let w4 = {
            let w2 = (a * a - b * b, 2.0 * a * b);
            (w2.0 * w2.0 - w2.1 * w2.1, 2.0 * w2.0 * w2.1)
        };
        if w4.0 > 0.5 {
            continue;
        }
        let y4 = (1.0 - w4.0, -w4.1);
        let y4n = (y4.0 * y4.0 + y4.1 * y4.1).sqrt();
        let area_el = 1.0 + (a * a + b * b).powi(3) / y4n.powf(1.5);
        if rng.random_range(0.0..2.0) >= area_el {
            continue;
        }
        // principal fourth root times a uniform branch
        let r = y4n.powf(0.25);
        let ang = y4.1.atan2(y4.0) / 4.0 + (rng.random_range(0..4u8) as f64) * PI / 2.0;
        let (yc, ys) = (r * ang.cos(), r * ang.sin());
        return if rng.random::<bool>() {
            vec![a, b, yc, ys]
        } else {
            vec![yc, ys, a, b]
        };
    }
}

/// y_i = x_i + xi_i with isotropic Gaussian noise, sd = sigma per
/// coordinate; deterministic given the seed.
pub fn add_noise(
    cloud: &PointCloud,
    cfg: &NoiseConfig,
    seed: u64,
) -> Result<PointCloud, SamplingError> {
    if cloud.provenance != Provenance::Latent {
        return Err(SamplingError::WrongProvenance {
            expected: Provenance::Latent,
            got: cloud.provenance,
        });
    }
    let dim = cloud.dim();
    let mut out = PointCloud::new(dim, Provenance::Noisy, seed);
    let n = cloud.len();
    let mut i = 0usize;
    let mut block = 0u64;
    while i < n {
        let take = (n - i).min(STREAM_BLOCK);
        let mut rng = block_rng(seed, PURPOSE_NOISE, block);
        for k in i..i + take {
            let x = cloud.point(k);
            let y: Vec<f64> = x
                .iter()
                .map(|&c| c + cfg.sigma * rng.sample::<f64, _>(StandardNormal))
                .collect();
            out.push(&y);
        }
        i += take;
        block += 1;
    }
    Ok(out)
}

/// n0 tube test points z = x + s u with x uniform on M, s uniform on
/// [sigma/2, 2 sigma], u a uniform unit normal vector at x.
pub fn sample_test_points(
    m: &AnalyticManifold,
    cfg: &NoiseConfig,
    n0: usize,
    seed: u64,
) -> Result<PointCloud, SamplingError> {
    let band = 2.0 * cfg.sigma;
    if band >= m.reach() {
        return Err(SamplingError::BandExceedsReach {
            band,
            reach: m.reach(),
        });
    }
    let mut out = PointCloud::new(m.ambient_dim(), Provenance::Test, seed);
    let mut i = 0usize;
    let mut block = 0u64;
    while i < n0 {
        let take = (n0 - i).min(STREAM_BLOCK);
        let mut rng = block_rng(seed, PURPOSE_TEST, block);
        for _ in 0..take {
            let x = sample_one(m, &mut rng);
            let s = rng.random_range(cfg.sigma / 2.0..=2.0 * cfg.sigma);
            let u = unit_normal_at(m, &x, &mut rng)?;
            let z: Vec<f64> = x.iter().zip(&u).map(|(&xi, &ui)| xi + s * ui).collect();
            out.push(&z);
        }
        i += take;
        block += 1;
    }
    Ok(out)
}

/// Test points lying on the manifold itself (for bias-law evaluation,
/// where an off-manifold offset would mask the curvature signal).
pub fn sample_test_points_on_manifold(m: &AnalyticManifold, n0: usize, seed: u64) -> PointCloud {
    let mut c = sample_uniform(m, n0, seed);
    c.provenance = Provenance::Test;
    c
}

fn unit_normal_at(
    m: &AnalyticManifold,
    x: &[f64],
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>, SamplingError> {
    let frame = m.tangent_frame(x)?;
    match frame.normal.len() {
        1 => {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            Ok(frame.normal[0].iter().map(|c| sign * c).collect())
        }
        2 => {
            let a = rng.random_range(0.0..2.0 * PI);
            let (ca, sa) = (a.cos(), a.sin());
            Ok(frame.normal[0]
                .iter()
                .zip(&frame.normal[1])
                .map(|(&n1, &n2)| ca * n1 + sa * n2)
                .collect())
        }
        _ => unreachable!("codimension is 1 or 2 for the supported manifolds"),
    }
}
