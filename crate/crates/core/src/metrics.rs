//! Error measurement: one-sided sup distance to a manifold, bias
//! decomposition against the curvature prediction (d/2)|H| sigma^2,
//! log-log slope fitting, and the unweighted local-mean baseline.

use crate::estimator::{EstimateResult, EstimatorError, SpatialIndex};
use crate::geometry::{AnalyticManifold, GeometryError};
use crate::kernel::KernelConfig;
use crate::numeric::{dot, norm, sub, CompensatedSum};
use crate::sampling::PointCloud;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("log-log slope needs >= 3 strictly positive pairs")]
    NotEnoughPairs,
    #[error("log-log slope requires strictly positive values")]
    NonPositiveValue,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// max_i d(p_i, M), the one-sided sup error the experiments report.
pub fn sup_distance_to_manifold(
    points: &PointCloud,
    m: &AnalyticManifold,
) -> Result<f64, MetricsError> {
    let dists: Result<Vec<f64>, GeometryError> = (0..points.len())
        .into_par_iter()
        .map(|i| m.distance(points.point(i)))
        .collect();
    Ok(dists?.into_iter().fold(0.0, f64::max))
}

/// Coverage direction: max over a dense latent sample of the distance to
/// the fitted point set (reported separately from the one-sided sup).
pub fn coverage_distance(dense: &PointCloud, fitted: &PointCloud, idx: &SpatialIndex) -> f64 {
    // radius doubling around each dense point until a fitted point appears
    (0..dense.len())
        .into_par_iter()
        .map(|i| {
            let z = dense.point(i);
            let mut rho = 1e-3;
            loop {
                let ids = idx.radius_query(fitted, z, rho);
                if let Some(d2) = ids
                    .iter()
                    .map(|&j| crate::numeric::dist2(fitted.point(j as usize), z))
                    .min_by(|a, b| a.partial_cmp(b).unwrap())
                {
                    return d2.sqrt();
                }
                rho *= 2.0;
            }
        })
        .reduce(|| 0.0, f64::max)
}

/// Per-point error split at pi(z): signed normal component along the mean
/// curvature direction (positive = toward H, i.e. inward on circle and
/// sphere), tangential component, and the predicted magnitude.
#[derive(Debug, Clone)]
pub struct BiasDecomposition {
    /// e . h_hat with h_hat = H/|H| at pi(z).
    pub normal_signed: f64,
    /// Norm of the tangent-space component of e.
    pub tangential: f64,
    /// Tangent-space component of e as an ambient vector (signed pieces
    /// cancel when averaging over many test points).
    pub tangential_vector: Vec<f64>,
    /// (d/2) |H| sigma^2 at pi(z).
    pub predicted: f64,
}

pub fn bias_decomposition(
    m: &AnalyticManifold,
    z: &[f64],
    fz: &[f64],
    sigma: f64,
) -> Result<BiasDecomposition, MetricsError> {
    let p = m.project(z)?;
    let h = m.mean_curvature_vector(&p)?;
    let hn = norm(&h);
    let hhat: Vec<f64> = h.iter().map(|c| c / hn).collect();
    let frame = m.tangent_frame(&p)?;
    let e = sub(fz, &p);
    let tangential_vector = frame.tangential_component(&e);
    Ok(BiasDecomposition {
        normal_signed: dot(&e, &hhat),
        tangential: norm(&tangential_vector),
        tangential_vector,
        predicted: 0.5 * m.intrinsic_dim() as f64 * hn * sigma * sigma,
    })
}

/// Least-squares slope of log y against log x.
pub fn loglog_slope(pairs: &[(f64, f64)]) -> Result<f64, MetricsError> {
    if pairs.len() < 3 {
        return Err(MetricsError::NotEnoughPairs);
    }
    if pairs.iter().any(|&(x, y)| x <= 0.0 || y <= 0.0) {
        return Err(MetricsError::NonPositiveValue);
    }
    let n = pairs.len() as f64;
    let lx: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in lx.iter().zip(&ly) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    Ok(sxy / sxx)
}

/// Local mean with all weights equal inside the ball (internal control for
/// the kernel-weighted estimator).
pub fn baseline_unweighted(
    idx: &SpatialIndex,
    cloud: &PointCloud,
    z: &[f64],
    cfg: &KernelConfig,
) -> Result<EstimateResult, EstimatorError> {
    let ids = idx.radius_query(cloud, z, cfg.support_radius());
    if ids.is_empty() {
        return Err(EstimatorError::EmptyNeighborhood);
    }
    let dim = cloud.dim();
    let mut num: Vec<CompensatedSum> = vec![CompensatedSum::new(); dim];
    for &j in &ids {
        for (acc, &c) in num.iter_mut().zip(cloud.point(j as usize)) {
            acc.add(c);
        }
    }
    let n = ids.len() as f64;
    Ok(EstimateResult {
        z: z.to_vec(),
        fz: num.iter().map(|acc| acc.value() / n).collect(),
        neighbor_count: ids.len(),
        weight_sum: n,
    })
}

/// One sweep cell's error summary.
#[derive(Debug, Clone)]
pub struct ErrorReport {
    pub sigma: f64,
    pub n_samples: usize,
    /// Curvature parameter of the sweep cell (1/reach).
    pub curvature: f64,
    pub sup_error: f64,
    pub mean_normal_bias: f64,
    pub predicted_normal_bias: f64,
    pub mean_tangential_error: f64,
    pub trials: usize,
    pub runtime_ms: u64,
}
