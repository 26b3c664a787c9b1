//! Curvature-driven manifold fitting by a single normalized mean-shift
//! step with bandwidth r = c_D sigma.
//!
//! The crate provides:
//!
//! - [`geometry`]: analytic test manifolds (circle, sphere, torus, Fermat
//!   quartic) with exact projection, curvature, and frame oracles;
//! - [`sampling`]: reproducible uniform sampling, Gaussian corruption, and
//!   tube test points;
//! - [`kernel`]: the truncated Gaussian kernel and the bandwidth constant
//!   c_D built from incomplete-gamma moments;
//! - [`estimator`]: the mean-shift map F over a hash-grid spatial index
//!   with deterministic parallel batch evaluation;
//! - [`population`]: quadrature oracles for the noisy density, its score,
//!   and the population mean-shift map;
//! - [`metrics`]: sup error, curvature-bias decomposition, slope fits, and
//!   an unweighted baseline;
//! - [`io`]: the plain-text point-cloud format.

pub mod estimator;
pub mod geometry;
pub mod io;
pub mod kernel;
pub mod metrics;
pub mod numeric;
pub mod population;
pub mod sampling;

pub use estimator::{estimate, estimate_batch, EstimateResult, EstimatorError, SpatialIndex};
pub use geometry::{AnalyticManifold, GeometryError, TangentFrame};
pub use kernel::{bandwidth_constant, kernel_weight, Cutoff, KernelConfig, KernelError};
pub use metrics::{
    baseline_unweighted, bias_decomposition, loglog_slope, sup_distance_to_manifold,
    BiasDecomposition, ErrorReport, MetricsError,
};
pub use population::{
    density_expansion, population_mean, DensityOracle, PopulationDensity, PopulationError,
};
pub use sampling::{
    add_noise, derive_seed, sample_test_points, sample_test_points_on_manifold, sample_uniform,
    NoiseConfig, PointCloud, Provenance, SamplingError,
};
