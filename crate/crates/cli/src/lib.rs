//! Experiment engine behind the `msmf` binary: sweep cells over
//! (sigma, N, seed), the file-driven fit pipeline, and the population
//! oracle checks.
//!
//! Every cell derives its RNG streams from (base seed, cell id), so result
//! files are reproducible for a given configuration no matter how cells
//! are scheduled.

use msmf_core::estimator::{estimate_batch, SpatialIndex};
use msmf_core::geometry::AnalyticManifold;
use msmf_core::io::{format_f64, read_cloud, write_cloud, CloudIoError};
use msmf_core::kernel::{bandwidth_constant, Cutoff, KernelConfig};
use msmf_core::metrics::{bias_decomposition, loglog_slope};
use msmf_core::population::{density_expansion, population_mean, DensityOracle, PopulationDensity};
use msmf_core::sampling::{
    add_noise, sample_test_points, sample_test_points_on_manifold, sample_uniform, NoiseConfig,
};
use msmf_core::{derive_seed, PointCloud, Provenance};
use rayon::prelude::*;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug)]
pub enum EngineError {
    Config(String),
    Io(CloudIoError),
}

impl std::fmt::Display for EngineError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EngineError::Config(msg) => write!(f, "config error: {msg}"),
            EngineError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for EngineError {}

impl From<CloudIoError> for EngineError {
    fn from(e: CloudIoError) -> Self {
        EngineError::Io(e)
    }
}

fn config_err(msg: impl Into<String>) -> EngineError {
    EngineError::Config(msg.into())
}

/// Sweep configuration (one manifold, grids of sigma and N, repeated seeds).
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub manifold: AnalyticManifold,
    pub sigmas: Vec<f64>,
    pub ns: Vec<usize>,
    pub n0: usize,
    pub seeds: u64,
    pub base_seed: u64,
    pub cutoff: Cutoff,
    pub tube_c: f64,
    pub eps_frac: f64,
    /// Evaluate test points on the manifold instead of the [sigma/2, 2sigma]
    /// band (bias-law measurements).
    pub test_on_manifold: bool,
}

impl SweepConfig {
    pub fn new(manifold: AnalyticManifold) -> Self {
        Self {
            manifold,
            sigmas: vec![0.1],
            ns: vec![30_000],
            n0: 100,
            seeds: 1,
            base_seed: 42,
            cutoff: Cutoff::Hard,
            tube_c: 2.0,
            eps_frac: 0.5,
            test_on_manifold: false,
        }
    }

    fn validate(&self) -> Result<(), EngineError> {
        if self.sigmas.is_empty() || self.ns.is_empty() {
            return Err(config_err("need at least one sigma and one n"));
        }
        if self.n0 == 0 {
            return Err(config_err("n0 must be >= 1"));
        }
        if self.seeds == 0 {
            return Err(config_err("seeds must be >= 1"));
        }
        for &s in &self.sigmas {
            NoiseConfig::with_tube(s, &self.manifold, self.tube_c, self.eps_frac)
                .map_err(|e| config_err(e.to_string()))?;
        }
        Ok(())
    }
}

/// One result row of a sweep (the CSV schema).
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub manifold: String,
    pub sigma: f64,
    pub n: usize,
    pub n0: usize,
    pub seed: u64,
    pub c_d: f64,
    pub r: f64,
    pub sup_error: f64,
    pub mean_normal_bias: f64,
    pub predicted_bias: f64,
    pub mean_tangential: f64,
    pub empty_queries: usize,
    pub runtime_ms: u64,
}

pub const RESULT_HEADER: &str = "manifold,sigma,n,n0,seed,c_d,r,sup_error,mean_normal_bias,predicted_bias,mean_tangential,empty_queries,runtime_ms";

impl SweepRow {
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.manifold,
            format_f64(self.sigma),
            self.n,
            self.n0,
            self.seed,
            format_f64(self.c_d),
            format_f64(self.r),
            format_f64(self.sup_error),
            format_f64(self.mean_normal_bias),
            format_f64(self.predicted_bias),
            format_f64(self.mean_tangential),
            self.empty_queries,
            self.runtime_ms
        )
    }
}

impl SweepRow {
    /// Library-level per-cell summary (the curvature parameter is the
    /// sweep's 1/reach for the cell's manifold).
    pub fn error_report(&self, curvature: f64) -> msmf_core::ErrorReport {
        msmf_core::ErrorReport {
            sigma: self.sigma,
            n_samples: self.n,
            curvature,
            sup_error: self.sup_error,
            mean_normal_bias: self.mean_normal_bias,
            predicted_normal_bias: self.predicted_bias,
            mean_tangential_error: self.mean_tangential,
            trials: 1,
            runtime_ms: self.runtime_ms,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    /// Trailing `# ...` comment lines (fitted slopes and their cells).
    pub comments: Vec<String>,
}

/// Run one sweep cell. The cell id feeds the latent/noise/test RNG streams.
pub fn run_cell(
    cfg: &SweepConfig,
    sigma: f64,
    n: usize,
    seed_index: u64,
    cell_id: u64,
) -> Result<SweepRow, EngineError> {
    let m = &cfg.manifold;
    let noise = NoiseConfig::with_tube(sigma, m, cfg.tube_c, cfg.eps_frac)
        .map_err(|e| config_err(e.to_string()))?;
    let started = Instant::now();
    let latent = sample_uniform(m, n, derive_seed(cfg.base_seed, 1, cell_id));
    let cloud = add_noise(&latent, &noise, derive_seed(cfg.base_seed, 2, cell_id))
        .map_err(|e| config_err(e.to_string()))?;
    let test = if cfg.test_on_manifold {
        sample_test_points_on_manifold(m, cfg.n0, derive_seed(cfg.base_seed, 3, cell_id))
    } else {
        sample_test_points(m, &noise, cfg.n0, derive_seed(cfg.base_seed, 3, cell_id))
            .map_err(|e| config_err(e.to_string()))?
    };
    let kernel = KernelConfig::new(sigma, m.ambient_dim(), cfg.cutoff)
        .map_err(|e| config_err(e.to_string()))?;
    let idx = SpatialIndex::build(&cloud, kernel.support_radius());
    let results = estimate_batch(&idx, &cloud, &test, &kernel);

    let mut fitted = PointCloud::new(m.ambient_dim(), Provenance::Test, 0);
    let mut empty = 0usize;
    let mut nb_sum = 0.0;
    let mut pred_sum = 0.0;
    let mut tv_sum = vec![0.0; m.ambient_dim()];
    let mut bias_count = 0usize;
    let curvature_known = !matches!(m, AnalyticManifold::FermatQuartic);
    for (i, res) in results.iter().enumerate() {
        match res {
            Ok(r) => {
                fitted.push(&r.fz);
                if curvature_known {
                    let b = bias_decomposition(m, test.point(i), &r.fz, sigma)
                        .map_err(|e| config_err(e.to_string()))?;
                    nb_sum += b.normal_signed;
                    pred_sum += b.predicted;
                    for (acc, v) in tv_sum.iter_mut().zip(&b.tangential_vector) {
                        *acc += v;
                    }
                    bias_count += 1;
                }
            }
            Err(_) => empty += 1,
        }
    }
    let sup_error = if fitted.is_empty() {
        f64::NAN
    } else {
        msmf_core::sup_distance_to_manifold(&fitted, m).map_err(|e| config_err(e.to_string()))?
    };
    let (mean_nb, mean_pred, mean_tv) = if bias_count > 0 {
        let c = bias_count as f64;
        let tvn = tv_sum.iter().map(|v| (v / c) * (v / c)).sum::<f64>().sqrt();
        (nb_sum / c, pred_sum / c, tvn)
    } else {
        (f64::NAN, f64::NAN, f64::NAN)
    };
    Ok(SweepRow {
        manifold: m.name().to_string(),
        sigma,
        n,
        n0: cfg.n0,
        seed: seed_index,
        c_d: bandwidth_constant(m.ambient_dim()),
        r: kernel.r,
        sup_error,
        mean_normal_bias: mean_nb,
        predicted_bias: mean_pred,
        mean_tangential: mean_tv,
        empty_queries: empty,
        runtime_ms: started.elapsed().as_millis() as u64,
    })
}

fn median_of(mut values: Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Median sup_error of the rows matching (sigma, n).
pub fn median_sup(rows: &[SweepRow], sigma: f64, n: usize) -> f64 {
    median_of(
        rows.iter()
            .filter(|r| r.sigma == sigma && r.n == n && r.sup_error.is_finite())
            .map(|r| r.sup_error)
            .collect(),
    )
}

/// Run the whole grid in deterministic cell order and fit the log-log
/// slopes of the per-cell medians.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepOutput, EngineError> {
    cfg.validate()?;
    let mut cells = Vec::new();
    for (si, &sigma) in cfg.sigmas.iter().enumerate() {
        for (ni, &n) in cfg.ns.iter().enumerate() {
            for seed_index in 0..cfg.seeds {
                let cell_id = ((si as u64) << 42) | ((ni as u64) << 21) | seed_index;
                cells.push((sigma, n, seed_index, cell_id));
            }
        }
    }
    // cells run in parallel; their streams are cell-derived and the rows
    // are collected back in grid order, so the output is schedule-free
    let rows = cells
        .into_par_iter()
        .map(|(sigma, n, seed_index, cell_id)| run_cell(cfg, sigma, n, seed_index, cell_id))
        .collect::<Result<Vec<SweepRow>, EngineError>>()?;
    let mut comments = Vec::new();
    if cfg.sigmas.len() >= 3 {
        for &n in &cfg.ns {
            let pairs: Vec<(f64, f64)> = cfg
                .sigmas
                .iter()
                .map(|&s| (s, median_sup(&rows, s, n)))
                .collect();
            if let Ok(slope) = loglog_slope(&pairs) {
                let mut line =
                    format!("# loglog_slope sup_error_vs_sigma n={n} slope={slope:.6} cells=");
                for (s, m) in &pairs {
                    let _ = write!(line, "({s},{m:.6e})");
                }
                comments.push(line);
            }
        }
    }
    if cfg.ns.len() >= 3 {
        for &sigma in &cfg.sigmas {
            let pairs: Vec<(f64, f64)> = cfg
                .ns
                .iter()
                .map(|&n| (n as f64, median_sup(&rows, sigma, n)))
                .collect();
            if let Ok(slope) = loglog_slope(&pairs) {
                let mut line =
                    format!("# loglog_slope sup_error_vs_n sigma={sigma} slope={slope:.6} cells=");
                for (nn, m) in &pairs {
                    let _ = write!(line, "({nn},{m:.6e})");
                }
                comments.push(line);
            }
        }
    }
    Ok(SweepOutput { rows, comments })
}

pub fn write_sweep_csv(path: &Path, out: &SweepOutput) -> Result<(), EngineError> {
    let mut text = String::new();
    text.push_str(RESULT_HEADER);
    text.push('\n');
    for row in &out.rows {
        text.push_str(&row.to_csv_line());
        text.push('\n');
    }
    for c in &out.comments {
        text.push_str(c);
        text.push('\n');
    }
    std::fs::write(path, text)
        .map_err(|e| EngineError::Config(format!("cannot write {}: {e}", path.display())))
}

/// File-driven fit: read observed and test clouds, run the estimator,
/// write the fitted points.
#[derive(Debug, Clone)]
pub struct FitConfig {
    pub cloud_path: PathBuf,
    pub test_path: PathBuf,
    pub sigma: f64,
    pub out_path: PathBuf,
    pub cutoff: Cutoff,
}

#[derive(Debug)]
pub struct FitSummary {
    pub processed: usize,
    pub empty: usize,
    pub written: usize,
    pub r: f64,
    pub wall_ms: u64,
}

pub fn run_fit(cfg: &FitConfig) -> Result<FitSummary, EngineError> {
    let started = Instant::now();
    let cloud = read_cloud(&cfg.cloud_path, Provenance::Noisy)?;
    let test = read_cloud(&cfg.test_path, Provenance::Test)?;
    if cloud.dim() != test.dim() {
        return Err(config_err(format!(
            "dimension mismatch: cloud dim={} test dim={}",
            cloud.dim(),
            test.dim()
        )));
    }
    if cloud.is_empty() {
        return Err(config_err("observed cloud is empty"));
    }
    let kernel = KernelConfig::new(cfg.sigma, cloud.dim(), cfg.cutoff)
        .map_err(|e| config_err(e.to_string()))?;
    let idx = SpatialIndex::build(&cloud, kernel.support_radius());
    let results = estimate_batch(&idx, &cloud, &test, &kernel);
    let mut fitted = PointCloud::new(cloud.dim(), Provenance::Test, 0);
    let mut empty = 0usize;
    for r in &results {
        match r {
            Ok(r) => fitted.push(&r.fz),
            Err(_) => empty += 1,
        }
    }
    write_cloud(&cfg.out_path, &fitted)?;
    Ok(FitSummary {
        processed: test.len(),
        empty,
        written: fitted.len(),
        r: kernel.r,
        wall_ms: started.elapsed().as_millis() as u64,
    })
}

/// Oracle command configuration (circle-based population checks).
#[derive(Debug, Clone)]
pub struct OracleConfig {
    pub radius: f64,
    pub sigma: f64,
    pub resolution: usize,
}

#[derive(Debug)]
pub struct OracleCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

struct PlanarGaussian;
impl PopulationDensity for PlanarGaussian {
    fn dim(&self) -> usize {
        2
    }
    fn log_density(&self, y: &[f64]) -> f64 {
        -(y[0] * y[0] + y[1] * y[1]) / 2.0 - (2.0 * std::f64::consts::PI).ln()
    }
}

/// Residual of the local-average expansion against the analytic planar
/// Gaussian at z = (0.3, 0) for bandwidth r.
pub fn local_average_residual(r: f64) -> f64 {
    let z = [0.3, 0.0];
    let cfg = KernelConfig {
        sigma: 1.0,
        r,
        cutoff: Cutoff::Hard,
        dim: 2,
    };
    let mu = population_mean(&PlanarGaussian, &z, &cfg).expect("D=2 quadrature");
    let shift = r * r / bandwidth_constant(2).powi(2); // r^2 (2B/A)
    ((mu[0] - z[0] + shift * z[0]).powi(2) + mu[1].powi(2)).sqrt()
}

/// Run the population-oracle checks; sigma above the default tube bound is
/// a config error.
pub fn run_oracle(cfg: &OracleConfig) -> Result<Vec<OracleCheck>, EngineError> {
    let m = AnalyticManifold::circle(cfg.radius);
    NoiseConfig::new(cfg.sigma, &m).map_err(|e| config_err(e.to_string()))?;
    let mut checks = Vec::new();

    // 1. local-average remainder decays fourth order in r
    let radii = [0.2, 0.1, 0.05];
    let pairs: Vec<(f64, f64)> = radii
        .iter()
        .map(|&r| (r, local_average_residual(r)))
        .collect();
    let slope = loglog_slope(&pairs).map_err(|e| config_err(e.to_string()))?;
    checks.push(OracleCheck {
        name: "local_average_rate",
        passed: (3.5..=4.5).contains(&slope),
        detail: format!(
            "slope={slope:.4} (expect 4 +- 0.5); residuals={:?}",
            pairs.iter().map(|p| p.1).collect::<Vec<_>>()
        ),
    });

    // 2. density against the leading-order expansion on tube points
    let oracle =
        DensityOracle::new(m, cfg.sigma, cfg.resolution).map_err(|e| config_err(e.to_string()))?;
    let noise = NoiseConfig::new(cfg.sigma, &m).map_err(|e| config_err(e.to_string()))?;
    let tube =
        sample_test_points(&m, &noise, 100, 0xda7a).map_err(|e| config_err(e.to_string()))?;
    let mut worst: f64 = 0.0;
    for y in tube.iter_points() {
        let ratio = oracle.density(y)
            / density_expansion(&m, y, cfg.sigma).map_err(|e| config_err(e.to_string()))?;
        worst = worst.max((ratio - 1.0).abs());
    }
    checks.push(OracleCheck {
        name: "density_expansion_ratio",
        passed: worst <= 0.02,
        detail: format!("max |ratio - 1| = {worst:.3e} over 100 tube points (bound 0.02)"),
    });

    // 3. score against -v/sigma^2 + (d/2) H
    let on = [cfg.radius, 0.0];
    let s_on = oracle.score(&on);
    let h_mag = 0.5 / cfg.radius; // (d/2)|H|
    let mag_err = ((s_on[0].powi(2) + s_on[1].powi(2)).sqrt() - h_mag).abs() / h_mag;
    let inward = s_on[0] < 0.0;
    let mut slope_pts = Vec::new();
    for k in 0..3 {
        let s = cfg.sigma / 2f64.powi(k);
        let o = DensityOracle::new(m, s, cfg.resolution).map_err(|e| config_err(e.to_string()))?;
        let sc = o.score(&on);
        let err = ((sc[0] + h_mag).powi(2) + sc[1].powi(2)).sqrt();
        slope_pts.push((s, err));
    }
    let score_slope = loglog_slope(&slope_pts).map_err(|e| config_err(e.to_string()))?;
    checks.push(OracleCheck {
        name: "score_expansion",
        passed: inward && mag_err <= 0.10 && score_slope >= 1.5,
        detail: format!(
            "on-manifold |score| rel err={mag_err:.3e} (bound 0.10), inward={inward}, remainder slope={score_slope:.3} (need >= 1.5)"
        ),
    });

    Ok(checks)
}
