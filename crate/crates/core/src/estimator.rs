//! The sample-level mean-shift estimator F(z) with a uniform hash-grid
//! spatial index for fixed-radius neighbor queries.
//!
//! F(z) is the kernel-weighted average of the observed points inside the
//! ball B(z, sqrt(2) r); the index set is exact (grid candidates are
//! filtered by the true distance), neighbor order is ascending point index,
//! and sums are compensated, so batch evaluation is bit-identical across
//! worker counts.

use crate::kernel::{kernel_weight_d2, KernelConfig};
use crate::numeric::CompensatedSum;
use crate::sampling::PointCloud;
use rayon::prelude::*;
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EstimatorError {
    /// No observed point inside the query ball; the caller decides how to
    /// proceed (returning z silently would corrupt error statistics).
    #[error("no neighbors within the support radius")]
    EmptyNeighborhood,
}

/// Uniform hash grid over an immutable cloud; cell(point) is
/// floor(coord / cell_size) per axis.
#[derive(Debug)]
pub struct SpatialIndex {
    cell_size: f64,
    cells: HashMap<Vec<i64>, Vec<u32>>,
    dim: usize,
}

impl SpatialIndex {
    /// Build an index; the default cell size sqrt(2) r makes a radius-
    /// sqrt(2) r query touch 3^D cells.
    pub fn build(cloud: &PointCloud, cell_size: f64) -> Self {
        assert!(!cloud.is_empty(), "index requires a nonempty cloud");
        assert!(cell_size > 0.0);
        let dim = cloud.dim();
        let mut cells: HashMap<Vec<i64>, Vec<u32>> = HashMap::new();
        let mut key = vec![0i64; dim];
        for (i, p) in cloud.iter_points().enumerate() {
            for (k, &c) in key.iter_mut().zip(p) {
                *k = (c / cell_size).floor() as i64;
            }
            cells.entry(key.clone()).or_default().push(i as u32);
        }
        Self {
            cell_size,
            cells,
            dim,
        }
    }

    pub fn occupied_cells(&self) -> usize {
        self.cells.len()
    }

    /// Exactly { j : |y_j - z| <= rho } in ascending index order.
    pub fn radius_query(&self, cloud: &PointCloud, z: &[f64], rho: f64) -> Vec<u32> {
        assert_eq!(z.len(), self.dim);
        assert!(rho >= 0.0);
        let lo: Vec<i64> = z
            .iter()
            .map(|&c| ((c - rho) / self.cell_size).floor() as i64)
            .collect();
        let hi: Vec<i64> = z
            .iter()
            .map(|&c| ((c + rho) / self.cell_size).floor() as i64)
            .collect();
        let mut out = Vec::new();
        let mut key = lo.clone();
        let rho2 = rho * rho;
        loop {
            if let Some(ids) = self.cells.get(&key) {
                for &j in ids {
                    if crate::numeric::dist2(cloud.point(j as usize), z) <= rho2 {
                        out.push(j);
                    }
                }
            }
            // advance the multi-index
            let mut axis = 0;
            loop {
                if axis == self.dim {
                    out.sort_unstable();
                    return out;
                }
                key[axis] += 1;
                if key[axis] <= hi[axis] {
                    break;
                }
                key[axis] = lo[axis];
                axis += 1;
            }
        }
    }
}

/// F(z) plus diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateResult {
    pub z: Vec<f64>,
    pub fz: Vec<f64>,
    /// Neighbors with strictly positive weight.
    pub neighbor_count: usize,
    pub weight_sum: f64,
}

/// Single mean-shift step at z: kernel-weighted average of the neighbors
/// inside B(z, sqrt(2) r).
pub fn estimate(
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
    let mut wsum = CompensatedSum::new();
    let mut num: Vec<CompensatedSum> = vec![CompensatedSum::new(); dim];
    let mut count = 0usize;
    for &j in &ids {
        let y = cloud.point(j as usize);
        let w = kernel_weight_d2(crate::numeric::dist2(y, z), cfg);
        if w <= 0.0 {
            continue;
        }
        count += 1;
        wsum.add(w);
        for (acc, &c) in num.iter_mut().zip(y) {
            acc.add(w * c);
        }
    }
    let total = wsum.value();
    if count == 0 || total <= 0.0 || total.is_nan() {
        return Err(EstimatorError::EmptyNeighborhood);
    }
    Ok(EstimateResult {
        z: z.to_vec(),
        fz: num.iter().map(|acc| acc.value() / total).collect(),
        neighbor_count: count,
        weight_sum: total,
    })
}

/// Evaluate F at every test point, in input order; elementwise identical to
/// sequential calls regardless of worker count. Empty neighborhoods are
/// recorded per item and the batch continues.
pub fn estimate_batch(
    idx: &SpatialIndex,
    cloud: &PointCloud,
    test: &PointCloud,
    cfg: &KernelConfig,
) -> Vec<Result<EstimateResult, EstimatorError>> {
    assert_eq!(cloud.dim(), test.dim());
    (0..test.len())
        .into_par_iter()
        .map(|i| estimate(idx, cloud, test.point(i), cfg))
        .collect()
}
