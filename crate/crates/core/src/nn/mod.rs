//! Numerical layers and the dense forward pass.

mod bspline;
mod forward;
mod pointwise;
mod pool;
mod spline_conv;

pub use bspline::{bspline_basis, BasisValues, SplineBasis, MAX_DEGREE, MAX_NONZERO};
pub use forward::{
    dense_forward, dense_forward_topology, global_max, LayerPlan, NetworkState, Schedule,
};
pub(crate) use forward::{apply_skip, level_topology, readout, run_layer};
pub use pointwise::{batch_norm_rows, elu, elu_rows, pointwise, BatchNorm, Linear, Pointwise, BN_EPS};
pub use pool::{pool_rows, voxel_pool, PoolDelta, PoolFrame, PooledGraph, VoxelGrid};
pub use spline_conv::{
    spline_conv, spline_conv_counted, spline_conv_rows, ConvScratch, SplineKernel,
};

use crate::error::{Error, Result};

/// Row-major per-node feature vectors of constant width.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    width: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn zeros(rows: usize, width: usize) -> Self {
        FeatureMap { width, data: vec![0.0; rows * width] }
    }

    pub fn from_rows(width: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || data.len() % width != 0 {
            return Err(Error::Shape(format!("{} values do not form rows of width {width}", data.len())));
        }
        Ok(FeatureMap { width, data })
    }

    /// Width-1 map from scalar node features.
    pub fn from_scalars(values: &[f64]) -> Self {
        FeatureMap { width: 1, data: values.to_vec() }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.width
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.width..(i + 1) * self.width]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.width..(i + 1) * self.width]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Grows (zero-filled) or shrinks to `rows` rows.
    pub fn resize_rows(&mut self, rows: usize) {
        self.data.resize(rows * self.width, 0.0);
    }

    pub fn push_row(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.width);
        self.data.extend_from_slice(row);
    }

    pub fn max_abs_diff(&self, other: &FeatureMap) -> f64 {
        if self.width != other.width || self.data.len() != other.data.len() {
            return f64::INFINITY;
        }
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| if a == b { 0.0 } else { (a - b).abs() })
            .fold(0.0, |acc, d| if d.is_nan() { f64::INFINITY } else { acc.max(d) })
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
