//! FLOP accounting.
//!
//! One FLOP is one scalar multiply, add, subtract, comparison or division.
//! Exponentials count as one. The analytic spline-convolution cost per target
//! node is
//!
//! ```text
//! C_tot = N_i * M_out * M_in * (1 + 2 * N_p) + N_i * (2d + 2md - 1)
//! ```
//!
//! and [`crate::nn::spline_conv_counted`] executes exactly that operation
//! schedule through a [`FlopCounter`], so measured and analytic counts agree
//! to the integer. The basis stage of that schedule evaluates each dimension's
//! spline values with one Horner pass over coefficient vectors and composes
//! the tensor product in `d - 1` steps; those stages are tallied per vector
//! step, the remaining stages per scalar operation.

use std::io::Write;

use crate::error::{Error, Result};
use crate::model::LayerConfig;

/// Pseudo-coordinate dimension.
pub const DIM: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlopsParams {
    pub neighbors: u64,
    pub m_in: u64,
    pub m_out: u64,
    pub grid_points: u64,
    pub dim: u64,
    pub degree: u64,
}

/// Per-node spline convolution cost. `neighbors == 0` is the isolated-node
/// case and costs nothing.
pub fn spline_conv_flops(p: &FlopsParams) -> Result<u64> {
    if p.neighbors == 0 {
        return Ok(0);
    }
    if p.m_in == 0 || p.m_out == 0 || p.grid_points == 0 || p.dim == 0 || p.degree == 0 {
        return Err(Error::InvalidParameter(format!("all FLOP parameters must be positive: {p:?}")));
    }
    let n = p.neighbors;
    Ok(n * p.m_out * p.m_in * (1 + 2 * p.grid_points) + n * (2 * p.dim + 2 * p.degree * p.dim - 1))
}

/// Analytic cost of running `layer` over a set of recomputed rows.
///
/// `rows` carries, per recomputed row, the quantity the layer cost depends on:
/// the neighbor count for convolutions and the cluster size for pooling.
/// Pointwise layers ignore the values and use the row count.
pub fn layer_flops(layer: &LayerConfig, width_in: usize, rows: &[usize]) -> u64 {
    match *layer {
        LayerConfig::SplineConv { m_in, m_out, kernel_size, degree } => rows
            .iter()
            .map(|&n| {
                spline_conv_flops(&FlopsParams {
                    neighbors: n as u64,
                    m_in: m_in as u64,
                    m_out: m_out as u64,
                    grid_points: (kernel_size as u64).pow(3),
                    dim: DIM,
                    degree: degree as u64,
                })
                .expect("validated layer config")
            })
            .sum(),
        LayerConfig::Elu => (rows.len() * width_in) as u64,
        LayerConfig::BatchNorm { .. } => 4 * (rows.len() * width_in) as u64,
        LayerConfig::MaxPool { .. } => rows.iter().map(|&size| (size.saturating_sub(1) * width_in) as u64).sum(),
        LayerConfig::Linear { m_in, m_out, bias } => linear_flops(m_in, m_out, bias, rows.len()),
    }
}

/// Multiply-add count of a dense linear map applied to `rows` vectors; a bias
/// adds one addition per output.
pub fn linear_flops(m_in: usize, m_out: usize, bias: bool, rows: usize) -> u64 {
    let per_row = 2 * m_in * m_out - m_out + if bias { m_out } else { 0 };
    (per_row * rows) as u64
}

/// Scalar arithmetic that tallies every operation it performs.
#[derive(Debug, Default, Clone)]
pub struct FlopCounter {
    count: u64,
}

impl FlopCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    #[inline]
    pub fn add(&mut self, a: f64, b: f64) -> f64 {
        self.count += 1;
        a + b
    }

    #[inline]
    pub fn mul(&mut self, a: f64, b: f64) -> f64 {
        self.count += 1;
        a * b
    }

    #[inline]
    pub fn div(&mut self, a: f64, b: f64) -> f64 {
        self.count += 1;
        a / b
    }

    /// Charges `n` operations executed outside scalar helpers (vector steps).
    #[inline]
    pub fn charge(&mut self, n: u64) {
        self.count += n;
    }
}

/// Cost of one layer (or the readout head) during one forward step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerCost {
    pub layer: String,
    pub recomputed: usize,
    pub total_rows: usize,
    pub analytic: u64,
    pub measured: u64,
}

/// One line of the FLOP report file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlopsRow {
    pub event_index: usize,
    pub layer: String,
    pub analytic: u64,
    pub measured: u64,
    pub recomputed: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlopsReport {
    pub rows: Vec<FlopsRow>,
}

impl FlopsReport {
    pub fn push_costs(&mut self, event_index: usize, costs: &[LayerCost]) {
        self.rows.extend(costs.iter().map(|c| FlopsRow {
            event_index,
            layer: c.layer.clone(),
            analytic: c.analytic,
            measured: c.measured,
            recomputed: c.recomputed,
        }));
    }

    pub fn total_analytic(&self) -> u64 {
        self.rows.iter().map(|r| r.analytic).sum()
    }

    pub fn total_measured(&self) -> u64 {
        self.rows.iter().map(|r| r.measured).sum()
    }

    /// Per-event measured totals, in event order.
    pub fn per_event_measured(&self) -> Vec<(usize, u64)> {
        let mut out: Vec<(usize, u64)> = Vec::new();
        for r in &self.rows {
            match out.last_mut() {
                Some((e, total)) if *e == r.event_index => *total += r.measured,
                _ => out.push((r.event_index, r.measured)),
            }
        }
        out
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "event_index,layer,analytic_flops,measured_flops,recomputed_nodes")?;
        for r in &self.rows {
            writeln!(out, "{},{},{},{},{}", r.event_index, r.layer, r.analytic, r.measured, r.recomputed)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Difference {
    pub event_index: usize,
    pub layer: String,
    pub analytic: u64,
    pub measured: u64,
    pub absolute: i128,
    /// `(measured - analytic) / analytic`, or 0 when both are 0.
    pub relative: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub layers: Vec<Difference>,
    pub total: Difference,
}

impl Comparison {
    pub fn exact(&self) -> bool {
        self.total.absolute == 0 && self.layers.iter().all(|d| d.absolute == 0)
    }
}

fn difference(event_index: usize, layer: &str, analytic: u64, measured: u64) -> Difference {
    let absolute = measured as i128 - analytic as i128;
    let relative = if analytic == 0 {
        if measured == 0 { 0.0 } else { f64::INFINITY }
    } else {
        absolute as f64 / analytic as f64
    };
    Difference { event_index, layer: layer.to_string(), analytic, measured, absolute, relative }
}

/// Compares the analytic column of one report against the measured column of
/// another covering the same run.
pub fn compare(analytic: &FlopsReport, measured: &FlopsReport) -> Result<Comparison> {
    if analytic.rows.len() != measured.rows.len() {
        return Err(Error::Shape(format!(
            "reports cover {} and {} layer rows",
            analytic.rows.len(),
            measured.rows.len()
        )));
    }
    let mut layers = Vec::with_capacity(analytic.rows.len());
    for (a, m) in analytic.rows.iter().zip(&measured.rows) {
        if a.event_index != m.event_index || a.layer != m.layer {
            return Err(Error::Shape(format!(
                "row mismatch: ({}, {}) vs ({}, {})",
                a.event_index, a.layer, m.event_index, m.layer
            )));
        }
        layers.push(difference(a.event_index, &a.layer, a.analytic, m.measured));
    }
    let total = difference(usize::MAX, "total", analytic.total_analytic(), measured.total_measured());
    Ok(Comparison { layers, total })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: u64, m_in: u64, m_out: u64, np: u64, m: u64) -> FlopsParams {
        FlopsParams { neighbors: n, m_in, m_out, grid_points: np, dim: 3, degree: m }
    }

    #[test]
    fn closed_form_values() {
        assert_eq!(spline_conv_flops(&params(1, 1, 1, 8, 3)).unwrap(), 40);
        assert_eq!(spline_conv_flops(&params(10, 16, 32, 8, 3)).unwrap(), 87_270);
        assert_eq!(spline_conv_flops(&params(0, 16, 32, 8, 3)).unwrap(), 0);
        assert!(spline_conv_flops(&params(3, 0, 32, 8, 3)).is_err());
        assert!(spline_conv_flops(&params(3, 1, 1, 8, 0)).is_err());
    }

    #[test]
    fn closed_form_equals_stage_sum() {
        // sum of the individual stages of the schedule
        for &(n, mi, mo, np, m) in &[(1u64, 1u64, 1u64, 8u64, 1u64), (7, 3, 5, 512, 3), (16, 32, 32, 8, 2)] {
            let d = 3;
            let stages = n * d + 2 * m * n * d + n * (d - 1) + (2 * np - 1) * mo * mi * n + (2 * n - 1) * mo * mi
                + (mi - 1) * mo
                + mo;
            assert_eq!(spline_conv_flops(&params(n, mi, mo, np, m)).unwrap(), stages);
        }
    }

    #[test]
    fn monotone_in_every_parameter() {
        let base = [4u64, 3, 5, 8, 1];
        let eval = |v: [u64; 5]| spline_conv_flops(&params(v[0], v[1], v[2], v[3], v[4])).unwrap();
        for k in 0..5 {
            let mut up = base;
            up[k] += 1;
            assert!(eval(up) >= eval(base));
        }
    }

    #[test]
    fn pointwise_conventions() {
        assert_eq!(layer_flops(&LayerConfig::Elu, 8, &[0; 10]), 80);
        assert_eq!(layer_flops(&LayerConfig::BatchNorm { width: 8 }, 8, &[0; 10]), 320);
        assert_eq!(linear_flops(2, 3, false, 1), 9);
        assert_eq!(layer_flops(&LayerConfig::MaxPool { voxels: [2, 2, 2] }, 4, &[5]), 16);
    }

    #[test]
    fn compare_reports() {
        let mut r = FlopsReport::default();
        r.rows.push(FlopsRow { event_index: 0, layer: "conv1".into(), analytic: 10, measured: 10, recomputed: 1 });
        let c = compare(&r, &r).unwrap();
        assert!(c.exact());
        let mut other = r.clone();
        other.rows[0].measured = 15;
        let c = compare(&r, &other).unwrap();
        assert_eq!(c.layers[0].absolute, 5);
        assert!((c.layers[0].relative - 0.5).abs() < 1e-12);
        other.rows.push(r.rows[0].clone());
        assert!(matches!(compare(&r, &other), Err(Error::Shape(_))));
    }
}
