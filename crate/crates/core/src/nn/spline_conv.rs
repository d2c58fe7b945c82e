//! Spline convolution:
//!
//! ```text
//! out_n(i) = 1/|N(i)| * sum_l sum_{j in N(i)} f_l(j) * sum_p w[p][l][n] * B_p(u(i, j))
//! ```
//!
//! Isolated nodes output zeros.

use super::bspline::{BasisValues, SplineBasis};
use super::FeatureMap;
use crate::error::{Error, Result};
use crate::flops::FlopCounter;
use crate::graph::Topology;

/// Learnable kernel `w[p][l][n]`, stored with `n` fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineKernel {
    m_in: usize,
    m_out: usize,
    basis: SplineBasis,
    weights: Vec<f64>,
}

impl SplineKernel {
    pub fn new(m_in: usize, m_out: usize, kernel_size: usize, degree: usize, weights: Vec<f64>) -> Result<Self> {
        if m_in == 0 || m_out == 0 {
            return Err(Error::InvalidParameter("channel counts must be positive".into()));
        }
        let basis = SplineBasis::new(degree, kernel_size)?;
        let expected = basis.num_points() * m_in * m_out;
        if weights.len() != expected {
            return Err(Error::Shape(format!("kernel expects {expected} weights, got {}", weights.len())));
        }
        if !weights.iter().all(|w| w.is_finite()) {
            return Err(Error::InvalidParameter("kernel weights must be finite".into()));
        }
        Ok(SplineKernel { m_in, m_out, basis, weights })
    }

    pub fn zeros(m_in: usize, m_out: usize, kernel_size: usize, degree: usize) -> Result<Self> {
        let n = kernel_size.pow(3) * m_in * m_out;
        Self::new(m_in, m_out, kernel_size, degree, vec![0.0; n])
    }

    pub fn m_in(&self) -> usize {
        self.m_in
    }

    pub fn m_out(&self) -> usize {
        self.m_out
    }

    pub fn basis(&self) -> &SplineBasis {
        &self.basis
    }

    pub fn num_points(&self) -> usize {
        self.basis.num_points()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn index(&self, p: usize, l: usize, n: usize) -> usize {
        (p * self.m_in + l) * self.m_out + n
    }

    pub fn weight(&self, p: usize, l: usize, n: usize) -> f64 {
        self.weights[self.index(p, l, n)]
    }

    pub fn set_weight(&mut self, p: usize, l: usize, n: usize, w: f64) {
        let i = self.index(p, l, n);
        self.weights[i] = w;
    }
}

/// Reusable buffers for the fast row kernel.
#[derive(Debug, Default)]
pub struct ConvScratch {
    /// `h[p][l] = sum_j B_p(u(i, j)) f_l(j)` for touched `p`.
    h: Vec<f64>,
    touched: Vec<bool>,
    order: Vec<u32>,
    basis: BasisValues,
    dense_basis: Vec<f64>,
}

fn check_shapes(topo: &Topology, f: &FeatureMap, kernel: &SplineKernel, out: Option<&FeatureMap>) -> Result<()> {
    if f.width() != kernel.m_in {
        return Err(Error::Shape(format!("input width {} but kernel expects {}", f.width(), kernel.m_in)));
    }
    if f.rows() != topo.num_nodes() {
        return Err(Error::Shape(format!("{} feature rows for {} nodes", f.rows(), topo.num_nodes())));
    }
    if let Some(out) = out {
        if out.width() != kernel.m_out || out.rows() != topo.num_nodes() {
            return Err(Error::Shape(format!(
                "output map is {}x{}, expected {}x{}",
                out.rows(),
                out.width(),
                topo.num_nodes(),
                kernel.m_out
            )));
        }
    }
    Ok(())
}

/// Fast kernel for one target row: accumulate basis-weighted inputs per grid
/// point, then contract with the weights once per touched point. Returns the
/// scalar operation count actually executed.
fn conv_row(topo: &Topology, i: usize, f: &FeatureMap, kernel: &SplineKernel, s: &mut ConvScratch, out: &mut [f64]) -> u64 {
    out.fill(0.0);
    let nbrs = topo.neighbors(i);
    if nbrs.is_empty() {
        return 0;
    }
    let (m_in, m_out) = (kernel.m_in, kernel.m_out);
    let np = kernel.num_points();
    if s.touched.len() < np {
        s.touched.resize(np, false);
    }
    if s.h.len() < np * m_in {
        s.h.resize(np * m_in, 0.0);
    }
    let mut flops = 0u64;
    for e in nbrs {
        flops += kernel.basis.eval_into(&e.pseudo, &mut s.basis);
        let fj = f.row(e.target);
        for k in 0..s.basis.len {
            let p = s.basis.index[k] as usize;
            let b = s.basis.value[k];
            let h = &mut s.h[p * m_in..(p + 1) * m_in];
            if !s.touched[p] {
                s.touched[p] = true;
                s.order.push(p as u32);
                for (hl, &fl) in h.iter_mut().zip(fj) {
                    *hl = b * fl;
                }
                flops += m_in as u64;
            } else {
                for (hl, &fl) in h.iter_mut().zip(fj) {
                    *hl += b * fl;
                }
                flops += 2 * m_in as u64;
            }
        }
    }
    for &p in &s.order {
        let p = p as usize;
        let h = &s.h[p * m_in..(p + 1) * m_in];
        let w = &kernel.weights[p * m_in * m_out..(p + 1) * m_in * m_out];
        for (l, &hl) in h.iter().enumerate() {
            let wl = &w[l * m_out..(l + 1) * m_out];
            for (o, &wv) in out.iter_mut().zip(wl) {
                *o += hl * wv;
            }
        }
        s.touched[p] = false;
    }
    flops += (s.order.len() * m_in * m_out * 2) as u64;
    s.order.clear();
    let count = nbrs.len() as f64;
    for o in out.iter_mut() {
        *o /= count;
    }
    flops + m_out as u64
}

/// Recomputes `rows` of `out`; every other row is left untouched. Returns the
/// executed operation count.
pub fn spline_conv_rows(
    topo: &Topology,
    f: &FeatureMap,
    kernel: &SplineKernel,
    rows: &[usize],
    out: &mut FeatureMap,
    scratch: &mut ConvScratch,
) -> Result<u64> {
    check_shapes(topo, f, kernel, Some(out))?;
    let mut flops = 0;
    for &i in rows {
        if i >= topo.num_nodes() {
            return Err(Error::Lookup(format!("row {i} outside graph of {} nodes", topo.num_nodes())));
        }
        flops += conv_row(topo, i, f, kernel, scratch, out.row_mut(i));
    }
    Ok(flops)
}

/// Convolution over every node.
pub fn spline_conv(topo: &Topology, f: &FeatureMap, kernel: &SplineKernel) -> Result<FeatureMap> {
    check_shapes(topo, f, kernel, None)?;
    let mut out = FeatureMap::zeros(topo.num_nodes(), kernel.m_out);
    let rows: Vec<usize> = (0..topo.num_nodes()).collect();
    spline_conv_rows(topo, f, kernel, &rows, &mut out, &mut ConvScratch::default())?;
    Ok(out)
}

/// Reference schedule, every operation routed through `counter`: per
/// neighbor, pseudo-coordinate scaling and basis evaluation; per
/// (neighbor, input, output) the full sum over all grid points; then the
/// neighbor sum, the input-channel sum and the division.
pub fn spline_conv_counted(
    topo: &Topology,
    f: &FeatureMap,
    kernel: &SplineKernel,
    rows: &[usize],
    out: &mut FeatureMap,
    counter: &mut FlopCounter,
    scratch: &mut ConvScratch,
) -> Result<()> {
    check_shapes(topo, f, kernel, Some(out))?;
    let m_in = kernel.m_in;
    let np = kernel.num_points();
    for &i in rows {
        if i >= topo.num_nodes() {
            return Err(Error::Lookup(format!("row {i} outside graph of {} nodes", topo.num_nodes())));
        }
        let nbrs = topo.neighbors(i);
        let row = out.row_mut(i);
        row.fill(0.0);
        if nbrs.is_empty() {
            continue;
        }
        scratch.dense_basis.resize(nbrs.len() * np, 0.0);
        for (j, e) in nbrs.iter().enumerate() {
            kernel.basis.eval_counted(&e.pseudo, &mut scratch.dense_basis[j * np..(j + 1) * np], counter);
        }
        let count = nbrs.len() as f64;
        for (n, slot) in row.iter_mut().enumerate() {
            let mut total = None;
            for l in 0..m_in {
                let mut over_neighbors = None;
                for (j, e) in nbrs.iter().enumerate() {
                    let b = &scratch.dense_basis[j * np..(j + 1) * np];
                    let mut g = counter.mul(kernel.weights[kernel.index(0, l, n)], b[0]);
                    for (p, &bp) in b.iter().enumerate().skip(1) {
                        let term = counter.mul(kernel.weights[kernel.index(p, l, n)], bp);
                        g = counter.add(g, term);
                    }
                    let msg = counter.mul(f.row(e.target)[l], g);
                    over_neighbors = Some(match over_neighbors {
                        None => msg,
                        Some(acc) => counter.add(acc, msg),
                    });
                }
                let s = over_neighbors.expect("non-empty neighborhood");
                total = Some(match total {
                    None => s,
                    Some(acc) => counter.add(acc, s),
                });
            }
            *slot = counter.div(total.expect("m_in > 0"), count);
        }
    }
    Ok(())
}
