//! Full-graph forward pass. The incremental engine evaluates rows through the
//! same [`run_layer`] / [`apply_skip`] / [`readout`] functions, so a row
//! recomputed incrementally is bitwise identical to the dense one.

use super::pointwise::{batch_norm_rows, elu_rows};
use super::pool::{pool_rows, PoolFrame, PooledGraph, VoxelGrid};
use super::spline_conv::{spline_conv_counted, spline_conv_rows, ConvScratch};
use super::FeatureMap;
use crate::error::{Error, Result};
use crate::flops::{layer_flops, linear_flops, FlopCounter, LayerCost};
use crate::graph::{EventGraph, Topology};
use crate::model::{LayerConfig, LayerParams, Model};

/// Convolution evaluation strategy. `Reference` runs the fully counted
/// operation schedule whose tally equals the closed-form cost; it is far
/// slower and meant for FLOP audits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Schedule {
    #[default]
    Fast,
    Reference,
}

/// Static bookkeeping derived from an architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerPlan {
    names: Vec<String>,
    act_levels: Vec<usize>,
    act_widths: Vec<usize>,
    pool_slots: Vec<Option<usize>>,
    skip_into: Vec<Option<usize>>,
}

impl LayerPlan {
    pub fn new(model: &Model) -> Result<Self> {
        let config = model.config();
        let act_widths = config.activation_widths()?;
        let mut pool_slots = Vec::with_capacity(config.layers.len());
        let mut slot = 0;
        for layer in &config.layers {
            if matches!(layer, LayerConfig::MaxPool { .. }) {
                pool_slots.push(Some(slot));
                slot += 1;
            } else {
                pool_slots.push(None);
            }
        }
        let mut skip_into = vec![None; act_widths.len()];
        for (s, skip) in config.skips.iter().enumerate() {
            skip_into[skip.sink] = Some(s);
        }
        Ok(LayerPlan { names: config.layer_names(), act_levels: config.activation_levels(), act_widths, pool_slots, skip_into })
    }

    pub fn num_layers(&self) -> usize {
        self.names.len()
    }

    pub fn num_pools(&self) -> usize {
        self.pool_slots.iter().flatten().count()
    }

    pub fn name(&self, layer: usize) -> &str {
        &self.names[layer]
    }

    /// Pooling depth of activation `act` (0 is the event graph).
    pub fn level(&self, act: usize) -> usize {
        self.act_levels[act]
    }

    pub fn width(&self, act: usize) -> usize {
        self.act_widths[act]
    }

    pub fn pool_slot(&self, layer: usize) -> Option<usize> {
        self.pool_slots[layer]
    }

    /// Skip whose sink is activation `act`.
    pub fn skip_into(&self, act: usize) -> Option<usize> {
        self.skip_into[act]
    }
}

/// Every cached quantity of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    /// `acts[0]` is the input, `acts[k + 1]` the output of layer `k`.
    pub acts: Vec<FeatureMap>,
    /// One coarse level per pooling layer, in order.
    pub pooled: Vec<PooledGraph>,
    pub global_max: Vec<f64>,
    pub readout: Vec<f64>,
}

/// Graph at pooling depth `level`.
pub(crate) fn level_topology<'a>(base: &'a Topology, pooled: &'a [PooledGraph], level: usize) -> &'a Topology {
    if level == 0 {
        base
    } else {
        pooled[level - 1].topology()
    }
}

/// Recomputes `rows` of `acts[layer + 1]` from `acts[layer]`. The output map
/// must already have the right number of rows. `pooled` is the coarse level a
/// pooling layer writes into.
#[allow(clippy::too_many_arguments)]
pub(crate) fn run_layer(
    model: &Model,
    plan: &LayerPlan,
    layer: usize,
    topo_in: &Topology,
    pooled: Option<&PooledGraph>,
    acts: &mut [FeatureMap],
    rows: &[usize],
    schedule: Schedule,
    scratch: &mut ConvScratch,
) -> Result<LayerCost> {
    let cfg = &model.config().layers[layer];
    let (lo, hi) = acts.split_at_mut(layer + 1);
    let input = &lo[layer];
    let out = &mut hi[0];
    let width_in = input.width();
    let (analytic, measured) = match (&model.layers()[layer], cfg) {
        (LayerParams::SplineConv(kernel), _) => {
            let degrees: Vec<usize> = rows.iter().map(|&i| topo_in.degree(i)).collect();
            let analytic = layer_flops(cfg, width_in, &degrees);
            let measured = match schedule {
                Schedule::Fast => spline_conv_rows(topo_in, input, kernel, rows, out, scratch)?,
                Schedule::Reference => {
                    let mut counter = FlopCounter::new();
                    spline_conv_counted(topo_in, input, kernel, rows, out, &mut counter, scratch)?;
                    counter.count()
                }
            };
            (analytic, measured)
        }
        (LayerParams::Elu, _) => (layer_flops(cfg, width_in, rows), elu_rows(input, rows, out)?),
        (LayerParams::BatchNorm(bn), _) => (layer_flops(cfg, width_in, rows), batch_norm_rows(bn, input, rows, out)?),
        (LayerParams::MaxPool(_), _) => {
            let pooled = pooled.ok_or_else(|| Error::Shape(format!("layer {layer} has no pooled level")))?;
            let sizes: Vec<usize> = rows.iter().map(|&k| pooled.clusters().get(k).map_or(0, Vec::len)).collect();
            (layer_flops(cfg, width_in, &sizes), pool_rows(pooled, input, rows, out)?)
        }
        (LayerParams::Linear(lin), _) => {
            if width_in != lin.m_in || out.width() != lin.m_out || out.rows() != input.rows() {
                return Err(Error::Shape(format!("layer {layer} linear shape mismatch")));
            }
            for &i in rows {
                lin.apply_into(input.row(i), out.row_mut(i));
            }
            let f = linear_flops(lin.m_in, lin.m_out, lin.bias.is_some(), rows.len());
            (f, f)
        }
    };
    Ok(LayerCost {
        layer: plan.name(layer).to_string(),
        recomputed: rows.len(),
        total_rows: out.rows(),
        analytic,
        measured,
    })
}

/// Adds skip `skip` (source projected if configured) onto `rows` of its sink.
pub(crate) fn apply_skip(model: &Model, skip: usize, acts: &mut [FeatureMap], rows: &[usize]) -> Result<LayerCost> {
    let cfg = &model.config().skips[skip];
    let (lo, hi) = acts.split_at_mut(cfg.sink);
    let source = &lo[cfg.source];
    let sink = &mut hi[0];
    if source.rows() != sink.rows() {
        return Err(Error::Shape(format!("skip {}->{} joins maps of different length", cfg.source, cfg.sink)));
    }
    let width = sink.width();
    let mut buf = vec![0.0; width];
    let mut flops = (rows.len() * width) as u64;
    match &model.projections()[skip] {
        Some(lin) => {
            for &i in rows {
                lin.apply_into(source.row(i), &mut buf);
                for (o, b) in sink.row_mut(i).iter_mut().zip(&buf) {
                    *o += b;
                }
            }
            flops += linear_flops(lin.m_in, lin.m_out, false, rows.len());
        }
        None => {
            for &i in rows {
                for (o, s) in sink.row_mut(i).iter_mut().zip(source.row(i)) {
                    *o += s;
                }
            }
        }
    }
    Ok(LayerCost {
        layer: format!("skip{}", skip + 1),
        recomputed: rows.len(),
        total_rows: sink.rows(),
        analytic: flops,
        measured: flops,
    })
}

/// Per-channel maximum over all rows.
pub fn global_max(f: &FeatureMap) -> Result<Vec<f64>> {
    if f.rows() == 0 {
        return Err(Error::Shape("global max over an empty feature map".into()));
    }
    let mut out = f.row(0).to_vec();
    for i in 1..f.rows() {
        for (o, &x) in out.iter_mut().zip(f.row(i)) {
            if x > *o {
                *o = x;
            }
        }
    }
    Ok(out)
}

/// Global max followed by the linear head; always evaluated in full.
pub(crate) fn readout(model: &Model, last: &FeatureMap) -> Result<(Vec<f64>, Vec<f64>, LayerCost)> {
    let pooled = global_max(last)?;
    let head = model.head();
    let out = head.apply(&pooled)?;
    let flops = ((last.rows() - 1) * last.width()) as u64 + linear_flops(head.m_in, head.m_out, head.bias.is_some(), 1);
    let cost = LayerCost { layer: "readout".into(), recomputed: 1, total_rows: 1, analytic: flops, measured: flops };
    Ok((pooled, out, cost))
}

/// Dense pass over an explicit topology. `features` holds one scalar per node
/// and `frame` fixes the pooling grids.
pub fn dense_forward_topology(
    model: &Model,
    topo: &Topology,
    features: &[f64],
    frame: PoolFrame,
    schedule: Schedule,
) -> Result<(NetworkState, Vec<LayerCost>)> {
    if topo.is_empty() {
        return Err(Error::InvalidParameter("forward pass needs a non-empty graph".into()));
    }
    if features.len() != topo.num_nodes() || model.config().input_width != 1 {
        return Err(Error::Shape(format!("{} input features for {} nodes", features.len(), topo.num_nodes())));
    }
    let plan = LayerPlan::new(model)?;
    let mut acts = vec![FeatureMap::from_scalars(features)];
    let mut pooled: Vec<PooledGraph> = Vec::with_capacity(plan.num_pools());
    let mut costs = Vec::new();
    let mut scratch = ConvScratch::default();
    for layer in 0..plan.num_layers() {
        if let LayerConfig::MaxPool { voxels } = model.config().layers[layer] {
            let fine = level_topology(topo, &pooled, plan.level(layer));
            let built = PooledGraph::build(fine, VoxelGrid::new(voxels, frame)?);
            pooled.push(built);
        }
        let n_out = level_topology(topo, &pooled, plan.level(layer + 1)).num_nodes();
        acts.push(FeatureMap::zeros(n_out, plan.width(layer + 1)));
        let rows: Vec<usize> = (0..n_out).collect();
        let topo_in = level_topology(topo, &pooled, plan.level(layer));
        let target = plan.pool_slot(layer).map(|s| &pooled[s]);
        costs.push(run_layer(model, &plan, layer, topo_in, target, &mut acts, &rows, schedule, &mut scratch)?);
        if let Some(s) = plan.skip_into(layer + 1) {
            costs.push(apply_skip(model, s, &mut acts, &rows)?);
        }
    }
    let (global, out, cost) = readout(model, acts.last().expect("input map"))?;
    costs.push(cost);
    Ok((NetworkState { acts, pooled, global_max: global, readout: out }, costs))
}

/// Dense pass over an event graph, pooling within the graph's window frame.
pub fn dense_forward(model: &Model, g: &EventGraph, schedule: Schedule) -> Result<(NetworkState, Vec<LayerCost>)> {
    dense_forward_topology(model, g.topology(), g.features(), PoolFrame::for_graph(g), schedule)
}
