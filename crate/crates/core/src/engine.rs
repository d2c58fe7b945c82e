//! Incremental (per-event) inference.
//!
//! After each insertion only rows whose inputs or neighborhoods changed are
//! recomputed:
//!
//! * event graph: the new node plus every node that gained it as a neighbor;
//! * convolution: one-hop expansion of the input's dirty rows, plus nodes
//!   whose neighborhood changed on that level;
//! * pointwise layers: the input's dirty rows;
//! * pooling: clusters holding a dirty fine row, plus newly opened clusters;
//! * skip sinks: additionally the dirty rows of the skip source;
//! * readout: always in full.
//!
//! Every row goes through the same kernels as the dense pass, so cached
//! activations stay bitwise equal to a dense recomputation.

use std::collections::BTreeSet;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::events::Event;
use crate::flops::LayerCost;
use crate::graph::{EventGraph, Topology};
use crate::model::{LayerConfig, Model};
use crate::nn::{
    apply_skip, dense_forward, level_topology, readout, run_layer, ConvScratch, LayerPlan, NetworkState,
    PoolFrame, Schedule,
};

/// Cost and extent of one incremental update.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateStats {
    /// Zero-based count of events processed before this one.
    pub event_index: usize,
    pub node: usize,
    /// Per layer, skip and readout, in evaluation order.
    pub layers: Vec<LayerCost>,
    /// Rows rewritten in each activation (index 0 is the input map).
    pub rows_written: Vec<Vec<usize>>,
    pub touched: usize,
    pub total_rows: usize,
    pub touched_fraction: f64,
}

impl UpdateStats {
    pub fn measured(&self) -> u64 {
        self.layers.iter().map(|c| c.measured).sum()
    }

    pub fn analytic(&self) -> u64 {
        self.layers.iter().map(|c| c.analytic).sum()
    }
}

/// Running totals across updates; survives re-initialization.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StatsSummary {
    pub events: usize,
    pub measured: u64,
    pub analytic: u64,
    pub touched: usize,
    /// Event counts at which the caches were rebuilt.
    pub reinit_markers: Vec<usize>,
}

#[derive(Debug)]
pub struct AsyncState {
    model: Arc<Model>,
    plan: LayerPlan,
    graph: EventGraph,
    frame: PoolFrame,
    cache: NetworkState,
    schedule: Schedule,
    scratch: ConvScratch,
    summary: StatsSummary,
}

fn merge(mut rows: Vec<usize>) -> Vec<usize> {
    rows.sort_unstable();
    rows.dedup();
    rows
}

fn one_hop(topo: &Topology, seeds: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = seeds.to_vec();
    for &i in seeds {
        out.extend(topo.neighbors(i).iter().map(|e| e.target));
    }
    out
}

impl AsyncState {
    /// Runs the dense pass once and caches everything.
    pub fn initialize(model: Arc<Model>, graph: EventGraph, schedule: Schedule) -> Result<Self> {
        let plan = LayerPlan::new(&model)?;
        let (cache, _) = dense_forward(&model, &graph, schedule)?;
        let frame = PoolFrame::for_graph(&graph);
        Ok(AsyncState {
            model,
            plan,
            graph,
            frame,
            cache,
            schedule,
            scratch: ConvScratch::default(),
            summary: StatsSummary::default(),
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn graph(&self) -> &EventGraph {
        &self.graph
    }

    pub fn cache(&self) -> &NetworkState {
        &self.cache
    }

    pub fn readout(&self) -> &[f64] {
        &self.cache.readout
    }

    pub fn plan(&self) -> &LayerPlan {
        &self.plan
    }

    pub fn frame(&self) -> PoolFrame {
        self.frame
    }

    pub fn summary(&self) -> &StatsSummary {
        &self.summary
    }

    /// Graph feeding layer `layer`.
    pub fn layer_topology(&self, layer: usize) -> Result<&Topology> {
        if layer >= self.plan.num_layers() {
            return Err(Error::Lookup(format!("layer {layer} of {}", self.plan.num_layers())));
        }
        Ok(level_topology(self.graph.topology(), &self.cache.pooled, self.plan.level(layer)))
    }

    /// One-hop expansion of `seeds` in the graph feeding layer `layer`.
    pub fn dirty_frontier(&self, layer: usize, seeds: &[usize]) -> Result<BTreeSet<usize>> {
        self.layer_topology(layer)?.k_hop(seeds, 1)
    }

    /// Discards the caches and rebuilds them densely on the current graph.
    pub fn reinitialize(&mut self) -> Result<()> {
        let (cache, _) = dense_forward(&self.model, &self.graph, self.schedule)?;
        self.cache = cache;
        self.summary.reinit_markers.push(self.summary.events);
        Ok(())
    }

    /// Overwrites one cached entry; used to check that verification notices.
    #[doc(hidden)]
    pub fn corrupt_activation(&mut self, act: usize, row: usize, value: f64) {
        self.cache.acts[act].row_mut(row)[0] = value;
    }

    /// Inserts `e` and brings every cache up to date.
    pub fn process_event(&mut self, e: &Event) -> Result<(Vec<f64>, UpdateStats)> {
        let insertion = self.graph.insert_event(e)?;
        let node = insertion.node;
        let model = Arc::clone(&self.model);
        let cfg = model.config();
        let plan = &self.plan;
        let levels = plan.num_pools() + 1;

        self.cache.acts[0].push_row(&[self.graph.features()[node]]);
        let mut structural: Vec<Vec<usize>> = vec![Vec::new(); levels];
        structural[0] = merge(std::iter::once(node).chain(insertion.new_neighbors()).collect());
        let mut dirty: Vec<Vec<usize>> = vec![vec![node]];
        let mut layers = Vec::with_capacity(plan.num_layers() + cfg.skips.len() + 1);

        for layer in 0..plan.num_layers() {
            let (lin, lout) = (plan.level(layer), plan.level(layer + 1));
            let mut rows = match &cfg.layers[layer] {
                LayerConfig::SplineConv { .. } => {
                    let topo = level_topology(self.graph.topology(), &self.cache.pooled, lin);
                    let mut r = one_hop(topo, &dirty[layer]);
                    r.extend_from_slice(&structural[lin]);
                    r
                }
                LayerConfig::MaxPool { .. } => {
                    let slot = plan.pool_slot(layer).expect("pool layer has a slot");
                    let (fine_levels, rest) = self.cache.pooled.split_at_mut(slot);
                    let fine = level_topology(self.graph.topology(), fine_levels, lin);
                    let delta = rest[0].extend(fine);
                    let assignment = rest[0].assignment();
                    let mut r: Vec<usize> = dirty[layer].iter().map(|&i| assignment[i]).collect();
                    r.extend_from_slice(&delta.new_nodes);
                    structural[lout] = delta.structural;
                    r
                }
                _ => dirty[layer].clone(),
            };
            let skip = plan.skip_into(layer + 1);
            if let Some(s) = skip {
                rows.extend_from_slice(&dirty[cfg.skips[s].source]);
            }
            let rows = merge(rows);

            let n_out = level_topology(self.graph.topology(), &self.cache.pooled, lout).num_nodes();
            self.cache.acts[layer + 1].resize_rows(n_out);
            let topo_in = level_topology(self.graph.topology(), &self.cache.pooled, lin);
            let target = plan.pool_slot(layer).map(|s| &self.cache.pooled[s]);
            layers.push(run_layer(
                &model,
                plan,
                layer,
                topo_in,
                target,
                &mut self.cache.acts,
                &rows,
                self.schedule,
                &mut self.scratch,
            )?);
            if let Some(s) = skip {
                layers.push(apply_skip(&model, s, &mut self.cache.acts, &rows)?);
            }
            dirty.push(rows);
        }

        let (global, out, cost) = readout(&model, self.cache.acts.last().expect("input map"))?;
        layers.push(cost);
        self.cache.global_max = global;
        self.cache.readout = out.clone();

        let touched: usize = layers.iter().map(|c| c.recomputed).sum();
        let total_rows: usize = layers.iter().map(|c| c.total_rows).sum();
        let stats = UpdateStats {
            event_index: self.summary.events,
            node,
            touched,
            total_rows,
            touched_fraction: touched as f64 / total_rows as f64,
            rows_written: dirty,
            layers,
        };
        self.summary.events += 1;
        self.summary.measured += stats.measured();
        self.summary.analytic += stats.analytic();
        self.summary.touched += touched;
        Ok((out, stats))
    }
}
