//! Spatio-temporal event graph.
//!
//! Nodes sit at `(x, y, beta * t)`. A new node connects to existing nodes
//! within `radius`, closest first (ties by older id), as long as both
//! endpoints have fewer than `max_degree` neighbors. Edges are never removed,
//! so sequential insertion and batch construction agree exactly.

mod spatial_hash;
mod topology;

pub use topology::{pseudo_coords, squared_distance, Edge, Position, Topology};

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{Event, EventList, Resolution};
use spatial_hash::SpatialHash;

pub const DEFAULT_RADIUS: f64 = 3.0;
pub const DEFAULT_MAX_DEGREE: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphParams {
    /// Time scale: `t* = beta * t` with `t` in microseconds.
    pub beta: f64,
    pub radius: f64,
    pub max_degree: usize,
    pub resolution: Resolution,
    /// Window length the graph covers; fixes the temporal extent of pooling grids.
    pub window_us: u64,
}

impl GraphParams {
    /// Defaults: the window maps onto the sensor's larger side, `R = 3`,
    /// `D_max = 16`.
    pub fn for_window(resolution: Resolution, window_us: u64) -> Self {
        let window_us = window_us.max(1);
        GraphParams {
            beta: resolution.larger_side() as f64 / window_us as f64,
            radius: DEFAULT_RADIUS,
            max_degree: DEFAULT_MAX_DEGREE,
            resolution,
            window_us,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(Error::InvalidParameter(format!("radius must be > 0, got {}", self.radius)));
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::InvalidParameter(format!("beta must be > 0, got {}", self.beta)));
        }
        if self.max_degree == 0 {
            return Err(Error::InvalidParameter("max_degree must be >= 1".into()));
        }
        Ok(())
    }

    /// Normalized temporal length of the window.
    pub fn time_extent(&self) -> f64 {
        self.beta * self.window_us as f64
    }

    pub fn position(&self, e: &Event) -> Position {
        [e.x as f64, e.y as f64, self.beta * e.t as f64]
    }
}

/// Result of one insertion.
#[derive(Debug, Clone, PartialEq)]
pub struct Insertion {
    pub node: usize,
    /// Every directed edge added, both directions: `(node, j)` then `(j, node)`.
    pub edges: Vec<(usize, usize)>,
}

impl Insertion {
    /// Existing nodes that gained the new node as a neighbor.
    pub fn new_neighbors(&self) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().filter(|e| e.0 == self.node).map(|e| e.1)
    }
}

#[derive(Debug, Clone)]
pub struct EventGraph {
    params: GraphParams,
    topology: Topology,
    features: Vec<f64>,
    timestamps: Vec<u64>,
    index: SpatialHash,
}

impl PartialEq for EventGraph {
    fn eq(&self, other: &Self) -> bool {
        self.params == other.params
            && self.topology == other.topology
            && self.features == other.features
            && self.timestamps == other.timestamps
    }
}

impl EventGraph {
    pub fn new(params: GraphParams) -> Result<Self> {
        params.validate()?;
        Ok(EventGraph {
            index: SpatialHash::new(params.radius),
            topology: Topology::new(params.radius),
            params,
            features: Vec::new(),
            timestamps: Vec::new(),
        })
    }

    pub fn params(&self) -> &GraphParams {
        &self.params
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    /// Initial node features (polarity), one scalar per node.
    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn num_nodes(&self) -> usize {
        self.topology.num_nodes()
    }

    pub fn is_empty(&self) -> bool {
        self.topology.is_empty()
    }

    pub fn latest_timestamp(&self) -> Option<u64> {
        self.timestamps.last().copied()
    }

    pub fn k_hop(&self, seeds: &[usize], k: usize) -> Result<std::collections::BTreeSet<usize>> {
        self.topology.k_hop(seeds, k)
    }

    /// Appends one event. Timestamps must not decrease.
    pub fn insert_event(&mut self, e: &Event) -> Result<Insertion> {
        if let Some(latest) = self.latest_timestamp() {
            if e.t < latest {
                return Err(Error::Ordering { got: e.t, latest });
            }
        }
        if !self.params.resolution.contains(e.x, e.y) {
            return Err(Error::Validation {
                index: self.num_nodes(),
                message: format!("pixel ({}, {}) outside {:?}", e.x, e.y, self.params.resolution),
            });
        }
        let pos = self.params.position(e);
        let r2 = self.params.radius * self.params.radius;
        let mut candidates: Vec<(f64, usize)> = Vec::new();
        self.index.for_each_candidate(&pos, |j| {
            let d2 = squared_distance(&pos, self.topology.position(j));
            if d2 <= r2 {
                candidates.push((d2, j));
            }
        });
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        let node = self.topology.add_node(pos);
        self.features.push(e.p as f64);
        self.timestamps.push(e.t);
        self.index.insert(&pos, node);

        let cap = self.params.max_degree;
        let mut edges = Vec::new();
        for (_, j) in candidates {
            if self.topology.degree(node) >= cap {
                break;
            }
            if self.topology.degree(j) < cap {
                self.topology.connect(node, j);
                edges.push((node, j));
                edges.push((j, node));
            }
        }
        Ok(Insertion { node, edges })
    }

    /// Human-readable dump: `node` lines then `edge` lines, ordered by id.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for i in 0..self.num_nodes() {
            let p = self.topology.position(i);
            let _ = writeln!(out, "node {i} {} {} {} {}", p[0], p[1], p[2], self.features[i]);
        }
        for i in 0..self.num_nodes() {
            let mut nbrs: Vec<&Edge> = self.topology.neighbors(i).iter().collect();
            nbrs.sort_by_key(|e| e.target);
            for e in nbrs {
                let u = e.pseudo;
                let _ = writeln!(out, "edge {i} {} {} {} {}", e.target, u[0], u[1], u[2]);
            }
        }
        out
    }
}

/// Builds the graph over a whole (time-sorted) event list.
pub fn build_graph(ev: &EventList, params: &GraphParams) -> Result<EventGraph> {
    let mut g = EventGraph::new(params.clone())?;
    for e in ev.events() {
        g.insert_event(e).expect("EventList is time-sorted");
    }
    Ok(g)
}
