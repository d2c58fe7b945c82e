//! Browser demo: stream synthetic events through the incremental engine,
//! show which nodes each update rewrites, and compare its cost with a full
//! recomputation.

use std::sync::Arc;

use evgraph::engine::AsyncState;
use evgraph::events::{generate_synthetic, EventList, Pattern, Resolution, SynthParams};
use evgraph::flops::{spline_conv_flops, FlopsParams};
use evgraph::graph::{build_graph, GraphParams};
use evgraph::model::{preset, Model};
use evgraph::nn::{bspline_basis, dense_forward, Schedule};
use wasm_bindgen::prelude::*;

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub struct Demo {
    state: AsyncState,
    events: EventList,
    next: usize,
    last_written: Vec<u32>,
    last_async: f64,
    last_dense: f64,
    total_async: f64,
    total_dense: f64,
}

#[wasm_bindgen]
impl Demo {
    /// Generates a mixed stream of `count` events on a `side` x `side` sensor
    /// and densely initializes on the first `init` of them.
    #[wasm_bindgen(constructor)]
    pub fn new(side: u16, count: usize, init: usize, seed: u64) -> Result<Demo, JsError> {
        if init == 0 || init >= count {
            return Err(JsError::new("need 0 < init < count"));
        }
        let res = Resolution::new(side, side);
        let duration = 1_000_000;
        let mut params = SynthParams::with_count(res, duration, count, seed);
        params.noise_rate_hz = count as f64 * 0.2;
        let events = generate_synthetic(Pattern::Mixed, &params).map_err(js_err)?;
        let graph_params = GraphParams::for_window(res, duration);
        let graph = build_graph(&events.slice(0, init), &graph_params).map_err(js_err)?;
        let model = Model::random_init(&preset("recognition").map_err(js_err)?, seed).map_err(js_err)?;
        let state = AsyncState::initialize(Arc::new(model), graph, Schedule::Fast).map_err(js_err)?;
        Ok(Demo {
            state,
            events,
            next: init,
            last_written: Vec::new(),
            last_async: 0.0,
            last_dense: 0.0,
            total_async: 0.0,
            total_dense: 0.0,
        })
    }

    /// Inserts the next event. Returns false once the stream is exhausted.
    pub fn step(&mut self) -> Result<bool, JsError> {
        let Some(e) = self.events.events().get(self.next).copied() else {
            return Ok(false);
        };
        let (_, stats) = self.state.process_event(&e).map_err(js_err)?;
        let (_, dense) = dense_forward(self.state.model(), self.state.graph(), Schedule::Fast).map_err(js_err)?;
        self.next += 1;
        // first convolution output: the nodes whose features this event changed
        self.last_written = stats.rows_written[1].iter().map(|&r| r as u32).collect();
        self.last_async = stats.measured() as f64;
        self.last_dense = dense.iter().map(|c| c.measured).sum::<u64>() as f64;
        self.total_async += self.last_async;
        self.total_dense += self.last_dense;
        Ok(true)
    }

    pub fn num_nodes(&self) -> usize {
        self.state.graph().num_nodes()
    }

    pub fn remaining(&self) -> usize {
        self.events.len() - self.next
    }

    /// Interleaved `x, y, polarity` per node.
    pub fn nodes(&self) -> Vec<f64> {
        let g = self.state.graph();
        g.topology()
            .positions()
            .iter()
            .zip(g.features())
            .flat_map(|(p, &f)| [p[0], p[1], f])
            .collect()
    }

    /// Nodes rewritten in the first layer by the last step.
    pub fn written(&self) -> Vec<u32> {
        self.last_written.clone()
    }

    pub fn last_async_flops(&self) -> f64 {
        self.last_async
    }

    pub fn last_dense_flops(&self) -> f64 {
        self.last_dense
    }

    /// Cumulative async / dense operation ratio since construction.
    pub fn ratio(&self) -> f64 {
        if self.total_dense == 0.0 {
            0.0
        } else {
            self.total_async / self.total_dense
        }
    }

    pub fn scores(&self) -> Vec<f64> {
        self.state.readout().to_vec()
    }
}

/// Samples every per-axis basis function at `samples` evenly spaced points;
/// row-major `[basis][sample]`.
#[wasm_bindgen]
pub fn bspline_curves(degree: usize, kernel_size: usize, samples: usize) -> Result<Vec<f64>, JsError> {
    let samples = samples.max(2);
    let mut out = vec![0.0; kernel_size * samples];
    for s in 0..samples {
        let u = s as f64 / (samples - 1) as f64;
        // the other axes sit at 0, where only their first basis is nonzero (and equals 1)
        for (p, v) in bspline_basis(&[u, 0.0, 0.0], degree, kernel_size).map_err(js_err)? {
            if p < kernel_size {
                out[p * samples + s] = v;
            }
        }
    }
    Ok(out)
}

/// Per-node spline convolution cost for a 3-D kernel.
#[wasm_bindgen]
pub fn conv_flops(neighbors: u32, m_in: u32, m_out: u32, kernel_size: u32, degree: u32) -> Result<f64, JsError> {
    let p = FlopsParams {
        neighbors: neighbors as u64,
        m_in: m_in as u64,
        m_out: m_out as u64,
        grid_points: (kernel_size as u64).pow(3),
        dim: 3,
        degree: degree as u64,
    };
    spline_conv_flops(&p).map(|f| f as f64).map_err(js_err)
}
