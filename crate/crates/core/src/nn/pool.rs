//! Voxel-grid max pooling.
//!
//! Nodes are clustered by the voxel of a fixed grid over the sensor box and
//! the temporal window. Each cluster becomes one coarse node positioned at its
//! lowest-id member; coarse features are per-channel maxima; two clusters are
//! adjacent iff any fine edge joins them. Clusters and coarse edges are
//! created in fine node and fine edge creation order, so extending a pooled
//! graph as the fine graph grows yields exactly what a fresh build would.

use std::collections::{HashMap, HashSet};

use super::FeatureMap;
use crate::error::{Error, Result};
use crate::graph::{EventGraph, Position, Topology};

/// Box covered by a pooling grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoolFrame {
    pub origin: Position,
    pub extent: [f64; 3],
}

impl PoolFrame {
    pub fn new(origin: Position, extent: [f64; 3]) -> Result<Self> {
        if !extent.iter().all(|e| *e > 0.0 && e.is_finite()) || !origin.iter().all(|o| o.is_finite()) {
            return Err(Error::InvalidParameter(format!("pooling frame extent must be positive, got {extent:?}")));
        }
        Ok(PoolFrame { origin, extent })
    }

    /// Sensor plane times the graph's window, starting at the first node.
    /// Independent of later insertions.
    pub fn for_graph(g: &EventGraph) -> Self {
        let p = g.params();
        let t0 = g.topology().positions().first().map_or(0.0, |x| x[2]);
        PoolFrame {
            origin: [0.0, 0.0, t0],
            extent: [p.resolution.width as f64, p.resolution.height as f64, p.time_extent()],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoxelGrid {
    dims: [usize; 3],
    frame: PoolFrame,
}

impl VoxelGrid {
    pub fn new(dims: [usize; 3], frame: PoolFrame) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::InvalidParameter(format!("voxel dims must be positive, got {dims:?}")));
        }
        Ok(VoxelGrid { dims, frame })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn frame(&self) -> &PoolFrame {
        &self.frame
    }

    /// Cell coordinates; positions outside the frame fall into the border cells.
    pub fn voxel_of(&self, pos: &Position) -> [usize; 3] {
        std::array::from_fn(|s| {
            let rel = (pos[s] - self.frame.origin[s]) / self.frame.extent[s] * self.dims[s] as f64;
            if rel.is_nan() || rel < 0.0 {
                0
            } else {
                (rel as usize).min(self.dims[s] - 1)
            }
        })
    }

    pub fn key(&self, pos: &Position) -> usize {
        let v = self.voxel_of(pos);
        (v[2] * self.dims[1] + v[1]) * self.dims[0] + v[0]
    }

    pub fn cell_diagonal(&self) -> f64 {
        (0..3).map(|s| (self.frame.extent[s] / self.dims[s] as f64).powi(2)).sum::<f64>().sqrt()
    }
}

/// What one [`PooledGraph::extend`] call added.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PoolDelta {
    pub new_nodes: Vec<usize>,
    /// Undirected coarse connections added.
    pub new_edges: Vec<(usize, usize)>,
    /// Coarse nodes whose neighborhood changed, ascending.
    pub structural: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct PooledGraph {
    grid: VoxelGrid,
    topology: Topology,
    assignment: Vec<usize>,
    clusters: Vec<Vec<usize>>,
    voxel_index: HashMap<usize, usize>,
    coarse_edges: HashSet<(usize, usize)>,
    fine_edges_seen: usize,
}

impl PartialEq for PooledGraph {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid
            && self.topology == other.topology
            && self.assignment == other.assignment
            && self.clusters == other.clusters
    }
}

impl PooledGraph {
    /// Empty pooled level over a fine level whose pseudo-coordinates use
    /// `fine_radius`. Coarse representatives of adjacent clusters lie at most
    /// `fine_radius + 2 * diagonal` apart, which sets the coarse radius.
    pub fn new(grid: VoxelGrid, fine_radius: f64) -> Self {
        PooledGraph {
            topology: Topology::new(fine_radius + 2.0 * grid.cell_diagonal()),
            grid,
            assignment: Vec::new(),
            clusters: Vec::new(),
            voxel_index: HashMap::new(),
            coarse_edges: HashSet::new(),
            fine_edges_seen: 0,
        }
    }

    pub fn build(fine: &Topology, grid: VoxelGrid) -> Self {
        let mut pooled = Self::new(grid, fine.radius());
        pooled.extend(fine);
        pooled
    }

    pub fn grid(&self) -> &VoxelGrid {
        &self.grid
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    /// Fine node -> coarse node.
    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    /// Coarse node -> fine members, ascending.
    pub fn clusters(&self) -> &[Vec<usize>] {
        &self.clusters
    }

    pub fn num_nodes(&self) -> usize {
        self.clusters.len()
    }

    /// Absorbs fine nodes and fine connections created since the last call.
    pub fn extend(&mut self, fine: &Topology) -> PoolDelta {
        let mut delta = PoolDelta::default();
        for i in self.assignment.len()..fine.num_nodes() {
            let key = self.grid.key(fine.position(i));
            let k = match self.voxel_index.get(&key) {
                Some(&k) => k,
                None => {
                    let k = self.topology.add_node(*fine.position(i));
                    self.voxel_index.insert(key, k);
                    self.clusters.push(Vec::new());
                    delta.new_nodes.push(k);
                    k
                }
            };
            self.clusters[k].push(i);
            self.assignment.push(k);
        }
        for &(i, j) in &fine.edge_log()[self.fine_edges_seen..] {
            let (a, b) = (self.assignment[i], self.assignment[j]);
            if a != b && self.coarse_edges.insert((a.min(b), a.max(b))) {
                self.topology.connect(a, b);
                delta.new_edges.push((a, b));
            }
        }
        self.fine_edges_seen = fine.edge_log().len();
        let mut structural: Vec<usize> =
            delta.new_nodes.iter().copied().chain(delta.new_edges.iter().flat_map(|&(a, b)| [a, b])).collect();
        structural.sort_unstable();
        structural.dedup();
        delta.structural = structural;
        delta
    }
}

/// Recomputes the coarse rows `rows` as per-channel cluster maxima. Returns
/// the comparison count.
pub fn pool_rows(pooled: &PooledGraph, f: &FeatureMap, rows: &[usize], out: &mut FeatureMap) -> Result<u64> {
    if f.rows() != pooled.assignment.len() {
        return Err(Error::Shape(format!("{} feature rows for {} fine nodes", f.rows(), pooled.assignment.len())));
    }
    if out.width() != f.width() || out.rows() != pooled.num_nodes() {
        return Err(Error::Shape(format!(
            "pooled output is {}x{}, expected {}x{}",
            out.rows(),
            out.width(),
            pooled.num_nodes(),
            f.width()
        )));
    }
    let mut flops = 0u64;
    for &k in rows {
        let members = pooled
            .clusters
            .get(k)
            .ok_or_else(|| Error::Lookup(format!("coarse node {k} of {}", pooled.num_nodes())))?;
        let row = out.row_mut(k);
        row.copy_from_slice(f.row(members[0]));
        for &i in &members[1..] {
            for (o, &x) in row.iter_mut().zip(f.row(i)) {
                if x > *o {
                    *o = x;
                }
            }
        }
        flops += ((members.len() - 1) * f.width()) as u64;
    }
    Ok(flops)
}

/// Pools every node of `fine`.
pub fn voxel_pool(fine: &Topology, f: &FeatureMap, grid: VoxelGrid) -> Result<(PooledGraph, FeatureMap)> {
    let pooled = PooledGraph::build(fine, grid);
    let mut out = FeatureMap::zeros(pooled.num_nodes(), f.width());
    let rows: Vec<usize> = (0..pooled.num_nodes()).collect();
    pool_rows(&pooled, f, &rows, &mut out)?;
    Ok((pooled, out))
}
