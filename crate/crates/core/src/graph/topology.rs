use std::collections::BTreeSet;

use crate::error::{Error, Result};

pub type Position = [f64; 3];

/// Directed adjacency entry: `target` plus the pseudo-coordinate of the target
/// seen from the owning node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub target: usize,
    pub pseudo: [f64; 3],
}

/// Maps the offset `x_j - x_i` into `[0, 1]^3`: zero offset lands on the
/// center, an offset of `radius` along an axis lands on the face.
pub fn pseudo_coords(x_i: &Position, x_j: &Position, radius: f64) -> [f64; 3] {
    let scale = 2.0 * radius;
    std::array::from_fn(|s| ((x_j[s] - x_i[s]) / scale + 0.5).clamp(0.0, 1.0))
}

pub fn squared_distance(a: &Position, b: &Position) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dt = a[2] - b[2];
    dx * dx + dy * dy + dt * dt
}

/// Node positions plus symmetric adjacency. Shared by the event graph and by
/// every pooled level.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    positions: Vec<Position>,
    adjacency: Vec<Vec<Edge>>,
    /// Undirected connections in creation order, stored as (newer-side, other).
    edge_log: Vec<(usize, usize)>,
    /// Normalization radius for pseudo-coordinates on this level.
    radius: f64,
}

impl Topology {
    pub fn new(radius: f64) -> Self {
        Topology { positions: Vec::new(), adjacency: Vec::new(), edge_log: Vec::new(), radius }
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn num_nodes(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn num_directed_edges(&self) -> usize {
        2 * self.edge_log.len()
    }

    pub fn position(&self, i: usize) -> &Position {
        &self.positions[i]
    }

    pub fn positions(&self) -> &[Position] {
        &self.positions
    }

    pub fn neighbors(&self, i: usize) -> &[Edge] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn edge_log(&self) -> &[(usize, usize)] {
        &self.edge_log
    }

    pub fn add_node(&mut self, pos: Position) -> usize {
        self.positions.push(pos);
        self.adjacency.push(Vec::new());
        self.positions.len() - 1
    }

    /// Adds the directed pair `(i, j)`, `(j, i)` with their pseudo-coordinates.
    pub fn connect(&mut self, i: usize, j: usize) {
        let (pi, pj) = (self.positions[i], self.positions[j]);
        self.adjacency[i].push(Edge { target: j, pseudo: pseudo_coords(&pi, &pj, self.radius) });
        self.adjacency[j].push(Edge { target: i, pseudo: pseudo_coords(&pj, &pi, self.radius) });
        self.edge_log.push((i, j));
    }

    fn check(&self, i: usize) -> Result<()> {
        if i < self.num_nodes() {
            Ok(())
        } else {
            Err(Error::Lookup(format!("node {i} not in graph of {} nodes", self.num_nodes())))
        }
    }

    /// All nodes reachable from `seeds` in at most `k` hops, seeds included.
    pub fn k_hop(&self, seeds: &[usize], k: usize) -> Result<BTreeSet<usize>> {
        for &s in seeds {
            self.check(s)?;
        }
        let mut seen: BTreeSet<usize> = seeds.iter().copied().collect();
        let mut layer: Vec<usize> = seen.iter().copied().collect();
        for _ in 0..k {
            let mut next = Vec::new();
            for &i in &layer {
                for e in &self.adjacency[i] {
                    if seen.insert(e.target) {
                        next.push(e.target);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            layer = next;
        }
        Ok(seen)
    }

    /// Relabels nodes: node `i` becomes `perm[i]`. Adjacency order and edge
    /// creation order are preserved.
    pub fn permuted(&self, perm: &[usize]) -> Topology {
        let n = self.num_nodes();
        assert_eq!(perm.len(), n);
        let mut positions = vec![[0.0; 3]; n];
        let mut adjacency = vec![Vec::new(); n];
        for i in 0..n {
            positions[perm[i]] = self.positions[i];
            adjacency[perm[i]] =
                self.adjacency[i].iter().map(|e| Edge { target: perm[e.target], pseudo: e.pseudo }).collect();
        }
        let edge_log = self.edge_log.iter().map(|&(a, b)| (perm[a], perm[b])).collect();
        Topology { positions, adjacency, edge_log, radius: self.radius }
    }
}
