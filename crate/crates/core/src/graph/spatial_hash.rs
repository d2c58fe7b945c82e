use std::collections::HashMap;

use super::Position;

/// Uniform hash grid with cells of side `radius`; every point within `radius`
/// of a query lies in the 27 cells around it.
#[derive(Debug, Clone)]
pub(crate) struct SpatialHash {
    cell: f64,
    cells: HashMap<[i64; 3], Vec<usize>>,
}

impl SpatialHash {
    pub fn new(cell: f64) -> Self {
        SpatialHash { cell, cells: HashMap::new() }
    }

    fn key(&self, p: &Position) -> [i64; 3] {
        std::array::from_fn(|s| (p[s] / self.cell).floor() as i64)
    }

    pub fn insert(&mut self, p: &Position, id: usize) {
        let k = self.key(p);
        self.cells.entry(k).or_default().push(id);
    }

    pub fn for_each_candidate(&self, p: &Position, mut f: impl FnMut(usize)) {
        let [cx, cy, ct] = self.key(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dt in -1..=1 {
                    if let Some(ids) = self.cells.get(&[cx + dx, cy + dy, ct + dt]) {
                        ids.iter().copied().for_each(&mut f);
                    }
                }
            }
        }
    }
}
