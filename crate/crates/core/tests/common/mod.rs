//! Independent reference implementations shared by the integration tests.
//! None of them reuse the library's fast paths.

#![allow(dead_code)]

use evgraph::events::{generate_synthetic, Event, EventList, Pattern, Resolution, SynthParams};
use evgraph::graph::{pseudo_coords, GraphParams, Position, Topology};
use evgraph::nn::{FeatureMap, SplineKernel};

/// Synthetic stream with an exact event count; window equals the duration.
pub fn stream(pattern: Pattern, res: Resolution, count: usize, seed: u64) -> (EventList, GraphParams) {
    let duration = 1_000_000;
    let mut p = SynthParams::with_count(res, duration, count, seed);
    p.noise_rate_hz = count as f64 * 0.2;
    let ev = generate_synthetic(pattern, &p).unwrap();
    (ev, GraphParams::for_window(res, duration))
}

/// Undirected neighbor lists from an all-pairs scan applying the same
/// admission rule: candidates of each new node by (distance, id), admitted
/// while both endpoints are below the cap.
pub fn all_pairs_graph(events: &[Event], params: &GraphParams) -> (Vec<Position>, Vec<Vec<(usize, [f64; 3])>>) {
    let pos: Vec<Position> = events.iter().map(|e| [e.x as f64, e.y as f64, params.beta * e.t as f64]).collect();
    let mut adj: Vec<Vec<(usize, [f64; 3])>> = vec![Vec::new(); pos.len()];
    for i in 0..pos.len() {
        let mut cand: Vec<(f64, usize)> = (0..i)
            .filter_map(|j| {
                let d2: f64 = (0..3).map(|s| (pos[i][s] - pos[j][s]).powi(2)).sum();
                (d2 <= params.radius * params.radius).then_some((d2, j))
            })
            .collect();
        cand.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        for (_, j) in cand {
            if adj[i].len() >= params.max_degree {
                break;
            }
            if adj[j].len() < params.max_degree {
                let uij = pseudo_coords(&pos[i], &pos[j], params.radius);
                let uji = pseudo_coords(&pos[j], &pos[i], params.radius);
                adj[i].push((j, uij));
                adj[j].push((i, uji));
            }
        }
    }
    (pos, adj)
}

/// Breadth-first search truncated at depth `k`.
pub fn bfs(topo: &Topology, seeds: &[usize], k: usize) -> std::collections::BTreeSet<usize> {
    let mut depth = vec![usize::MAX; topo.num_nodes()];
    let mut queue = std::collections::VecDeque::new();
    for &s in seeds {
        depth[s] = 0;
        queue.push_back(s);
    }
    while let Some(i) = queue.pop_front() {
        if depth[i] == k {
            continue;
        }
        for e in topo.neighbors(i) {
            if depth[e.target] == usize::MAX {
                depth[e.target] = depth[i] + 1;
                queue.push_back(e.target);
            }
        }
    }
    (0..topo.num_nodes()).filter(|&i| depth[i] != usize::MAX).collect()
}

/// Clamped B-spline basis function `i` of degree `q` over `n` control points
/// at global parameter `x in [0, n - q]`, by the textbook recursion.
fn cox_de_boor(knots: &[f64], i: usize, q: usize, x: f64, x_max: f64) -> f64 {
    if q == 0 {
        let (a, b) = (knots[i], knots[i + 1]);
        return if (a <= x && x < b) || (x == x_max && b == x_max && a < b) { 1.0 } else { 0.0 };
    }
    let mut v = 0.0;
    let d1 = knots[i + q] - knots[i];
    if d1 > 0.0 {
        v += (x - knots[i]) / d1 * cox_de_boor(knots, i, q - 1, x, x_max);
    }
    let d2 = knots[i + q + 1] - knots[i + 1];
    if d2 > 0.0 {
        v += (knots[i + q + 1] - x) / d2 * cox_de_boor(knots, i + 1, q - 1, x, x_max);
    }
    v
}

/// All `n` per-axis basis values at `u in [0, 1]`.
pub fn basis_1d(u: f64, degree: usize, n: usize) -> Vec<f64> {
    let q = degree.min(n - 1);
    let x_max = (n - q) as f64;
    let mut knots = vec![0.0; q + 1];
    knots.extend((1..n - q).map(|k| k as f64));
    knots.extend(std::iter::repeat_n(x_max, q + 1));
    (0..n).map(|i| cox_de_boor(&knots, i, q, u * x_max, x_max)).collect()
}

/// Dense tensor-product basis over all `n^3` grid points.
pub fn basis_dense(u: &[f64; 3], degree: usize, n: usize) -> Vec<f64> {
    let b: Vec<Vec<f64>> = u.iter().map(|&c| basis_1d(c, degree, n)).collect();
    let mut out = vec![0.0; n * n * n];
    for i2 in 0..n {
        for i1 in 0..n {
            for i0 in 0..n {
                out[i0 + n * i1 + n * n * i2] = b[0][i0] * b[1][i1] * b[2][i2];
            }
        }
    }
    out
}

/// Direct evaluation of
/// `out_n(i) = 1/|N(i)| sum_l sum_j f_l(j) sum_p w[p][l][n] B_p(u(i, j))`.
pub fn naive_conv(topo: &Topology, f: &FeatureMap, kernel: &SplineKernel) -> FeatureMap {
    let ks = kernel.basis().kernel_size();
    let degree = kernel.basis().degree();
    let mut out = FeatureMap::zeros(topo.num_nodes(), kernel.m_out());
    for i in 0..topo.num_nodes() {
        let nbrs = topo.neighbors(i);
        if nbrs.is_empty() {
            continue;
        }
        for n in 0..kernel.m_out() {
            let mut acc = 0.0;
            for l in 0..kernel.m_in() {
                for e in nbrs {
                    let b = basis_dense(&e.pseudo, degree, ks);
                    let g: f64 = (0..b.len()).map(|p| kernel.weight(p, l, n) * b[p]).sum();
                    acc += f.row(e.target)[l] * g;
                }
            }
            out.row_mut(i)[n] = acc / nbrs.len() as f64;
        }
    }
    out
}
