mod common;

use evgraph::events::{Event, Pattern, Resolution};
use evgraph::flops::{spline_conv_flops, FlopCounter, FlopsParams};
use evgraph::graph::{build_graph, EventGraph, GraphParams};
use evgraph::nn::{spline_conv, spline_conv_counted, spline_conv_rows, ConvScratch, FeatureMap, SplineBasis, SplineKernel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_kernel(rng: &mut ChaCha8Rng, m_in: usize, m_out: usize, ks: usize, degree: usize) -> SplineKernel {
    let w = (0..ks.pow(3) * m_in * m_out).map(|_| rng.random_range(-1.0..1.0)).collect();
    SplineKernel::new(m_in, m_out, ks, degree, w).unwrap()
}

fn random_features(rng: &mut ChaCha8Rng, rows: usize, width: usize) -> FeatureMap {
    FeatureMap::from_rows(width, (0..rows * width).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn small_graph(seed: u64, n: usize) -> EventGraph {
    let (ev, params) = common::stream(Pattern::Mixed, Resolution::new(12, 12), n, seed);
    build_graph(&ev, &params).unwrap()
}

#[test]
fn basis_matches_cox_de_boor() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for degree in 1..=3 {
        for ks in [2, 3, 4, 5, 8] {
            let basis = SplineBasis::new(degree, ks).unwrap();
            for _ in 0..200 {
                let mut u: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.0..=1.0));
                if rng.random_bool(0.1) {
                    u[0] = 1.0;
                }
                let dense = common::basis_dense(&u, degree, ks);
                let mut got = vec![0.0; dense.len()];
                for (p, v) in basis.eval(&u).unwrap().iter() {
                    got[p] += v;
                }
                for p in 0..dense.len() {
                    assert!((got[p] - dense[p]).abs() < 1e-12, "m={degree} k={ks} u={u:?} p={p}");
                }
            }
        }
    }
}

#[test]
fn basis_rejects_out_of_range_coordinates() {
    let b = SplineBasis::new(1, 2).unwrap();
    assert!(b.eval(&[1.2, 0.0, 0.0]).is_err());
    assert!(b.eval(&[f64::NAN, 0.0, 0.0]).is_err());
    assert!(SplineBasis::new(0, 2).is_err());
}

#[test]
fn convolution_matches_naive_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for case in 0..20 {
        let g = small_graph(case, rng.random_range(5..60));
        let kernel = random_kernel(&mut rng, 3, 2, [2, 3, 8][case as usize % 3], 1 + case as usize % 3);
        let f = random_features(&mut rng, g.num_nodes(), 3);
        let got = spline_conv(g.topology(), &f, &kernel).unwrap();
        assert!(got.max_abs_diff(&common::naive_conv(g.topology(), &f, &kernel)) <= 1e-10);
    }
}

#[test]
fn convolution_is_linear_in_features() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g = small_graph(9, 80);
    let kernel = random_kernel(&mut rng, 2, 3, 4, 2);
    let a = random_features(&mut rng, g.num_nodes(), 2);
    let b = random_features(&mut rng, g.num_nodes(), 2);
    let (alpha, beta) = (0.7, -1.3);
    let mix = FeatureMap::from_rows(2, a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| alpha * x + beta * y).collect()).unwrap();
    let (ya, yb, ym) = (
        spline_conv(g.topology(), &a, &kernel).unwrap(),
        spline_conv(g.topology(), &b, &kernel).unwrap(),
        spline_conv(g.topology(), &mix, &kernel).unwrap(),
    );
    for ((m, x), y) in ym.as_slice().iter().zip(ya.as_slice()).zip(yb.as_slice()) {
        assert!((m - (alpha * x + beta * y)).abs() < 1e-10);
    }
}

#[test]
fn all_rows_subset_equals_full_convolution() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let g = small_graph(4, 70);
    let kernel = random_kernel(&mut rng, 2, 2, 3, 3);
    let f = random_features(&mut rng, g.num_nodes(), 2);
    let full = spline_conv(g.topology(), &f, &kernel).unwrap();
    let mut out = FeatureMap::zeros(g.num_nodes(), 2);
    let rows: Vec<usize> = (0..g.num_nodes()).collect();
    spline_conv_rows(g.topology(), &f, &kernel, &rows, &mut out, &mut ConvScratch::default()).unwrap();
    assert_eq!(out, full);
}

#[test]
fn isolated_node_outputs_zero() {
    let mut g = EventGraph::new(GraphParams::for_window(Resolution::new(32, 32), 10)).unwrap();
    g.insert_event(&Event::new(1, 1, 0, 1)).unwrap();
    g.insert_event(&Event::new(30, 30, 1, 1)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let kernel = random_kernel(&mut rng, 1, 4, 2, 1);
    let out = spline_conv(g.topology(), &FeatureMap::from_scalars(&[1.0, 2.0]), &kernel).unwrap();
    assert!(out.as_slice().iter().all(|&v| v == 0.0));
}

#[test]
fn counted_schedule_matches_analytic_cost_on_every_layer_row() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let g = small_graph(6, 50);
    for (ks, degree) in [(2, 1), (4, 2), (8, 3)] {
        let kernel = random_kernel(&mut rng, 3, 5, ks, degree);
        let f = random_features(&mut rng, g.num_nodes(), 3);
        let rows: Vec<usize> = (0..g.num_nodes()).collect();
        let mut out = FeatureMap::zeros(g.num_nodes(), 5);
        let mut counter = FlopCounter::new();
        spline_conv_counted(g.topology(), &f, &kernel, &rows, &mut out, &mut counter, &mut ConvScratch::default()).unwrap();
        let analytic: u64 = rows
            .iter()
            .map(|&i| {
                spline_conv_flops(&FlopsParams {
                    neighbors: g.topology().degree(i) as u64,
                    m_in: 3,
                    m_out: 5,
                    grid_points: ks.pow(3) as u64,
                    dim: 3,
                    degree: degree as u64,
                })
                .unwrap()
            })
            .sum();
        assert_eq!(counter.count(), analytic, "ks={ks} m={degree}");
        assert!(out.max_abs_diff(&spline_conv(g.topology(), &f, &kernel).unwrap()) < 1e-10);
    }
}
