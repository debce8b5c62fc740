mod common;

use common::*;
use mvsc_core::data::SparseGraph;
use mvsc_core::propagate::{cache_key, propagate, propagate_cached, prepare_views, NormalizedAdjacency};
use mvsc_core::{synth_multiview, DenseMatrix, FeatureMatrix, Normalization};
use rand::Rng;

fn random_graph(n: usize, p: f64, seed: u64) -> SparseGraph {
    let mut r = rng(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if r.random::<f64>() < p {
                edges.push((i, j, 1.0 + r.random::<f64>()));
            }
        }
    }
    SparseGraph::symmetrized_union(n, edges).unwrap()
}

fn dense_power_apply(s: &DenseMatrix, x: &DenseMatrix, p: usize) -> DenseMatrix {
    let mut out = x.clone();
    for _ in 0..p {
        out = s.matmul(&out).unwrap();
    }
    out
}

#[test]
fn operator_matches_dense_definition() {
    let g = random_graph(30, 0.2, 1);
    let adj = NormalizedAdjacency::new(&g, Normalization::SymSelfloop);
    let mut a = DenseMatrix::identity(30);
    for (i, j, w) in g.edges() {
        a.set(i, j, a.get(i, j) + w);
    }
    let d = a.row_sums();
    let oracle = DenseMatrix::from_fn(30, 30, |i, j| a.get(i, j) / (d[i] * d[j]).sqrt());
    assert!(max_abs_diff(&adj.to_dense(), &oracle) < 1e-14);
    assert!(adj.degrees().iter().all(|&v| v > 0.0));
}

#[test]
fn order_100_matches_dense_oracle() {
    let g = random_graph(80, 0.05, 2);
    let x = gaussian(80, 6, &mut rng(3));
    for norm in [Normalization::SymSelfloop, Normalization::Row, Normalization::Sym] {
        let adj = NormalizedAdjacency::new(&g, norm);
        let fast = propagate(&adj, &FeatureMatrix::new(x.clone()).unwrap(), 100).unwrap();
        let oracle = dense_power_apply(&adj.to_dense(), &x, 100);
        let scale = oracle.max_abs().max(1e-300);
        assert!(max_abs_diff(fast.matrix(), &oracle) <= 1e-10 * scale.max(1.0), "{norm:?}");
    }
}

#[test]
fn max_abs_bounded_by_degree_ratio() {
    for seed in 0..10 {
        let g = random_graph(60, 0.08, 10 + seed);
        let adj = NormalizedAdjacency::new(&g, Normalization::SymSelfloop);
        let d = adj.degrees();
        let ratio = d.iter().copied().fold(0.0, f64::max) / d.iter().copied().fold(f64::INFINITY, f64::min);
        let x = gaussian(60, 4, &mut rng(seed));
        let fx = FeatureMatrix::new(x.clone()).unwrap();
        for p in [1, 5, 50] {
            let out = propagate(&adj, &fx, p).unwrap();
            assert!(out.matrix().max_abs() <= x.max_abs() * ratio.sqrt() * (1.0 + 1e-12));
        }
    }
}

#[test]
fn orders_compose() {
    let g = random_graph(40, 0.1, 4);
    let adj = NormalizedAdjacency::new(&g, Normalization::SymSelfloop);
    let x = FeatureMatrix::new(gaussian(40, 3, &mut rng(5))).unwrap();
    let direct = propagate(&adj, &x, 5).unwrap();
    let staged = propagate(&adj, &propagate(&adj, &x, 2).unwrap(), 3).unwrap();
    assert!(max_abs_diff(direct.matrix(), staged.matrix()) < 1e-12);
}

#[test]
fn cache_is_keyed_by_order_and_normalization() {
    let g = random_graph(20, 0.2, 6);
    let x = FeatureMatrix::new(gaussian(20, 3, &mut rng(7))).unwrap();
    let k = cache_key(&g, &x, 2, Normalization::SymSelfloop);
    assert_ne!(k, cache_key(&g, &x, 3, Normalization::SymSelfloop));
    assert_ne!(k, cache_key(&g, &x, 2, Normalization::Row));
    assert_eq!(k, cache_key(&g.clone(), &x.clone(), 2, Normalization::SymSelfloop));

    let dir = tempfile::tempdir().unwrap();
    let first = propagate_cached(&g, &x, 2, Normalization::SymSelfloop, dir.path()).unwrap();
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    let second = propagate_cached(&g, &x, 2, Normalization::SymSelfloop, dir.path()).unwrap();
    assert_eq!(first, second);
    propagate_cached(&g, &x, 2, Normalization::Row, dir.path()).unwrap();
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 2);
}

#[test]
fn prepare_views_uses_each_views_order() {
    let mut ds = synth_multiview(60, 3, 2, 0.2, 1).unwrap();
    ds.set_propagation_order(1, 0).unwrap();
    let out = prepare_views(&ds, Normalization::SymSelfloop, None).unwrap();
    assert_eq!(&out[1], &ds.views()[1].features);
    let adj = NormalizedAdjacency::new(ds.views()[0].graph.as_ref().unwrap(), Normalization::SymSelfloop);
    assert_eq!(out[0], propagate(&adj, &ds.views()[0].features, 2).unwrap());
}
