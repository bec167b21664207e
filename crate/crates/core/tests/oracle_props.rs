use proptest::prelude::*;

use projforget::bregman::{QuadraticObjective, FEASIBILITY_TOL};
use projforget::graph::{decrease_only_metric, Graph, WeightedGraph};
use projforget::oracle::{shortcut_deficit, MetricOracle, SeparationOracle, SeparationStatus};
use projforget::reference::{cyclic_bregman_solve, enumerate_cycles, enumerate_triangles};

/// A random graph on `n` nodes with nonnegative weights; always has an edge.
fn weighted_graph(max_n: usize) -> impl Strategy<Value = WeightedGraph> {
    (3..=max_n).prop_flat_map(|n| {
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect();
        let m = pairs.len();
        (
            prop::collection::vec(any::<bool>(), m),
            prop::collection::vec(prop_oneof![1 => Just(0.0), 6 => 0.0f64..10.0], m),
        )
            .prop_map(move |(keep, w)| {
                let mut edges: Vec<(usize, usize, f64)> = pairs
                    .iter()
                    .zip(keep.iter().zip(&w))
                    .filter(|(_, (k, _))| **k)
                    .map(|(&(i, j), (_, &w))| (i, j, w))
                    .collect();
                if edges.is_empty() {
                    edges.push((0, 1, w[0]));
                }
                WeightedGraph::new(n, &edges).unwrap()
            })
    })
}

fn complete_graph(max_n: usize) -> impl Strategy<Value = WeightedGraph> {
    (3..=max_n).prop_flat_map(|n| {
        prop::collection::vec(0.0f64..10.0, n * (n - 1) / 2).prop_map(move |w| {
            let g = Graph::complete(n);
            WeightedGraph::from_parts(g, w).unwrap()
        })
    })
}

/// Shortest-path distance by enumerating every simple path.
fn brute_force_distance(wg: &WeightedGraph, from: usize, to: usize) -> f64 {
    fn go(
        wg: &WeightedGraph,
        at: usize,
        to: usize,
        seen: &mut Vec<bool>,
        len: f64,
        best: &mut f64,
    ) {
        if at == to {
            *best = best.min(len);
            return;
        }
        for &(v, e) in wg.graph.neighbors(at) {
            if !seen[v] {
                seen[v] = true;
                go(wg, v, to, seen, len + wg.weights[e], best);
                seen[v] = false;
            }
        }
    }
    let mut seen = vec![false; wg.graph.node_count()];
    seen[from] = true;
    let mut best = f64::INFINITY;
    go(wg, from, to, &mut seen, 0.0, &mut best);
    best
}

fn distance_to_halfspace(h: &projforget::Hyperplane, x: &[f64]) -> f64 {
    h.residual(x).max(0.0) / h.coeffs().norm_sq().sqrt()
}

#[test]
fn k3_examples() {
    let wg = WeightedGraph::new(3, &[(0, 1, 1.0), (0, 2, 3.0), (1, 2, 1.0)]).unwrap();
    assert_eq!(shortcut_deficit(&wg).unwrap(), 1.0);
    let metric = WeightedGraph::new(3, &[(0, 1, 1.0), (0, 2, 2.0), (1, 2, 1.0)]).unwrap();
    assert_eq!(shortcut_deficit(&metric).unwrap(), 0.0);
    let projected = WeightedGraph::new(
        3,
        &[(0, 1, 4.0 / 3.0), (0, 2, 8.0 / 3.0), (1, 2, 4.0 / 3.0)],
    )
    .unwrap();
    assert!(shortcut_deficit(&projected).unwrap() <= 1e-15);
    assert_eq!(decrease_only_metric(&wg).unwrap(), vec![1.0, 2.0, 1.0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn oracle_is_sound_and_complete(wg in weighted_graph(6)) {
        let mut oracle = MetricOracle::new(wg.graph.clone());
        let res = oracle.separate(&wg.weights, 0).unwrap();
        for h in &res.constraints {
            prop_assert!(h.residual(&wg.weights) > FEASIBILITY_TOL);
        }
        let worst = enumerate_cycles(&wg.graph)
            .unwrap()
            .constraints
            .iter()
            .map(|h| h.residual(&wg.weights))
            .fold(0.0f64, f64::max);
        match res.status {
            SeparationStatus::FeasibleCertified => {
                prop_assert!(res.constraints.is_empty());
                prop_assert!(worst <= FEASIBILITY_TOL);
            }
            SeparationStatus::ViolationsFound => prop_assert!(!res.constraints.is_empty()),
            SeparationStatus::Sampled => prop_assert!(false, "metric oracle never samples"),
        }
    }

    #[test]
    fn violated_constraints_bound_distance_to_feasibility(wg in complete_graph(6)) {
        let n = wg.graph.node_count();
        let f = QuadraticObjective::squared_distance_to(&wg.weights);
        let r = cyclic_bregman_solve(&f, &enumerate_triangles(n).unwrap(), 200_000, 1e-12).unwrap();
        prop_assert!(r.converged);
        let dist = wg.weights.iter().zip(&r.x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let mut oracle = MetricOracle::new(wg.graph.clone());
        let found = oracle.separate(&wg.weights, 0).unwrap().constraints;
        let best = found.iter().map(|h| distance_to_halfspace(h, &wg.weights)).fold(0.0f64, f64::max);
        prop_assert!(best >= dist / n as f64 - 1e-9, "best {best} dist {dist}");
    }

    #[test]
    fn decrease_only_matches_path_enumeration(wg in weighted_graph(6)) {
        let out = decrease_only_metric(&wg).unwrap();
        for (e, &(u, v)) in wg.graph.edges().iter().enumerate() {
            let expected = brute_force_distance(&wg, u, v);
            prop_assert!((out[e] - expected).abs() <= 1e-12 * expected.max(1.0));
            prop_assert!(out[e] <= wg.weights[e]);
        }
        let again = decrease_only_metric(&WeightedGraph::from_parts(wg.graph.clone(), out.clone()).unwrap()).unwrap();
        for (a, b) in again.iter().zip(&out) {
            prop_assert!((a - b).abs() <= 1e-12 * b.max(1.0));
        }
    }

    #[test]
    fn oracle_results_are_repeatable(wg in weighted_graph(8)) {
        let mut a = MetricOracle::new(wg.graph.clone());
        let mut b = MetricOracle::new(wg.graph.clone());
        let ra = a.separate(&wg.weights, 0).unwrap().constraints;
        let rb = b.separate(&wg.weights, 3).unwrap().constraints;
        let ids = |r: &[projforget::Hyperplane]| r.iter().map(|h| h.id().clone()).collect::<Vec<_>>();
        prop_assert_eq!(ids(&ra), ids(&rb));
    }
}
