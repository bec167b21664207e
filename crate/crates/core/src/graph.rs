//! Undirected weighted graphs, single-source shortest paths and the
//! decrease-only metric.
//!
//! Edges are stored once as `(u, v)` with `u < v`, sorted lexicographically.
//! Every per-edge vector in the crate (weights, iterates, duals of box
//! constraints) is indexed by this order.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Graph topology without weights.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    /// `(neighbor, edge index)`, sorted by neighbor.
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl Graph {
    /// Builds a graph from edges given in any order and orientation. Returns
    /// the graph and, for each input edge, its index in the sorted edge list.
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<(Graph, Vec<usize>)> {
        let mut keyed = Vec::with_capacity(edges.len());
        for (pos, &(a, b)) in edges.iter().enumerate() {
            if a == b {
                return Err(Error::invalid(format!("self-loop on node {a}")));
            }
            if a >= n || b >= n {
                return Err(Error::invalid(format!(
                    "edge ({a}, {b}) references a node outside 0..{n}"
                )));
            }
            keyed.push(((a.min(b), a.max(b)), pos));
        }
        keyed.sort_unstable();
        if let Some(w) = keyed.windows(2).find(|w| w[0].0 == w[1].0) {
            let (u, v) = w[0].0;
            return Err(Error::invalid(format!("duplicate edge ({u}, {v})")));
        }
        let mut position = vec![0; edges.len()];
        let mut sorted = Vec::with_capacity(edges.len());
        for (idx, (e, pos)) in keyed.into_iter().enumerate() {
            position[pos] = idx;
            sorted.push(e);
        }
        Ok((Self::from_sorted(n, sorted), position))
    }

    fn from_sorted(n: usize, edges: Vec<(usize, usize)>) -> Graph {
        let mut adjacency = vec![Vec::new(); n];
        for (idx, &(u, v)) in edges.iter().enumerate() {
            adjacency[u].push((v, idx));
            adjacency[v].push((u, idx));
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Graph {
            n,
            edges,
            adjacency,
        }
    }

    pub fn complete(n: usize) -> Graph {
        let mut edges = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for u in 0..n {
            for v in u + 1..n {
                edges.push((u, v));
            }
        }
        Self::from_sorted(n, edges)
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge(&self, idx: usize) -> (usize, usize) {
        self.edges[idx]
    }

    pub fn neighbors(&self, u: usize) -> &[(usize, usize)] {
        &self.adjacency[u]
    }

    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        let (u, v) = (a.min(b), a.max(b));
        let list = self.adjacency.get(u)?;
        list.binary_search_by_key(&v, |&(w, _)| w)
            .ok()
            .map(|p| list[p].1)
    }

    pub fn is_complete(&self) -> bool {
        self.edges.len() == self.n * self.n.saturating_sub(1) / 2
    }

    /// Position map from this graph's edges into `K_n`'s edges.
    pub fn complete_positions(&self) -> Vec<usize> {
        let n = self.n;
        self.edges
            .iter()
            .map(|&(u, v)| u * n - u * (u + 1) / 2 + (v - u - 1))
            .collect()
    }
}

/// A graph together with one weight per edge.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedGraph {
    pub graph: Graph,
    pub weights: Vec<f64>,
}

impl WeightedGraph {
    pub fn new(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let pairs: Vec<(usize, usize)> = edges.iter().map(|&(u, v, _)| (u, v)).collect();
        let (graph, position) = Graph::new(n, &pairs)?;
        let mut weights = vec![0.0; edges.len()];
        for (&(_, _, w), &p) in edges.iter().zip(&position) {
            weights[p] = w;
        }
        Ok(WeightedGraph { graph, weights })
    }

    pub fn from_parts(graph: Graph, weights: Vec<f64>) -> Result<Self> {
        if graph.edge_count() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: graph.edge_count(),
                actual: weights.len(),
            });
        }
        Ok(WeightedGraph { graph, weights })
    }

    pub fn check_nonnegative(&self) -> Result<()> {
        check_nonnegative(&self.graph, &self.weights)
    }
}

/// Negative weights down to this size are rounding residue of projections
/// onto `x >= 0` and are read as zero.
pub const NEGATIVE_WEIGHT_TOL: f64 = 1e-12;

pub(crate) fn check_nonnegative(graph: &Graph, weights: &[f64]) -> Result<()> {
    if weights.len() != graph.edge_count() {
        return Err(Error::DimensionMismatch {
            expected: graph.edge_count(),
            actual: weights.len(),
        });
    }
    match weights.iter().position(|w| !(*w >= -NEGATIVE_WEIGHT_TOL)) {
        Some(idx) => {
            let (u, v) = graph.edge(idx);
            Err(Error::NegativeWeight {
                u,
                v,
                weight: weights[idx],
            })
        }
        None => Ok(()),
    }
}

/// Shortest-path tree from one source.
#[derive(Clone, Debug, PartialEq)]
pub struct ShortestPaths {
    pub source: usize,
    pub dist: Vec<f64>,
    /// `(predecessor node, edge index)`; `None` for the source and unreachable nodes.
    pub pred: Vec<Option<(usize, usize)>>,
}

#[derive(Copy, Clone, PartialEq)]
struct HeapItem {
    dist: f64,
    node: usize,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Dijkstra from `source`. Among equal-length shortest paths the predecessor
/// with the lowest node index wins.
pub fn dijkstra(graph: &Graph, weights: &[f64], source: usize) -> Result<ShortestPaths> {
    check_nonnegative(graph, weights)?;
    if source >= graph.node_count() {
        return Err(Error::invalid(format!("source {source} out of range")));
    }
    Ok(dijkstra_unchecked(graph, weights, source))
}

pub(crate) fn dijkstra_unchecked(graph: &Graph, weights: &[f64], source: usize) -> ShortestPaths {
    let n = graph.node_count();
    let mut dist = vec![f64::INFINITY; n];
    let mut pred: Vec<Option<(usize, usize)>> = vec![None; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(HeapItem {
        dist: 0.0,
        node: source,
    });
    while let Some(HeapItem { dist: d, node: u }) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        for &(v, e) in graph.neighbors(u) {
            if done[v] {
                continue;
            }
            let nd = d + weights[e].max(0.0);
            if nd < dist[v] {
                dist[v] = nd;
                pred[v] = Some((u, e));
                heap.push(HeapItem { dist: nd, node: v });
            } else if nd == dist[v] && pred[v].is_some_and(|(p, _)| u < p) {
                pred[v] = Some((u, e));
            }
        }
    }
    ShortestPaths { source, dist, pred }
}

/// Edge indices along the tree path from `paths.source` to `target`, in order.
pub fn extract_path(paths: &ShortestPaths, target: usize) -> Result<Vec<usize>> {
    if target >= paths.dist.len() {
        return Err(Error::invalid(format!("target {target} out of range")));
    }
    if !paths.dist[target].is_finite() {
        return Err(Error::Unreachable {
            from: paths.source,
            to: target,
        });
    }
    let mut out = Vec::new();
    let mut cur = target;
    while cur != paths.source {
        let (p, e) = paths.pred[cur].expect("reachable node has a predecessor");
        out.push(e);
        cur = p;
    }
    out.reverse();
    Ok(out)
}

/// Thread pool for per-source shortest-path work. `PF_THREADS` caps its size.
pub fn thread_pool() -> &'static rayon::ThreadPool {
    static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        let threads = std::env::var("PF_THREADS")
            .ok()
            .and_then(|s| s.trim().parse::<usize>().ok())
            .filter(|&t| t > 0)
            .unwrap_or(0);
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("failed to build thread pool")
    })
}

/// Runs Dijkstra from every node that owns an edge `(u, v)` with `u` as the
/// smaller endpoint and maps the tree through `f`. Results come back in
/// source order regardless of scheduling.
pub(crate) fn map_forward_sources<T, F>(graph: &Graph, weights: &[f64], f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&ShortestPaths) -> T + Sync,
{
    let sources: Vec<usize> = (0..graph.node_count())
        .filter(|&u| graph.neighbors(u).last().is_some_and(|&(v, _)| v > u))
        .collect();
    thread_pool().install(|| {
        sources
            .par_iter()
            .map(|&s| f(&dijkstra_unchecked(graph, weights, s)))
            .collect()
    })
}

/// All-pairs shortest-path distances restricted to the graph's edges. The
/// result is the largest metric on `G` dominated by the input weights.
pub fn decrease_only_metric(wg: &WeightedGraph) -> Result<Vec<f64>> {
    wg.check_nonnegative()?;
    Ok(decrease_only_unchecked(&wg.graph, &wg.weights))
}

pub(crate) fn decrease_only_unchecked(graph: &Graph, weights: &[f64]) -> Vec<f64> {
    let mut out = weights.to_vec();
    let per_source = map_forward_sources(graph, weights, |sp| {
        graph
            .neighbors(sp.source)
            .iter()
            .filter(|&&(v, _)| v > sp.source)
            .map(|&(v, e)| (e, sp.dist[v]))
            .collect::<Vec<_>>()
    });
    for (e, d) in per_source.into_iter().flatten() {
        out[e] = d;
    }
    out
}

/// Shortest-path completion of edge weights on `G` to all of `K_n`, in `K_n`'s
/// lexicographic edge order. Unreachable pairs come back as infinity.
pub fn shortest_path_completion(wg: &WeightedGraph) -> Result<Vec<f64>> {
    wg.check_nonnegative()?;
    let n = wg.graph.node_count();
    let full = Graph::complete(n);
    let mut out = vec![f64::INFINITY; full.edge_count()];
    let rows: Vec<Vec<f64>> = thread_pool().install(|| {
        (0..n)
            .into_par_iter()
            .map(|s| dijkstra_unchecked(&wg.graph, &wg.weights, s).dist)
            .collect()
    });
    for (idx, &(u, v)) in full.edges().iter().enumerate() {
        out[idx] = rows[u][v];
    }
    Ok(out)
}
