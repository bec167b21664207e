//! Separation oracles: metric-violation search over shortest paths and uniform
//! sampling from an explicit constraint pool.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bregman::{ConstraintId, Hyperplane, SparseVec, FEASIBILITY_TOL};
use crate::error::{Error, Result};
use crate::graph::{self, map_forward_sources, Graph, WeightedGraph};

/// Leading component of a [`ConstraintId`], separating the id spaces of the
/// constraint families this crate builds.
pub mod tag {
    pub const CYCLE: u32 = 0;
    pub const LOWER_BOUND: u32 = 1;
    pub const UPPER_BOUND: u32 = 2;
    pub const MARGIN: u32 = 3;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeparationStatus {
    /// The query point satisfies every constraint of the family.
    FeasibleCertified,
    /// Every returned constraint is violated at the query point.
    ViolationsFound,
    /// A random draw from the family; nothing is certified.
    Sampled,
}

#[derive(Clone, Debug)]
pub struct SeparationResult {
    pub status: SeparationStatus,
    pub constraints: Vec<Hyperplane>,
}

/// Feasibility measurements of a point against an oracle's family.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Measurement {
    /// Largest constraint residual, clipped below at zero.
    pub max_violation: f64,
    /// `||x_hat - x||_2` against the decrease-only projection, when the
    /// family has one.
    pub decrease_only_distance: Option<f64>,
}

pub trait SeparationOracle {
    /// Queries the oracle at `x`. `iteration` seeds randomized oracles.
    fn separate(&mut self, x: &[f64], iteration: usize) -> Result<SeparationResult>;

    fn measure(&self, x: &[f64]) -> Result<Measurement>;
}

/// The cycle inequality `x(long) - sum_{e in path} x(e) <= 0`.
pub fn cycle_constraint(long_edge: usize, path: &[usize]) -> Result<Hyperplane> {
    let mut key: Vec<u32> = Vec::with_capacity(path.len() + 2);
    key.push(tag::CYCLE);
    key.push(long_edge as u32);
    let mut sorted: Vec<u32> = path.iter().map(|&e| e as u32).collect();
    sorted.sort_unstable();
    key.extend(sorted);
    let coeffs = SparseVec::from_pairs(
        std::iter::once((long_edge, 1.0)).chain(path.iter().map(|&e| (e, -1.0))),
    );
    Hyperplane::new(ConstraintId::new(key), coeffs, 0.0)
}

/// Deterministic oracle for `MET(G)`: for every edge longer than the shortest
/// path between its endpoints, returns the cycle formed by the edge and that
/// path. Results are sorted by edge index.
#[derive(Clone, Debug)]
pub struct MetricOracle {
    graph: Graph,
}

impl MetricOracle {
    pub fn new(graph: Graph) -> Self {
        MetricOracle { graph }
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }
}

impl SeparationOracle for MetricOracle {
    fn separate(&mut self, x: &[f64], _iteration: usize) -> Result<SeparationResult> {
        let constraints = metric_violations(&self.graph, x)?;
        let status = if constraints.is_empty() {
            SeparationStatus::FeasibleCertified
        } else {
            SeparationStatus::ViolationsFound
        };
        Ok(SeparationResult {
            status,
            constraints,
        })
    }

    fn measure(&self, x: &[f64]) -> Result<Measurement> {
        graph::check_nonnegative(&self.graph, x)?;
        let per_source = map_forward_sources(&self.graph, x, |sp| {
            let mut worst = 0.0f64;
            let mut sq = 0.0;
            for &(v, e) in self.graph.neighbors(sp.source) {
                if v > sp.source {
                    let gap = x[e] - sp.dist[v];
                    worst = worst.max(gap);
                    sq += gap * gap;
                }
            }
            (worst, sq)
        });
        let (worst, sq) = per_source
            .into_iter()
            .fold((0.0f64, 0.0), |(w, s), (a, b)| (w.max(a), s + b));
        Ok(Measurement {
            max_violation: worst,
            decrease_only_distance: Some(sq.sqrt()),
        })
    }
}

/// Violated cycle inequalities at `x`, one per offending edge.
pub fn metric_violations(graph: &Graph, x: &[f64]) -> Result<Vec<Hyperplane>> {
    graph::check_nonnegative(graph, x)?;
    let per_source = map_forward_sources(graph, x, |sp| {
        let mut found = Vec::new();
        for &(v, e) in graph.neighbors(sp.source) {
            if v > sp.source && x[e] > sp.dist[v] + FEASIBILITY_TOL {
                let path = graph::extract_path(sp, v).expect("neighbor is reachable");
                found.push((e, path));
            }
        }
        found
    });
    let mut out: Vec<(usize, Vec<usize>)> = per_source.into_iter().flatten().collect();
    out.sort_unstable_by_key(|(e, _)| *e);
    out.into_iter()
        .map(|(e, path)| cycle_constraint(e, &path))
        .collect()
}

/// `max_e x(e) - d(i, j)` over edges `e = (i, j)`, clipped below at zero.
pub fn shortcut_deficit(wg: &WeightedGraph) -> Result<f64> {
    Ok(MetricOracle::new(wg.graph.clone())
        .measure(&wg.weights)?
        .max_violation)
}

/// Random oracle drawing `sample_size` distinct constraints uniformly from an
/// explicit pool. Each member is included with probability
/// `sample_size / |pool|`.
#[derive(Clone, Debug)]
pub struct RandomOraclePool {
    universe: Vec<Hyperplane>,
    sample_size: usize,
    seed: u64,
}

impl RandomOraclePool {
    pub fn new(universe: Vec<Hyperplane>, sample_size: usize, seed: u64) -> Result<Self> {
        if universe.is_empty() {
            return Err(Error::invalid(
                "random oracle needs a nonempty constraint pool",
            ));
        }
        if sample_size == 0 || sample_size > universe.len() {
            return Err(Error::invalid(format!(
                "sample size {sample_size} must lie in 1..={}",
                universe.len()
            )));
        }
        Ok(RandomOraclePool {
            universe,
            sample_size,
            seed,
        })
    }

    pub fn universe(&self) -> &[Hyperplane] {
        &self.universe
    }

    /// Inclusion probability of every pool member.
    pub fn tau(&self) -> f64 {
        self.sample_size as f64 / self.universe.len() as f64
    }

    /// Indices drawn at `iteration`; a pure function of `(seed, iteration)`.
    pub fn draw(&self, iteration: usize) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(iteration as u64);
        index::sample(&mut rng, self.universe.len(), self.sample_size).into_vec()
    }
}

impl SeparationOracle for RandomOraclePool {
    fn separate(&mut self, _x: &[f64], iteration: usize) -> Result<SeparationResult> {
        Ok(SeparationResult {
            status: SeparationStatus::Sampled,
            constraints: self
                .draw(iteration)
                .into_iter()
                .map(|i| self.universe[i].clone())
                .collect(),
        })
    }

    fn measure(&self, x: &[f64]) -> Result<Measurement> {
        let worst = self
            .universe
            .iter()
            .map(|h| h.residual(x))
            .fold(0.0f64, f64::max);
        Ok(Measurement {
            max_violation: worst,
            decrease_only_distance: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k3(w: [f64; 3]) -> WeightedGraph {
        WeightedGraph::new(3, &[(0, 1, w[0]), (0, 2, w[1]), (1, 2, w[2])]).unwrap()
    }

    #[test]
    fn k3_violation() {
        let wg = k3([1.0, 3.0, 1.0]);
        let mut oracle = MetricOracle::new(wg.graph.clone());
        let res = oracle.separate(&wg.weights, 0).unwrap();
        assert_eq!(res.status, SeparationStatus::ViolationsFound);
        assert_eq!(res.constraints.len(), 1);
        let h = &res.constraints[0];
        assert_eq!(h.coeffs().indices(), &[0, 1, 2]);
        assert_eq!(h.coeffs().values(), &[-1.0, 1.0, -1.0]);
        assert_eq!(h.offset(), 0.0);
        assert_eq!(shortcut_deficit(&wg).unwrap(), 1.0);
    }

    #[test]
    fn metric_inputs_certified() {
        let wg = k3([1.0, 1.0, 1.0]);
        let res = MetricOracle::new(wg.graph.clone())
            .separate(&wg.weights, 0)
            .unwrap();
        assert_eq!(res.status, SeparationStatus::FeasibleCertified);
        assert_eq!(shortcut_deficit(&wg).unwrap(), 0.0);

        let projected = k3([4.0 / 3.0, 8.0 / 3.0, 4.0 / 3.0]);
        assert!(shortcut_deficit(&projected).unwrap() <= 1e-15);

        let path = WeightedGraph::new(3, &[(0, 1, 5.0), (1, 2, 0.1)]).unwrap();
        let res = MetricOracle::new(path.graph.clone())
            .separate(&path.weights, 0)
            .unwrap();
        assert_eq!(res.status, SeparationStatus::FeasibleCertified);
    }

    #[test]
    fn negative_weights_rejected() {
        let wg = k3([1.0, -3.0, 1.0]);
        assert!(MetricOracle::new(wg.graph.clone())
            .separate(&wg.weights, 0)
            .is_err());
    }

    #[test]
    fn decrease_only_distance_measured() {
        let wg = k3([1.0, 3.0, 1.0]);
        let m = MetricOracle::new(wg.graph.clone())
            .measure(&wg.weights)
            .unwrap();
        assert_eq!(m.decrease_only_distance, Some(1.0));
    }

    #[test]
    fn cycle_ids_ignore_path_order() {
        let a = cycle_constraint(4, &[1, 7, 2]).unwrap();
        let b = cycle_constraint(4, &[2, 1, 7]).unwrap();
        assert_eq!(a.id(), b.id());
        assert_ne!(a.id(), cycle_constraint(1, &[4, 7, 2]).unwrap().id());
    }

    fn pool(k: usize, size: usize, seed: u64) -> RandomOraclePool {
        let universe = (0..k)
            .map(|i| {
                Hyperplane::new(
                    ConstraintId::new(vec![9, i as u32]),
                    SparseVec::from_pairs([(i, 1.0)]),
                    0.0,
                )
                .unwrap()
            })
            .collect();
        RandomOraclePool::new(universe, size, seed).unwrap()
    }

    #[test]
    fn exhaustive_sampling_returns_universe() {
        let mut p = pool(7, 7, 3);
        let mut ids: Vec<_> = p
            .separate(&[0.0; 7], 0)
            .unwrap()
            .constraints
            .iter()
            .map(|h| h.id().clone())
            .collect();
        ids.sort();
        let mut all: Vec<_> = p.universe().iter().map(|h| h.id().clone()).collect();
        all.sort();
        assert_eq!(ids, all);
    }

    #[test]
    fn sampling_is_deterministic_per_iteration() {
        let p = pool(50, 5, 11);
        assert_eq!(p.draw(4), p.draw(4));
        assert_ne!(p.draw(4), p.draw(5));
    }

    #[test]
    fn sampling_is_uniform() {
        // chi-square over 10 cells with 1e4 draws; 27.88 is the 0.999 quantile
        // at 9 degrees of freedom.
        let p = pool(10, 1, 2024);
        let mut counts = [0usize; 10];
        for it in 0..10_000 {
            counts[p.draw(it)[0]] += 1;
        }
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - 1000.0).powi(2) / 1000.0)
            .sum();
        assert!(chi2 < 27.88, "chi2 = {chi2}, counts = {counts:?}");
        // 3 sigma of Binomial(1e4, 0.1) is 90
        assert!(
            counts.iter().all(|&c| (c as f64 - 1000.0).abs() <= 90.0),
            "{counts:?}"
        );
    }

    #[test]
    fn empty_pool_rejected() {
        assert!(RandomOraclePool::new(Vec::new(), 1, 0).is_err());
    }
}
