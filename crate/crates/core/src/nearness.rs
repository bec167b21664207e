//! ℓ₂ metric nearness: the closest point of `MET(G)` to a vector of edge
//! dissimilarities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::bregman::{ConstraintId, Hyperplane, QuadraticObjective, SparseVec};
use crate::error::{Error, Result};
use crate::graph::{Graph, WeightedGraph};
use crate::oracle::{tag, MetricOracle};
use crate::solver::{self, ConvergenceCriterion, Monitor, Schedule, Solution};

#[derive(Clone, Debug)]
pub struct NearnessInstance {
    /// Input weights are the target `x0`.
    pub graph: WeightedGraph,
    /// Stop once `||decrease_only(x) - x||_2` is at most this.
    pub threshold: f64,
    pub max_iterations: usize,
}

impl NearnessInstance {
    pub fn new(graph: WeightedGraph) -> Self {
        NearnessInstance {
            graph,
            threshold: 1e-6,
            max_iterations: 10_000,
        }
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }

    pub fn with_max_iterations(mut self, max_iterations: usize) -> Self {
        self.max_iterations = max_iterations;
        self
    }
}

#[derive(Clone, Debug)]
pub struct NearnessSolution {
    pub solution: Solution,
    /// Whether explicit `x >= 0` constraints had to be added.
    pub bounded: bool,
}

impl NearnessSolution {
    pub fn x(&self) -> &[f64] {
        self.solution.x()
    }

    pub fn converged(&self) -> bool {
        self.solution.converged
    }
}

fn lower_bounds(m: usize) -> Result<Vec<Hyperplane>> {
    (0..m)
        .map(|e| {
            Hyperplane::new(
                ConstraintId::new(vec![tag::LOWER_BOUND, e as u32]),
                SparseVec::from_pairs([(e, -1.0)]),
                0.0,
            )
        })
        .collect()
}

impl NearnessInstance {
    /// `1/2 ||x - w||^2`.
    pub fn objective(&self) -> QuadraticObjective {
        QuadraticObjective::squared_distance_to(&self.graph.weights)
    }
}

/// Projects the instance weights onto `MET(G)` in the Euclidean norm.
pub fn solve_nearness(instance: &NearnessInstance) -> Result<NearnessSolution> {
    solve_nearness_with_monitor(instance, &mut ())
}

pub fn solve_nearness_with_monitor<M: Monitor + ?Sized>(
    instance: &NearnessInstance,
    monitor: &mut M,
) -> Result<NearnessSolution> {
    instance.graph.check_nonnegative()?;
    let f = instance.objective();
    let criterion =
        ConvergenceCriterion::decrease_only(instance.threshold, instance.max_iterations);
    let mut solve = |persistent| {
        let mut oracle = MetricOracle::new(instance.graph.graph.clone());
        solver::run_with_monitor(
            &f,
            &mut oracle,
            &Schedule::NEARNESS,
            &criterion,
            persistent,
            monitor,
        )
    };
    match solve(Vec::new()) {
        Ok(solution) => Ok(NearnessSolution {
            solution,
            bounded: false,
        }),
        Err(Error::NegativeWeight { .. }) => {
            log::warn!("iterate left the nonnegative orthant; re-solving with x >= 0 constraints");
            Ok(NearnessSolution {
                solution: solve(lower_bounds(instance.graph.weights.len())?)?,
                bounded: true,
            })
        }
        Err(e) => Err(e),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InstanceKind {
    /// `|N(0, 1)|` weights.
    Gaussian,
    /// `1` with probability 0.8, else `0`.
    Bernoulli,
    /// `ceil(1000 u v^2)` with `u ~ U(0, 1]`, `v ~ N(0, 1)`.
    HeavyTail,
}

impl std::str::FromStr for InstanceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "type1" | "gaussian" => Ok(InstanceKind::Gaussian),
            "type2" | "bernoulli" => Ok(InstanceKind::Bernoulli),
            "type3" | "heavytail" => Ok(InstanceKind::HeavyTail),
            other => Err(Error::invalid(format!("unknown instance kind {other:?}"))),
        }
    }
}

/// Random weighted complete graph on `n` nodes; deterministic in `seed`.
pub fn generate_instance(n: usize, kind: InstanceKind, seed: u64) -> Result<WeightedGraph> {
    if n < 3 {
        return Err(Error::invalid(format!("instances need n >= 3, got {n}")));
    }
    let graph = Graph::complete(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights = (0..graph.edge_count())
        .map(|_| match kind {
            InstanceKind::Gaussian => rng.sample::<f64, _>(StandardNormal).abs(),
            InstanceKind::Bernoulli => {
                if rng.random_bool(0.8) {
                    1.0
                } else {
                    0.0
                }
            }
            InstanceKind::HeavyTail => {
                let u = 1.0 - rng.random::<f64>();
                let v: f64 = rng.sample(StandardNormal);
                (1000.0 * u * v * v).ceil()
            }
        })
        .collect();
    WeightedGraph::from_parts(graph, weights)
}
