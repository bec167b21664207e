//! Weighted correlation clustering through its metric relaxation.
//!
//! The signed instance is turned into `min w~^T |x - d| + 1/gamma |x - d|^T W |x - d|`
//! over `MET(G)` and the unit box. Because `d` is 0/1 and `x` lives in
//! `[0, 1]`, `|x_e - d_e| = d_e + (1 - 2 d_e) x_e` is affine and the objective
//! is a separable quadratic, handed to the active-set solver.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bregman::{ConstraintId, Hyperplane, QuadraticObjective, SparseVec};
use crate::error::{Error, Result};
use crate::graph::{shortest_path_completion, Graph, WeightedGraph};
use crate::oracle::{shortcut_deficit, tag, MetricOracle};
use crate::solver::{self, ConvergenceCriterion, Monitor, Schedule, Solution};

/// Curvature added to edges with `w~ = 0` so the objective stays strictly convex.
pub const ZERO_WEIGHT_RIDGE: f64 = 1e-8;

pub const DEFAULT_GAMMA: f64 = 1.0;

/// Tolerance on the metric deficit of inputs to [`lift_to_complete`].
pub const LIFT_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct SignedGraph {
    pub graph: Graph,
    pub wplus: Vec<f64>,
    pub wminus: Vec<f64>,
}

impl SignedGraph {
    /// Edges as `(u, v, w+, w-)`.
    pub fn new(n: usize, edges: &[(usize, usize, f64, f64)]) -> Result<Self> {
        let pairs: Vec<(usize, usize)> = edges.iter().map(|e| (e.0, e.1)).collect();
        let (graph, pos) = Graph::new(n, &pairs)?;
        let mut wplus = vec![0.0; edges.len()];
        let mut wminus = vec![0.0; edges.len()];
        for (e, &p) in edges.iter().zip(&pos) {
            wplus[p] = e.2;
            wminus[p] = e.3;
        }
        let sg = SignedGraph {
            graph,
            wplus,
            wminus,
        };
        sg.validate()?;
        Ok(sg)
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.graph.edge_count();
        if self.wplus.len() != m || self.wminus.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                actual: self.wplus.len().min(self.wminus.len()),
            });
        }
        for (e, (&p, &q)) in self.wplus.iter().zip(&self.wminus).enumerate() {
            if !(p >= 0.0 && q >= 0.0 && p.is_finite() && q.is_finite()) {
                let (u, v) = self.graph.edge(e);
                return Err(Error::invalid(format!(
                    "edge ({u}, {v}) needs finite nonnegative weights, got w+={p}, w-={q}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct CcInstance {
    pub graph: Graph,
    pub wtilde: Vec<f64>,
    /// 1 where the edge is more dissimilar than similar.
    pub d: Vec<u8>,
    pub gamma: f64,
    /// `x_e <= 1` and `-x_e <= 0` for every edge, upper bound first.
    pub box_constraints: Vec<Hyperplane>,
}

fn box_constraints(m: usize) -> Result<Vec<Hyperplane>> {
    let mut out = Vec::with_capacity(2 * m);
    for e in 0..m {
        let id = e as u32;
        out.push(Hyperplane::new(
            ConstraintId::new(vec![tag::UPPER_BOUND, id]),
            SparseVec::from_pairs([(e, 1.0)]),
            1.0,
        )?);
        out.push(Hyperplane::new(
            ConstraintId::new(vec![tag::LOWER_BOUND, id]),
            SparseVec::from_pairs([(e, -1.0)]),
            0.0,
        )?);
    }
    Ok(out)
}

/// `w~ = |w+ - w-|`, `d = [w- > w+]`, `W = diag(w~)` plus the unit box.
pub fn transform(signed: &SignedGraph, gamma: f64) -> Result<CcInstance> {
    signed.validate()?;
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::invalid(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    let wtilde = signed
        .wplus
        .iter()
        .zip(&signed.wminus)
        .map(|(p, q)| (p - q).abs())
        .collect();
    let d = signed
        .wplus
        .iter()
        .zip(&signed.wminus)
        .map(|(p, q)| u8::from(q > p))
        .collect();
    Ok(CcInstance {
        graph: signed.graph.clone(),
        wtilde,
        d,
        gamma,
        box_constraints: box_constraints(signed.graph.edge_count())?,
    })
}

impl CcInstance {
    /// The same instance on `K_n`, with zero weight on edges absent from `G`.
    pub fn on_complete_graph(&self) -> Result<CcInstance> {
        if self.graph.is_complete() {
            return Ok(self.clone());
        }
        let full = Graph::complete(self.graph.node_count());
        let mut wtilde = vec![0.0; full.edge_count()];
        let mut d = vec![0u8; full.edge_count()];
        for (e, p) in self.graph.complete_positions().into_iter().enumerate() {
            wtilde[p] = self.wtilde[e];
            d[p] = self.d[e];
        }
        Ok(CcInstance {
            box_constraints: box_constraints(full.edge_count())?,
            graph: full,
            wtilde,
            d,
            gamma: self.gamma,
        })
    }

    /// The objective as `s + r^T x + 1/2 x^T Q x`, valid on the unit box.
    pub fn quadratic(&self) -> Result<QuadraticObjective> {
        let g = self.gamma;
        let mut q = Vec::with_capacity(self.wtilde.len());
        let mut r = Vec::with_capacity(self.wtilde.len());
        let mut s = 0.0;
        for (&w, &d) in self.wtilde.iter().zip(&self.d) {
            let d = f64::from(d);
            let sign = 1.0 - 2.0 * d;
            q.push(if w > 0.0 {
                2.0 * w / g
            } else {
                ZERO_WEIGHT_RIDGE
            });
            r.push(w * sign - 2.0 * w * d / g);
            s += w * d * (1.0 + 1.0 / g);
        }
        QuadraticObjective::diagonal(q, r, s)
    }

    /// `w~^T |x - d| + 1/gamma |x - d|^T W |x - d|`.
    pub fn objective(&self, x: &[f64]) -> f64 {
        self.wtilde
            .iter()
            .zip(&self.d)
            .zip(x)
            .map(|((&w, &d), &x)| {
                let f = (x - f64::from(d)).abs();
                w * f + w * f * f / self.gamma
            })
            .sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CcSchedule {
    /// Oracle over `K_n`, two project/forget rounds per iteration.
    Dense,
    /// Oracle over `G`, 75 project/forget rounds per iteration.
    Sparse,
}

impl std::str::FromStr for CcSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense" => Ok(CcSchedule::Dense),
            "sparse" => Ok(CcSchedule::Sparse),
            other => Err(Error::invalid(format!("unknown schedule {other:?}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct CcSolution {
    /// Solution on the input graph's edges.
    pub x: Vec<f64>,
    pub objective: f64,
    pub converged: bool,
    pub solution: Solution,
}

/// Solves the relaxation until the worst cycle violation is at most `tol`.
pub fn solve_cc(
    instance: &CcInstance,
    schedule: CcSchedule,
    tol: f64,
    max_iterations: usize,
) -> Result<CcSolution> {
    solve_cc_with_monitor(instance, schedule, tol, max_iterations, &mut ())
}

/// The instance actually solved under `schedule`: `K_n` for the dense
/// schedule, the input graph otherwise.
pub fn working_instance(instance: &CcInstance, schedule: CcSchedule) -> Result<CcInstance> {
    match schedule {
        CcSchedule::Dense => instance.on_complete_graph(),
        CcSchedule::Sparse => Ok(instance.clone()),
    }
}

pub fn solve_cc_with_monitor<M: Monitor + ?Sized>(
    instance: &CcInstance,
    schedule: CcSchedule,
    tol: f64,
    max_iterations: usize,
    monitor: &mut M,
) -> Result<CcSolution> {
    let work = working_instance(instance, schedule)?;
    let sched = match schedule {
        CcSchedule::Dense => Schedule::CLUSTER_DENSE,
        CcSchedule::Sparse => Schedule::CLUSTER_SPARSE,
    };
    let f = work.quadratic()?;
    let mut oracle = MetricOracle::new(work.graph.clone());
    let criterion = ConvergenceCriterion::max_violation(tol, max_iterations);
    let solution = solver::run_with_monitor(
        &f,
        &mut oracle,
        &sched,
        &criterion,
        work.box_constraints.clone(),
        monitor,
    )?;
    let x: Vec<f64> = if work.graph.edge_count() == instance.graph.edge_count() {
        solution.x().to_vec()
    } else {
        instance
            .graph
            .complete_positions()
            .into_iter()
            .map(|p| solution.x()[p])
            .collect()
    };
    Ok(CcSolution {
        objective: instance.objective(&x),
        converged: solution.converged,
        x,
        solution,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ApproxRatio {
    pub ratio: f64,
    pub r: f64,
    /// `w~^T f = 0`; the ratio falls back to `1 + gamma`.
    pub degenerate: bool,
}

/// `(1 + gamma) / (1 + R)` with `R = f^T W f / (2 gamma w~^T f)`.
pub fn approximation_ratio(f: &[f64], wtilde: &[f64], gamma: f64) -> ApproxRatio {
    let quad: f64 = f.iter().zip(wtilde).map(|(f, w)| w * f * f).sum();
    let lin: f64 = f.iter().zip(wtilde).map(|(f, w)| w * f).sum();
    if lin == 0.0 {
        return ApproxRatio {
            ratio: 1.0 + gamma,
            r: 0.0,
            degenerate: true,
        };
    }
    let r = quad / (2.0 * gamma * lin);
    ApproxRatio {
        ratio: (1.0 + gamma) / (1.0 + r),
        r,
        degenerate: false,
    }
}

/// Ratios for a solution: `.0` uses `f = |x - d|`, `.1` plugs in `x` itself.
pub fn approx_ratio(x: &[f64], instance: &CcInstance) -> (ApproxRatio, ApproxRatio) {
    let fhat: Vec<f64> = x
        .iter()
        .zip(&instance.d)
        .map(|(x, &d)| (x - f64::from(d)).abs())
        .collect();
    (
        approximation_ratio(&fhat, &instance.wtilde, instance.gamma),
        approximation_ratio(x, &instance.wtilde, instance.gamma),
    )
}

/// Extends a metric on `G` to all of `K_n` by shortest-path distances. Pairs
/// in different components get the largest finite distance, which keeps every
/// triangle inequality.
pub fn lift_to_complete(x: &[f64], graph: &Graph) -> Result<Vec<f64>> {
    let wg = WeightedGraph::from_parts(graph.clone(), x.to_vec())?;
    let deficit = shortcut_deficit(&wg)?;
    if deficit > LIFT_TOL {
        return Err(Error::invalid(format!(
            "input is not in MET(G): worst cycle violation {deficit}"
        )));
    }
    let mut full = shortest_path_completion(&wg)?;
    let far = full
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(0.0f64, f64::max);
    for v in &mut full {
        if !v.is_finite() {
            *v = far;
        }
    }
    // keep G's own coordinates bit-identical
    for (e, p) in graph.complete_positions().into_iter().enumerate() {
        full[p] = x[e];
    }
    Ok(full)
}

/// Random signed graph on `n` nodes: each pair is an edge with probability
/// `density`, with `w+` and `w-` independent `U(0, 1)`.
pub fn generate_signed_instance(n: usize, density: f64, seed: u64) -> Result<SignedGraph> {
    if n < 2 {
        return Err(Error::invalid(format!(
            "signed instances need n >= 2, got {n}"
        )));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::invalid(format!(
            "density must lie in (0, 1], got {density}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if density >= 1.0 || rng.random_bool(density) {
                edges.push((u, v, rng.random::<f64>(), rng.random::<f64>()));
            }
        }
    }
    SignedGraph::new(n, &edges)
}
