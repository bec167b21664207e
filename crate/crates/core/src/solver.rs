//! The active-set outer loop: project onto remembered constraints, then forget
//! those whose duals have returned to zero.
//!
//! Each iteration queries a separation oracle, merges the returned constraints
//! into the remembered list, runs one or more rounds of corrected projections
//! followed by a forget pass, and finally projects once onto the persistent
//! constraints, which are never forgotten. The truly stochastic variant
//! replaces the remembered list by the oracle's draw every iteration and keeps
//! all duals.

use std::collections::HashSet;
use std::io::{self, Write};
use std::time::Instant;

use crate::bregman::{
    corrected_projection_step, forget_pass, BregmanFunction, ConstraintId, DualMap, Hyperplane,
    StepOutcome, DUAL_ZERO_TOL,
};
use crate::error::{Error, Result};
use crate::oracle::{Measurement, SeparationOracle};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Schedule {
    pub rounds_per_iteration: usize,
    /// Project onto each discovered constraint immediately and remember it
    /// only if its dual is nonzero afterwards.
    pub project_on_find: bool,
    /// Forget every constraint each iteration but keep the duals.
    pub truly_stochastic: bool,
}

impl Schedule {
    /// One projection round per iteration, no extras.
    pub const BASIC: Schedule = Schedule {
        rounds_per_iteration: 1,
        project_on_find: false,
        truly_stochastic: false,
    };

    /// Metric nearness: project while discovering, then one full round.
    pub const NEARNESS: Schedule = Schedule {
        rounds_per_iteration: 1,
        project_on_find: true,
        truly_stochastic: false,
    };

    /// Correlation clustering on complete graphs.
    pub const CLUSTER_DENSE: Schedule = Schedule {
        rounds_per_iteration: 2,
        project_on_find: true,
        truly_stochastic: false,
    };

    /// Correlation clustering on sparse graphs.
    pub const CLUSTER_SPARSE: Schedule = Schedule {
        rounds_per_iteration: 75,
        project_on_find: false,
        truly_stochastic: false,
    };

    pub const TRULY_STOCHASTIC: Schedule = Schedule {
        rounds_per_iteration: 1,
        project_on_find: false,
        truly_stochastic: true,
    };

    pub fn validate(&self) -> Result<()> {
        if self.rounds_per_iteration == 0 {
            return Err(Error::invalid("rounds_per_iteration must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CriterionKind {
    /// Stop when the oracle's worst violation is at most the threshold.
    MaxViolation,
    /// Stop when `||x_hat - x||_2` to the decrease-only metric is at most the threshold.
    DecreaseOnlyDistance,
    /// Run exactly `max_iterations` iterations.
    FixedBudget,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergenceCriterion {
    pub kind: CriterionKind,
    pub threshold: f64,
    pub max_iterations: usize,
}

impl ConvergenceCriterion {
    pub fn max_violation(threshold: f64, max_iterations: usize) -> Self {
        ConvergenceCriterion {
            kind: CriterionKind::MaxViolation,
            threshold,
            max_iterations,
        }
    }

    pub fn decrease_only(threshold: f64, max_iterations: usize) -> Self {
        ConvergenceCriterion {
            kind: CriterionKind::DecreaseOnlyDistance,
            threshold,
            max_iterations,
        }
    }

    pub fn budget(iterations: usize) -> Self {
        ConvergenceCriterion {
            kind: CriterionKind::FixedBudget,
            threshold: 0.0,
            max_iterations: iterations,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations must be positive"));
        }
        if self.kind != CriterionKind::FixedBudget && !(self.threshold > 0.0) {
            return Err(Error::invalid(format!(
                "convergence threshold must be positive, got {}",
                self.threshold
            )));
        }
        Ok(())
    }

    fn is_met(&self, m: &Measurement) -> Result<bool> {
        match self.kind {
            CriterionKind::MaxViolation => Ok(m.max_violation <= self.threshold),
            CriterionKind::DecreaseOnlyDistance => m
                .decrease_only_distance
                .map(|d| d <= self.threshold)
                .ok_or_else(|| Error::invalid("oracle does not provide a decrease-only distance")),
            CriterionKind::FixedBudget => Ok(false),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    pub oracle_count: usize,
    pub active_after_forget: usize,
    pub max_violation: f64,
    pub lagrangian: f64,
    pub kkt_residual: f64,
    pub wall_ms: f64,
}

pub const TRACE_HEADER: &str =
    "iter,oracle_count,active_after_forget,max_violation,lagrangian,kkt_residual,wall_ms";

/// Writes the trace as CSV. With `timing == false` the `wall_ms` column is
/// written as 0 so that repeated runs produce identical bytes.
pub fn write_trace_csv<W: Write>(
    trace: &[TraceRecord],
    mut out: W,
    timing: bool,
) -> io::Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for r in trace {
        writeln!(
            out,
            "{},{},{},{:e},{:e},{:e},{}",
            r.iteration,
            r.oracle_count,
            r.active_after_forget,
            r.max_violation,
            r.lagrangian,
            r.kkt_residual,
            if timing { r.wall_ms } else { 0.0 }
        )?;
    }
    Ok(())
}

/// Hooks into the solver loop, used for diagnostics and invariant checks.
/// All methods default to no-ops.
pub trait Monitor {
    fn after_projection(
        &mut self,
        _x: &[f64],
        _duals: &DualMap,
        _plane: &Hyperplane,
        _step: &StepOutcome,
    ) {
    }

    /// Called with the constraints just removed; `duals` is the dual map at
    /// removal time.
    fn after_forget(&mut self, _duals: &DualMap, _forgotten: &[Hyperplane]) {}

    fn after_iteration(&mut self, _state: &SolverState) {}
}

impl Monitor for () {}

#[derive(Clone, Debug)]
pub struct SolverState {
    pub x: Vec<f64>,
    pub duals: DualMap,
    initial_gradient: Vec<f64>,
    remembered: Vec<Hyperplane>,
    remembered_ids: HashSet<ConstraintId>,
    persistent: Vec<Hyperplane>,
    pub iteration: usize,
    pub trace: Vec<TraceRecord>,
}

impl SolverState {
    pub fn remembered(&self) -> &[Hyperplane] {
        &self.remembered
    }

    pub fn persistent(&self) -> &[Hyperplane] {
        &self.persistent
    }

    fn merge(&mut self, found: Vec<Hyperplane>) {
        for h in found {
            if self.remembered_ids.insert(h.id().clone()) {
                self.remembered.push(h);
            }
        }
    }

    fn replace_remembered(&mut self, found: Vec<Hyperplane>) {
        self.remembered.clear();
        self.remembered_ids.clear();
        self.merge(found);
    }
}

/// Starts at the zero-gradient point of `f` with no remembered constraints
/// and all duals zero.
pub fn init_state<F: BregmanFunction + ?Sized>(
    f: &F,
    persistent: Vec<Hyperplane>,
) -> Result<SolverState> {
    let x = f.zero_gradient_point()?;
    let mut seen = HashSet::new();
    for h in &persistent {
        if !seen.insert(h.id().clone()) {
            return Err(Error::invalid(format!(
                "duplicate persistent constraint {}",
                h.id()
            )));
        }
        if h.coeffs().max_index().is_some_and(|i| i >= x.len()) {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                actual: h.coeffs().max_index().unwrap() + 1,
            });
        }
    }
    let initial_gradient = f.gradient(&x);
    Ok(SolverState {
        x,
        duals: DualMap::new(),
        initial_gradient,
        remembered: Vec::new(),
        remembered_ids: HashSet::new(),
        persistent,
        iteration: 0,
        trace: Vec::new(),
    })
}

fn project_list<F, M>(
    f: &F,
    x: &mut [f64],
    duals: &mut DualMap,
    list: &[Hyperplane],
    monitor: &mut M,
) -> Result<()>
where
    F: BregmanFunction + ?Sized,
    M: Monitor + ?Sized,
{
    for h in list {
        let step = corrected_projection_step(f, x, duals, h)?;
        monitor.after_projection(x, duals, h, &step);
    }
    Ok(())
}

/// One outer iteration. Returns the feasibility measurement of
/// the new iterate.
pub fn iterate_once<F, O, M>(
    state: &mut SolverState,
    f: &F,
    oracle: &mut O,
    schedule: &Schedule,
    monitor: &mut M,
) -> Result<Measurement>
where
    F: BregmanFunction + ?Sized,
    O: SeparationOracle + ?Sized,
    M: Monitor + ?Sized,
{
    schedule.validate()?;
    let start = Instant::now();
    if state.iteration == 0 {
        // the zero-gradient start may lie outside the persistent constraints
        // (e.g. negative edge weights), which oracles are not required to accept
        project_list(
            f,
            &mut state.x,
            &mut state.duals,
            &state.persistent,
            monitor,
        )?;
    }
    let found = oracle.separate(&state.x, state.iteration)?.constraints;
    let oracle_count = found.len();

    let found = if schedule.project_on_find {
        let mut kept = Vec::with_capacity(found.len());
        for h in found {
            let step = corrected_projection_step(f, &mut state.x, &mut state.duals, &h)?;
            monitor.after_projection(&state.x, &state.duals, &h, &step);
            if !state.duals.is_zero(h.id()) {
                kept.push(h);
            }
        }
        kept
    } else {
        found
    };

    if schedule.truly_stochastic {
        state.replace_remembered(found);
    } else {
        state.merge(found);
    }

    for _ in 0..schedule.rounds_per_iteration {
        project_list(
            f,
            &mut state.x,
            &mut state.duals,
            &state.remembered,
            monitor,
        )?;
        if !schedule.truly_stochastic {
            let forgotten = forget_pass(&state.duals, &mut state.remembered);
            if !forgotten.is_empty() {
                for h in &forgotten {
                    state.remembered_ids.remove(h.id());
                }
                monitor.after_forget(&state.duals, &forgotten);
            }
        }
    }

    project_list(
        f,
        &mut state.x,
        &mut state.duals,
        &state.persistent,
        monitor,
    )?;

    let measurement = oracle.measure(&state.x)?;
    let record = TraceRecord {
        iteration: state.iteration,
        oracle_count,
        active_after_forget: state.remembered.len(),
        max_violation: measurement.max_violation,
        lagrangian: lagrangian(state, f),
        kkt_residual: kkt_residual(state, f),
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    state.trace.push(record);
    state.iteration += 1;
    monitor.after_iteration(state);
    Ok(measurement)
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub state: SolverState,
    pub converged: bool,
}

impl Solution {
    pub fn x(&self) -> &[f64] {
        &self.state.x
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.state.trace
    }
}

pub fn run<F, O>(
    f: &F,
    oracle: &mut O,
    schedule: &Schedule,
    criterion: &ConvergenceCriterion,
    persistent: Vec<Hyperplane>,
) -> Result<Solution>
where
    F: BregmanFunction + ?Sized,
    O: SeparationOracle + ?Sized,
{
    run_with_monitor(f, oracle, schedule, criterion, persistent, &mut ())
}

/// Iterates until the criterion holds and every constraint with a nonzero
/// dual is tight to within the same threshold, or the iteration cap is
/// reached. Feasibility alone can be reached early at a non-optimal point.
/// Hitting the cap is reported through `converged`, not as an error; a
/// fixed budget counts as converged once spent.
pub fn run_with_monitor<F, O, M>(
    f: &F,
    oracle: &mut O,
    schedule: &Schedule,
    criterion: &ConvergenceCriterion,
    persistent: Vec<Hyperplane>,
    monitor: &mut M,
) -> Result<Solution>
where
    F: BregmanFunction + ?Sized,
    O: SeparationOracle + ?Sized,
    M: Monitor + ?Sized,
{
    schedule.validate()?;
    criterion.validate()?;
    let mut state = init_state(f, persistent)?;
    while state.iteration < criterion.max_iterations {
        let m = iterate_once(&mut state, f, oracle, schedule, monitor)?;
        if criterion.is_met(&m)? && complementary_slackness(&state) <= criterion.threshold {
            return Ok(Solution {
                state,
                converged: true,
            });
        }
    }
    Ok(Solution {
        state,
        converged: criterion.kind == CriterionKind::FixedBudget,
    })
}

/// `||grad f(x) - grad f(x0) + sum_i z_i a_i||_inf` over every stored dual.
pub fn kkt_residual<F: BregmanFunction + ?Sized>(state: &SolverState, f: &F) -> f64 {
    let mut g = f.gradient(&state.x);
    for (gi, g0) in g.iter_mut().zip(&state.initial_gradient) {
        *gi -= g0;
    }
    for (_, e) in state.duals.iter() {
        for (i, a) in e.plane.coeffs().iter() {
            g[i] += e.value * a;
        }
    }
    g.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Largest `|<a_i, x> - b_i|` over constraints with a nonzero dual.
pub fn complementary_slackness(state: &SolverState) -> f64 {
    state
        .duals
        .iter()
        .filter(|(_, e)| e.value.abs() > DUAL_ZERO_TOL)
        .fold(0.0, |m, (_, e)| m.max(e.plane.residual(&state.x).abs()))
}

/// `f(x) + sum_i z_i (<a_i, x> - b_i)` over every stored dual.
pub fn lagrangian<F: BregmanFunction + ?Sized>(state: &SolverState, f: &F) -> f64 {
    let penalty: f64 = state
        .duals
        .iter()
        .map(|(_, e)| e.value * e.plane.residual(&state.x))
        .sum();
    f.value(&state.x) + penalty
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateEstimate {
    /// Geometric-mean contraction factor over the tail.
    pub rho: f64,
    /// `rho >= 1`: the sequence is not contracting.
    pub divergent: bool,
}

/// Tail geometric-mean ratio `e[k+1] / e[k]` over the last quartile of a
/// sequence of distances to the optimum.
pub fn rate_estimate(errors: &[f64]) -> Result<RateEstimate> {
    if errors.len() < 4 {
        return Err(Error::DiagnosticUnavailable(format!(
            "rate estimate needs at least 4 iterations, got {}",
            errors.len()
        )));
    }
    let q = errors.len() / 4;
    let first = errors[errors.len() - 1 - q];
    let last = errors[errors.len() - 1];
    let rho = if first == 0.0 || last == 0.0 {
        0.0
    } else {
        (last / first).powf(1.0 / q as f64)
    };
    Ok(RateEstimate {
        rho,
        divergent: rho >= 1.0,
    })
}
