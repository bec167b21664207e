#![allow(dead_code)]

use projforget::bregman::{BregmanFunction, DualMap, Hyperplane, StepOutcome, DUAL_ZERO_TOL};
use projforget::solver::{Monitor, SolverState};

/// Checks the solver invariants as the run progresses and records every
/// breach instead of panicking, so callers can report them.
pub struct CheckingMonitor<'a, F: BregmanFunction + ?Sized> {
    f: &'a F,
    /// Recompute the Lagrangian after every projection (quadratic cost).
    pub per_projection: bool,
    last_lagrangian: Option<f64>,
    pub projections: usize,
    pub iterations: usize,
    pub max_kkt: f64,
    pub min_dual: f64,
    pub breaches: Vec<String>,
    pub iterates: Vec<Vec<f64>>,
    pub keep_iterates: bool,
}

pub const KKT_TOL: f64 = 1e-8;
pub const LAGRANGIAN_SLACK: f64 = 1e-9;
pub const DUAL_FLOOR: f64 = -1e-12;

pub fn lagrangian_at<F: BregmanFunction + ?Sized>(f: &F, x: &[f64], duals: &DualMap) -> f64 {
    f.value(x)
        + duals
            .iter()
            .map(|(_, e)| e.value * e.plane.residual(x))
            .sum::<f64>()
}

impl<'a, F: BregmanFunction + ?Sized> CheckingMonitor<'a, F> {
    pub fn new(f: &'a F) -> Self {
        CheckingMonitor {
            f,
            per_projection: true,
            last_lagrangian: None,
            projections: 0,
            iterations: 0,
            max_kkt: 0.0,
            min_dual: 0.0,
            breaches: Vec::new(),
            iterates: Vec::new(),
            keep_iterates: false,
        }
    }

    fn check_lagrangian(&mut self, value: f64, at: &str) {
        if let Some(prev) = self.last_lagrangian {
            if value < prev - LAGRANGIAN_SLACK * prev.abs().max(1.0) {
                self.breaches
                    .push(format!("Lagrangian fell from {prev} to {value} {at}"));
            }
        }
        self.last_lagrangian = Some(value);
    }

    /// Every remembered constraint must be tight at the final iterate.
    pub fn check_final(&mut self, state: &SolverState, tol: f64) {
        for h in state.remembered() {
            let r = h.residual(&state.x);
            if r.abs() > tol {
                self.breaches
                    .push(format!("remembered {} has residual {r}", h.id()));
            }
        }
    }

    pub fn ok(&self) -> bool {
        self.breaches.is_empty()
    }
}

impl<F: BregmanFunction + ?Sized> Monitor for CheckingMonitor<'_, F> {
    fn after_projection(
        &mut self,
        x: &[f64],
        duals: &DualMap,
        _plane: &Hyperplane,
        step: &StepOutcome,
    ) {
        self.projections += 1;
        self.min_dual = self.min_dual.min(step.dual);
        if step.dual < DUAL_FLOOR {
            self.breaches.push(format!("negative dual {}", step.dual));
        }
        if self.per_projection {
            let l = lagrangian_at(self.f, x, duals);
            self.check_lagrangian(l, "after a projection");
        }
    }

    fn after_forget(&mut self, duals: &DualMap, forgotten: &[Hyperplane]) {
        for h in forgotten {
            let z = duals.get(h.id());
            if z.abs() > DUAL_ZERO_TOL {
                self.breaches
                    .push(format!("forgot {} with dual {z}", h.id()));
            }
        }
    }

    fn after_iteration(&mut self, state: &SolverState) {
        self.iterations += 1;
        let rec = state.trace.last().expect("trace record per iteration");
        self.max_kkt = self.max_kkt.max(rec.kkt_residual);
        if rec.kkt_residual > KKT_TOL {
            self.breaches.push(format!(
                "kkt residual {} at iteration {}",
                rec.kkt_residual, rec.iteration
            ));
        }
        if state.duals.min_value() < DUAL_FLOOR {
            self.breaches
                .push(format!("stored dual {}", state.duals.min_value()));
        }
        if !self.per_projection {
            self.check_lagrangian(rec.lagrangian, "across an iteration");
        }
        if self.keep_iterates {
            self.iterates.push(state.x.clone());
        }
    }
}
