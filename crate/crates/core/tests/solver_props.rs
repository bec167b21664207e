mod common;

use projforget::bregman::DualMap;
use projforget::nearness::{self, InstanceKind, NearnessInstance};
use projforget::oracle::RandomOraclePool;
use projforget::reference::enumerate_triangles;
use projforget::solver::{self, ConvergenceCriterion, Monitor, Schedule, SolverState};

struct DualHistory(Vec<DualMap>);

impl Monitor for DualHistory {
    fn after_iteration(&mut self, state: &SolverState) {
        self.0.push(state.duals.clone());
    }
}

fn instance(n: usize, kind: InstanceKind, seed: u64) -> NearnessInstance {
    NearnessInstance::new(nearness::generate_instance(n, kind, seed).unwrap())
        .with_threshold(1e-10)
        .with_max_iterations(100_000)
}

#[test]
fn duals_settle_on_converged_runs() {
    for kind in [
        InstanceKind::Gaussian,
        InstanceKind::Bernoulli,
        InstanceKind::HeavyTail,
    ] {
        for seed in 0..5 {
            let mut history = DualHistory(Vec::new());
            let sol = nearness::solve_nearness_with_monitor(&instance(6, kind, seed), &mut history)
                .unwrap();
            assert!(sol.converged());
            if let [.., prev, last] = history.0.as_slice() {
                let step = last.max_abs_diff(prev);
                assert!(step < 1e-6, "{kind:?} seed {seed}: last dual change {step}");
            }
        }
    }
}

#[test]
fn truly_stochastic_reaches_the_same_point() {
    for (seed, n) in [(0u64, 4usize), (1, 5), (2, 5), (3, 5)] {
        let inst = instance(n, InstanceKind::Gaussian, seed);
        let exact = nearness::solve_nearness(&inst).unwrap();
        let f = inst.objective();
        let universe = enumerate_triangles(n).unwrap().constraints;
        let half = universe.len() / 2;
        let mut oracle = RandomOraclePool::new(universe, half, seed).unwrap();
        let sol = solver::run(
            &f,
            &mut oracle,
            &Schedule::TRULY_STOCHASTIC,
            &ConvergenceCriterion::budget(3_000),
            Vec::new(),
        )
        .unwrap();
        let gap = sol
            .x()
            .iter()
            .zip(exact.x())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(gap <= 1e-4, "n={n} seed {seed}: gap {gap}");
    }
}

#[test]
fn stochastic_oracle_run_keeps_invariants() {
    let inst = instance(5, InstanceKind::HeavyTail, 7);
    let f = inst.objective();
    let mut mon = common::CheckingMonitor::new(&f);
    let universe = enumerate_triangles(5).unwrap().constraints;
    let mut oracle = RandomOraclePool::new(universe, 7, 1).unwrap();
    let sol = solver::run_with_monitor(
        &f,
        &mut oracle,
        &Schedule::BASIC,
        &ConvergenceCriterion::max_violation(1e-9, 50_000),
        Vec::new(),
        &mut mon,
    )
    .unwrap();
    assert!(sol.converged);
    mon.check_final(&sol.state, 1e-6);
    assert!(mon.ok(), "{:?}", mon.breaches);
}
