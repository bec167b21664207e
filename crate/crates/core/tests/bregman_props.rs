use proptest::prelude::*;

use projforget::bregman::{
    bregman_distance, corrected_projection_step, solve_projection, BregmanFunction, ConstraintId,
    DualMap, Hyperplane, QuadraticObjective, SparseVec, DUAL_ZERO_TOL, FEASIBILITY_TOL,
};

const DIM: usize = 4;

fn diag_objective() -> impl Strategy<Value = QuadraticObjective> {
    (
        prop::collection::vec(0.1f64..10.0, DIM),
        prop::collection::vec(-5.0f64..5.0, DIM),
        -3.0f64..3.0,
    )
        .prop_map(|(q, r, s)| QuadraticObjective::diagonal(q, r, s).unwrap())
}

fn plane(id: u32) -> impl Strategy<Value = Hyperplane> {
    (
        prop::collection::vec(prop_oneof![Just(0.0), -2.0f64..2.0], DIM),
        -3.0f64..3.0,
    )
        .prop_filter("nonzero normal", |(a, _)| a.iter().any(|v| v.abs() > 1e-3))
        .prop_map(move |(a, b)| {
            let coeffs =
                SparseVec::from_pairs(a.into_iter().enumerate().filter(|(_, v)| *v != 0.0));
            Hyperplane::new(ConstraintId::new(vec![9, id]), coeffs, b).unwrap()
        })
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-4.0f64..4.0, DIM)
}

fn lagrangian(f: &QuadraticObjective, x: &[f64], duals: &DualMap) -> f64 {
    f.value(x)
        + duals
            .iter()
            .map(|(_, e)| e.value * e.plane.residual(x))
            .sum::<f64>()
}

/// `(b - <a, x>) / (a^T Q^{-1} a)` for diagonal `Q`.
fn closed_form_theta(q: &[f64], x: &[f64], h: &Hyperplane) -> f64 {
    let denom: f64 = h.coeffs().iter().map(|(i, a)| a * a / q[i]).sum();
    (h.offset() - h.coeffs().dot(x)) / denom
}

proptest! {
    #[test]
    fn quadratic_projection_matches_closed_form(
        q in prop::collection::vec(0.1f64..10.0, DIM),
        x in point(),
        h in plane(0),
    ) {
        let f = QuadraticObjective::diagonal(q.clone(), vec![0.0; DIM], 0.0).unwrap();
        let p = solve_projection(&f, &x, &h).unwrap();
        let expected = closed_form_theta(&q, &x, &h);
        prop_assert!((p.theta - expected).abs() <= 1e-10 * expected.abs().max(1e-12));
        prop_assert!(h.residual(&p.point).abs() <= FEASIBILITY_TOL);
    }

    #[test]
    fn bregman_distance_is_nonnegative(f in diag_objective(), x in point(), y in point()) {
        prop_assert!(bregman_distance(&f, &x, &y).unwrap() >= -1e-10);
        prop_assert_eq!(bregman_distance(&f, &x, &x).unwrap(), 0.0);
    }

    #[test]
    fn corrected_steps_keep_invariants(
        f in diag_objective(),
        planes in prop::collection::vec(plane(0), 1..4),
        order in prop::collection::vec(0usize..4, 1..40),
    ) {
        let planes: Vec<Hyperplane> = planes
            .into_iter()
            .enumerate()
            .map(|(k, h)| Hyperplane::new(ConstraintId::new(vec![9, k as u32]), h.coeffs().clone(), h.offset()).unwrap())
            .collect();
        let mut x = f.zero_gradient_point().unwrap();
        let mut duals = DualMap::new();
        for k in order {
            let h = &planes[k % planes.len()];
            let before = x.clone();
            let l_before = lagrangian(&f, &x, &duals);
            let step = corrected_projection_step(&f, &mut x, &mut duals, h).unwrap();
            for (_, e) in duals.iter() {
                prop_assert!(e.value >= -DUAL_ZERO_TOL);
            }
            if step.theta < 0.0 {
                prop_assert!(h.residual(&x).abs() <= FEASIBILITY_TOL * (1.0 + h.coeffs().norm_sq()));
            }
            let increment = lagrangian(&f, &x, &duals) - l_before;
            let identity = bregman_distance(&f, &x, &before).unwrap() - step.correction * h.residual(&x);
            let scale = 1.0 + l_before.abs();
            prop_assert!((increment - identity).abs() <= 1e-9 * scale);
            prop_assert!(identity >= -FEASIBILITY_TOL * scale);
        }
    }
}
