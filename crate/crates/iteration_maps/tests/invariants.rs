use core_params::{Queue, SystemParams};
use cubic_geometry::{r_eval, real_roots, Geometry};
use iteration_maps::{
    contraction_limit, determinant_closed_form, h_map, involution_image, mat_add, q_factors, row_norm,
    step_matrices,
};
use proptest::prelude::*;

fn worked() -> (SystemParams, Geometry) {
    let p = SystemParams::new(1.0, 1.0, 3.0, 4.5).unwrap();
    (p, Geometry::new(&p).unwrap())
}

fn stable_params() -> impl Strategy<Value = SystemParams> {
    (0.3f64..6.0, 0.3f64..6.0, 0.05f64..0.95, 0.05f64..0.95).prop_map(|(mu1, mu2, rho, split)| {
        let rho1 = rho * split;
        SystemParams::new(rho1 * mu1, (rho - rho1) * mu2, mu1, mu2).unwrap()
    })
}

#[test]
fn chord_images_are_middle_roots() {
    let (p, g) = worked();
    for z in [0.1, 1.0, 4.0] {
        let st = step_matrices(&g, z, None).unwrap();
        let b1 = real_roots(&p, Queue::One, st.h1).unwrap().beta;
        assert!((st.s2 - (st.h1 - b1)).abs() < 1e-8, "A1 = B1*");
        assert!((st.beta1_star - b1).abs() < 1e-8);
        let b2 = real_roots(&p, Queue::Two, st.h2).unwrap().beta;
        assert!((st.s1 - (st.h2 + b2)).abs() < 1e-8, "C2 = B2**");
        assert!((st.beta2_star - b2).abs() < 1e-8);
    }
}

#[test]
fn companion_branches_match_xi() {
    let (p, g) = worked();
    for z in [0.2, 2.0] {
        let st = step_matrices(&g, z, None).unwrap();
        let x1 = p.xi_branches(Queue::One, st.s2).unwrap();
        assert!((x1.plus - st.xi1_plus).abs() < 1e-10);
        assert!((x1.minus - st.xi1_minus).abs() < 1e-10);
        let x2 = p.xi_branches(Queue::Two, st.s1).unwrap();
        assert!((x2.plus - st.xi2_plus).abs() < 1e-10);
        assert!((x2.minus - st.xi2_minus).abs() < 1e-10);
    }
}

#[test]
fn h_increment_has_finite_limit() {
    let (p, g) = worked();
    let (sm, _) = p.t_poles(Queue::One);
    let m = p.mu1();
    let limit = 0.5 * (-(sm + m) + p.lambda1() * m / (sm + m));
    for z in [1e3, 1e4] {
        let inc = h_map(&g, Queue::One, z).unwrap() - z;
        assert!((inc - limit).abs() < 1e-2 * limit.abs().max(1.0) * (1e3 / z).max(0.01) * 10.0, "{inc} vs {limit}");
    }
    let inc4 = h_map(&g, Queue::One, 1e4).unwrap() - 1e4;
    assert!((inc4 - limit).abs() < 1e-3);
}

#[test]
fn h_iterates_diverge() {
    let (_, g) = worked();
    let mut z = 1.0;
    let mut prev_inc = f64::NAN;
    for _ in 0..40 {
        let next = h_map(&g, Queue::One, z).unwrap();
        assert!(next > z);
        prev_inc = next - z;
        z = next;
    }
    assert!(z > 40.0 * 0.5);
    assert!(prev_inc.is_finite() && prev_inc > 0.0);
}

#[test]
fn involution_properties() {
    let (p, _) = worked();
    let (sm, sp) = p.t_poles(Queue::One);
    for i in 1..=100 {
        let x = sm + (sp - sm) * i as f64 / 101.0;
        if (x + p.mu1()).abs() < 1e-6 {
            continue;
        }
        let y = involution_image(&p, Queue::One, x).unwrap();
        let back = involution_image(&p, Queue::One, y).unwrap();
        assert!((back - x).abs() < 1e-10 * x.abs().max(1.0));
    }
    let (am, ap) = p.stationary_points(Queue::One);
    for a in [am + 0.1, ap - 0.2, 0.5] {
        let t1 = p.t_map(Queue::One, a).unwrap();
        let t2 = p.t_map(Queue::One, involution_image(&p, Queue::One, a).unwrap()).unwrap();
        assert!((t1 - t2).abs() < 1e-9 * t1.abs().max(1.0));
    }
}

#[test]
fn determinant_two_ways() {
    let (p, g) = worked();
    for z in [0.5, 1.0, 2.0] {
        let st = step_matrices(&g, z, None).unwrap();
        let closed = determinant_closed_form(&p, z, st.alpha1, st.gamma2);
        assert!((closed - st.D).abs() <= 1e-9 * st.D.abs(), "{closed} vs {}", st.D);
    }
}

#[test]
fn r1r2_relations_at_roots() {
    let (p, g) = worked();
    for z in [0.3, 1.0, 3.0] {
        let st = step_matrices(&g, z, None).unwrap();
        let (a, c) = (st.alpha1, st.gamma2);
        let lhs = (p.mu1() + a + z) * (p.mu2() - a + z);
        let rhs = -r_eval(&p, Queue::Two, a, z) / (2.0 * a);
        assert!((lhs - rhs).abs() <= 1e-9 * lhs.abs());
        let lhs = (p.mu1() + c + z) * (p.mu2() - c + z);
        let rhs = -r_eval(&p, Queue::One, c, z) / (2.0 * c);
        assert!((lhs - rhs).abs() <= 1e-9 * lhs.abs());
    }
}

#[test]
fn large_z_limits() {
    let (p, g) = worked();
    let (s1m, _) = p.t_poles(Queue::One);
    let (s2m, _) = p.t_poles(Queue::Two);
    let z = 1e4;
    let st = step_matrices(&g, z, None).unwrap();
    let qa = q_factors(&p, z, st.alpha1).unwrap();
    let qg = q_factors(&p, z, st.gamma2).unwrap();
    let tol = 1e-3;
    assert!((qa.q1 - p.lambda1() * p.mu1() / (p.mu1() + s1m)).abs() < tol);
    assert!(qa.q2.abs() < tol);
    assert!(qg.q1.abs() < tol);
    assert!((qg.q2 - p.lambda2() * p.mu2() / (p.mu2() + s2m)).abs() < tol);
    let r1 = contraction_limit(&p, Queue::One);
    let r2 = contraction_limit(&p, Queue::Two);
    let want1 = [[r1, 0.0], [0.0, 0.0]];
    let want2 = [[0.0, 0.0], [0.0, r2]];
    for i in 0..2 {
        for k in 0..2 {
            assert!((st.Q1[i][k] - want1[i][k]).abs() < 1e-2, "Q1 {:?}", st.Q1);
            assert!((st.Q2[i][k] - want2[i][k]).abs() < 1e-2, "Q2 {:?}", st.Q2);
        }
    }
    for z in [50.0, 200.0, 1e3] {
        let st = step_matrices(&g, z, None).unwrap();
        assert!(row_norm(&mat_add(&st.Q1, &st.Q2)) <= p.rho() + 0.1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn contraction_limits_bounded_by_loads(p in stable_params()) {
        prop_assert!(contraction_limit(&p, Queue::One) <= p.rho1() + 1e-12);
        prop_assert!(contraction_limit(&p, Queue::Two) <= p.rho2() + 1e-12);
    }

    #[test]
    fn determinant_nonzero_and_h_increasing(p in stable_params(), z in 0.01f64..20.0) {
        let g = Geometry::new(&p).unwrap();
        let st = step_matrices(&g, z, None).unwrap();
        prop_assert!(st.D != 0.0 && st.D.is_finite());
        prop_assert!(st.h1 > z && st.h2 > z);
        let closed = determinant_closed_form(&p, z, st.alpha1, st.gamma2);
        prop_assert!((closed - st.D).abs() <= 1e-8 * st.D.abs());
    }
}
