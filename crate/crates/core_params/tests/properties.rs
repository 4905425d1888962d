use core_params::{characteristic_constants, Queue, SystemParams};
use proptest::prelude::*;

fn stable_params() -> impl Strategy<Value = SystemParams> {
    (0.3f64..6.0, 0.3f64..6.0, 0.05f64..0.95, 0.05f64..0.95).prop_map(|(mu1, mu2, rho, split)| {
        let rho1 = rho * split;
        let rho2 = rho - rho1;
        SystemParams::new(rho1 * mu1, rho2 * mu2, mu1, mu2).unwrap()
    })
}

fn queue() -> impl Strategy<Value = Queue> {
    prop_oneof![Just(Queue::One), Just(Queue::Two)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn t_inverts_xi(p in stable_params(), j in queue(), s in -10.0f64..10.0) {
        let (lo, hi) = p.branch_cut(j.other());
        prop_assume!(s < lo - 1e-6 || s > hi + 1e-6);
        prop_assume!((s + p.service(j.other())).abs() > 1e-3);
        let x = p.xi_branches(j, s).unwrap();
        for v in [x.plus, x.minus] {
            let back = p.t_map(j, v).unwrap();
            prop_assert!((back - s).abs() <= 1e-9 * s.abs().max(1.0), "s={s} v={v} back={back}");
        }
    }

    #[test]
    fn zeta_ordering(p in stable_params()) {
        let c = characteristic_constants(&p);
        prop_assert!(c.zeta1_minus < c.zeta1_plus && c.zeta1_plus <= c.sigma0_plus + 1e-12);
        prop_assert!(c.zeta2_minus < c.zeta2_plus && c.zeta2_plus <= c.sigma0_plus + 1e-12);
    }

    #[test]
    fn p_roots_are_negative_roots(p in stable_params()) {
        let c = characteristic_constants(&p);
        prop_assert!(c.sigma0_minus < c.sigma0_plus && c.sigma0_plus < 0.0);
        for r in [c.sigma0_minus, c.sigma0_plus] {
            prop_assert!(p.p_poly(r).abs() <= 1e-10 * (1.0 + r * r));
        }
    }

    #[test]
    fn kernel_vanishes_on_t_curve(p in stable_params(), s in -5.0f64..5.0) {
        let (sm, sp) = p.t_poles(Queue::One);
        prop_assume!((s - sm).abs() > 1e-3 && (s - sp).abs() > 1e-3 && (s + p.mu1()).abs() > 1e-3);
        let s2 = p.t_map(Queue::One, s).unwrap();
        prop_assume!((s2 + p.mu2()).abs() > 1e-3);
        let k = p.kernels(s, s2).unwrap();
        prop_assert!(k.k1.abs() <= 1e-10 * (1.0 + s.abs() + s2.abs()));
    }

    #[test]
    fn stationary_points_are_critical(p in stable_params(), j in queue()) {
        let (am, ap) = p.stationary_points(j);
        for a in [am, ap] {
            let h = 1e-6 * (1.0 + a.abs());
            let fd = (p.t_map(j, a + h).unwrap() - p.t_map(j, a - h).unwrap()) / (2.0 * h);
            let scale = p.t_second(j, a).unwrap().abs().max(1.0);
            prop_assert!(fd.abs() <= 1e-8 * scale.max(1.0) * 10.0, "fd={fd}");
            prop_assert!(p.t_prime(j, a).unwrap().abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn poles_and_stationary_points_interlace(p in stable_params(), j in queue()) {
        let (sm, sp) = p.t_poles(j);
        let (am, ap) = p.stationary_points(j);
        prop_assert!(sm < 0.0 && 0.0 < sp);
        prop_assert!(am < sm && sm < ap && ap < 0.0);
    }
}
