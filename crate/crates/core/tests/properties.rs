use lfmkit::suite::{seeded_matrix, test_functionals};
use lfmkit::*;
use proptest::prelude::*;

fn cfg(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(cfg(32))]

    #[test]
    fn canonical_gaussian_has_unit_value(n in 1usize..=6, nodes in 6usize..=16) {
        let v = integrate_lfm(&CylinderFunctional::<f64>::gaussian(), n, &QuadratureSpec::tensor(nodes)).unwrap();
        prop_assert!((v.value - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn shifts_leave_the_value_unchanged(
        h in prop::collection::vec(-2.0f64..2.0, 1..=3),
        which in 0usize..5,
    ) {
        let (_, phi) = &test_functionals::<f64>()[which];
        let n = h.len().max(phi.dim());
        let gap = shift_invariance_check(&h, phi, n, &QuadratureSpec::tensor(20)).unwrap();
        prop_assert!(gap < 1e-10, "gap {gap}");
    }

    #[test]
    fn pairing_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, i in 0usize..5, j in 0usize..5) {
        let fs = test_functionals::<f64>();
        let (ca, cb) = (Complex64::new(a, 0.0), Complex64::new(0.0, b));
        let combo = CylinderFunctional::linear_combination(&[(ca, &fs[i].1), (cb, &fs[j].1)]).unwrap();
        let q = QuadratureSpec::tensor(16);
        let n = 3;
        let lhs = integrate_lfm(&combo, n, &q).unwrap().value;
        let rhs = ca * integrate_lfm(&fs[i].1, n, &q).unwrap().value + cb * integrate_lfm(&fs[j].1, n, &q).unwrap().value;
        prop_assert!((lhs - rhs).norm() < 1e-11);
    }

    #[test]
    fn determinant_routes_agree_on_matrix_flows(dim in 2usize..=6, seed in any::<u64>(), t in 0.1f64..1.5) {
        let a = seeded_matrix::<f64>(dim, 0.4, seed);
        let trace = a.trace();
        let flow = FlowSpec::linear(a);
        let x = vec![0.1; dim];
        let c = flow_logdet(&flow, t, &x, dim, 64).unwrap();
        prop_assert!(c.gap < 1e-8, "gap {}", c.gap);
        // Jacobi: det e^{tA} = e^{t·tr A}
        prop_assert!((c.log_via_trace - t * trace).abs() < 1e-8);
    }

    #[test]
    fn translations_satisfy_change_of_variables(h in prop::collection::vec(-1.0f64..1.0, 3), which in 0usize..5) {
        let (_, phi) = &test_functionals::<f64>()[which];
        let r = verify_change_of_variables(&FlowSpec::translation(h), 1.0, phi, 3, &QuadratureSpec::tensor(20)).unwrap();
        prop_assert!(r.gap < 1e-10, "gap {}", r.gap);
    }

    #[test]
    fn scalings_match_the_closed_form(t in -0.5f64..0.5) {
        let r = verify_change_of_variables(&FlowSpec::scaling(2), t, &CylinderFunctional::gaussian(), 2, &QuadratureSpec::tensor(24))
            .unwrap();
        let oracle = (2.0 * t).exp();
        prop_assert!((r.lhs.re - oracle).abs() < 1e-9 && (r.rhs.re - oracle).abs() < 1e-9);
    }

    #[test]
    fn free_chain_does_not_depend_on_slicing(n in 1usize..=64, t in 0.1f64..2.0) {
        let g = TimeGrid::new(t, n).unwrap();
        let chain = kernel_quadratic_chain(1.0, 0.0, &g, Mode::RealTime, PotentialRule::Endpoint).unwrap();
        let exact = exact_propagator(PropagatorKind::Free, t, Mode::RealTime).unwrap();
        for (q, qp) in [(0.0, 0.0), (0.7, -0.3), (-1.2, 0.4)] {
            let (a, b) = (chain.eval(q, qp), exact.eval(q, qp));
            prop_assert!((a - b).norm() < 1e-10 * b.norm().max(1.0));
        }
    }

    #[test]
    fn heat_kernels_compose(s in 0.05f64..1.0, t in 0.05f64..1.0) {
        let k = |t| exact_propagator(PropagatorKind::<f64>::Free, t, Mode::ImaginaryTime).unwrap();
        let composed = k(t).after(&k(s)).unwrap();
        for (q, qp) in [(0.0, 0.0), (0.5, -0.5), (1.0, 0.2)] {
            let (a, b) = (composed.eval(q, qp), k(s + t).eval(q, qp));
            prop_assert!((a - b).norm() < 1e-12 * b.norm().max(1.0));
        }
    }

    #[test]
    fn mehler_kernels_compose(s in 0.05f64..1.0, t in 0.05f64..1.0, omega in 0.3f64..2.0) {
        let k = |t| exact_propagator(PropagatorKind::Harmonic { omega }, t, Mode::ImaginaryTime).unwrap();
        let composed = k(t).after(&k(s)).unwrap();
        let (a, b) = (composed.eval(0.3, -0.2), k(s + t).eval(0.3, -0.2));
        prop_assert!((a - b).norm() < 1e-11 * b.norm().max(1.0));
    }

    #[test]
    fn flagship_preserves_action_with_target_determinant(seed in any::<u64>(), log_det in 0.02f64..0.3) {
        let f = flagship_flow::<f64>(4, 1.0, log_det, seed).unwrap();
        prop_assert!(f.residuals.symmetric_on_span < 1e-12);
        prop_assert!(f.residuals.leakage < 1e-12);
        let det = f.flow.space_jacobian(1.0, &[0.0; 4]).det();
        prop_assert!((det.ln() - log_det).abs() < 1e-10);
        let v = PotentialSpec::free();
        for c in [(1.0, 0.0), (0.3, -0.8), (-1.5, 2.0)] {
            let z: Vec<f64> = (0..4).map(|i| c.0 * f.path_basis[0][i] + c.1 * f.path_basis[1][i]).collect();
            let before = discrete_action(&v, &f.grid, &z).unwrap();
            let after = discrete_action(&v, &f.grid, &f.flow.forward(1.0, &z)).unwrap();
            prop_assert!((after - before).abs() < 1e-10);
        }
    }
}

proptest! {
    #![proptest_config(cfg(8))]

    #[test]
    fn split_step_preserves_norm(center in -2.0f64..2.0, width in 0.6f64..1.5, k in -1.0f64..1.0, t in 0.1f64..1.0) {
        let g = SpatialGrid::standard();
        let phi = WaveFunction::gaussian_packet(g, center, width, k);
        let out = solve_schrodinger(&PotentialSpec::harmonic(1.0), &phi, t, Mode::RealTime, None).unwrap();
        prop_assert!((out.norm_l2() - phi.norm_l2()).abs() < 1e-10);
    }

    #[test]
    fn imaginary_time_slicing_never_amplifies(n in 4usize..=32, t in 0.1f64..1.0) {
        let g = SpatialGrid::standard();
        let phi = WaveFunction::gaussian_packet(g, 0.5, 1.0, 0.0);
        let r = propagate_lagrangian(
            &PotentialSpec::harmonic(1.0),
            &phi,
            &TimeGrid::new(t, n).unwrap(),
            Mode::ImaginaryTime,
            &QuadratureSpec::tensor(1).without_error_estimate(),
        )
        .unwrap();
        prop_assert!(r.norm_after <= r.norm_before * (1.0 + 1e-12));
    }
}
