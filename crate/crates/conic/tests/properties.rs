use mpopf_conic::{check_solution, solve, AffExpr, ConeSpec, ProgramBuilder, Settings, Status};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    /// Random SOCPs built around a strictly feasible point: the solver reaches
    /// optimality, weak duality holds and the optimum does not exceed the
    /// objective at the generator point.
    #[test]
    fn random_socp_optimal_and_bounded_by_generator(
        x0 in prop::collection::vec(-1.0f64..1.0, 3),
        rows in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 3), 2..4),
        c in prop::collection::vec(-1.0f64..1.0, 3),
        radius in 0.5f64..2.0,
    ) {
        let mut pb = ProgramBuilder::new();
        let xs = pb.add_vars(3);
        pb.add_objective(&AffExpr { terms: xs.clone().zip(c.iter().cloned()).collect(), constant: 0.0 });
        // |x - x0| <= radius keeps the problem bounded
        let mut ex = vec![AffExpr::constant(radius)];
        for k in 0..3 {
            ex.push(AffExpr { terms: vec![(xs.start + k, 1.0)], constant: -x0[k] });
        }
        pb.add_cone(ConeSpec::Soc(4), &ex);
        for r in &rows {
            let rx0: f64 = r.iter().zip(&x0).map(|(a, b)| a * b).sum();
            pb.add_nonneg(AffExpr { terms: xs.clone().zip(r.iter().map(|v| -v)).collect(), constant: rx0 + 0.1 });
        }
        let p = pb.build();
        let st = Settings::default();
        let sol = solve(&p, &st);
        prop_assert_eq!(sol.status, Status::Optimal);
        prop_assert!(check_solution(&p, &sol, st.feas_tol).passed);
        prop_assert!(sol.primal_obj - sol.dual_obj >= -10.0 * st.gap_tol);
        let at_x0: f64 = c.iter().zip(&x0).map(|(a, b)| a * b).sum();
        prop_assert!(sol.primal_obj <= at_x0 + 1e-8);
    }
}
