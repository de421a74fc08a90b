use cavsolve::lp::{certify_optimality, lp_residuals, solve_lp, LinearProgram, LpStatus};
use proptest::prelude::*;

/// A bounded program: `sum x = 1` keeps it bounded, random extra rows.
fn program() -> impl Strategy<Value = (LinearProgram, Vec<f64>, Vec<f64>)> {
    (2usize..9, 0usize..3, 0usize..3).prop_flat_map(|(n, eqs, ges)| {
        (
            prop::collection::vec(-1.0f64..1.0, n),
            prop::collection::vec(prop::collection::vec(-1.0f64..1.0, n), eqs),
            prop::collection::vec(prop::collection::vec(-1.0f64..1.0, n), ges),
            prop::collection::vec(0.0f64..1.0, n),
            prop::collection::vec(0.0f64..1.0, n),
        )
            .prop_map(|(c, eq_rows, ge_rows, p, q)| {
                let normalize = |v: Vec<f64>| {
                    let s: f64 = v.iter().sum::<f64>().max(1e-9);
                    v.iter().map(|x| x / s).collect::<Vec<f64>>()
                };
                let (p, q) = (normalize(p), normalize(q));
                let dot = |r: &Vec<f64>, x: &Vec<f64>| r.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                let mut lp = LinearProgram::new(c);
                let n = p.len();
                lp.add_eq(vec![1.0; n], 1.0);
                for r in &eq_rows {
                    lp.add_eq(r.clone(), dot(r, &p));
                }
                for r in &ge_rows {
                    lp.add_ge(r.clone(), dot(r, &p) - 0.1);
                }
                // the same rows evaluated at a second feasible point
                let mut eq2 = vec![1.0];
                eq2.extend(eq_rows.iter().map(|r| dot(r, &q)));
                let ge2: Vec<f64> = ge_rows.iter().map(|r| dot(r, &q) - 0.1).collect();
                let mut rhs2 = eq2;
                rhs2.extend(ge2);
                (lp, p, rhs2)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn optimal_solutions_are_certified((lp, _, _) in program()) {
        let sol = solve_lp(&lp).unwrap();
        prop_assert_eq!(sol.status, LpStatus::Optimal);
        prop_assert!(lp_residuals(&lp, &sol.x).within(1e-8));
        let cert = certify_optimality(&lp, &sol);
        prop_assert!(cert.max_reduced_cost <= 1e-8, "reduced cost {}", cert.max_reduced_cost);
        prop_assert!(cert.certifies(sol.value, 1e-8));
    }

    #[test]
    fn solving_is_deterministic((lp, _, _) in program()) {
        let a = solve_lp(&lp).unwrap();
        let b = solve_lp(&lp.clone()).unwrap();
        prop_assert_eq!(a.basis, b.basis);
        prop_assert_eq!(a.x.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.x.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn value_is_concave_in_the_right_side((lp, _, rhs2) in program()) {
        let n_eq = lp.eq_rhs().len();
        let other = lp.with_rhs(rhs2[..n_eq].to_vec(), rhs2[n_eq..].to_vec()).unwrap();
        let mid_eq: Vec<f64> = lp.eq_rhs().iter().zip(other.eq_rhs()).map(|(a, b)| 0.5 * (a + b)).collect();
        let mid_ge: Vec<f64> = lp.ge_rhs().iter().zip(other.ge_rhs()).map(|(a, b)| 0.5 * (a + b)).collect();
        let mid = lp.with_rhs(mid_eq, mid_ge).unwrap();
        let (va, vb, vm) = (solve_lp(&lp).unwrap(), solve_lp(&other).unwrap(), solve_lp(&mid).unwrap());
        prop_assert!(va.is_optimal() && vb.is_optimal() && vm.is_optimal());
        prop_assert!(vm.value >= 0.5 * (va.value + vb.value) - 1e-7);
    }
}
