use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use resloco_qp::{solve, QpProblem, QpStatus};

fn box_problem(n: usize, h_seed: Vec<f64>, g: Vec<f64>, bound: f64) -> QpProblem {
    let l = DMatrix::from_vec(n, n, h_seed);
    let h = &l * l.transpose();
    let mut c = DMatrix::zeros(2 * n, n);
    for i in 0..n {
        c[(2 * i, i)] = 1.0;
        c[(2 * i + 1, i)] = -1.0;
    }
    QpProblem::new(h, DVector::from_vec(g)).with_inequalities(c, DVector::from_element(2 * n, bound))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn multipliers_nonnegative_and_complementary(
        (n, h, g) in (1usize..8).prop_flat_map(|n| (
            Just(n),
            prop::collection::vec(-1.0f64..1.0, n * n),
            prop::collection::vec(-3.0f64..3.0, n),
        )),
        bound in 0.1f64..2.0,
    ) {
        let p = box_problem(n, h, g, bound);
        let sol = solve(&p, 1e-6, 4000).unwrap();
        prop_assert_eq!(sol.status, QpStatus::Optimal);
        prop_assert!(sol.ineq_multipliers.iter().all(|&m| m >= 0.0));
        let r = p.kkt_residuals(&sol.x, &sol.eq_multipliers, &sol.ineq_multipliers);
        prop_assert!(r.complementarity <= 1e-6, "{:?}", r);
        prop_assert!(sol.x.iter().all(|v| v.abs() <= bound + 1e-6));
    }

    #[test]
    fn no_feasible_point_beats_the_optimum(
        (n, h, g, probe) in (1usize..8).prop_flat_map(|n| (
            Just(n),
            prop::collection::vec(-1.0f64..1.0, n * n),
            prop::collection::vec(-3.0f64..3.0, n),
            prop::collection::vec(-1.0f64..1.0, n),
        )),
    ) {
        let p = box_problem(n, h, g, 1.0);
        let sol = solve(&p, 1e-6, 4000).unwrap();
        prop_assert_eq!(sol.status, QpStatus::Optimal);
        let probe = DVector::from_vec(probe);
        prop_assert!(p.objective(&sol.x) <= p.objective(&probe) + 1e-6);
    }

    #[test]
    fn contradictory_bounds_are_infeasible(n in 1usize..6, gap in 0.1f64..5.0) {
        // x_0 <= -gap and -x_0 <= -gap
        let mut c = DMatrix::zeros(2, n);
        c[(0, 0)] = 1.0;
        c[(1, 0)] = -1.0;
        let p = QpProblem::new(DMatrix::identity(n, n), DVector::zeros(n))
            .with_inequalities(c, DVector::from_element(2, -gap));
        prop_assert_eq!(solve(&p, 1e-6, 4000).unwrap().status, QpStatus::Infeasible);
    }
}
