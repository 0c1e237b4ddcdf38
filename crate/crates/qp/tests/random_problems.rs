//! Randomized checks against independent references.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use resloco_qp::{solve, QpProblem, QpSolver, QpStatus, Settings};

struct Generated {
    problem: QpProblem,
    feasible: DVector<f64>,
}

fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

/// Random feasible problem, bounded by a ±10 box so singular PSD Hessians
/// cannot make it unbounded.
fn generate(rng: &mut ChaCha8Rng) -> Generated {
    let n = rng.random_range(2..=30);
    let rank = rng.random_range(1..=n);
    let l = random_matrix(rng, n, rank);
    let hessian = &l * l.transpose();
    let linear = DVector::from_fn(n, |_, _| rng.random_range(-5.0..5.0));
    let x0 = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));

    let n_eq = rng.random_range(0..=n / 2);
    let a = random_matrix(rng, n_eq, n);
    let b = &a * &x0;

    let n_gen = rng.random_range(0..=n);
    let mut c = DMatrix::zeros(n_gen + 2 * n, n);
    c.rows_mut(0, n_gen).copy_from(&random_matrix(rng, n_gen, n));
    for i in 0..n {
        c[(n_gen + 2 * i, i)] = 1.0;
        c[(n_gen + 2 * i + 1, i)] = -1.0;
    }
    let cx = &c * &x0;
    let mut d = DVector::zeros(c.nrows());
    for i in 0..n_gen {
        let slack = if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.0..1.0) };
        d[i] = cx[i] + slack;
    }
    for i in n_gen..c.nrows() {
        d[i] = 10.0;
    }
    Generated {
        problem: QpProblem::new(hessian, linear)
            .with_equalities(a, b)
            .with_inequalities(c, d),
        feasible: x0,
    }
}

#[test]
fn thousand_random_problems_meet_kkt_tolerance() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for trial in 0..1000 {
        let g = generate(&mut rng);
        let sol = solve(&g.problem, 1e-6, 2000).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal, "trial {trial}");
        let r = g
            .problem
            .kkt_residuals(&sol.x, &sol.eq_multipliers, &sol.ineq_multipliers);
        worst = worst.max(r.max());
        assert!(r.max() < 1e-6, "trial {trial}: {r:?}");
        // Per-inequality complementary slackness.
        assert!(r.complementarity <= 1e-6, "trial {trial}: {r:?}");
        let f_opt = g.problem.objective(&sol.x);
        let f_ref = g.problem.objective(&g.feasible);
        assert!(f_opt <= f_ref + 1e-6, "trial {trial}: {f_opt} > {f_ref}");
    }
    println!("worst KKT residual over 1000 problems: {worst:.3e}");
}

/// Null-space reference: x = x_p + Z w with A Z = 0, reduced Newton step.
fn null_space_reference(h: &DMatrix<f64>, g: &DVector<f64>, a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = h.nrows();
    let m = a.nrows();
    // Full right singular basis via SVD of the zero-padded matrix.
    let mut padded = DMatrix::zeros(n, n);
    padded.rows_mut(0, m).copy_from(a);
    let full = padded.svd(true, true);
    let vt_full = full.v_t.unwrap();
    let z = vt_full.rows(m, n - m).transpose();
    let x_p = a.transpose() * (a * a.transpose()).try_inverse().unwrap() * b;
    let reduced_h = z.transpose() * h * &z;
    let reduced_g = z.transpose() * (h * &x_p + g);
    let w = reduced_h.lu().solve(&(-reduced_g)).unwrap();
    x_p + z * w
}

#[test]
fn equality_only_matches_null_space_solution() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let n = rng.random_range(2..=20);
        let l = random_matrix(&mut rng, n, n);
        let h = &l * l.transpose() + DMatrix::identity(n, n) * 1e-2;
        let g = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let m = rng.random_range(1..n);
        let a = random_matrix(&mut rng, m, n);
        let b = DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
        let reference = null_space_reference(&h, &g, &a, &b);
        let problem = QpProblem::new(h, g).with_equalities(a, b);
        let sol = solve(&problem, 1e-6, 2000).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        let err = (&sol.x - &reference).amax();
        assert!(err < 1e-8, "deviation {err:.3e}");
    }
}

#[test]
fn warm_start_matches_cold_start() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut warm = QpSolver::new(Settings::default());
    for _ in 0..50 {
        let g = generate(&mut rng);
        let cold = solve(&g.problem, 1e-6, 2000).unwrap();
        // Solve twice so the second call starts from the first solution.
        warm.solve(&g.problem).unwrap();
        let hot = warm.solve(&g.problem).unwrap();
        assert_eq!(hot.status, QpStatus::Optimal);
        assert!(hot.iterations <= cold.iterations.max(5));
        let df = (g.problem.objective(&hot.x) - g.problem.objective(&cold.x)).abs();
        assert!(df < 1e-6, "objective mismatch {df:.3e}");
    }
}

#[test]
fn solutions_are_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let g = generate(&mut rng);
    let a = solve(&g.problem, 1e-6, 2000).unwrap();
    let b = solve(&g.problem, 1e-6, 2000).unwrap();
    assert_eq!(a, b);
}
