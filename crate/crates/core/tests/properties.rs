use miadmm::diagnostics::{descent_constants, rate_proxy_holds, update_u};
use miadmm::numerics::{format_matrix, gram_with, parse_matrix, solve_spd};
use miadmm::problems::sign::sign_requirement;
use miadmm::problems::{build_synthetic_problem, gen_synthetic, regression_metrics, Polarity};
use miadmm::subsolvers::CoordConstraint;
use miadmm::{run, ExecPolicy, Matrix, SolverConfig};
use proptest::prelude::*;

fn matrix(max: usize) -> impl Strategy<Value = Matrix> {
    (1..=max, 1..=max).prop_flat_map(|(r, c)| {
        prop::collection::vec(-10.0f64..10.0, r * c).prop_map(move |v| Matrix::new(r, c, v).unwrap())
    })
}

proptest! {
    #[test]
    fn running_minimum_is_nonincreasing(steps in prop::collection::vec(0.0f64..1e3, 1..50)) {
        let mut u = None;
        let mut prev = f64::INFINITY;
        for s in &steps {
            let next = update_u(u, *s);
            prop_assert!(next <= prev && next <= *s);
            prev = next;
            u = Some(next);
        }
        prop_assert_eq!(prev, steps.iter().copied().fold(f64::INFINITY, f64::min));
    }

    #[test]
    fn polarity_flip_swaps_sign_requirement(partner in -5.0f64..5.0) {
        for pol in [Polarity::Agree, Polarity::Disagree] {
            let a = sign_requirement(partner, pol);
            let b = sign_requirement(partner, pol.flipped());
            prop_assert_eq!(a.flipped(), b);
            if partner == 0.0 {
                prop_assert_eq!(a, CoordConstraint::Free);
            }
        }
    }

    #[test]
    fn gram_is_exactly_symmetric_and_policy_independent(a in matrix(7)) {
        let g = gram_with(&a, ExecPolicy::Sequential);
        prop_assert_eq!(&g, &gram_with(&a, ExecPolicy::Parallel));
        for i in 0..g.rows() {
            for j in 0..g.cols() {
                prop_assert_eq!(g[(i, j)].to_bits(), g[(j, i)].to_bits());
            }
        }
    }

    #[test]
    fn matrix_text_round_trips(a in matrix(6)) {
        prop_assert_eq!(parse_matrix(&format_matrix(&a)).unwrap(), a);
    }

    #[test]
    fn spd_solve_residual(b in matrix(6)) {
        let n = b.rows();
        let mut p = b.matmul_t(&b);
        p.add_diagonal(1.0);
        let q: Vec<f64> = (0..n).map(|i| i as f64 - 1.5).collect();
        let x = solve_spd(&p, &q, 0.0).unwrap();
        let r = p.matvec(&x);
        let qn = q.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in r.iter().zip(&q) {
            prop_assert!((a - b).abs() <= 1e-8 * (1.0 + qn));
        }
    }

    #[test]
    fn descent_constants_are_positive_above_threshold(h in 0.0f64..10.0, excess in 1e-6f64..10.0) {
        let rho = 2.0 * h + excess;
        let c = descent_constants(h, rho).unwrap();
        prop_assert!(c.c2 > 0.0 && c.c2 <= c.c1 && c.c2 <= rho / 2.0);
        prop_assert!(descent_constants(h, 2.0 * h).is_err());
    }

    #[test]
    fn metrics_are_consistent(y in prop::collection::vec(0.0f64..10.0, 2..30), noise in prop::collection::vec(-1.0f64..1.0, 30)) {
        let yhat: Vec<f64> = y.iter().zip(&noise).map(|(a, e)| (a + e).max(0.0)).collect();
        let m = regression_metrics(&y, &yhat).unwrap();
        prop_assert!(m.mse >= 0.0 && m.msle >= 0.0 && m.mae >= 0.0);
        prop_assert!(m.mae * m.mae <= m.mse + 1e-12);
        prop_assert!(m.r2 <= 1.0 && m.ev <= 1.0);
        prop_assert!(m.ev >= m.r2 - 1e-12);
    }
}

#[test]
fn analytic_rate_sequences() {
    // u_k = 1/k² gives k·u_k = 1/k
    let decaying: Vec<(usize, f64)> = (1..=100).map(|k| (k, 1.0 / k as f64)).collect();
    assert!(rate_proxy_holds(&decaying));
    let constant: Vec<(usize, f64)> = (1..=100).map(|k| (k, k as f64)).collect();
    assert!(!rate_proxy_holds(&constant));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn synthetic_runs_are_feasible_certified_and_reproducible(seed in 0u64..1000, m in 1usize..6) {
        let d = gen_synthetic(25, m, 0.2, seed).unwrap();
        let spec = build_synthetic_problem(&d, 1.0).unwrap();
        let cfg = SolverConfig { rho: 0.1, max_iter: 300, record_timing: false, ..Default::default() };
        let a = run(&spec, &cfg).unwrap();
        let b = run(&spec, &cfg).unwrap();
        prop_assert_eq!(&a.history, &b.history);
        prop_assert!(!matches!(a.status, miadmm::SolveStatus::CertificateViolation(_)));
        for r in &a.history {
            prop_assert!(r.max_violation <= 1e-12);
            prop_assert!(r.lagrangian.is_finite());
        }
        prop_assert!(a.history.windows(2).all(|w| w[1].lagrangian <= w[0].lagrangian + 1e-8 * (1.0 + w[0].lagrangian.abs())));
    }
}
