use miadmm::diagnostics::{
    augmented_lagrangian, check_sufficient_descent, default_descent_slack, max_violation,
    rate_proxy, rate_proxy_holds, summability_check,
};
use miadmm::engine::{sweep_blocks, BlockContext, Penalty};
use miadmm::numerics::solve_spd;
use miadmm::problems::*;
use miadmm::subsolvers::CoordConstraint;
use miadmm::{
    run, solve_batch, ExecPolicy, Matrix, ProblemSpec, SolveReport, SolveStatus, SolverConfig,
    SolverState, Vector,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cfg(rho: f64, max_iter: usize) -> SolverConfig {
    SolverConfig {
        rho,
        max_iter,
        record_timing: false,
        ..Default::default()
    }
}

fn assert_feasible_throughout(r: &SolveReport) {
    for rec in &r.history {
        assert!(rec.max_violation <= 1e-12, "k={} violation {}", rec.k, rec.max_violation);
    }
}

fn assert_zero_dual(r: &SolveReport) {
    assert!(r.final_state.y.norm_inf() <= 1e-12);
    for rec in &r.history {
        assert!(rec.dual_identity_err <= 1e-12);
    }
}

#[test]
fn synthetic_block_with_zero_partner_is_plain_ridge() {
    let d = gen_synthetic(30, 4, 0.1, 3).unwrap();
    let (lambda, rho) = (1.0, 0.1);
    let spec = build_synthetic_problem(&d, lambda).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let center: Vector = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
    let x = vec![Vector::zeros(4), Vector::zeros(4)];
    let ctx = BlockContext {
        index: 0,
        x: &x,
        penalty: Penalty::prox(rho, center.clone()),
        sub_tol: 1e-12,
    };
    let got = spec.model.solve_block(&ctx).unwrap();

    let xa = d.x.column_block(0, 4);
    let mut p = xa.gram();
    p.scale(2.0);
    p.add_diagonal(2.0 * lambda + rho);
    let mut q = xa.matvec_t(&d.y);
    q.iter_mut().zip(center.iter()).for_each(|(a, c)| *a = 2.0 * *a + rho * c);
    let want = solve_spd(&p, &q, 0.0).unwrap();
    for (a, b) in got.iter().zip(want.iter()) {
        assert!((a - b).abs() <= 1e-8, "{got:?} vs {want:?}");
    }
}

#[test]
fn positive_partner_forces_nonpositive_block() {
    // single feature whose data pushes α upward
    let x = Matrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    let d = SyntheticDataset {
        x,
        y: Vector::from(vec![2.0, 2.0, 1.0]),
        alpha_true: Vector::from(vec![1.0]),
        beta_true: Vector::from(vec![1.0]),
        seed: 0,
    };
    let spec = build_synthetic_problem(&d, 1.0).unwrap();
    let x = vec![Vector::zeros(1), Vector::from(vec![0.5])];
    let ctx = BlockContext {
        index: 0,
        x: &x,
        penalty: Penalty::prox(0.1, Vector::zeros(1)),
        sub_tol: 1e-12,
    };
    let alpha = spec.model.solve_block(&ctx).unwrap();
    assert_eq!(alpha[0], 0.0);
}

#[test]
fn sweep_lowers_the_augmented_lagrangian_and_stays_feasible() {
    let d = gen_synthetic(20, 2, 0.1, 7).unwrap();
    let spec = build_synthetic_problem(&d, 1.0).unwrap();
    let c = cfg(0.1, 1);
    let mut state = SolverState::initial(&spec);
    for _ in 0..5 {
        let before = augmented_lagrangian(&spec, &state, c.rho);
        sweep_blocks(&spec, &mut state, &c).unwrap();
        let after = augmented_lagrangian(&spec, &state, c.rho);
        assert!(after <= before + 1e-12 * (1.0 + before.abs()), "{after} > {before}");
        assert!(max_violation(&spec, &state.x) <= 0.0);
        // keep z and y consistent for the next sweep
        let s: Vector = state.x.iter().flat_map(|v| v.iter().copied()).collect();
        state.z = s;
    }
}

#[test]
fn objective_at_feasible_truth_is_the_ridge_term() {
    let d = gen_synthetic(25, 3, 0.0, 2).unwrap();
    let alpha = Vector::from(vec![0.5, -0.25, 0.0]);
    let beta = Vector::from(vec![-1.0, 0.75, 0.3]);
    let d = d.with_weights(alpha.clone(), beta.clone());
    let lambda = 1.5;
    let spec = build_synthetic_problem(&d, lambda).unwrap();
    let want = lambda * (alpha.dot(&alpha) + beta.dot(&beta));
    assert_eq!(spec.model.objective(&[alpha, beta]), want);
}

#[test]
fn small_synthetic_converges_with_all_certificates() {
    let d = gen_synthetic(50, 5, 0.1, 7).unwrap();
    let spec = build_synthetic_problem(&d, 1.0).unwrap();
    let r = run(&spec, &cfg(0.1, 5000)).unwrap();
    assert_eq!(r.status, SolveStatus::Converged);
    assert!(r.iterations() < 5000);
    assert_feasible_throughout(&r);
    assert_zero_dual(&r);
    let mut prev = r.initial_lagrangian;
    for rec in &r.history {
        assert!(check_sufficient_descent(prev, rec.lagrangian, rec.step_norm_sq, &r.constants, default_descent_slack(prev)));
        prev = rec.lagrangian;
    }
    let lk = r.history.last().unwrap().lagrangian;
    assert!(summability_check(&r.history, &r.constants, r.initial_lagrangian, lk));
    assert!(r.history.windows(2).all(|w| w[1].u_k <= w[0].u_k));
}

#[test]
fn rate_proxy_holds_on_a_long_synthetic_run() {
    let d = gen_synthetic(150, 100, 0.1, 4).unwrap();
    let spec = build_synthetic_problem(&d, 1.0).unwrap();
    let c = SolverConfig {
        tol: 1e-300,
        ..cfg(0.1, 200)
    };
    let r = run(&spec, &c).unwrap();
    assert_eq!(r.iterations(), 200);
    assert!(rate_proxy_holds(&rate_proxy(&r.history)));
}

/// `argmin ‖y − Xθ‖² + λ‖θ‖²`
fn ridge(x: &Matrix, y: &[f64], lambda: f64) -> Vector {
    let mut g = x.gram();
    g.add_diagonal(lambda);
    solve_spd(&g, &x.matvec_t(y), 0.0).unwrap()
}

#[test]
fn feasible_ridge_solution_is_recovered() {
    let d = gen_synthetic(80, 3, 0.0, 12).unwrap();
    let d = d.with_weights(
        Vector::from(vec![0.8, -0.6, 0.9]),
        Vector::from(vec![-0.7, 0.5, -0.4]),
    );
    let want = ridge(&d.x, &d.y, 1.0);
    assert!((0..3).all(|j| want[j] * want[j + 3] <= 0.0));
    let spec = build_synthetic_problem(&d, 1.0).unwrap();
    let r = run(&spec, &cfg(0.1, 5000)).unwrap();
    assert_eq!(r.status, SolveStatus::Converged);
    let got: Vec<f64> = r.final_state.x.iter().flat_map(|v| v.iter().copied()).collect();
    for (a, b) in got.iter().zip(want.iter()) {
        assert!((a - b).abs() <= 1e-4, "{got:?} vs {want:?}");
    }
}

#[test]
fn multitask_with_zero_neighbors_is_independent_ridge() {
    let data = gen_multitask(3, 4, 20, 0.1, 0.5, 1).unwrap();
    let spec = build_multitask_problem(&data).unwrap();
    let x: Vec<Vector> = vec![Vector::zeros(4); 3];
    let rho = 0.3;
    for i in 0..3 {
        let center: Vector = (0..4).map(|j| 0.1 * (i + j) as f64).collect();
        let ctx = BlockContext {
            index: i,
            x: &x,
            penalty: Penalty::prox(rho, center.clone()),
            sub_tol: 1e-12,
        };
        let got = spec.model.solve_block(&ctx).unwrap();
        let t = &data.tasks[i];
        let n = t.y.len() as f64;
        let mut p = t.x.gram();
        p.scale(2.0 / n);
        p.add_diagonal(2.0 * data.lambda + rho);
        let mut q = t.x.matvec_t(&t.y);
        q.iter_mut().zip(center.iter()).for_each(|(a, c)| *a = 2.0 / n * *a + rho * c);
        let want = solve_spd(&p, &q, 0.0).unwrap();
        for (a, b) in got.iter().zip(want.iter()) {
            assert!((a - b).abs() <= 1e-8);
        }
    }
}

#[test]
fn multitask_neighbor_constraints() {
    let data = gen_multitask(3, 2, 10, 0.0, 0.1, 2).unwrap();
    let signs = SignConstraints::new(&[2, 2, 2], chain_edges(3, 2)).unwrap();
    let x = vec![
        Vector::from(vec![1.0, 1.0]),
        Vector::zeros(2),
        Vector::from(vec![2.0, -1.0]),
    ];
    assert_eq!(
        signs.coord_constraints(1, 2, &x),
        vec![CoordConstraint::NonNegative, CoordConstraint::FixedZero]
    );
    assert_eq!(signs.coord_constraints(0, 2, &x), vec![CoordConstraint::Free; 2]);
    assert!(build_multitask_problem(&MultitaskDataset {
        tasks: data.tasks[..1].to_vec(),
        ..data
    })
    .is_err());
}

#[test]
fn correlated_toy_tasks_share_sign_and_match_bcd() {
    let mk = |xs: &[f64], ys: &[f64]| Task {
        x: Matrix::new(xs.len(), 1, xs.to_vec()).unwrap(),
        y: Vector::from(ys.to_vec()),
    };
    let data = MultitaskDataset {
        tasks: vec![mk(&[1.0, 2.0, -1.0], &[1.1, 1.9, -0.8]), mk(&[0.5, -1.0, 2.0], &[0.6, -0.9, 2.2])],
        lambda: 0.1,
        true_weights: None,
    };
    let spec = build_multitask_problem(&data).unwrap();
    let a = run(&spec, &cfg(0.1, 5000)).unwrap();
    assert_eq!(a.status, SolveStatus::Converged);
    let w = &a.final_state.x;
    assert!(w[0][0] * w[1][0] > 0.0);
    let b = bcd_solve(&spec, &cfg(0.1, 5000)).unwrap();
    for (u, v) in w.iter().zip(&b.final_state.x) {
        assert!((u[0] - v[0]).abs() < 1e-4);
    }
}

#[test]
fn all_agree_chain_network_reproduces_multitask() {
    let data = gen_multitask(3, 3, 15, 0.2, 0.2, 9).unwrap();
    let net = SignedNetwork::new(vec![3; 3], chain_edges(3, 3)).unwrap();
    let a = build_multitask_problem(&data).unwrap();
    let b = build_signed_network_problem(&net, &data.tasks, data.lambda).unwrap();
    let ra = run(&a, &cfg(0.2, 300)).unwrap();
    let rb = run(&b, &cfg(0.2, 300)).unwrap();
    assert_eq!(ra.history, rb.history);
}

#[test]
fn disagree_edge_with_positive_partner() {
    let signs = SignConstraints::new(&[2, 2], vec![SignEdge::disagree((0, 1), (1, 0))]).unwrap();
    let x = vec![Vector::zeros(2), Vector::from(vec![0.3, -5.0])];
    assert_eq!(
        signs.coord_constraints(0, 2, &x),
        vec![CoordConstraint::Free, CoordConstraint::NonPositive]
    );
    let flipped = SignConstraints::new(&[2, 2], vec![SignEdge::agree((0, 1), (1, 0))]).unwrap();
    assert_eq!(flipped.coord_constraints(0, 2, &x)[1], CoordConstraint::NonNegative);
}

#[test]
fn planted_network_iterates_satisfy_every_edge() {
    let planted = gen_signed_network(2, 3, 30, 4, 0.1, 11).unwrap();
    let spec = build_signed_network_problem(&planted.network, &planted.tasks, 0.1).unwrap();
    let r = run(&spec, &cfg(0.1, 2000)).unwrap();
    assert!(!matches!(r.status, SolveStatus::CertificateViolation(_)));
    assert_feasible_throughout(&r);
    assert_zero_dual(&r);
    for e in &planted.network.edges {
        assert!(e.value(&r.final_state.x) <= 1e-12);
    }
}

#[test]
fn contradictory_duplicate_edges_are_rejected() {
    let edges = vec![SignEdge::agree((0, 0), (1, 0)), SignEdge::disagree((1, 0), (0, 0))];
    assert!(matches!(
        SignedNetwork::new(vec![1, 1], edges),
        Err(miadmm::Error::InconsistentEdge(_))
    ));
}

#[test]
fn dictionary_recovers_exact_factorization() {
    let (x, _, _) = gen_dictlearn(8, 12, 3, 1.0, 5).unwrap();
    let p = DictLearnProblem { x, gamma: 0.0, rank: 3 };
    let spec = build_dictlearn_problem(&p).unwrap();
    let r = run(&spec, &cfg(0.1, 2000)).unwrap();
    assert_eq!(r.status, SolveStatus::Converged);
    assert!(r.history.last().unwrap().objective <= 1e-4);
    assert_feasible_throughout(&r);
    assert_zero_dual(&r);
}

#[test]
fn heavy_sparsity_zeroes_the_codes() {
    let (x, _, _) = gen_dictlearn(6, 10, 2, 0.5, 8).unwrap();
    let p = DictLearnProblem { x, gamma: 1e3, rank: 2 };
    let spec = build_dictlearn_problem(&p).unwrap();
    let r = run(&spec, &cfg(0.1, 50)).unwrap();
    assert!(r.final_state.x[1].iter().all(|v| *v == 0.0));
    for rec in &r.history {
        assert!(rec.max_violation <= 1e-8);
    }
}

#[test]
fn dictionary_rank_is_validated() {
    let x = Matrix::identity(3);
    assert!(build_dictlearn_problem(&DictLearnProblem { x: x.clone(), gamma: 0.0, rank: 4 }).is_err());
    assert!(build_dictlearn_problem(&DictLearnProblem { x, gamma: -1.0, rank: 2 }).is_err());
}

fn nonneg_uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(0.0..1.0))
}

#[test]
fn nmf_of_zero_data_collapses() {
    let p = NmfProblem { u: Matrix::zeros(4, 3), rank: 2 };
    let spec = build_nmf_problem(&p).unwrap();
    let c = SolverConfig {
        tol: 1e-30,
        ..cfg(0.1, 2000)
    };
    let r = run(&spec, &c).unwrap();
    assert!(r.history.last().unwrap().objective <= 1e-12);
    // near zero the factors shrink only like k^(-1/2)
    let largest = r.final_state.x.iter().map(|b| b.norm_inf()).fold(0.0, f64::max);
    assert!(largest < 0.5 * miadmm::problems::nmf::NMF_INIT);
    assert!(r.history.windows(2).all(|w| w[1].objective <= w[0].objective));
}

#[test]
fn nmf_rank_one_is_recovered() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let v = nonneg_uniform(&mut rng, 6, 1);
    let w = nonneg_uniform(&mut rng, 1, 5);
    let p = NmfProblem { u: v.matmul(&w), rank: 1 };
    let spec = build_nmf_problem(&p).unwrap();
    let r = run(&spec, &cfg(0.1, 300)).unwrap();
    assert!(nmf_relative_error(&p, &r.final_state.x) <= 1e-3);
    assert_feasible_throughout(&r);
}

#[test]
fn nmf_rejects_negative_data() {
    let u = Matrix::from_rows(&[vec![1.0, -0.5]]).unwrap();
    assert!(build_nmf_problem(&NmfProblem { u, rank: 1 }).is_err());
}

#[test]
fn bcd_on_one_convex_block_is_a_linear_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let task = Task {
        x: Matrix::from_fn(12, 4, |_, _| rng.random_range(-1.0..1.0)),
        y: (0..12).map(|_| rng.random_range(-1.0..1.0)).collect(),
    };
    let net = SignedNetwork::new(vec![4], vec![]).unwrap();
    let spec = build_signed_network_problem(&net, std::slice::from_ref(&task), 0.3).unwrap();
    let r = bcd_solve(&spec, &cfg(0.1, 10)).unwrap();
    assert_eq!(r.status, SolveStatus::Converged);
    let mut p = task.x.gram();
    p.scale(2.0 / 12.0);
    p.add_diagonal(0.6);
    let mut q = task.x.matvec_t(&task.y);
    q.iter_mut().for_each(|v| *v *= 2.0 / 12.0);
    let want = solve_spd(&p, &q, 0.0).unwrap();
    for (a, b) in r.final_state.x[0].iter().zip(want.iter()) {
        assert!((a - b).abs() <= 1e-8);
    }
}

#[test]
fn bcd_and_admm_agree_on_small_synthetic() {
    let d = gen_synthetic(50, 5, 0.1, 7).unwrap();
    let spec = build_synthetic_problem(&d, 1.0).unwrap();
    let a = run(&spec, &cfg(0.1, 5000)).unwrap();
    let b = bcd_solve(&spec, &cfg(0.1, 5000)).unwrap();
    assert_eq!(b.status, SolveStatus::Converged);
    assert!(b.history.iter().all(|r| r.max_violation <= 0.0));
    let (fa, fb) = (a.history.last().unwrap().objective, b.history.last().unwrap().objective);
    assert!((fa - fb).abs() <= 0.05 * fa.abs().max(fb.abs()));
    // exact block minimization never raises the objective
    let mut prev = b.initial_lagrangian;
    for rec in &b.history {
        assert!(rec.objective <= prev + 1e-12 * (1.0 + prev.abs()));
        prev = rec.objective;
    }
}

#[test]
fn bcd_rejects_smooth_terms_and_dictionary_blocks() {
    let (x, _, _) = gen_dictlearn(4, 5, 2, 1.0, 1).unwrap();
    let spec = build_dictlearn_problem(&DictLearnProblem { x, gamma: 0.1, rank: 2 }).unwrap();
    assert!(bcd_solve(&spec, &cfg(0.1, 5)).is_err());
}

fn run_with(spec: &ProblemSpec) -> SolveReport {
    run(spec, &cfg(0.1, 40)).unwrap()
}

#[test]
fn execution_policy_does_not_change_results() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let v = nonneg_uniform(&mut rng, 12, 3);
    let w = nonneg_uniform(&mut rng, 3, 9);
    let p = NmfProblem { u: v.matmul(&w), rank: 3 };
    let seq = run_with(&build_nmf_problem_with(&p, ExecPolicy::Sequential).unwrap());
    let par = run_with(&build_nmf_problem_with(&p, ExecPolicy::Parallel).unwrap());
    assert_eq!(seq.history, par.history);

    let (x, _, _) = gen_dictlearn(6, 9, 2, 1.0, 4).unwrap();
    let dp = DictLearnProblem { x, gamma: 0.05, rank: 2 };
    let seq = run_with(&build_dictlearn_problem_with(&dp, ExecPolicy::Sequential).unwrap());
    let par = run_with(&build_dictlearn_problem_with(&dp, ExecPolicy::Parallel).unwrap());
    assert_eq!(seq.history, par.history);

    let specs: Vec<ProblemSpec> = (1..=4)
        .map(|s| build_synthetic_problem(&gen_synthetic(30, 4, 0.1, s).unwrap(), 1.0).unwrap())
        .collect();
    let c = cfg(0.1, 100);
    let a = solve_batch(&specs, &c, ExecPolicy::Sequential);
    let b = solve_batch(&specs, &c, ExecPolicy::Parallel);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.as_ref().unwrap().history, y.as_ref().unwrap().history);
    }
}

#[test]
fn every_builder_starts_feasible() {
    let specs = vec![
        build_synthetic_problem(&gen_synthetic(10, 2, 0.1, 1).unwrap(), 1.0).unwrap(),
        build_multitask_problem(&gen_multitask(3, 2, 5, 0.1, 0.1, 1).unwrap()).unwrap(),
        {
            let p = gen_signed_network(3, 2, 5, 4, 0.1, 1).unwrap();
            build_signed_network_problem(&p.network, &p.tasks, 0.1).unwrap()
        },
        build_dictlearn_problem(&DictLearnProblem {
            x: gen_dictlearn(4, 5, 2, 1.0, 1).unwrap().0,
            gamma: 0.1,
            rank: 2,
        })
        .unwrap(),
        build_nmf_problem(&NmfProblem { u: Matrix::identity(3), rank: 2 }).unwrap(),
    ];
    for s in &specs {
        assert!(max_violation(s, &s.initial_point) <= 0.0);
    }
}
