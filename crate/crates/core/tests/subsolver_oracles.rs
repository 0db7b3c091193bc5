use miadmm::numerics::{largest_eigenvalue, solve_spd, Cholesky};
use miadmm::subsolvers::{
    active_set_warm_start, cd_solve_quadratic, clamped_warm_start, frob_ball_solve, quad_kkt_residual,
    scalar_coordinate_min, CoordConstraint, L1Weight, QuadSubproblem, ReducedFactorCache,
};
use miadmm::Matrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CONSTRAINTS: [CoordConstraint; 4] = [
    CoordConstraint::Free,
    CoordConstraint::NonNegative,
    CoordConstraint::NonPositive,
    CoordConstraint::FixedZero,
];

struct Instance {
    p: Matrix,
    q: Vec<f64>,
    gamma: Vec<f64>,
    cons: Vec<CoordConstraint>,
}

/// `P = BBᵀ + 0.5I` with `B`, `q` uniform on `[−1, 1]`: every minimizer lies
/// in `[−4, 4]ⁿ`.
fn instance(seed: u64, max_dim: usize, with_l1: bool) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=max_dim);
    let b = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..=1.0));
    let mut p = b.matmul_t(&b);
    p.add_diagonal(0.5);
    let q = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let gamma = (0..n)
        .map(|_| if with_l1 { rng.random_range(0.0..0.5) } else { 0.0 })
        .collect();
    let cons = (0..n).map(|_| CONSTRAINTS[rng.random_range(0..4)]).collect();
    Instance { p, q, gamma, cons }
}

fn objective(inst: &Instance, x: &[f64]) -> f64 {
    let n = x.len();
    let mut v = 0.0;
    for i in 0..n {
        for j in 0..n {
            v += 0.5 * x[i] * inst.p[(i, j)] * x[j];
        }
        v += -inst.q[i] * x[i] + inst.gamma[i] * x[i].abs();
    }
    v
}

fn admissible(c: CoordConstraint, t: f64) -> bool {
    match c {
        CoordConstraint::Free => true,
        CoordConstraint::NonNegative => t >= 0.0,
        CoordConstraint::NonPositive => t <= 0.0,
        CoordConstraint::FixedZero => t == 0.0,
    }
}

/// Exact minimizer of the last coordinate with the rest fixed, written out
/// case by case rather than through the library's scalar step.
fn best_last(inst: &Instance, head: &[f64]) -> f64 {
    let n = inst.q.len();
    let j = n - 1;
    let a = inst.p[(j, j)];
    let b = inst.q[j] - (0..j).map(|k| inst.p[(j, k)] * head[k]).sum::<f64>();
    let g = inst.gamma[j];
    // candidates: stationary points of each smooth piece, and zero
    let mut cands = vec![0.0];
    if b > g {
        cands.push((b - g) / a);
    }
    if b < -g {
        cands.push((b + g) / a);
    }
    let piece = |t: f64| 0.5 * a * t * t - b * t + g * t.abs();
    cands
        .into_iter()
        .filter(|t| admissible(inst.cons[j], *t))
        .min_by(|s, t| piece(*s).total_cmp(&piece(*t)))
        .unwrap()
}

/// Grid search over all but the last coordinate: step 0.02 on `[−4, 4]`,
/// then step 1e-3 on a window of ±0.05 around the coarse winner.
fn grid_oracle(inst: &Instance) -> (Vec<f64>, f64) {
    let n = inst.q.len();
    let m = n - 1;
    let eval = |head: &[f64]| {
        let mut x = head.to_vec();
        x.push(best_last(inst, head));
        let v = objective(inst, &x);
        (x, v)
    };
    let axis = |center: f64, half_steps: i64, step: f64, c: CoordConstraint| -> Vec<f64> {
        let base = (center / step).round() as i64;
        (base - half_steps..=base + half_steps)
            .map(|i| i as f64 * step)
            .filter(|t| admissible(c, *t))
            .collect()
    };
    let search = |centers: &[f64], half: i64, step: f64| -> (Vec<f64>, f64) {
        let axes: Vec<Vec<f64>> = (0..m).map(|k| axis(centers[k], half, step, inst.cons[k])).collect();
        let mut best = (Vec::new(), f64::INFINITY);
        let mut idx = vec![0usize; m];
        loop {
            let head: Vec<f64> = (0..m).map(|k| axes[k][idx[k]]).collect();
            let (x, v) = eval(&head);
            if v < best.1 {
                best = (x, v);
            }
            let mut k = 0;
            while k < m {
                idx[k] += 1;
                if idx[k] < axes[k].len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == m {
                return best;
            }
        }
    };
    let (coarse, _) = search(&vec![0.0; m], 200, 0.02);
    search(&coarse[..m], 50, 1e-3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn cd_matches_grid_oracle(seed in any::<u64>()) {
        let inst = instance(seed, 3, true);
        let n = inst.q.len();
        let x0 = vec![0.0; n];
        let sub = QuadSubproblem::new(&inst.p, &inst.q, &inst.cons, &x0)
            .with_l1(L1Weight::PerCoord(&inst.gamma));
        let sol = cd_solve_quadratic(&sub).unwrap();
        let (gx, gv) = grid_oracle(&inst);
        let cv = objective(&inst, &sol.x);
        prop_assert!(cv <= gv + 1e-12, "cd {cv} above grid {gv}");
        prop_assert!(gv - cv <= 1e-5, "cd {cv} vs grid {gv}");
        for j in 0..n {
            prop_assert!((sol.x[j] - gx[j]).abs() <= 2e-3, "{:?} vs {gx:?}", sol.x);
            prop_assert!(admissible(inst.cons[j], sol.x[j]));
        }
    }

    #[test]
    fn cd_matches_linear_solve_when_unconstrained(seed in any::<u64>()) {
        let mut inst = instance(seed, 8, false);
        inst.cons.iter_mut().for_each(|c| *c = CoordConstraint::Free);
        let x0 = vec![0.0; inst.q.len()];
        let sub = QuadSubproblem::new(&inst.p, &inst.q, &inst.cons, &x0);
        let sol = cd_solve_quadratic(&sub).unwrap();
        let want = solve_spd(&inst.p, &inst.q, 0.0).unwrap();
        for (a, b) in sol.x.iter().zip(want.iter()) {
            prop_assert!((a - b).abs() <= 1e-6);
        }
    }

    #[test]
    fn cd_never_worse_than_projected_start(seed in any::<u64>(), x0 in prop::collection::vec(-3.0f64..3.0, 8)) {
        let inst = instance(seed, 8, true);
        let n = inst.q.len();
        let start: Vec<f64> = x0[..n].iter().zip(&inst.cons).map(|(v, c)| c.clamp(*v)).collect();
        let sub = QuadSubproblem::new(&inst.p, &inst.q, &inst.cons, &x0[..n])
            .with_l1(L1Weight::PerCoord(&inst.gamma));
        let sol = cd_solve_quadratic(&sub).unwrap();
        prop_assert!(objective(&inst, &sol.x) <= objective(&inst, &start) + 1e-12);
        prop_assert!(quad_kkt_residual(&sub, &sol.x) <= 1e-8);
    }

    #[test]
    fn active_set_start_is_feasible_and_no_worse_than_clamping(seed in any::<u64>()) {
        let inst = instance(seed, 8, false);
        let f = Cholesky::factor(&inst.p, 0.0).unwrap();
        let clamped = clamped_warm_start(&f, &inst.q, &inst.cons);
        let x = active_set_warm_start(&inst.p, &f, &inst.q, &inst.cons, None, None);
        for (t, c) in x.iter().zip(&inst.cons) {
            prop_assert!(admissible(*c, *t));
        }
        prop_assert!(objective(&inst, &x) <= objective(&inst, &clamped));
        // a hint can only help
        let hint: Vec<f64> = (0..inst.q.len()).map(|j| ((seed >> j) & 1) as f64 - 0.5).collect();
        let mut cache = ReducedFactorCache::new(2);
        let hinted = active_set_warm_start(&inst.p, &f, &inst.q, &inst.cons, Some(&hint), Some(&mut cache));
        // a cached factorization gives exactly the uncached answer
        let again = active_set_warm_start(&inst.p, &f, &inst.q, &inst.cons, Some(&hint), Some(&mut cache));
        let uncached = active_set_warm_start(&inst.p, &f, &inst.q, &inst.cons, Some(&hint), None);
        prop_assert_eq!(&hinted, &again);
        prop_assert_eq!(&hinted, &uncached);
        prop_assert!(cache.len() <= 2);
        let start: Vec<f64> = hint.iter().zip(&inst.cons).map(|(v, c)| c.clamp(*v)).collect();
        for (t, c) in hinted.iter().zip(&inst.cons) {
            prop_assert!(admissible(*c, *t));
        }
        prop_assert!(objective(&inst, &hinted) <= objective(&inst, &clamped).min(objective(&inst, &start)));
    }

    #[test]
    fn scalar_step_is_exact_division_when_free(a in 1e-3f64..1e3, b in -1e3f64..1e3) {
        prop_assert_eq!(scalar_coordinate_min(a, b, 0.0, CoordConstraint::Free), b / a);
    }
}

/// Projected gradient on `‖DY − X‖² + (ρ/2)‖D − C‖²` over the unit
/// Frobenius ball, run to a fixed point.
fn projected_gradient(g: &Matrix, r: &Matrix, rho: f64, c: &Matrix) -> Matrix {
    let lip = 2.0 * largest_eigenvalue(g, 1e-12) * 1.01 + rho;
    let step = 1.0 / lip;
    let mut d = Matrix::zeros(r.rows(), r.cols());
    for _ in 0..200_000 {
        let dg = d.matmul(g);
        let mut next = d.clone();
        for ((nv, (dgv, rv)), (dv, cv)) in next
            .as_mut_slice()
            .iter_mut()
            .zip(dg.as_slice().iter().zip(r.as_slice()))
            .zip(d.as_slice().iter().zip(c.as_slice()))
        {
            let grad = 2.0 * (dgv - rv) + rho * (dv - cv);
            *nv = dv - step * grad;
        }
        let norm = next.frobenius_norm();
        if norm > 1.0 {
            next.scale(1.0 / norm);
        }
        let change: f64 = next
            .as_slice()
            .iter()
            .zip(d.as_slice())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        d = next;
        if change < 1e-15 {
            break;
        }
    }
    d
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn frob_ball_matches_projected_gradient(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (rows, k, s) = (rng.random_range(1..=4), rng.random_range(1..=3), rng.random_range(1..=5));
        let y = Matrix::from_fn(k, s, |_, _| rng.random_range(-1.0..=1.0));
        let x = Matrix::from_fn(rows, s, |_, _| rng.random_range(-2.0..=2.0));
        let c = Matrix::from_fn(rows, k, |_, _| rng.random_range(-1.0..=1.0));
        let rho = rng.random_range(0.5..=2.0);
        let g = y.matmul_t(&y);
        let r = x.matmul_t(&y);
        let tol = 1e-12;
        let sol = frob_ball_solve(&g, &r, rho, &c, tol).unwrap();
        let norm = sol.d.frobenius_norm();
        prop_assert!(norm <= 1.0 + tol);
        prop_assert!(sol.mu >= 0.0);
        prop_assert!((sol.mu * (1.0 - norm)).abs() <= 1e-10);
        let want = projected_gradient(&g, &r, rho, &c);
        for (a, b) in sol.d.as_slice().iter().zip(want.as_slice()) {
            prop_assert!((a - b).abs() <= 1e-6, "{:?} vs {:?}", sol.d, want);
        }
    }
}
