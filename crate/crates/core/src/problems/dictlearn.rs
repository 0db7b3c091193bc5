//! Sparse dictionary learning
//!
//! ```text
//! minimize  ½‖DY − X‖²_F + γ‖Y‖₁   s.t. ‖D‖_F ≤ 1
//! ```
//!
//! split as `z = [vec D; vec Y]`. The `D` update is a norm-ball constrained
//! least-squares solve; the `Y` update is a lasso per column of `X`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engine::{BlockContext, BlockSpec, Model, ProblemSpec, SmoothTerm};
use crate::error::{Error, Result};
use crate::exec::{self, ExecPolicy};
use crate::numerics::{Cholesky, Matrix, Vector};
use crate::subsolvers::{cd_solve_quadratic, frob_ball_solve, CoordConstraint, L1Weight, QuadSubproblem};

/// Frobenius norm of the starting dictionary.
pub const DICT_INIT_NORM: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct DictLearnProblem {
    /// `d × s`: one sample per column.
    pub x: Matrix,
    pub gamma: f64,
    /// Number of atoms `r`.
    pub rank: usize,
}

/// `(D, Y)` from the two block vectors of a solution.
pub fn dict_factors(p: &DictLearnProblem, x: &[Vector]) -> (Matrix, Matrix) {
    let (d, s) = p.x.shape();
    let r = p.rank;
    let dm = Matrix::from_fn(d, r, |i, k| x[0][i * r + k]);
    let ym = Matrix::from_fn(r, s, |k, j| x[1][k * s + j]);
    (dm, ym)
}

/// Starting dictionary: the first `r` columns of `X` scaled to Frobenius
/// norm [`DICT_INIT_NORM`], or a scaled identity pattern when those are all
/// zero. `D = 0, Y = 0` is a fixed point of the iteration, so it is avoided.
pub fn initial_dictionary(x: &Matrix, rank: usize) -> Matrix {
    let mut d = Matrix::from_fn(x.rows(), rank, |i, k| x[(i, k)]);
    let mut norm = d.frobenius_norm();
    if norm == 0.0 {
        d = Matrix::from_fn(x.rows(), rank, |i, k| if i % rank == k { 1.0 } else { 0.0 });
        norm = d.frobenius_norm();
    }
    d.scale(DICT_INIT_NORM / norm);
    d
}

struct DictModel {
    problem: DictLearnProblem,
    policy: ExecPolicy,
}

pub fn build_dictlearn_problem(p: &DictLearnProblem) -> Result<ProblemSpec> {
    build_dictlearn_problem_with(p, ExecPolicy::default())
}

pub fn build_dictlearn_problem_with(p: &DictLearnProblem, policy: ExecPolicy) -> Result<ProblemSpec> {
    let (d, s) = p.x.shape();
    if p.rank == 0 || p.rank > d.min(s) {
        return Err(Error::InvalidConfig(format!(
            "rank {} must be in 1..={}",
            p.rank,
            d.min(s)
        )));
    }
    if !(p.gamma >= 0.0 && p.gamma.is_finite()) {
        return Err(Error::InvalidConfig(format!("gamma = {}", p.gamma)));
    }
    let r = p.rank;
    let d0 = initial_dictionary(&p.x, r);
    ProblemSpec::new(
        vec![BlockSpec::stacked(d * r, 0), BlockSpec::stacked(r * s, d * r)],
        d * r + r * s,
        SmoothTerm::Zero,
        Arc::new(DictModel {
            problem: p.clone(),
            policy,
        }),
        vec![Vector::from(d0.into_vec()), Vector::zeros(r * s)],
    )
}

/// `X = D*Y*` with a unit-norm uniform dictionary and codes that keep each
/// entry with probability `density` (uniform on `[−1, 1]`).
pub fn gen_dictlearn(
    dim: usize,
    samples: usize,
    rank: usize,
    density: f64,
    seed: u64,
) -> Result<(Matrix, Matrix, Matrix)> {
    if dim == 0 || samples == 0 || rank == 0 || !(0.0..=1.0).contains(&density) {
        return Err(Error::InvalidConfig(format!(
            "dim = {dim}, samples = {samples}, rank = {rank}, density = {density}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dict = Matrix::from_fn(dim, rank, |_, _| rng.random_range(-1.0..=1.0));
    let norm = dict.frobenius_norm();
    dict.scale(1.0 / norm);
    let codes = Matrix::from_fn(rank, samples, |_, _| {
        if rng.random_bool(density) {
            rng.random_range(-1.0..=1.0)
        } else {
            0.0
        }
    });
    Ok((dict.matmul(&codes), dict, codes))
}

impl Model for DictModel {
    fn objective(&self, x: &[Vector]) -> f64 {
        let (d, y) = dict_factors(&self.problem, x);
        let dy = d.matmul_with(&y, self.policy);
        let fit: f64 = dy
            .as_slice()
            .iter()
            .zip(self.problem.x.as_slice())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        0.5 * fit + self.problem.gamma * x[1].iter().map(|v| v.abs()).sum::<f64>()
    }

    fn constraints(&self, x: &[Vector]) -> Vec<f64> {
        vec![x[0].norm2() - 1.0]
    }

    fn solve_block(&self, ctx: &BlockContext<'_>) -> Result<Vector> {
        let rho = ctx
            .penalty
            .prox_weight()
            .ok_or_else(|| Error::Unsupported("dictionary blocks need stacked coupling".into()))?;
        let center = match ctx.penalty.center() {
            Some(c) if rho > 0.0 => c,
            _ => {
                return Err(Error::Unsupported(
                    "dictionary learning needs a positive penalty".into(),
                ))
            }
        };
        let xm = &self.problem.x;
        let (dim, s) = xm.shape();
        let r = self.problem.rank;
        let (d, y) = dict_factors(&self.problem, ctx.x);
        match ctx.index {
            0 => {
                // ½‖DY − X‖² + (ρ/2)‖D − C‖² is half of the form the ball
                // solver minimizes when its penalty weight is doubled
                let g = y.matmul_t(&y);
                let rr = xm.matmul_t(&y);
                let c = Matrix::new(dim, r, center.to_vec())?;
                let sol = frob_ball_solve(&g, &rr, 2.0 * rho, &c, ctx.sub_tol)?;
                Ok(Vector::from(sol.d.into_vec()))
            }
            1 => {
                let mut p = d.gram();
                p.add_diagonal(rho);
                let dx = d.transpose().matmul_with(xm, self.policy); // r × s
                let factor = Cholesky::factor(&p, 0.0)?;
                let cons = vec![CoordConstraint::Free; r];
                let gamma = self.problem.gamma;
                let cols: Vec<Result<Vector>> = exec::map_range(s, self.policy, |c| {
                    let q: Vector = (0..r).map(|k| dx[(k, c)] + rho * center[k * s + c]).collect();
                    let start = factor.solve(&q);
                    let sub = QuadSubproblem::new(&p, &q, &cons, &start)
                        .with_l1(L1Weight::Uniform(gamma))
                        .with_tol(ctx.sub_tol);
                    cd_solve_quadratic(&sub).map(|s| s.x)
                });
                let mut out = Vector::zeros(r * s);
                for (c, col) in cols.into_iter().enumerate() {
                    let col = col?;
                    for k in 0..r {
                        out[k * s + c] = col[k];
                    }
                }
                Ok(out)
            }
            i => Err(Error::DimensionMismatch(format!("dictionary learning has no block {i}"))),
        }
    }
}
