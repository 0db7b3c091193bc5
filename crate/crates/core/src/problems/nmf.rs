//! Nonnegative matrix factorization `min ‖U − VW‖²_F s.t. V ≥ 0, W ≥ 0`,
//! split as `z = [vec V; vec W]`.
//!
//! With `W` fixed the rows of `V` are independent nonnegative least-squares
//! problems sharing one Hessian (and symmetrically for the columns of `W`),
//! so both block updates fan out across rows.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engine::{BlockContext, BlockSpec, Model, ProblemSpec, SmoothTerm};
use crate::error::{Error, Result};
use crate::exec::{self, ExecPolicy};
use crate::numerics::{Cholesky, Matrix, Vector};
use crate::subsolvers::{cd_solve_quadratic, CoordConstraint, QuadSubproblem};

/// Starting value of every factor entry. `(0, 0)` is a fixed point of the
/// alternating updates, so the start has to be strictly positive.
pub const NMF_INIT: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq)]
pub struct NmfProblem {
    pub u: Matrix,
    pub rank: usize,
}

/// `(V, W)` from the two block vectors of a solution.
pub fn nmf_factors(p: &NmfProblem, x: &[Vector]) -> (Matrix, Matrix) {
    let (m, n) = p.u.shape();
    let v = Matrix::from_fn(m, p.rank, |i, k| x[0][i * p.rank + k]);
    let w = Matrix::from_fn(p.rank, n, |k, j| x[1][k * n + j]);
    (v, w)
}

/// `‖U − VW‖_F / ‖U‖_F` (absolute error when `U = 0`).
pub fn nmf_relative_error(p: &NmfProblem, x: &[Vector]) -> f64 {
    let (v, w) = nmf_factors(p, x);
    let vw = v.matmul(&w);
    let err: f64 = vw
        .as_slice()
        .iter()
        .zip(p.u.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let norm = p.u.frobenius_norm();
    if norm > 0.0 {
        err / norm
    } else {
        err
    }
}

/// `(U, V*, W*)` with `U = V*W*` and both factors uniform on `[0, 1)`;
/// `V*` is drawn first, row by row.
pub fn gen_nmf(rows: usize, cols: usize, rank: usize, seed: u64) -> Result<(Matrix, Matrix, Matrix)> {
    if rows == 0 || cols == 0 || rank == 0 {
        return Err(Error::InvalidConfig(format!(
            "rows = {rows}, cols = {cols}, rank = {rank}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = Matrix::from_fn(rows, rank, |_, _| rng.random_range(0.0..1.0));
    let w = Matrix::from_fn(rank, cols, |_, _| rng.random_range(0.0..1.0));
    Ok((v.matmul(&w), v, w))
}

struct NmfModel {
    problem: NmfProblem,
    policy: ExecPolicy,
}

pub fn build_nmf_problem(p: &NmfProblem) -> Result<ProblemSpec> {
    build_nmf_problem_with(p, ExecPolicy::default())
}

pub fn build_nmf_problem_with(p: &NmfProblem, policy: ExecPolicy) -> Result<ProblemSpec> {
    if p.rank == 0 {
        return Err(Error::InvalidConfig("rank must be at least 1".into()));
    }
    if p.u.as_slice().iter().any(|v| *v < 0.0) {
        return Err(Error::InvalidConfig("NMF data must be nonnegative".into()));
    }
    let (m, n) = p.u.shape();
    let r = p.rank;
    ProblemSpec::new(
        vec![BlockSpec::stacked(m * r, 0), BlockSpec::stacked(r * n, m * r)],
        m * r + r * n,
        SmoothTerm::Zero,
        Arc::new(NmfModel {
            problem: p.clone(),
            policy,
        }),
        vec![Vector::filled(m * r, NMF_INIT), Vector::filled(r * n, NMF_INIT)],
    )
}

/// Solves `min ½xᵀPx − q_jᵀx, x ≥ 0` for every right-hand side `q_j`.
fn nonneg_rows(
    p: &Matrix,
    rhs: &[Vector],
    warm: &[&[f64]],
    tol: f64,
    policy: ExecPolicy,
) -> Result<Vec<Vector>> {
    let r = p.rows();
    let cons = vec![CoordConstraint::NonNegative; r];
    let factor = Cholesky::factor(p, 0.0).ok();
    exec::map_range(rhs.len(), policy, |j| {
        let start = match &factor {
            Some(f) => {
                let mut s = f.solve(&rhs[j]);
                s.iter_mut().for_each(|v| *v = v.max(0.0));
                s
            }
            None => Vector::from(warm[j]),
        };
        let sub = QuadSubproblem::new(p, &rhs[j], &cons, &start).with_tol(tol);
        cd_solve_quadratic(&sub).map(|s| s.x)
    })
    .into_iter()
    .collect()
}

impl Model for NmfModel {
    fn objective(&self, x: &[Vector]) -> f64 {
        let (v, w) = nmf_factors(&self.problem, x);
        let vw = v.matmul_with(&w, self.policy);
        vw.as_slice()
            .iter()
            .zip(self.problem.u.as_slice())
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    fn constraints(&self, x: &[Vector]) -> Vec<f64> {
        x.iter().flat_map(|b| b.iter().map(|v| -v)).collect()
    }

    fn solve_block(&self, ctx: &BlockContext<'_>) -> Result<Vector> {
        let rho = ctx
            .penalty
            .prox_weight()
            .ok_or_else(|| Error::Unsupported("NMF blocks need stacked coupling".into()))?;
        let center = ctx.penalty.center();
        let u = &self.problem.u;
        let (m, n) = u.shape();
        let r = self.problem.rank;
        let (v, w) = nmf_factors(&self.problem, ctx.x);
        match ctx.index {
            0 => {
                // rows of V: ‖u_j − v_j W‖² + (ρ/2)‖v_j − c_j‖²
                let mut p = w.matmul_t(&w);
                p.scale(2.0);
                p.add_diagonal(rho);
                let wu = w.matmul_t(u); // r × m
                let rhs: Vec<Vector> = (0..m)
                    .map(|j| {
                        (0..r)
                            .map(|k| 2.0 * wu[(k, j)] + center.map_or(0.0, |c| rho * c[j * r + k]))
                            .collect()
                    })
                    .collect();
                let warm: Vec<&[f64]> = (0..m).map(|j| &ctx.x[0][j * r..(j + 1) * r]).collect();
                let rows = nonneg_rows(&p, &rhs, &warm, ctx.sub_tol, self.policy)?;
                Ok(rows.into_iter().flat_map(Vector::into_inner).collect())
            }
            1 => {
                // columns of W: ‖u_c − V w_c‖² + (ρ/2)‖w_c − c_c‖²
                let mut p = v.gram();
                p.scale(2.0);
                p.add_diagonal(rho);
                let vu = v.transpose().matmul_with(u, self.policy); // r × n
                let rhs: Vec<Vector> = (0..n)
                    .map(|c| {
                        (0..r)
                            .map(|k| 2.0 * vu[(k, c)] + center.map_or(0.0, |ctr| rho * ctr[k * n + c]))
                            .collect()
                    })
                    .collect();
                let warm_cols: Vec<Vec<f64>> = (0..n)
                    .map(|c| (0..r).map(|k| ctx.x[1][k * n + c]).collect())
                    .collect();
                let warm: Vec<&[f64]> = warm_cols.iter().map(Vec::as_slice).collect();
                let cols = nonneg_rows(&p, &rhs, &warm, ctx.sub_tol, self.policy)?;
                let mut out = Vector::zeros(r * n);
                for (c, col) in cols.iter().enumerate() {
                    for k in 0..r {
                        out[k * n + c] = col[k];
                    }
                }
                Ok(out)
            }
            i => Err(Error::DimensionMismatch(format!("NMF has no block {i}"))),
        }
    }
}
