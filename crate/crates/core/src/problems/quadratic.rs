//! Models whose objective is a quadratic in the stacked blocks,
//! `½xᵀHx − bᵀx + c`, with product sign constraints between coordinates.
//!
//! This covers the biconvex regression, weakly-constrained multi-task
//! learning and signed-network learning: they differ only in the block
//! structure of `H` and in the edge set.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::engine::{BlockContext, Model};
use crate::error::{Error, Result};
use crate::numerics::{self, Cholesky, Matrix, Vector};
use crate::problems::multitask::Task;
use crate::problems::sign::SignConstraints;
use crate::subsolvers::{active_set_warm_start, cd_solve_quadratic, QuadSubproblem, ReducedFactorCache};

/// How the objective is evaluated. Block updates always use the quadratic
/// form; evaluating the original residuals keeps the reported objective
/// free of the cancellation in `½xᵀHx − bᵀx + c`.
#[derive(Debug, Clone)]
pub enum LossForm {
    Quadratic,
    /// `‖y − X·[x_1; …; x_n]‖² + ridge·Σ‖x_i‖²`
    Joint { x: Matrix, y: Vector, ridge: f64 },
    /// `Σ_i (1/n_i)‖X_i x_i − y_i‖² + ridge·‖x_i‖²`
    PerBlock { tasks: Vec<Task>, ridge: f64 },
}

/// Reduced factorizations kept per block Hessian.
const REDUCED_CACHE_CAPACITY: usize = 8;

/// Block Hessian (with its penalty), its factor, and factors of its
/// principal submatrices.
struct BlockFactor {
    p: Matrix,
    chol: Cholesky,
    reduced: Mutex<ReducedFactorCache>,
}

type FactorCache = Mutex<HashMap<(usize, u64, bool), Arc<BlockFactor>>>;

pub struct BlockQuadratic {
    dims: Vec<usize>,
    offsets: Vec<usize>,
    hessian: Vec<Vec<Option<Matrix>>>,
    linear: Vec<Vector>,
    constant: f64,
    signs: SignConstraints,
    loss: LossForm,
    factors: FactorCache,
}

impl std::fmt::Debug for BlockQuadratic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BlockQuadratic")
            .field("dims", &self.dims)
            .field("edges", &self.signs.edges().len())
            .finish_non_exhaustive()
    }
}

impl BlockQuadratic {
    /// Splits a full symmetric `H` (and `b`) according to `dims`. All-zero
    /// off-diagonal blocks are dropped.
    pub fn from_full(
        dims: Vec<usize>,
        h: &Matrix,
        b: &[f64],
        constant: f64,
        signs: SignConstraints,
        loss: LossForm,
    ) -> Result<Self> {
        let total: usize = dims.iter().sum();
        if h.shape() != (total, total) || b.len() != total {
            return Err(Error::DimensionMismatch(format!(
                "H {:?} and b of length {} for blocks {dims:?}",
                h.shape(),
                b.len()
            )));
        }
        let offsets = offsets_of(&dims);
        let n = dims.len();
        let mut hessian = vec![vec![None; n]; n];
        for i in 0..n {
            for j in 0..n {
                let blk = Matrix::from_fn(dims[i], dims[j], |r, c| {
                    h[(offsets[i] + r, offsets[j] + c)]
                });
                if i == j || blk.as_slice().iter().any(|v| *v != 0.0) {
                    hessian[i][j] = Some(blk);
                }
            }
        }
        let linear = (0..n)
            .map(|i| Vector::from(&b[offsets[i]..offsets[i] + dims[i]]))
            .collect();
        Ok(BlockQuadratic {
            dims,
            offsets,
            hessian,
            linear,
            constant,
            signs,
            loss,
            factors: Mutex::new(HashMap::new()),
        })
    }

    /// Block-diagonal `H`: the blocks are coupled only through constraints.
    pub fn block_diagonal(
        blocks: Vec<(Matrix, Vector)>,
        constant: f64,
        signs: SignConstraints,
        loss: LossForm,
    ) -> Result<Self> {
        let dims: Vec<usize> = blocks.iter().map(|(h, _)| h.rows()).collect();
        let n = blocks.len();
        let mut hessian = vec![vec![None; n]; n];
        let mut linear = Vec::with_capacity(n);
        for (i, (h, b)) in blocks.into_iter().enumerate() {
            if h.shape() != (dims[i], dims[i]) || b.len() != dims[i] {
                return Err(Error::DimensionMismatch(format!("block {i}")));
            }
            hessian[i][i] = Some(h);
            linear.push(b);
        }
        Ok(BlockQuadratic {
            offsets: offsets_of(&dims),
            dims,
            hessian,
            linear,
            constant,
            signs,
            loss,
            factors: Mutex::new(HashMap::new()),
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn signs(&self) -> &SignConstraints {
        &self.signs
    }

    /// `½xᵀHx − bᵀx + c`
    pub fn quadratic_value(&self, x: &[Vector]) -> f64 {
        let mut v = self.constant;
        for i in 0..self.dims.len() {
            let mut hx = Vector::zeros(self.dims[i]);
            for (j, hij) in self.hessian[i].iter().enumerate() {
                if let Some(h) = hij {
                    let t = h.matvec(&x[j]);
                    hx.iter_mut().zip(t.iter()).for_each(|(a, b)| *a += b);
                }
            }
            v += 0.5 * x[i].dot(&hx) - self.linear[i].dot(&x[i]);
        }
        v
    }

    /// `b_i − Σ_{j≠i} H_ij x_j`
    fn block_linear(&self, i: usize, x: &[Vector]) -> Vector {
        let mut q = self.linear[i].clone();
        for (j, hij) in self.hessian[i].iter().enumerate() {
            if j == i {
                continue;
            }
            if let Some(h) = hij {
                let t = h.matvec(&x[j]);
                q.iter_mut().zip(t.iter()).for_each(|(a, b)| *a -= b);
            }
        }
        q
    }

    fn factor(&self, ctx: &BlockContext<'_>) -> Result<Arc<BlockFactor>> {
        let i = ctx.index;
        let key = (i, ctx.penalty.rho().to_bits(), ctx.penalty.prox_weight().is_none());
        if let Some(f) = self.factors.lock().unwrap().get(&key) {
            return Ok(f.clone());
        }
        let mut p = self.hessian[i][i].clone().expect("diagonal block");
        ctx.penalty.add_hessian(&mut p);
        let chol = Cholesky::factor(&p, 0.0)?;
        let entry = Arc::new(BlockFactor {
            p,
            chol,
            reduced: Mutex::new(ReducedFactorCache::new(REDUCED_CACHE_CAPACITY)),
        });
        self.factors.lock().unwrap().insert(key, entry.clone());
        Ok(entry)
    }
}

fn offsets_of(dims: &[usize]) -> Vec<usize> {
    dims.iter()
        .scan(0, |acc, d| {
            let o = *acc;
            *acc += d;
            Some(o)
        })
        .collect()
}

impl Model for BlockQuadratic {
    fn objective(&self, x: &[Vector]) -> f64 {
        match &self.loss {
            LossForm::Quadratic => self.quadratic_value(x),
            LossForm::Joint { x: data, y, ridge } => {
                let theta: Vec<f64> = x.iter().flat_map(|v| v.iter().copied()).collect();
                let pred = data.matvec(&theta);
                numerics::dist_sq(y, &pred) + ridge * numerics::dot(&theta, &theta)
            }
            LossForm::PerBlock { tasks, ridge } => tasks
                .iter()
                .zip(x)
                .map(|(t, w)| {
                    let pred = t.x.matvec(w);
                    numerics::dist_sq(&t.y, &pred) / t.y.len() as f64 + ridge * w.dot(w)
                })
                .sum(),
        }
    }

    fn constraints(&self, x: &[Vector]) -> Vec<f64> {
        self.signs.values(x)
    }

    fn solve_block(&self, ctx: &BlockContext<'_>) -> Result<Vector> {
        let i = ctx.index;
        let factor = self.factor(ctx)?;
        let p = &factor.p;
        let mut q = self.block_linear(i, ctx.x);
        ctx.penalty.add_linear(&mut q);
        let cons = self.signs.coord_constraints(i, self.dims[i], ctx.x);
        let warm = {
            let mut reduced = factor.reduced.lock().unwrap();
            active_set_warm_start(p, &factor.chol, &q, &cons, Some(&ctx.x[i]), Some(&mut reduced))
        };
        let sub = QuadSubproblem::new(p, &q, &cons, &warm).with_tol(ctx.sub_tol);
        Ok(cd_solve_quadratic(&sub)?.x)
    }
}

impl BlockQuadratic {
    /// Offset of block `i` in the stacked vector.
    pub fn offset(&self, i: usize) -> usize {
        self.offsets[i]
    }
}
