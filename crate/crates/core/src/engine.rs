//! The block-splitting ADMM loop for
//!
//! ```text
//! minimize  f(x_1..x_n) + Σ g_i(x_i) + h(z)
//! s.t.      l(x_1..x_n) ≤ 0,   Σ A_i x_i − z = 0
//! ```
//!
//! Each iteration updates the blocks in ascending order (Gauss–Seidel), each
//! one exactly minimizing the augmented Lagrangian with the inequality
//! constraints restricted to that block, then minimizes over `z`, then takes
//! a dual ascent step of size `ρ`.

use std::sync::Arc;
use std::time::Instant;

use crate::diagnostics::{self, DescentConstants, IterationRecord, Violation};
use crate::error::{Error, Result};
use crate::numerics::{self, Cholesky, Matrix, Vector};
use crate::subsolvers::DEFAULT_SUB_TOL;

/// How block `x_i` enters `z`.
#[derive(Debug, Clone)]
pub enum Coupling {
    /// `A_i` places `x_i` at `z[offset..offset + dim]`. Never materialized.
    Stack { offset: usize },
    /// Explicit `A_i` (q × dim) together with its Gram matrix `A_iᵀA_i`.
    Dense { a: Matrix, gram: Matrix },
}

impl Coupling {
    /// Dense coupling; `A` must have full column rank.
    pub fn dense(a: Matrix) -> Result<Self> {
        let gram = a.gram();
        // a factorization that needed jitter means AᵀA is singular
        let full_rank = Cholesky::factor(&gram, 0.0).is_ok_and(|f| f.jitter() == 0.0);
        if !full_rank {
            return Err(Error::InvalidConfig(
                "coupling matrix must have full column rank".into(),
            ));
        }
        Ok(Coupling::Dense { a, gram })
    }
}

#[derive(Debug, Clone)]
pub struct BlockSpec {
    pub dim: usize,
    pub coupling: Coupling,
}

impl BlockSpec {
    pub fn stacked(dim: usize, offset: usize) -> Self {
        BlockSpec {
            dim,
            coupling: Coupling::Stack { offset },
        }
    }

    /// Adds `A_i x` into `out`.
    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.coupling {
            Coupling::Stack { offset } => {
                for (o, v) in out[*offset..*offset + self.dim].iter_mut().zip(x) {
                    *o += v;
                }
            }
            Coupling::Dense { a, .. } => {
                for (o, v) in out.iter_mut().zip(a.matvec(x).iter()) {
                    *o += v;
                }
            }
        }
    }

    /// `‖A_i d‖²`
    pub fn image_norm_sq(&self, d: &[f64]) -> f64 {
        match &self.coupling {
            Coupling::Stack { .. } => numerics::dot(d, d),
            Coupling::Dense { a, .. } => {
                let ad = a.matvec(d);
                ad.dot(&ad)
            }
        }
    }
}

/// The quadratic penalty a block subproblem sees:
/// `yᵀA_i x_i + (ρ/2)‖A_i x_i + Σ_{j≠i} A_j x_j − z‖² = (ρ/2)‖A_i x_i − t‖² + const`.
#[derive(Debug, Clone)]
pub struct Penalty<'a> {
    rho: f64,
    kind: PenaltyKind<'a>,
}

#[derive(Debug, Clone)]
enum PenaltyKind<'a> {
    None,
    /// `A_i` is a selector; `center = t` restricted to the block.
    Prox { center: Vector },
    Dense { a: &'a Matrix, gram: &'a Matrix, target: Vector },
}

impl<'a> Penalty<'a> {
    /// No penalty at all: the block subproblem of the unsplit problem.
    pub fn none() -> Self {
        Penalty {
            rho: 0.0,
            kind: PenaltyKind::None,
        }
    }

    /// `(ρ/2)‖x − center‖²`
    pub fn prox(rho: f64, center: Vector) -> Self {
        Penalty {
            rho,
            kind: PenaltyKind::Prox { center },
        }
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// The prox center, when the block is stack-coupled.
    pub fn center(&self) -> Option<&[f64]> {
        match &self.kind {
            PenaltyKind::Prox { center } => Some(center),
            _ => None,
        }
    }

    /// Weight of the identity in the penalty Hessian: `ρ` for a prox
    /// penalty, zero for none, `None` for a dense coupling.
    pub fn prox_weight(&self) -> Option<f64> {
        match &self.kind {
            PenaltyKind::None => Some(0.0),
            PenaltyKind::Prox { .. } => Some(self.rho),
            PenaltyKind::Dense { .. } => None,
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self.kind, PenaltyKind::None)
    }

    /// Adds the penalty to a quadratic `½xᵀPx − qᵀx`.
    pub fn add_to(&self, p: &mut Matrix, q: &mut [f64]) {
        self.add_hessian(p);
        self.add_linear(q);
    }

    /// The quadratic part: `ρI` or `ρAᵀA`. Depends only on `ρ` and the
    /// block, so callers may cache factorizations keyed on `ρ`.
    pub fn add_hessian(&self, p: &mut Matrix) {
        match &self.kind {
            PenaltyKind::None => {}
            PenaltyKind::Prox { .. } => p.add_diagonal(self.rho),
            PenaltyKind::Dense { gram, .. } => {
                for (pv, g) in p.as_mut_slice().iter_mut().zip(gram.as_slice()) {
                    *pv += self.rho * g;
                }
            }
        }
    }

    /// The linear part: `ρ·center` or `ρAᵀt`.
    pub fn add_linear(&self, q: &mut [f64]) {
        match &self.kind {
            PenaltyKind::None => {}
            PenaltyKind::Prox { center } => {
                for (qi, c) in q.iter_mut().zip(center.iter()) {
                    *qi += self.rho * c;
                }
            }
            PenaltyKind::Dense { a, target, .. } => {
                let at = a.matvec_t(target);
                for (qi, v) in q.iter_mut().zip(at.iter()) {
                    *qi += self.rho * v;
                }
            }
        }
    }

    /// Penalty value at `x` up to the additive constant.
    pub fn value(&self, x: &[f64]) -> f64 {
        match &self.kind {
            PenaltyKind::None => 0.0,
            PenaltyKind::Prox { center } => 0.5 * self.rho * numerics::dist_sq(x, center),
            PenaltyKind::Dense { a, target, .. } => {
                0.5 * self.rho * numerics::dist_sq(&a.matvec(x), target)
            }
        }
    }
}

/// What a block solver gets to see.
#[derive(Debug)]
pub struct BlockContext<'a> {
    pub index: usize,
    /// Current blocks: `j < index` already updated this sweep, `j ≥ index`
    /// from the previous iteration. `x[index]` is the warm start.
    pub x: &'a [Vector],
    pub penalty: Penalty<'a>,
    pub sub_tol: f64,
}

/// The application-specific part of a problem.
pub trait Model: Send + Sync {
    /// `f(x_1..x_n) + Σ g_i(x_i)`; `h` is handled by [`SmoothTerm`].
    fn objective(&self, x: &[Vector]) -> f64;

    /// Values of `l(x_1..x_n)`; feasible iff all are `≤ 0`.
    fn constraints(&self, x: &[Vector]) -> Vec<f64>;

    /// Exact minimizer over block `ctx.index` of
    /// `f + g_i + penalty` subject to the constraints with the other
    /// blocks held at `ctx.x`.
    fn solve_block(&self, ctx: &BlockContext<'_>) -> Result<Vector>;
}

/// A user-supplied smooth `h`.
pub trait SmoothFunction: Send + Sync {
    fn value(&self, z: &[f64]) -> f64;
    fn gradient(&self, z: &[f64]) -> Vector;
    /// Lipschitz constant of the gradient.
    fn lipschitz(&self) -> f64;
    /// `argmin_z h(z) − yᵀz + (ρ/2)‖s − z‖²`
    fn solve_z(&self, s: &[f64], y: &[f64], rho: f64) -> Result<Vector>;
}

/// The smooth term `h(z)`.
#[derive(Clone)]
pub enum SmoothTerm {
    Zero,
    /// `h(z) = ½zᵀQz + cᵀz`
    Quadratic { q: Matrix, c: Vector, lipschitz: f64 },
    Custom(Arc<dyn SmoothFunction>),
}

impl std::fmt::Debug for SmoothTerm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SmoothTerm::Zero => write!(f, "Zero"),
            SmoothTerm::Quadratic { lipschitz, .. } => {
                write!(f, "Quadratic {{ H: {lipschitz} }}")
            }
            SmoothTerm::Custom(c) => write!(f, "Custom {{ H: {} }}", c.lipschitz()),
        }
    }
}

impl SmoothTerm {
    /// Quadratic term; `Q` must be symmetric positive semidefinite.
    /// `H` is its largest eigenvalue.
    pub fn quadratic(q: Matrix, c: Vector) -> Result<Self> {
        if !q.is_square() || q.rows() != c.len() {
            return Err(Error::DimensionMismatch("quadratic smooth term".into()));
        }
        let asym = q.asymmetry();
        if asym > 1e-10 {
            return Err(Error::NotSymmetric { asymmetry: asym });
        }
        // PSD check: Q + εI must factor
        let eps = 1e-12 * (1.0 + q.trace().abs());
        Cholesky::factor(&q, eps)?;
        let lipschitz = numerics::largest_eigenvalue(&q, 1e-6);
        Ok(SmoothTerm::Quadratic { q, c, lipschitz })
    }

    pub fn lipschitz(&self) -> f64 {
        match self {
            SmoothTerm::Zero => 0.0,
            SmoothTerm::Quadratic { lipschitz, .. } => *lipschitz,
            SmoothTerm::Custom(c) => c.lipschitz(),
        }
    }

    pub fn value(&self, z: &[f64]) -> f64 {
        match self {
            SmoothTerm::Zero => 0.0,
            SmoothTerm::Quadratic { q, c, .. } => {
                0.5 * numerics::dot(z, &q.matvec(z)) + c.dot(z)
            }
            SmoothTerm::Custom(h) => h.value(z),
        }
    }

    pub fn gradient(&self, z: &[f64]) -> Vector {
        match self {
            SmoothTerm::Zero => Vector::zeros(z.len()),
            SmoothTerm::Quadratic { q, c, .. } => {
                let mut g = q.matvec(z);
                g.iter_mut().zip(c.iter()).for_each(|(a, b)| *a += b);
                g
            }
            SmoothTerm::Custom(h) => h.gradient(z),
        }
    }
}

/// A complete problem instance. Immutable and shareable across solves.
#[derive(Clone)]
pub struct ProblemSpec {
    pub blocks: Vec<BlockSpec>,
    pub z_dim: usize,
    pub smooth: SmoothTerm,
    pub model: Arc<dyn Model>,
    pub initial_point: Vec<Vector>,
}

impl std::fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("blocks", &self.blocks)
            .field("z_dim", &self.z_dim)
            .field("smooth", &self.smooth)
            .finish_non_exhaustive()
    }
}

impl ProblemSpec {
    /// Validates block layout and the feasibility of the initial point.
    pub fn new(
        blocks: Vec<BlockSpec>,
        z_dim: usize,
        smooth: SmoothTerm,
        model: Arc<dyn Model>,
        initial_point: Vec<Vector>,
    ) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidConfig("no blocks".into()));
        }
        if initial_point.len() != blocks.len()
            || blocks.iter().zip(&initial_point).any(|(b, x)| b.dim != x.len())
        {
            return Err(Error::DimensionMismatch(
                "initial point does not match block dimensions".into(),
            ));
        }
        let mut covered = vec![0usize; z_dim];
        let mut all_stacked = true;
        for (i, b) in blocks.iter().enumerate() {
            match &b.coupling {
                Coupling::Stack { offset } => {
                    if offset + b.dim > z_dim {
                        return Err(Error::DimensionMismatch(format!(
                            "block {i} overruns z (offset {offset}, dim {})",
                            b.dim
                        )));
                    }
                    covered[*offset..offset + b.dim]
                        .iter_mut()
                        .for_each(|c| *c += 1);
                }
                Coupling::Dense { a, .. } => {
                    all_stacked = false;
                    if a.shape() != (z_dim, b.dim) {
                        return Err(Error::DimensionMismatch(format!(
                            "block {i} coupling is {:?}, expected ({z_dim}, {})",
                            a.shape(),
                            b.dim
                        )));
                    }
                }
            }
        }
        if all_stacked && covered.iter().any(|c| *c != 1) {
            return Err(Error::InvalidConfig(
                "stacked blocks must partition z".into(),
            ));
        }
        if let SmoothTerm::Quadratic { q, .. } = &smooth {
            if q.rows() != z_dim {
                return Err(Error::DimensionMismatch("smooth term size".into()));
            }
        }
        let spec = ProblemSpec {
            blocks,
            z_dim,
            smooth,
            model,
            initial_point,
        };
        let violation = diagnostics::max_violation(&spec, &spec.initial_point);
        if violation > diagnostics::FEASIBILITY_SLACK {
            return Err(Error::InfeasibleStart { violation });
        }
        Ok(spec)
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// `f + Σg_i + h(z)`
    pub fn objective(&self, x: &[Vector], z: &[f64]) -> f64 {
        self.model.objective(x) + self.smooth.value(z)
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub rho: f64,
    pub max_iter: usize,
    /// Threshold on the squared step norm; the primal residual must also
    /// fall below its square root.
    pub tol: f64,
    pub sub_tol: f64,
    pub diagnostics: bool,
    /// Carried through to reports; the engine itself is deterministic.
    pub seed: u64,
    /// When false every `wall_time_ms` is recorded as zero, which makes
    /// histories bit-reproducible.
    pub record_timing: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            rho: 0.1,
            max_iter: 1000,
            tol: 1e-10,
            sub_tol: DEFAULT_SUB_TOL,
            diagnostics: true,
            seed: 0,
            record_timing: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::InvalidConfig(format!("rho must be positive, got {}", self.rho)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidConfig(format!("tol must be positive, got {}", self.tol)));
        }
        if !(self.sub_tol > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "sub_tol must be positive, got {}",
                self.sub_tol
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub x: Vec<Vector>,
    pub z: Vector,
    pub y: Vector,
    pub k: usize,
}

impl SolverState {
    /// `x⁰` from the spec, `z⁰ = ΣA_i x_i⁰`, `y⁰ = ∇h(z⁰)` (zero when `h = 0`).
    pub fn initial(spec: &ProblemSpec) -> Self {
        let x = spec.initial_point.clone();
        let z = coupled_sum(spec, &x);
        let y = spec.smooth.gradient(&z);
        SolverState { x, z, y, k: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolveStatus {
    Converged,
    MaxIterReached,
    CertificateViolation(Violation),
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub final_state: SolverState,
    pub history: Vec<IterationRecord>,
    pub status: SolveStatus,
    /// Augmented Lagrangian at the starting point.
    pub initial_lagrangian: f64,
    pub constants: DescentConstants,
}

impl SolveReport {
    pub fn iterations(&self) -> usize {
        self.history.len()
    }

    pub fn final_objective(&self, spec: &ProblemSpec) -> f64 {
        spec.objective(&self.final_state.x, &self.final_state.z)
    }
}

/// `Σ A_i x_i`
pub fn coupled_sum(spec: &ProblemSpec, x: &[Vector]) -> Vector {
    let mut s = Vector::zeros(spec.z_dim);
    for (b, xi) in spec.blocks.iter().zip(x) {
        b.apply_into(xi, &mut s);
    }
    s
}

/// `‖ΣA_i x_i − z‖₂`
pub fn primal_residual(spec: &ProblemSpec, state: &SolverState) -> f64 {
    let s = coupled_sum(spec, &state.x);
    numerics::dist_sq(&s, &state.z).sqrt()
}

/// One Gauss–Seidel pass over the blocks in ascending order.
pub fn sweep_blocks(spec: &ProblemSpec, state: &mut SolverState, cfg: &SolverConfig) -> Result<()> {
    let rho = cfg.rho;
    let dense = spec
        .blocks
        .iter()
        .any(|b| matches!(b.coupling, Coupling::Dense { .. }));
    // running ΣA_j x_j, only needed when blocks overlap in z
    let mut s = if dense {
        coupled_sum(spec, &state.x)
    } else {
        Vector::default()
    };
    for i in 0..spec.blocks.len() {
        let block = &spec.blocks[i];
        let penalty = match &block.coupling {
            Coupling::Stack { offset } => {
                let range = *offset..offset + block.dim;
                let center: Vector = state.z[range.clone()]
                    .iter()
                    .zip(&state.y[range.clone()])
                    .zip(range.clone())
                    .map(|((z, y), idx)| {
                        // other stacked blocks never touch this range, but a
                        // dense block might
                        let others = if dense {
                            s[idx] - state.x[i][idx - offset]
                        } else {
                            0.0
                        };
                        z - y / rho - others
                    })
                    .collect();
                Penalty::prox(rho, center)
            }
            Coupling::Dense { a, gram } => {
                let own = a.matvec(&state.x[i]);
                let target: Vector = (0..spec.z_dim)
                    .map(|r| state.z[r] - state.y[r] / rho - (s[r] - own[r]))
                    .collect();
                Penalty {
                    rho,
                    kind: PenaltyKind::Dense { a, gram, target },
                }
            }
        };
        let ctx = BlockContext {
            index: i,
            x: &state.x,
            penalty,
            sub_tol: cfg.sub_tol,
        };
        let new_xi = spec.model.solve_block(&ctx).map_err(|e| e.in_block(i))?;
        if new_xi.len() != block.dim {
            return Err(Error::DimensionMismatch(format!(
                "block solver returned {} entries, expected {}",
                new_xi.len(),
                block.dim
            ))
            .in_block(i));
        }
        if dense {
            let delta: Vec<f64> = new_xi.iter().zip(state.x[i].iter()).map(|(a, b)| a - b).collect();
            block.apply_into(&delta, &mut s);
        }
        state.x[i] = new_xi;
    }
    Ok(())
}

/// `z ← argmin h(z) − yᵀz + (ρ/2)‖s − z‖²` where `s = ΣA_i x_i`.
pub fn update_z(spec: &ProblemSpec, state: &mut SolverState, rho: f64, s: &[f64]) -> Result<()> {
    state.z = match &spec.smooth {
        SmoothTerm::Zero => s.iter().zip(state.y.iter()).map(|(a, y)| a + y / rho).collect(),
        SmoothTerm::Quadratic { q, c, .. } => {
            // (Q + ρI) z = ρs + y − c
            let rhs: Vec<f64> = s
                .iter()
                .zip(state.y.iter())
                .zip(c.iter())
                .map(|((a, y), c)| rho * a + y - c)
                .collect();
            numerics::solve_spd(q, &rhs, rho)?
        }
        SmoothTerm::Custom(h) => h.solve_z(s, &state.y, rho)?,
    };
    Ok(())
}

/// `y ← y + ρ(s − z)`, `k ← k + 1`.
pub fn update_dual(state: &mut SolverState, rho: f64, s: &[f64]) {
    for ((y, a), z) in state.y.iter_mut().zip(s).zip(state.z.iter()) {
        *y += rho * (a - z);
    }
    state.k += 1;
}

/// Step norm below `tol` and primal residual below `√tol`.
pub fn has_converged(history: &[IterationRecord], tol: f64) -> bool {
    history
        .last()
        .is_some_and(|r| r.step_norm_sq <= tol && r.primal_residual <= tol.sqrt())
}

/// Runs the iteration until convergence, `max_iter`, or (with diagnostics
/// on) the first failed certificate.
pub fn run(spec: &ProblemSpec, cfg: &SolverConfig) -> Result<SolveReport> {
    cfg.validate()?;
    let lipschitz = spec.smooth.lipschitz();
    let constants = if cfg.diagnostics {
        diagnostics::descent_constants(lipschitz, cfg.rho)?
    } else {
        DescentConstants::unchecked(lipschitz, cfg.rho)
    };
    let rho = cfg.rho;
    let started = Instant::now();

    let mut state = SolverState::initial(spec);
    let s0 = coupled_sum(spec, &state.x);
    let initial_lagrangian = diagnostics::lagrangian_from_parts(spec, &state, &s0, rho);
    let mut l_prev = initial_lagrangian;
    let mut u: Option<f64> = None;
    let mut history = Vec::with_capacity(cfg.max_iter.min(100_000));
    let mut status = SolveStatus::MaxIterReached;

    for _ in 0..cfg.max_iter {
        let x_prev = state.x.clone();
        let z_prev = state.z.clone();
        let y_prev = state.y.clone();

        sweep_blocks(spec, &mut state, cfg)?;
        let s = coupled_sum(spec, &state.x);
        update_z(spec, &mut state, rho, &s)?;
        update_dual(&mut state, rho, &s);

        let z_step_sq = numerics::dist_sq(&state.z, &z_prev);
        let x_step_sq: f64 = spec
            .blocks
            .iter()
            .zip(state.x.iter().zip(&x_prev))
            .map(|(b, (new, old))| {
                let d: Vec<f64> = new.iter().zip(old.iter()).map(|(a, b)| a - b).collect();
                b.image_norm_sq(&d)
            })
            .sum();
        let step_norm_sq = z_step_sq + x_step_sq;
        let max_violation = diagnostics::max_violation(spec, &state.x);
        let lagrangian = if max_violation > diagnostics::FEASIBILITY_SLACK {
            f64::INFINITY
        } else {
            diagnostics::lagrangian_from_parts(spec, &state, &s, rho)
        };
        let grad_h = spec.smooth.gradient(&state.z);
        let dual_identity_err = state
            .y
            .iter()
            .zip(grad_h.iter())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let u_k = diagnostics::update_u(u, step_norm_sq);
        u = Some(u_k);
        let record = IterationRecord {
            k: state.k,
            objective: spec.objective(&state.x, &state.z),
            lagrangian,
            primal_residual: numerics::dist_sq(&s, &state.z).sqrt(),
            step_norm_sq,
            u_k,
            descent_lhs: l_prev - lagrangian,
            descent_rhs: constants.c2 * step_norm_sq,
            dual_identity_err,
            wall_time_ms: if cfg.record_timing {
                started.elapsed().as_secs_f64() * 1e3
            } else {
                0.0
            },
            max_violation,
            dual_step_norm: numerics::dist_sq(&state.y, &y_prev).sqrt(),
            z_step_norm: z_step_sq.sqrt(),
        };
        log::debug!(
            "k={} L={:.12e} step={:.3e} r={:.3e}",
            record.k,
            record.lagrangian,
            record.step_norm_sq,
            record.primal_residual
        );
        let violation = if cfg.diagnostics {
            diagnostics::certify(&record, l_prev, &constants, &state)
        } else {
            None
        };
        l_prev = lagrangian;
        history.push(record);
        if let Some(v) = violation {
            log::warn!("certificate violated: {v}");
            status = SolveStatus::CertificateViolation(v);
            break;
        }
        if has_converged(&history, cfg.tol) {
            status = SolveStatus::Converged;
            break;
        }
    }
    log::info!(
        "solve finished after {} iterations: {:?}",
        history.len(),
        status
    );
    Ok(SolveReport {
        final_state: state,
        history,
        status,
        initial_lagrangian,
        constants,
    })
}
