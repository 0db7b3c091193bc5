//! Exact solvers for the convex block subproblems.
//!
//! Two shapes cover every block in this crate:
//!
//! * `minimize ½xᵀPx − qᵀx + Σ γ_j|x_j|` over a box of per-coordinate sign
//!   constraints, solved by cyclic coordinate descent ([`cd_solve_quadratic`]);
//! * `minimize ‖DY − X‖²_F + (ρ/2)‖D − C‖²_F` subject to `‖D‖_F ≤ 1`, solved
//!   through its secular equation ([`frob_ball_solve`]).
//!
//! Clamping the unconstrained minimizer of a coupled quadratic does not give
//! the constrained minimizer, so clamping is only used as a warm start.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics::{self, Cholesky, Matrix, Vector};

/// Default KKT tolerance for block subproblems.
pub const DEFAULT_SUB_TOL: f64 = 1e-10;
/// Default cap on coordinate descent sweeps.
pub const DEFAULT_MAX_SWEEPS: usize = 10_000;

/// Feasible set of a single coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CoordConstraint {
    #[default]
    Free,
    NonNegative,
    NonPositive,
    FixedZero,
}

impl CoordConstraint {
    /// Projects `t` onto the feasible set.
    pub fn clamp(self, t: f64) -> f64 {
        match self {
            CoordConstraint::Free => t,
            CoordConstraint::NonNegative => t.max(0.0),
            CoordConstraint::NonPositive => t.min(0.0),
            CoordConstraint::FixedZero => 0.0,
        }
    }

    pub fn contains(self, t: f64) -> bool {
        match self {
            CoordConstraint::Free => true,
            CoordConstraint::NonNegative => t >= 0.0,
            CoordConstraint::NonPositive => t <= 0.0,
            CoordConstraint::FixedZero => t == 0.0,
        }
    }

    /// Swaps the sign restriction (`NonNegative` ↔ `NonPositive`).
    pub fn flipped(self) -> Self {
        match self {
            CoordConstraint::NonNegative => CoordConstraint::NonPositive,
            CoordConstraint::NonPositive => CoordConstraint::NonNegative,
            other => other,
        }
    }

    /// Intersection of two feasible sets.
    pub fn intersect(self, other: Self) -> Self {
        use CoordConstraint::*;
        match (self, other) {
            (Free, c) | (c, Free) => c,
            (FixedZero, _) | (_, FixedZero) => FixedZero,
            (NonNegative, NonNegative) => NonNegative,
            (NonPositive, NonPositive) => NonPositive,
            (NonNegative, NonPositive) | (NonPositive, NonNegative) => FixedZero,
        }
    }

    fn allows_increase(self, t: f64) -> bool {
        match self {
            CoordConstraint::Free | CoordConstraint::NonNegative => true,
            CoordConstraint::NonPositive => t < 0.0,
            CoordConstraint::FixedZero => false,
        }
    }

    fn allows_decrease(self, t: f64) -> bool {
        match self {
            CoordConstraint::Free | CoordConstraint::NonPositive => true,
            CoordConstraint::NonNegative => t > 0.0,
            CoordConstraint::FixedZero => false,
        }
    }
}

/// Soft-thresholding `sign(b)·max(|b| − γ, 0)`.
pub fn soft_threshold(b: f64, gamma: f64) -> f64 {
    if b > gamma {
        b - gamma
    } else if b < -gamma {
        b + gamma
    } else {
        0.0
    }
}

/// Exact minimizer of `½a·t² − b·t + γ|t|` over the feasible set of `c`.
///
/// In one dimension the constrained minimizer of a convex function is the
/// clamp of the unconstrained one.
pub fn scalar_coordinate_min(a: f64, b: f64, gamma: f64, c: CoordConstraint) -> f64 {
    debug_assert!(a > 0.0 && gamma >= 0.0);
    if c == CoordConstraint::FixedZero {
        return 0.0;
    }
    let t = if gamma == 0.0 {
        b / a
    } else {
        soft_threshold(b, gamma) / a
    };
    c.clamp(t)
}

/// Per-coordinate ℓ1 weights.
#[derive(Debug, Clone, Copy, Default)]
pub enum L1Weight<'a> {
    #[default]
    Zero,
    Uniform(f64),
    PerCoord(&'a [f64]),
}

impl L1Weight<'_> {
    #[inline]
    fn at(&self, j: usize) -> f64 {
        match self {
            L1Weight::Zero => 0.0,
            L1Weight::Uniform(g) => *g,
            L1Weight::PerCoord(w) => w[j],
        }
    }
}

/// `minimize ½xᵀPx − qᵀx + Σ_j γ_j|x_j|` subject to per-coordinate
/// constraints, started from `x0`.
#[derive(Debug, Clone)]
pub struct QuadSubproblem<'a> {
    pub p: &'a Matrix,
    pub q: &'a [f64],
    pub l1_weight: L1Weight<'a>,
    pub constraints: &'a [CoordConstraint],
    pub x0: &'a [f64],
    pub tol: f64,
    pub max_sweeps: usize,
}

impl<'a> QuadSubproblem<'a> {
    pub fn new(
        p: &'a Matrix,
        q: &'a [f64],
        constraints: &'a [CoordConstraint],
        x0: &'a [f64],
    ) -> Self {
        QuadSubproblem {
            p,
            q,
            l1_weight: L1Weight::Zero,
            constraints,
            x0,
            tol: DEFAULT_SUB_TOL,
            max_sweeps: DEFAULT_MAX_SWEEPS,
        }
    }

    pub fn with_l1(mut self, w: L1Weight<'a>) -> Self {
        self.l1_weight = w;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_sweeps(mut self, sweeps: usize) -> Self {
        self.max_sweeps = sweeps;
        self
    }

    /// Objective value at `x` (no feasibility check).
    pub fn objective(&self, x: &[f64]) -> f64 {
        let px = self.p.matvec(x);
        let l1: f64 = (0..x.len()).map(|j| self.l1_weight.at(j) * x[j].abs()).sum();
        0.5 * numerics::dot(x, &px) - numerics::dot(self.q, x) + l1
    }

    fn validate(&self) -> Result<()> {
        let n = self.q.len();
        if self.p.rows() != n || self.p.cols() != n {
            return Err(Error::DimensionMismatch(format!(
                "P is {}x{} but q has {n} entries",
                self.p.rows(),
                self.p.cols()
            )));
        }
        if self.constraints.len() != n || self.x0.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} constraints and {} warm-start entries for dimension {n}",
                self.constraints.len(),
                self.x0.len()
            )));
        }
        if let L1Weight::PerCoord(w) = self.l1_weight {
            if w.len() != n {
                return Err(Error::DimensionMismatch("l1 weights".into()));
            }
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidConfig(format!("sub tolerance {}", self.tol)));
        }
        Ok(())
    }
}

/// Output of [`cd_solve_quadratic`].
#[derive(Debug, Clone)]
pub struct CdSolution {
    pub x: Vector,
    pub sweeps: usize,
    pub kkt_residual: f64,
}

/// Cyclic coordinate descent in ascending index order.
///
/// Stops once the worst directional derivative into the feasible set is at
/// least `−tol`, or below the rounding floor of the gradient evaluation.
/// The warm start is projected onto the constraints first; the returned
/// point never has a higher objective than that projection.
pub fn cd_solve_quadratic(sub: &QuadSubproblem<'_>) -> Result<CdSolution> {
    sub.validate()?;
    let n = sub.q.len();
    let p = sub.p;
    let cons = sub.constraints;

    let mut x: Vec<f64> = sub
        .x0
        .iter()
        .zip(cons)
        .map(|(v, c)| c.clamp(*v))
        .collect();
    for j in 0..n {
        if cons[j] != CoordConstraint::FixedZero && !(p[(j, j)] > 0.0) {
            return Err(Error::NotPositiveDefinite { dim: n });
        }
    }

    let mut grad = vec![0.0; n];
    let mut floor = vec![0.0; n];
    refresh_gradient(sub, &x, &mut grad, &mut floor);
    let mut residual = kkt_residual(sub, &x, &grad, &floor);
    let mut sweeps = 0;
    while residual > 0.0 {
        if sweeps == sub.max_sweeps {
            return Err(Error::MaxSweepsExceeded {
                sweeps,
                residual,
                last: Vector::from(x),
            });
        }
        sweeps += 1;
        for j in 0..n {
            let c = cons[j];
            if c == CoordConstraint::FixedZero {
                continue;
            }
            let a = p[(j, j)];
            let b = a * x[j] - grad[j];
            let t = scalar_coordinate_min(a, b, sub.l1_weight.at(j), c);
            let delta = t - x[j];
            if delta != 0.0 {
                x[j] = t;
                for (g, pk) in grad.iter_mut().zip(p.row(j)) {
                    *g += pk * delta;
                }
            }
        }
        refresh_gradient(sub, &x, &mut grad, &mut floor);
        residual = kkt_residual(sub, &x, &grad, &floor);
    }
    let kkt_residual = kkt_violation(sub, &x, &grad);
    log::trace!("coordinate descent: {sweeps} sweeps");
    Ok(CdSolution {
        x: Vector::from(x),
        sweeps,
        kkt_residual,
    })
}

/// Recomputes `∇ = Px − q` from scratch, plus a per-coordinate bound on
/// its rounding error.
fn refresh_gradient(sub: &QuadSubproblem<'_>, x: &[f64], grad: &mut [f64], floor: &mut [f64]) {
    for j in 0..x.len() {
        let row = sub.p.row(j);
        let mut s = 0.0;
        let mut mag = 0.0;
        for (pk, xk) in row.iter().zip(x) {
            let t = pk * xk;
            s += t;
            mag += t.abs();
        }
        grad[j] = s - sub.q[j];
        floor[j] = 32.0 * f64::EPSILON * (mag + sub.q[j].abs() + x.len() as f64 * f64::MIN_POSITIVE);
    }
}

/// Worst violation in excess of `max(tol, floor_j)`; zero means converged.
fn kkt_residual(sub: &QuadSubproblem<'_>, x: &[f64], grad: &[f64], floor: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for j in 0..x.len() {
        let v = coord_violation(sub.constraints[j], x[j], grad[j], sub.l1_weight.at(j));
        let allowed = sub.tol.max(floor[j]);
        if v > allowed {
            worst = worst.max(v);
        }
    }
    worst
}

fn kkt_violation(sub: &QuadSubproblem<'_>, x: &[f64], grad: &[f64]) -> f64 {
    (0..x.len())
        .map(|j| coord_violation(sub.constraints[j], x[j], grad[j], sub.l1_weight.at(j)))
        .fold(0.0, f64::max)
}

/// Negative part of the most negative feasible directional derivative.
fn coord_violation(c: CoordConstraint, t: f64, g: f64, gamma: f64) -> f64 {
    let mut v: f64 = 0.0;
    if c.allows_increase(t) {
        let d = g + if t < 0.0 { -gamma } else { gamma };
        v = v.max(-d);
    }
    if c.allows_decrease(t) {
        let d = -g + if t > 0.0 { -gamma } else { gamma };
        v = v.max(-d);
    }
    v
}

/// KKT residual of `x` for `sub` (the quantity `cd_solve_quadratic` drives
/// below its tolerance).
pub fn quad_kkt_residual(sub: &QuadSubproblem<'_>, x: &[f64]) -> f64 {
    let px = sub.p.matvec(x);
    let grad: Vec<f64> = px.iter().zip(sub.q).map(|(a, b)| a - b).collect();
    kkt_violation(sub, x, &grad)
}

/// Clamped unconstrained minimizer, the warm start used by the block solvers.
pub fn clamped_warm_start(factor: &Cholesky, q: &[f64], constraints: &[CoordConstraint]) -> Vector {
    let mut x = factor.solve(q);
    for (v, c) in x.iter_mut().zip(constraints) {
        *v = c.clamp(*v);
    }
    x
}

/// Rounds of [`active_set_warm_start`] before handing over to coordinate
/// descent.
const ACTIVE_SET_ROUNDS: usize = 25;

/// Cholesky factors of principal submatrices `P[F, F]` of one fixed `P`,
/// keyed by the index set `F`, least recently used first out.
///
/// Across outer iterations the free set of a block tends to settle, and
/// then every reduced solve is a cache hit. Factoring is deterministic, so
/// a hit returns exactly what a fresh factorization would.
#[derive(Debug)]
pub struct ReducedFactorCache {
    capacity: usize,
    entries: Vec<(Vec<usize>, Arc<Cholesky>)>,
}

impl ReducedFactorCache {
    pub fn new(capacity: usize) -> Self {
        ReducedFactorCache {
            capacity: capacity.max(1),
            entries: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn get_or_factor(&mut self, p: &Matrix, free: &[usize]) -> Result<Arc<Cholesky>> {
        if let Some(pos) = self.entries.iter().position(|(k, _)| k == free) {
            let hit = self.entries.remove(pos);
            let f = hit.1.clone();
            self.entries.push(hit);
            return Ok(f);
        }
        let f = Arc::new(reduced_factor(p, free)?);
        if self.entries.len() == self.capacity {
            self.entries.remove(0);
        }
        self.entries.push((free.to_vec(), f.clone()));
        Ok(f)
    }
}

fn reduced_factor(p: &Matrix, free: &[usize]) -> Result<Cholesky> {
    let pf = Matrix::from_fn(free.len(), free.len(), |a, b| p[(free[a], free[b])]);
    Cholesky::factor(&pf, 0.0)
}

/// Warm start for sign-constrained quadratics without an l1 term.
///
/// Alternates between guessing the set of coordinates held at zero (from
/// the current sign and gradient) and solving the reduced linear system on
/// the rest, stepping toward that solution as far as stays feasible. Every
/// accepted point is feasible and lowers the objective, so the result is
/// never worse than the clamped unconstrained minimizer it starts from.
/// On well-posed problems it usually lands on the exact minimizer, leaving
/// coordinate descent only the certification.
///
/// `hint` (typically the previous iterate of the same block) is clamped
/// and used as the start instead when it has the lower objective. Its
/// support is usually close to the final one, which saves rounds.
/// `cache`, if given, must only ever have been used with this same `p`.
pub fn active_set_warm_start(
    p: &Matrix,
    factor: &Cholesky,
    q: &[f64],
    constraints: &[CoordConstraint],
    hint: Option<&[f64]>,
    mut cache: Option<&mut ReducedFactorCache>,
) -> Vector {
    let n = q.len();
    let mut x = clamped_warm_start(factor, q, constraints);
    if constraints.iter().all(|c| *c == CoordConstraint::Free) {
        return x;
    }
    let objective = |x: &[f64]| 0.5 * numerics::dot(x, &p.matvec(x)) - numerics::dot(q, x);
    let mut value = objective(&x);
    if let Some(h) = hint.filter(|h| h.len() == n) {
        let start: Vector = h.iter().zip(constraints).map(|(v, c)| c.clamp(*v)).collect();
        let v = objective(&start);
        if v < value {
            x = start;
            value = v;
        }
    }
    let mut prev_free: Option<Vec<usize>> = None;
    for round in 0..ACTIVE_SET_ROUNDS {
        log::trace!("active set round {round}");
        let grad: Vec<f64> = p.matvec(&x).iter().zip(q).map(|(a, b)| a - b).collect();
        let free: Vec<usize> = (0..n)
            .filter(|&j| {
                let c = constraints[j];
                match c {
                    CoordConstraint::FixedZero => false,
                    CoordConstraint::Free => true,
                    _ if x[j] != 0.0 => true,
                    // at the bound: release only if the gradient points inward
                    CoordConstraint::NonNegative => grad[j] < 0.0,
                    CoordConstraint::NonPositive => grad[j] > 0.0,
                }
            })
            .collect();
        if prev_free.as_ref() == Some(&free) || free.is_empty() {
            break;
        }
        let qf: Vec<f64> = free.iter().map(|&j| q[j]).collect();
        let reduced = match cache.as_deref_mut() {
            Some(c) => c.get_or_factor(p, &free),
            None => reduced_factor(p, &free).map(Arc::new),
        };
        let Ok(reduced) = reduced else {
            break;
        };
        let sol = reduced.solve(&qf);
        let mut target = vec![0.0; n];
        for (k, &j) in free.iter().enumerate() {
            target[j] = sol[k];
        }
        // longest feasible step along target − x
        let mut alpha: f64 = 1.0;
        for j in 0..n {
            let d = target[j] - x[j];
            let blocked = match constraints[j] {
                CoordConstraint::NonNegative => d < 0.0 && target[j] < 0.0,
                CoordConstraint::NonPositive => d > 0.0 && target[j] > 0.0,
                _ => false,
            };
            if blocked {
                alpha = alpha.min(-x[j] / d);
            }
        }
        let stepped: Vec<f64> = (0..n)
            .map(|j| constraints[j].clamp(x[j] + alpha * (target[j] - x[j])))
            .collect();
        let clamped: Vec<f64> = (0..n).map(|j| constraints[j].clamp(target[j])).collect();
        let (vs, vc) = (objective(&stepped), objective(&clamped));
        let (cand, v) = if vc < vs { (clamped, vc) } else { (stepped, vs) };
        if !(v < value) {
            break;
        }
        x = Vector::from(cand);
        value = v;
        prev_free = Some(free);
    }
    x
}

/// Output of [`frob_ball_solve`].
#[derive(Debug, Clone)]
pub struct FrobBallSolution {
    pub d: Matrix,
    /// Multiplier of the norm constraint; zero when it is inactive.
    pub mu: f64,
}

const MAX_DOUBLINGS: usize = 200;

/// Minimizes `‖DY − X‖²_F + (ρ/2)‖D − C‖²_F` subject to `‖D‖_F ≤ 1`, with
/// `G = YYᵀ` and `R = XYᵀ` precomputed.
///
/// Stationarity reads `D(2G + (ρ + 2μ)I) = 2R + ρC`; the multiplier `μ` is
/// found by bisection on `‖D(μ)‖_F = 1`. The returned point is always
/// inside the ball and `μ·(1 − ‖D‖_F) ≤ tol`.
pub fn frob_ball_solve(
    g: &Matrix,
    r: &Matrix,
    rho: f64,
    c: &Matrix,
    tol: f64,
) -> Result<FrobBallSolution> {
    let k = g.rows();
    if !g.is_square() || r.cols() != k || c.shape() != r.shape() {
        return Err(Error::DimensionMismatch(format!(
            "G {:?}, R {:?}, C {:?}",
            g.shape(),
            r.shape(),
            c.shape()
        )));
    }
    if !(rho > 0.0) || !(tol > 0.0) {
        return Err(Error::InvalidConfig(format!("rho {rho}, tol {tol}")));
    }
    // rhs = 2R + ρC; rows of D are independent systems with the same matrix
    let mut rhs = r.clone();
    rhs.scale(2.0);
    for (o, cv) in rhs.as_mut_slice().iter_mut().zip(c.as_slice()) {
        *o += rho * cv;
    }
    let solve_at = |mu: f64| -> Result<Matrix> {
        let mut m = g.clone();
        m.scale(2.0);
        m.add_diagonal(rho + 2.0 * mu);
        let f = Cholesky::factor(&m, 0.0)?;
        let mut d = Matrix::zeros(rhs.rows(), k);
        for i in 0..rhs.rows() {
            let row = f.solve(rhs.row(i));
            d.row_mut(i).copy_from_slice(&row);
        }
        Ok(d)
    };

    let d0 = solve_at(0.0)?;
    if d0.frobenius_norm() <= 1.0 {
        return Ok(FrobBallSolution { d: d0, mu: 0.0 });
    }

    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut d_hi = solve_at(hi)?;
    let mut doublings = 0;
    while d_hi.frobenius_norm() > 1.0 {
        if doublings == MAX_DOUBLINGS {
            return Err(Error::BisectionFailed { doublings });
        }
        lo = hi;
        hi *= 2.0;
        d_hi = solve_at(hi)?;
        doublings += 1;
    }
    // Invariant: ‖D(lo)‖ > 1 ≥ ‖D(hi)‖.
    for _ in 0..400 {
        let slack = 1.0 - d_hi.frobenius_norm();
        if hi * slack <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let d_mid = solve_at(mid)?;
        if d_mid.frobenius_norm() > 1.0 {
            lo = mid;
        } else {
            hi = mid;
            d_hi = d_mid;
        }
    }
    Ok(FrobBallSolution { d: d_hi, mu: hi })
}
