//! Runtime convergence certificates.
//!
//! With `ρ > 2H` and exact block solves the iteration guarantees that the
//! augmented Lagrangian `L_ρ` decreases by at least `C₂` times the squared
//! step norm each iteration, that iterates stay bounded, and that the
//! running minimum `u_k` of the step norms decays like `o(1/k)`. None of
//! that can be proved at runtime, but every one of those inequalities can
//! be checked on the actual iterates, which is what this module does.

use std::fmt;

use crate::engine::{coupled_sum, ProblemSpec, SolverState};
use crate::error::{Error, Result};
use crate::numerics::{self, Vector};

/// Constraint values up to this level count as feasible.
pub const FEASIBILITY_SLACK: f64 = 1e-12;
/// Relative slack of the sufficient-descent check.
pub const DESCENT_REL_SLACK: f64 = 1e-8;
/// Allowed `‖y − ∇h(z)‖∞` after a z-update.
pub const DUAL_IDENTITY_TOL: f64 = 1e-8;
/// Additive slack of the `‖Δy‖ ≤ H‖Δz‖` monitor.
pub const GRADIENT_MONITOR_SLACK: f64 = 1e-8;
/// Iterates beyond this magnitude are treated as divergence.
pub const BOUNDEDNESS_LIMIT: f64 = 1e8;
/// Relative slack of the summability bound.
pub const SUMMABILITY_REL_SLACK: f64 = 1e-6;

/// `C₁ = ρ/2 − H/2 − H²/ρ` and `C₂ = min(ρ/2, C₁)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentConstants {
    pub lipschitz: f64,
    pub rho: f64,
    pub c1: f64,
    pub c2: f64,
}

impl DescentConstants {
    /// The formulas evaluated without the `ρ > 2H` check. Only meaningful
    /// for reporting; certificates use [`descent_constants`].
    pub fn unchecked(lipschitz: f64, rho: f64) -> Self {
        let c1 = rho / 2.0 - lipschitz / 2.0 - lipschitz * lipschitz / rho;
        DescentConstants {
            lipschitz,
            rho,
            c1,
            c2: (rho / 2.0).min(c1),
        }
    }
}

pub fn descent_constants(lipschitz: f64, rho: f64) -> Result<DescentConstants> {
    if !(rho > 0.0) || !(lipschitz >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "rho = {rho}, H = {lipschitz}"
        )));
    }
    if rho <= 2.0 * lipschitz {
        return Err(Error::RhoTooSmall {
            rho,
            bound: 2.0 * lipschitz,
        });
    }
    Ok(DescentConstants::unchecked(lipschitz, rho))
}

/// One row of the solve history.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// Iterations completed (1 for the first record).
    pub k: usize,
    /// `f + Σg_i + h(z)` at the new iterate.
    pub objective: f64,
    pub lagrangian: f64,
    pub primal_residual: f64,
    /// `‖z^{k+1} − z^k‖² + Σ‖A_i(x_i^{k+1} − x_i^k)‖²`
    pub step_norm_sq: f64,
    pub u_k: f64,
    /// `L^k − L^{k+1}`
    pub descent_lhs: f64,
    /// `C₂ · step_norm_sq`
    pub descent_rhs: f64,
    /// `‖y − ∇h(z)‖∞`
    pub dual_identity_err: f64,
    /// Milliseconds since the solve started; zero when timing is off.
    pub wall_time_ms: f64,
    /// Largest inequality-constraint value.
    pub max_violation: f64,
    pub dual_step_norm: f64,
    pub z_step_norm: f64,
}

/// `f + 𝕀(l) + Σg_i + h(z) + yᵀ(ΣA_i x_i − z) + (ρ/2)‖ΣA_i x_i − z‖²`.
///
/// Returns `+∞` when some constraint exceeds [`FEASIBILITY_SLACK`].
pub fn augmented_lagrangian(spec: &ProblemSpec, state: &SolverState, rho: f64) -> f64 {
    let violation = max_violation(spec, &state.x);
    if violation > FEASIBILITY_SLACK {
        return f64::INFINITY;
    }
    let s = coupled_sum(spec, &state.x);
    lagrangian_from_parts(spec, state, &s, rho)
}

pub(crate) fn lagrangian_from_parts(
    spec: &ProblemSpec,
    state: &SolverState,
    s: &[f64],
    rho: f64,
) -> f64 {
    let r: Vec<f64> = s.iter().zip(state.z.iter()).map(|(a, b)| a - b).collect();
    spec.model.objective(&state.x)
        + spec.smooth.value(&state.z)
        + numerics::dot(&state.y, &r)
        + 0.5 * rho * numerics::dot(&r, &r)
}

pub fn max_violation(spec: &ProblemSpec, x: &[Vector]) -> f64 {
    spec.model
        .constraints(x)
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn default_descent_slack(lagrangian_before: f64) -> f64 {
    DESCENT_REL_SLACK * (1.0 + lagrangian_before.abs())
}

/// `L^k − L^{k+1} ≥ C₂·step_norm_sq − slack`
pub fn check_sufficient_descent(
    lagrangian_before: f64,
    lagrangian_after: f64,
    step_norm_sq: f64,
    consts: &DescentConstants,
    slack: f64,
) -> bool {
    lagrangian_before - lagrangian_after >= consts.c2 * step_norm_sq - slack
}

/// Running minimum of the squared step norms.
pub fn update_u(prev_u: Option<f64>, step_norm_sq: f64) -> f64 {
    match prev_u {
        None => step_norm_sq,
        Some(u) => u.min(step_norm_sq),
    }
}

/// `Σ step_norm_sq ≤ (L⁰ − L^k)/C₂ + 1e-6·(1 + |L⁰|)`
pub fn summability_check(
    history: &[IterationRecord],
    consts: &DescentConstants,
    l0: f64,
    lk: f64,
) -> bool {
    let total: f64 = history.iter().map(|r| r.step_norm_sq).sum();
    total <= (l0 - lk) / consts.c2 + SUMMABILITY_REL_SLACK * (1.0 + l0.abs())
}

/// `(k, k·u_k)` for every record.
pub fn rate_proxy(history: &[IterationRecord]) -> Vec<(usize, f64)> {
    history.iter().map(|r| (r.k, r.k as f64 * r.u_k)).collect()
}

/// Finite-horizon stand-in for `k·u_k → 0`: the largest value over the
/// second half of the sequence does not exceed the largest over the first.
pub fn rate_proxy_holds(proxy: &[(usize, f64)]) -> bool {
    if proxy.len() < 2 {
        return true;
    }
    let half = proxy.len() / 2;
    let first = proxy[..half].iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let second = proxy[half..].iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    second <= first
}

/// Which runtime check failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Certificate {
    Feasibility,
    SufficientDescent,
    DualIdentity,
    GradientMonitor,
    Boundedness,
    FiniteLagrangian,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub k: usize,
    pub certificate: Certificate,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "iteration {}: {:?}: {}", self.k, self.certificate, self.detail)
    }
}

/// Checks one freshly produced record against every certificate.
pub(crate) fn certify(
    record: &IterationRecord,
    lagrangian_before: f64,
    consts: &DescentConstants,
    state: &SolverState,
) -> Option<Violation> {
    let fail = |certificate, detail: String| {
        Some(Violation {
            k: record.k,
            certificate,
            detail,
        })
    };
    if record.max_violation > FEASIBILITY_SLACK {
        return fail(
            Certificate::Feasibility,
            format!("constraint value {:e}", record.max_violation),
        );
    }
    if !record.lagrangian.is_finite() {
        return fail(
            Certificate::FiniteLagrangian,
            format!("L = {}", record.lagrangian),
        );
    }
    let slack = default_descent_slack(lagrangian_before);
    if !check_sufficient_descent(
        lagrangian_before,
        record.lagrangian,
        record.step_norm_sq,
        consts,
        slack,
    ) {
        return fail(
            Certificate::SufficientDescent,
            format!(
                "L decreased by {:e}, need {:e} (slack {:e})",
                record.descent_lhs, record.descent_rhs, slack
            ),
        );
    }
    if record.dual_identity_err > DUAL_IDENTITY_TOL {
        return fail(
            Certificate::DualIdentity,
            format!("|y - grad h(z)|_inf = {:e}", record.dual_identity_err),
        );
    }
    let bound = consts.lipschitz * record.z_step_norm + GRADIENT_MONITOR_SLACK;
    if record.dual_step_norm > bound {
        return fail(
            Certificate::GradientMonitor,
            format!("|dy| = {:e} > H|dz| + slack = {:e}", record.dual_step_norm, bound),
        );
    }
    let magnitude = state
        .x
        .iter()
        .map(|v| v.norm_inf())
        .fold(state.z.norm_inf().max(state.y.norm_inf()), f64::max);
    if !(magnitude <= BOUNDEDNESS_LIMIT) {
        return fail(
            Certificate::Boundedness,
            format!("iterate magnitude {magnitude:e}"),
        );
    }
    None
}
