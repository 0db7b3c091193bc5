//! Block coordinate descent on the unsplit problem: each block is
//! minimized exactly with the others fixed, with no auxiliary variable and
//! no duals. Baseline for the ADMM engine.

use std::time::Instant;

use crate::diagnostics::{self, DescentConstants, IterationRecord};
use crate::engine::{
    coupled_sum, BlockContext, Penalty, ProblemSpec, SmoothTerm, SolveReport, SolveStatus,
    SolverConfig, SolverState,
};
use crate::error::{Error, Result};
use crate::numerics::Vector;

/// Runs sweeps until `Σ‖A_i Δx_i‖² ≤ tol` or `max_iter`.
///
/// Records reuse the engine's layout: `objective` and `lagrangian` both hold
/// the objective, the residual and dual columns are zero, and
/// `descent_lhs` is the objective decrease of the sweep.
pub fn bcd_solve(spec: &ProblemSpec, cfg: &SolverConfig) -> Result<SolveReport> {
    cfg.validate()?;
    if !matches!(spec.smooth, SmoothTerm::Zero) {
        return Err(Error::Unsupported(
            "block coordinate descent needs a zero smooth term".into(),
        ));
    }
    let started = Instant::now();
    let mut x = spec.initial_point.clone();
    let initial = spec.model.objective(&x);
    let mut prev = initial;
    let mut u = None;
    let mut history: Vec<IterationRecord> = Vec::new();
    let mut status = SolveStatus::MaxIterReached;

    for k in 1..=cfg.max_iter {
        let mut step = 0.0;
        for i in 0..spec.n_blocks() {
            let ctx = BlockContext {
                index: i,
                x: &x,
                penalty: Penalty::none(),
                sub_tol: cfg.sub_tol,
            };
            let new_xi = spec.model.solve_block(&ctx).map_err(|e| e.in_block(i))?;
            let delta: Vec<f64> = new_xi.iter().zip(x[i].iter()).map(|(a, b)| a - b).collect();
            step += spec.blocks[i].image_norm_sq(&delta);
            x[i] = new_xi;
        }
        let objective = spec.model.objective(&x);
        let u_k = diagnostics::update_u(u, step);
        u = Some(u_k);
        history.push(IterationRecord {
            k,
            objective,
            lagrangian: objective,
            primal_residual: 0.0,
            step_norm_sq: step,
            u_k,
            descent_lhs: prev - objective,
            descent_rhs: 0.0,
            dual_identity_err: 0.0,
            wall_time_ms: if cfg.record_timing {
                started.elapsed().as_secs_f64() * 1e3
            } else {
                0.0
            },
            max_violation: diagnostics::max_violation(spec, &x),
            dual_step_norm: 0.0,
            z_step_norm: 0.0,
        });
        prev = objective;
        if step <= cfg.tol {
            status = SolveStatus::Converged;
            break;
        }
    }
    let z = coupled_sum(spec, &x);
    let y = Vector::zeros(spec.z_dim);
    Ok(SolveReport {
        final_state: SolverState {
            x,
            z,
            y,
            k: history.len(),
        },
        history,
        status,
        initial_lagrangian: initial,
        constants: DescentConstants::unchecked(0.0, cfg.rho),
    })
}
