//! Independent solves run side by side, e.g. one per seed.

use crate::engine::{run, ProblemSpec, SolveReport, SolverConfig};
use crate::error::Result;
use crate::exec::{self, ExecPolicy};

/// Solves every spec with the same configuration. Results come back in
/// input order and do not depend on the policy.
pub fn solve_batch(specs: &[ProblemSpec], cfg: &SolverConfig, policy: ExecPolicy) -> Vec<Result<SolveReport>> {
    exec::map_slice(specs, policy, |spec| run(spec, cfg))
}
