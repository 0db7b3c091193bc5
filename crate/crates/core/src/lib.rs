//! ADMM for multi-convex problems with inequality constraints.
//!
//! A problem is a set of variable blocks `x_1..x_n` coupled through
//! `ΣA_i x_i = z`, an objective `f(x) + Σg_i(x_i) + h(z)` that is convex in
//! each block, and inequality constraints `l(x) ≤ 0`. The [`engine`] runs
//! Gauss–Seidel block updates with exact block solvers supplied by a
//! [`Model`](engine::Model), then a `z` step and a dual step, and checks a
//! set of runtime certificates ([`diagnostics`]) on every iteration.
//!
//! [`problems`] holds ready-made applications: sign-constrained ridge
//! regression, multi-task learning, signed networks, dictionary learning
//! and NMF, plus a block coordinate descent baseline.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod batch;
pub mod diagnostics;
pub mod engine;
pub mod error;
pub mod exec;
pub mod numerics;
pub mod problems;
pub mod subsolvers;

pub use batch::solve_batch;
pub use diagnostics::IterationRecord;
pub use engine::{run, ProblemSpec, SolveReport, SolveStatus, SolverConfig, SolverState};
pub use error::{Error, Result};
pub use exec::ExecPolicy;
pub use numerics::{Matrix, Vector};
