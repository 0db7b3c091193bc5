//! Benchmark harness for the `miadmm` solver: problem construction from
//! command-line configuration, history CSVs, and timing sweeps.
//!
//! Exit codes: 0 converged, 2 iteration limit, 3 certificate violation,
//! 4 I/O or input parse error, 64 usage error, 1 any other solver failure.

pub mod config;
pub mod history;
pub mod run;
pub mod sweep;

pub use config::{Cli, Command, ProblemKind, RunConfig, SweepAxis, UsageError};
pub use history::{parse_history_csv, read_history_csv, write_history_csv, HistoryRow, HISTORY_HEADER};
pub use run::{build_problem, run_command, EXIT_CERTIFICATE, EXIT_CONVERGED, EXIT_IO, EXIT_MAX_ITER, EXIT_USAGE};
pub use sweep::{linear_fit, scaling_sweep, LinearFit, SweepTable};

/// Installs the logger; verbosity comes from `MIADMM_LOG`
/// (`off`, `info`, `debug`, or any `env_logger` filter). Defaults to `off`.
pub fn init_logging() {
    let env = env_logger::Env::new().filter_or("MIADMM_LOG", "off");
    // a second call (as in tests) is harmless
    let _ = env_logger::Builder::from_env(env).try_init();
}
