//! Run configuration and its command-line form.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use miadmm::SolverConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProblemKind {
    Synthetic,
    Multitask,
    SignedNetwork,
    Dictlearn,
    Nmf,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Synthetic => "synthetic",
            ProblemKind::Multitask => "multitask",
            ProblemKind::SignedNetwork => "signed-network",
            ProblemKind::Dictlearn => "dictlearn",
            ProblemKind::Nmf => "nmf",
        }
    }

    /// Whether the block coordinate descent baseline applies. It needs
    /// block solvers that work without a proximal term.
    pub fn supports_baseline(self) -> bool {
        matches!(
            self,
            ProblemKind::Synthetic | ProblemKind::Multitask | ProblemKind::SignedNetwork
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepAxis {
    N,
    M,
}

/// Everything one invocation needs. Size fields are interpreted per
/// problem:
///
/// | problem        | `n`               | `m`      | `tasks` | `features` | `rank` |
/// |----------------|-------------------|----------|---------|------------|--------|
/// | synthetic      | samples           | half width |       |            |        |
/// | multitask      | samples per task  |          | tasks   | features   |        |
/// | signed-network | samples per node  |          | nodes   | node dim   |        |
/// | dictlearn      | samples           |          |         | signal dim | atoms  |
/// | nmf            | rows of `U`       | cols of `U` |      |            | rank   |
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub kind: ProblemKind,
    pub n: usize,
    pub m: usize,
    pub tasks: usize,
    pub features: usize,
    pub rank: usize,
    pub edges: usize,
    pub lambda: f64,
    pub gamma: f64,
    pub noise: f64,
    pub rho: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
    pub out: Option<PathBuf>,
    /// Data matrix file (`U` for nmf, `X` for dictlearn).
    pub input: Option<PathBuf>,
    pub baseline: bool,
    pub sweep: Option<Vec<usize>>,
    pub sweep_axis: SweepAxis,
    pub timing: bool,
}

/// Rejected before any work is done; maps to the usage exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

impl RunConfig {
    /// Defaults for one problem. The synthetic sizes and `λ₁ = 1`,
    /// `ρ = 0.1` follow the reference experiment.
    pub fn new(kind: ProblemKind) -> Self {
        let (n, m, lambda) = match kind {
            ProblemKind::Synthetic => (1000, 1000, 1.0),
            ProblemKind::Multitask | ProblemKind::SignedNetwork => (50, 0, 0.1),
            ProblemKind::Dictlearn => (40, 0, 0.0),
            ProblemKind::Nmf => (10, 8, 0.0),
        };
        RunConfig {
            kind,
            n,
            m,
            tasks: 4,
            features: if kind == ProblemKind::Dictlearn { 12 } else { 6 },
            rank: 3,
            edges: 8,
            lambda,
            gamma: 0.05,
            noise: 0.1,
            rho: 0.1,
            max_iter: 1000,
            tol: 1e-10,
            seed: 0,
            out: None,
            input: None,
            baseline: false,
            sweep: None,
            sweep_axis: SweepAxis::N,
            timing: true,
        }
    }

    pub fn validate(&self) -> Result<(), UsageError> {
        let bad = |msg: String| Err(UsageError(msg));
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return bad(format!("--rho must be positive, got {}", self.rho));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return bad(format!("--tol must be positive, got {}", self.tol));
        }
        if self.max_iter == 0 {
            return bad("--max-iter must be at least 1".into());
        }
        for (flag, v) in [("--lambda", self.lambda), ("--gamma", self.gamma), ("--noise", self.noise)] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{flag} must be nonnegative, got {v}"));
            }
        }
        let sizes: &[(&str, usize)] = match self.kind {
            ProblemKind::Synthetic => &[("--n", self.n), ("--m", self.m)],
            ProblemKind::Multitask => &[("--n", self.n), ("--tasks", self.tasks), ("--features", self.features)],
            ProblemKind::SignedNetwork => {
                &[("--n", self.n), ("--tasks", self.tasks), ("--features", self.features)]
            }
            ProblemKind::Dictlearn => &[("--n", self.n), ("--features", self.features), ("--rank", self.rank)],
            ProblemKind::Nmf => &[("--n", self.n), ("--m", self.m), ("--rank", self.rank)],
        };
        if let Some((flag, _)) = sizes.iter().find(|(_, v)| *v == 0) {
            return bad(format!("{flag} must be positive"));
        }
        if matches!(self.kind, ProblemKind::Multitask | ProblemKind::SignedNetwork) && self.tasks < 2 {
            return bad("--tasks must be at least 2".into());
        }
        if self.baseline && !self.kind.supports_baseline() {
            return bad(format!("--baseline is not available for {}", self.kind.name()));
        }
        if self.input.is_some() && !matches!(self.kind, ProblemKind::Nmf | ProblemKind::Dictlearn) {
            return bad(format!("--input is not available for {}", self.kind.name()));
        }
        if let Some(values) = &self.sweep {
            validate_sweep(self.kind, values)?;
        }
        Ok(())
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            rho: self.rho,
            max_iter: self.max_iter,
            tol: self.tol,
            seed: self.seed,
            record_timing: self.timing,
            ..SolverConfig::default()
        }
    }
}

pub(crate) fn validate_sweep(kind: ProblemKind, values: &[usize]) -> Result<(), UsageError> {
    if kind != ProblemKind::Synthetic {
        return Err(UsageError("--sweep is only available for synthetic".into()));
    }
    if values.len() < 3 {
        return Err(UsageError(format!(
            "--sweep needs at least 3 values, got {}",
            values.len()
        )));
    }
    if values[0] == 0 || values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(UsageError("--sweep values must be positive and strictly ascending".into()));
    }
    Ok(())
}

#[derive(Debug, Parser)]
#[command(name = "miadmm", version, about = "Benchmark harness for the miADMM solver")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sign-constrained ridge regression on generated data
    Synthetic(Flags),
    /// Multi-task regression with sign agreement along a chain of tasks
    Multitask(Flags),
    /// Per-node regressions coupled by a planted signed network
    SignedNetwork(Flags),
    /// Dictionary learning with an L1 penalty on the codes
    Dictlearn(Flags),
    /// Nonnegative matrix factorization
    Nmf(Flags),
}

#[derive(Debug, Clone, Args)]
pub struct Flags {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub tasks: Option<usize>,
    #[arg(long)]
    pub features: Option<usize>,
    #[arg(long)]
    pub rank: Option<usize>,
    /// Number of planted edges (signed-network)
    #[arg(long)]
    pub edges: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Standard deviation of the label noise
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// History CSV path; the baseline writes next to it with a `.bcd.csv` suffix
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Whitespace-separated data matrix (nmf: U, dictlearn: X)
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Also run block coordinate descent
    #[arg(long)]
    pub baseline: bool,
    /// Timing sweep over these sizes instead of a single run
    #[arg(long, value_delimiter = ',')]
    pub sweep: Option<Vec<usize>>,
    #[arg(long, value_enum, default_value = "n")]
    pub sweep_axis: SweepAxis,
    /// Record zero wall time so histories are bit-reproducible
    #[arg(long)]
    pub no_timing: bool,
}

impl Command {
    pub fn into_config(self) -> RunConfig {
        let (kind, f) = match self {
            Command::Synthetic(f) => (ProblemKind::Synthetic, f),
            Command::Multitask(f) => (ProblemKind::Multitask, f),
            Command::SignedNetwork(f) => (ProblemKind::SignedNetwork, f),
            Command::Dictlearn(f) => (ProblemKind::Dictlearn, f),
            Command::Nmf(f) => (ProblemKind::Nmf, f),
        };
        let d = RunConfig::new(kind);
        RunConfig {
            kind,
            n: f.n.unwrap_or(d.n),
            m: f.m.unwrap_or(d.m),
            tasks: f.tasks.unwrap_or(d.tasks),
            features: f.features.unwrap_or(d.features),
            rank: f.rank.unwrap_or(d.rank),
            edges: f.edges.unwrap_or(d.edges),
            lambda: f.lambda.unwrap_or(d.lambda),
            gamma: f.gamma.unwrap_or(d.gamma),
            noise: f.noise.unwrap_or(d.noise),
            rho: f.rho.unwrap_or(d.rho),
            max_iter: f.max_iter.unwrap_or(d.max_iter),
            tol: f.tol.unwrap_or(d.tol),
            seed: f.seed.unwrap_or(d.seed),
            out: f.out,
            input: f.input,
            baseline: f.baseline,
            sweep: f.sweep,
            sweep_axis: f.sweep_axis,
            timing: !f.no_timing,
        }
    }
}
