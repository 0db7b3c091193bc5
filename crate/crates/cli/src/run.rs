//! Building problems from a [`RunConfig`], running them, and reporting.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use miadmm::numerics::load_matrix;
use miadmm::problems::{
    bcd_solve, build_dictlearn_problem, build_multitask_problem, build_nmf_problem,
    build_signed_network_problem, build_synthetic_problem, dict_factors, gen_dictlearn, gen_multitask,
    gen_nmf, gen_signed_network, gen_synthetic, nmf_relative_error, regression_metrics,
    DictLearnProblem, NmfProblem, Task,
};
use miadmm::{Error, Matrix, ProblemSpec, SolveReport, SolveStatus, Vector};

use crate::config::{ProblemKind, RunConfig};
use crate::history::write_history_csv;
use crate::sweep::scaling_sweep;

pub const EXIT_CONVERGED: i32 = 0;
/// Unexpected solver failure (not a usage, I/O or certificate problem).
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_MAX_ITER: i32 = 2;
pub const EXIT_CERTIFICATE: i32 = 3;
pub const EXIT_IO: i32 = 4;
pub const EXIT_USAGE: i32 = 64;

/// Density of the generated sparse codes for dictionary learning.
const DICT_CODE_DENSITY: f64 = 0.3;

/// A built problem plus what is needed to report on its solution.
pub struct Prepared {
    pub spec: ProblemSpec,
    data: Data,
}

enum Data {
    /// Per-block regression tasks; synthetic data is one task over both blocks.
    Regression { tasks: Vec<Task>, joint: bool },
    Dictlearn(DictLearnProblem),
    Nmf(NmfProblem),
}

pub fn build_problem(cfg: &RunConfig) -> miadmm::Result<Prepared> {
    Ok(match cfg.kind {
        ProblemKind::Synthetic => {
            let d = gen_synthetic(cfg.n, cfg.m, cfg.noise, cfg.seed)?;
            let spec = build_synthetic_problem(&d, cfg.lambda)?;
            Prepared {
                spec,
                data: Data::Regression {
                    tasks: vec![Task { x: d.x, y: d.y }],
                    joint: true,
                },
            }
        }
        ProblemKind::Multitask => {
            let d = gen_multitask(cfg.tasks, cfg.features, cfg.n, cfg.noise, cfg.lambda, cfg.seed)?;
            let spec = build_multitask_problem(&d)?;
            Prepared {
                spec,
                data: Data::Regression {
                    tasks: d.tasks,
                    joint: false,
                },
            }
        }
        ProblemKind::SignedNetwork => {
            let p = gen_signed_network(cfg.tasks, cfg.features, cfg.n, cfg.edges, cfg.noise, cfg.seed)?;
            let spec = build_signed_network_problem(&p.network, &p.tasks, cfg.lambda)?;
            Prepared {
                spec,
                data: Data::Regression {
                    tasks: p.tasks,
                    joint: false,
                },
            }
        }
        ProblemKind::Dictlearn => {
            let x = match &cfg.input {
                Some(path) => load_input(path)?,
                None => gen_dictlearn(cfg.features, cfg.n, cfg.rank, DICT_CODE_DENSITY, cfg.seed)?.0,
            };
            let p = DictLearnProblem {
                x,
                gamma: cfg.gamma,
                rank: cfg.rank,
            };
            Prepared {
                spec: build_dictlearn_problem(&p)?,
                data: Data::Dictlearn(p),
            }
        }
        ProblemKind::Nmf => {
            let u = match &cfg.input {
                Some(path) => load_input(path)?,
                None => gen_nmf(cfg.n, cfg.m, cfg.rank, cfg.seed)?.0,
            };
            let p = NmfProblem { u, rank: cfg.rank };
            Prepared {
                spec: build_nmf_problem(&p)?,
                data: Data::Nmf(p),
            }
        }
    })
}

impl Prepared {
    /// Problem-specific quality measures of a solution, as summary pairs.
    pub fn quality(&self, x: &[Vector]) -> Vec<(&'static str, f64)> {
        match &self.data {
            Data::Regression { tasks, joint } => {
                let (y, yhat): (Vec<f64>, Vec<f64>) = if *joint {
                    let theta: Vec<f64> = x.iter().flat_map(|b| b.iter().copied()).collect();
                    let t = &tasks[0];
                    (t.y.to_vec(), t.x.matvec(&theta).to_vec())
                } else {
                    tasks
                        .iter()
                        .zip(x)
                        .flat_map(|(t, w)| t.y.iter().copied().zip(t.x.matvec(w).to_vec()))
                        .unzip()
                };
                match regression_metrics(&y, &yhat) {
                    Ok(m) => vec![("mse", m.mse), ("mae", m.mae), ("ev", m.ev), ("r2", m.r2)],
                    Err(e) => {
                        // MSLE is undefined for labels at or below −1.
                        log::debug!("regression metrics skipped: {e}");
                        let mse = y.iter().zip(&yhat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
                            / y.len() as f64;
                        vec![("mse", mse)]
                    }
                }
            }
            Data::Nmf(p) => vec![("relative_error", nmf_relative_error(p, x))],
            Data::Dictlearn(p) => {
                let (d, y) = dict_factors(p, x);
                let fit = d.matmul(&y);
                vec![
                    ("relative_error", relative_error(&fit, &p.x)),
                    ("dictionary_norm", d.frobenius_norm()),
                    ("code_density", density(&y)),
                ]
            }
        }
    }
}

/// Reads a data matrix, naming the file in any error.
fn load_input(path: &Path) -> miadmm::Result<Matrix> {
    load_matrix(path).map_err(|e| match e {
        Error::Io(io) => Error::Io(std::io::Error::new(io.kind(), format!("{}: {io}", path.display()))),
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn relative_error(a: &Matrix, b: &Matrix) -> f64 {
    let err = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt();
    let norm = b.frobenius_norm();
    if norm > 0.0 {
        err / norm
    } else {
        err
    }
}

fn density(m: &Matrix) -> f64 {
    let s = m.as_slice();
    s.iter().filter(|v| **v != 0.0).count() as f64 / s.len().max(1) as f64
}

pub fn status_name(s: &SolveStatus) -> &'static str {
    match s {
        SolveStatus::Converged => "converged",
        SolveStatus::MaxIterReached => "max_iter",
        SolveStatus::CertificateViolation(_) => "certificate_violation",
    }
}

pub fn exit_code(s: &SolveStatus) -> i32 {
    match s {
        SolveStatus::Converged => EXIT_CONVERGED,
        SolveStatus::MaxIterReached => EXIT_MAX_ITER,
        SolveStatus::CertificateViolation(_) => EXIT_CERTIFICATE,
    }
}

/// Exit code for a library error raised while building or solving.
pub fn error_exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) | Error::Parse(_) => EXIT_IO,
        Error::InvalidConfig(_)
        | Error::RhoTooSmall { .. }
        | Error::Unsupported(_)
        | Error::Domain(_)
        | Error::DimensionMismatch(_) => EXIT_USAGE,
        Error::Block { source, .. } => error_exit_code(source),
        _ => EXIT_FAILURE,
    }
}

/// `run.csv` → `run.bcd.csv`
pub fn baseline_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.bcd.csv"))
}

fn summary_line(
    method: &str,
    cfg: &RunConfig,
    report: &SolveReport,
    wall_ms: f64,
    quality: &[(&str, f64)],
) -> String {
    let last = report.history.last();
    let objective = last.map_or_else(
        || report.initial_lagrangian,
        |r| r.objective,
    );
    let mut s = format!(
        "method={method} problem={} status={} iterations={} objective={objective:?}",
        cfg.kind.name(),
        status_name(&report.status),
        report.history.len(),
    );
    if let Some(r) = last {
        s.push_str(&format!(
            " lagrangian={:?} primal_residual={:?} step_norm_sq={:?}",
            r.lagrangian, r.primal_residual, r.step_norm_sq
        ));
    }
    s.push_str(&format!(" wall_time_ms={wall_ms:.3}"));
    for (k, v) in quality {
        s.push_str(&format!(" {k}={v:?}"));
    }
    if let SolveStatus::CertificateViolation(v) = &report.status {
        s.push_str(&format!(" violation=\"{v}\""));
    }
    s
}

/// Runs one invocation, writing summary lines to `out` and diagnostics to
/// standard error. Returns the process exit code.
pub fn run_command(cfg: &RunConfig, out: &mut dyn Write) -> i32 {
    if let Err(e) = cfg.validate() {
        eprintln!("usage error: {e}");
        return EXIT_USAGE;
    }
    match execute(cfg, out) {
        Ok(code) => code,
        Err(e) => {
            let code = error_exit_code(&e);
            eprintln!("error: {e}");
            code
        }
    }
}

fn execute(cfg: &RunConfig, out: &mut dyn Write) -> miadmm::Result<i32> {
    if let Some(values) = &cfg.sweep {
        let table = scaling_sweep(cfg, cfg.sweep_axis, values)?;
        match &cfg.out {
            Some(path) => std::fs::write(path, table.to_csv())?,
            None => out.write_all(table.to_csv().as_bytes())?,
        }
        for line in table.summary_lines() {
            writeln!(out, "{line}")?;
        }
        return Ok(EXIT_CONVERGED);
    }

    let prepared = build_problem(cfg)?;
    let solver = cfg.solver_config();
    log::info!("solving {} with rho = {}", cfg.kind.name(), cfg.rho);
    let start = Instant::now();
    let report = miadmm::run(&prepared.spec, &solver)?;
    let wall = start.elapsed().as_secs_f64() * 1e3;
    if let Some(path) = &cfg.out {
        write_history_csv(&report.history, path)?;
    }
    let quality = prepared.quality(&report.final_state.x);
    writeln!(out, "{}", summary_line("miadmm", cfg, &report, wall, &quality))?;

    if cfg.baseline {
        log::info!("running the block coordinate descent baseline");
        let start = Instant::now();
        let bcd = bcd_solve(&prepared.spec, &solver)?;
        let wall = start.elapsed().as_secs_f64() * 1e3;
        if let Some(path) = &cfg.out {
            write_history_csv(&bcd.history, baseline_path(path))?;
        }
        let quality = prepared.quality(&bcd.final_state.x);
        writeln!(out, "{}", summary_line("bcd", cfg, &bcd, wall, &quality))?;
    }
    Ok(exit_code(&report.status))
}
