//! Fixed-iteration timing sweeps over the synthetic problem size.

use std::time::Instant;

use miadmm::problems::{bcd_solve, build_synthetic_problem, gen_synthetic};
use miadmm::{Error, Result, SolverConfig};

use crate::config::{validate_sweep, RunConfig, SweepAxis};

/// Each point is timed this many times and the minimum kept.
pub const SWEEP_REPEATS: usize = 5;

pub const METHODS: [&str; 2] = ["miadmm", "bcd"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least squares `y ≈ slope·x + intercept`. `r2` is 1 when `y` is
/// constant and fitted exactly.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::DimensionMismatch(format!(
            "{} x values and {} y values (need equal lengths of at least 2)",
            xs.len(),
            ys.len()
        )));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("all x values are equal".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - (slope * x + intercept);
            r * r
        })
        .sum();
    let r2 = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res == 0.0 {
        1.0
    } else {
        0.0
    };
    Ok(LinearFit { slope, intercept, r2 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub method: &'static str,
    pub value: usize,
    pub time_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub axis: SweepAxis,
    pub iterations: usize,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn times(&self, method: &str) -> (Vec<f64>, Vec<f64>) {
        self.rows
            .iter()
            .filter(|r| r.method == method)
            .map(|r| (r.value as f64, r.time_ms))
            .unzip()
    }

    pub fn fit(&self, method: &str) -> Result<LinearFit> {
        let (x, y) = self.times(method);
        linear_fit(&x, &y)
    }

    /// `method,value,time_ms`, one row per method and size.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("method,value,time_ms\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{:?}\n", r.method, r.value, r.time_ms));
        }
        s
    }

    pub fn summary_lines(&self) -> Vec<String> {
        let axis = match self.axis {
            SweepAxis::N => "n",
            SweepAxis::M => "m",
        };
        METHODS
            .iter()
            .map(|m| match self.fit(m) {
                Ok(f) => format!(
                    "method={m} sweep_axis={axis} iterations={} slope_ms={:?} intercept_ms={:?} r2={:?}",
                    self.iterations, f.slope, f.intercept, f.r2
                ),
                Err(e) => format!("method={m} sweep_axis={axis} fit_error=\"{e}\""),
            })
            .collect()
    }
}

/// Times `base.max_iter` iterations of miADMM and of the baseline on the
/// synthetic problem for each size along `axis`.
///
/// Each timed repeat builds the problem afresh (including the Gram matrix
/// and every factorization cache) and then iterates, so the measurement is
/// what a user pays for a fixed iteration budget on new data. Data
/// generation is not timed. Runs are sequential.
pub fn scaling_sweep(base: &RunConfig, axis: SweepAxis, values: &[usize]) -> Result<SweepTable> {
    validate_sweep(base.kind, values).map_err(|e| Error::InvalidConfig(e.0))?;
    let solver = SolverConfig {
        // never met, so every run does exactly max_iter iterations
        tol: f64::MIN_POSITIVE,
        record_timing: false,
        ..base.solver_config()
    };
    let mut rows = Vec::with_capacity(values.len() * METHODS.len());
    for &v in values {
        let mut cfg = base.clone();
        match axis {
            SweepAxis::N => cfg.n = v,
            SweepAxis::M => cfg.m = v,
        }
        let data = gen_synthetic(cfg.n, cfg.m, cfg.noise, cfg.seed)?;
        for method in METHODS {
            let mut best = f64::INFINITY;
            for _ in 0..SWEEP_REPEATS {
                let start = Instant::now();
                let spec = build_synthetic_problem(&data, cfg.lambda)?;
                let report = match method {
                    "miadmm" => miadmm::run(&spec, &solver)?,
                    _ => bcd_solve(&spec, &solver)?,
                };
                best = best.min(start.elapsed().as_secs_f64() * 1e3);
                log::debug!("{method} {axis:?}={v}: {} iterations", report.history.len());
            }
            log::info!("{method} {axis:?}={v}: {best:.3} ms");
            rows.push(SweepRow {
                method,
                value: v,
                time_ms: best,
            });
        }
    }
    Ok(SweepTable {
        axis,
        iterations: solver.max_iter,
        rows,
    })
}
