//! Regression quality metrics.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionMetrics {
    pub mse: f64,
    /// Mean squared error of `log(1 + ·)`.
    pub msle: f64,
    pub mae: f64,
    /// Explained variance `1 − Var(y − ŷ)/Var(y)`.
    pub ev: f64,
    /// `1 − SS_res/SS_tot`
    pub r2: f64,
}

/// Both ratio metrics are 1 for a perfect fit and 0 otherwise when `y` is
/// constant (the denominator vanishes).
pub fn regression_metrics(y: &[f64], yhat: &[f64]) -> Result<RegressionMetrics> {
    if y.len() != yhat.len() || y.len() < 2 {
        return Err(Error::DimensionMismatch(format!(
            "{} targets and {} predictions (need equal lengths of at least 2)",
            y.len(),
            yhat.len()
        )));
    }
    if let Some(v) = y.iter().chain(yhat).find(|v| **v <= -1.0) {
        return Err(Error::Domain(format!("log(1 + x) undefined at {v}")));
    }
    let n = y.len() as f64;
    let mean = |v: &mut dyn Iterator<Item = f64>| v.sum::<f64>() / n;
    let resid: Vec<f64> = y.iter().zip(yhat).map(|(a, b)| a - b).collect();

    let mse = mean(&mut resid.iter().map(|r| r * r));
    let mae = mean(&mut resid.iter().map(|r| r.abs()));
    let msle = mean(&mut y.iter().zip(yhat).map(|(a, b)| {
        let d = a.ln_1p() - b.ln_1p();
        d * d
    }));

    let y_mean = mean(&mut y.iter().copied());
    let ss_tot: f64 = y.iter().map(|v| (v - y_mean) * (v - y_mean)).sum();
    let ss_res: f64 = resid.iter().map(|r| r * r).sum();
    let r_mean = mean(&mut resid.iter().copied());
    let ss_resvar: f64 = resid.iter().map(|r| (r - r_mean) * (r - r_mean)).sum();

    let ratio = |num: f64| {
        if ss_tot > 0.0 {
            1.0 - num / ss_tot
        } else if num == 0.0 {
            1.0
        } else {
            0.0
        }
    };
    Ok(RegressionMetrics {
        mse,
        msle,
        mae,
        ev: ratio(ss_resvar),
        r2: ratio(ss_res),
    })
}
