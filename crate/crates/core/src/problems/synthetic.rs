//! Ridge regression with biconvex sign constraints:
//!
//! ```text
//! minimize  ‖y − X_α α − X_β β‖² + λ₁(‖α‖² + ‖β‖²)
//! s.t.      α_j β_j ≤ 0
//! ```
//!
//! split as `z = [α; β]` with `h = 0`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::engine::{BlockSpec, ProblemSpec, SmoothTerm};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Vector};
use crate::problems::quadratic::{BlockQuadratic, LossForm};
use crate::problems::sign::{SignConstraints, SignEdge};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    /// `N × 2M`; the first `M` columns multiply `α`.
    pub x: Matrix,
    pub y: Vector,
    pub alpha_true: Vector,
    pub beta_true: Vector,
    pub seed: u64,
}

impl SyntheticDataset {
    pub fn n_samples(&self) -> usize {
        self.x.rows()
    }

    /// `M`, the size of each coefficient block.
    pub fn half_features(&self) -> usize {
        self.alpha_true.len()
    }

    pub fn true_weights(&self) -> Vec<Vector> {
        vec![self.alpha_true.clone(), self.beta_true.clone()]
    }

    /// Replaces the true coefficients and regenerates `y` without noise.
    pub fn with_weights(mut self, alpha: Vector, beta: Vector) -> Self {
        let theta: Vec<f64> = alpha.iter().chain(beta.iter()).copied().collect();
        self.y = self.x.matvec(&theta);
        self.alpha_true = alpha;
        self.beta_true = beta;
        self
    }
}

/// Features and true coefficients uniform on `[−1, 1]`,
/// `y = X[α; β] + ε` with `ε ~ N(0, noise_sd²)`.
pub fn gen_synthetic(n: usize, m: usize, noise_sd: f64, seed: u64) -> Result<SyntheticDataset> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidConfig(format!("N = {n}, M = {m}")));
    }
    if !(noise_sd >= 0.0) {
        return Err(Error::InvalidConfig(format!("noise_sd = {noise_sd}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alpha: Vector = (0..m).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let beta: Vector = (0..m).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let x = Matrix::from_fn(n, 2 * m, |_, _| rng.random_range(-1.0..=1.0));
    let theta: Vec<f64> = alpha.iter().chain(beta.iter()).copied().collect();
    let mut y = x.matvec(&theta);
    if noise_sd > 0.0 {
        let normal = Normal::new(0.0, noise_sd).expect("finite sd");
        y.iter_mut().for_each(|v| *v += normal.sample(&mut rng));
    }
    Ok(SyntheticDataset {
        x,
        y,
        alpha_true: alpha,
        beta_true: beta,
        seed,
    })
}

/// Two stacked blocks `(α, β)`, zero smooth term, start at the origin.
///
/// Each block update is the ridge quadratic
/// `P = 2X_bᵀX_b + 2λ₁I + ρI` with the partner's contribution in the
/// linear term; coordinate `j` is `NonPositive` when the partner's `j`th
/// coefficient is positive, `NonNegative` when negative, free at zero.
pub fn build_synthetic_problem(d: &SyntheticDataset, lambda1: f64) -> Result<ProblemSpec> {
    if !(lambda1 > 0.0) {
        return Err(Error::InvalidConfig(format!("lambda1 = {lambda1}")));
    }
    let m = d.half_features();
    if d.x.cols() != 2 * m || d.x.rows() != d.y.len() {
        return Err(Error::DimensionMismatch("synthetic dataset".into()));
    }
    let mut h = d.x.gram();
    h.scale(2.0);
    h.add_diagonal(2.0 * lambda1);
    let mut b = d.x.matvec_t(&d.y);
    b.iter_mut().for_each(|v| *v *= 2.0);
    let edges = (0..m).map(|j| SignEdge::disagree((0, j), (1, j))).collect();
    let signs = SignConstraints::new(&[m, m], edges)?;
    let model = BlockQuadratic::from_full(
        vec![m, m],
        &h,
        &b,
        d.y.dot(&d.y),
        signs,
        LossForm::Joint {
            x: d.x.clone(),
            y: d.y.clone(),
            ridge: lambda1,
        },
    )?;
    ProblemSpec::new(
        vec![BlockSpec::stacked(m, 0), BlockSpec::stacked(m, m)],
        2 * m,
        SmoothTerm::Zero,
        Arc::new(model),
        vec![Vector::zeros(m), Vector::zeros(m)],
    )
}
