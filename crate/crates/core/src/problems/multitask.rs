//! Weakly-constrained multi-task regression: tasks with neighboring indices
//! must give every feature a weight of the same sign
//! (`w_{i,j}·w_{i+1,j} ≥ 0`), with no constraint on magnitudes.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::engine::{BlockSpec, ProblemSpec, SmoothTerm};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Vector};
use crate::problems::quadratic::{BlockQuadratic, LossForm};
use crate::problems::sign::{SignConstraints, SignEdge};

/// One regression task: design matrix and targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub x: Matrix,
    pub y: Vector,
}

impl Task {
    pub fn predict(&self, w: &[f64]) -> Vector {
        self.x.matvec(w)
    }

    /// `(2/n)XᵀX + 2λI` and `(2/n)Xᵀy` of `(1/n)‖Xw − y‖² + λ‖w‖²`.
    pub(crate) fn ridge_quadratic(&self, lambda: f64) -> (Matrix, Vector) {
        let scale = 2.0 / self.y.len() as f64;
        let mut h = self.x.gram();
        h.scale(scale);
        h.add_diagonal(2.0 * lambda);
        let mut b = self.x.matvec_t(&self.y);
        b.iter_mut().for_each(|v| *v *= scale);
        (h, b)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultitaskDataset {
    pub tasks: Vec<Task>,
    /// Ridge weight `λ` of every task.
    pub lambda: f64,
    /// Generating weights, when the data is synthetic.
    pub true_weights: Option<Vec<Vector>>,
}

impl MultitaskDataset {
    pub fn n_features(&self) -> usize {
        self.tasks.first().map_or(0, |t| t.x.cols())
    }
}

/// Tasks sharing one sign pattern per feature with independent magnitudes
/// in `[0.2, 1]`; features and noise as in the synthetic regression.
pub fn gen_multitask(
    n_tasks: usize,
    n_features: usize,
    samples_per_task: usize,
    noise_sd: f64,
    lambda: f64,
    seed: u64,
) -> Result<MultitaskDataset> {
    if n_tasks < 2 || n_features == 0 || samples_per_task == 0 {
        return Err(Error::InvalidConfig(format!(
            "tasks = {n_tasks}, features = {n_features}, samples = {samples_per_task}"
        )));
    }
    if !(noise_sd >= 0.0) {
        return Err(Error::InvalidConfig(format!("noise_sd = {noise_sd}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let signs: Vec<f64> = (0..n_features)
        .map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 })
        .collect();
    let normal = Normal::new(0.0, noise_sd.max(f64::MIN_POSITIVE)).expect("finite sd");
    let mut tasks = Vec::with_capacity(n_tasks);
    let mut truth = Vec::with_capacity(n_tasks);
    for _ in 0..n_tasks {
        let w: Vector = signs.iter().map(|s| s * rng.random_range(0.2..=1.0)).collect();
        let x = Matrix::from_fn(samples_per_task, n_features, |_, _| rng.random_range(-1.0..=1.0));
        let mut y = x.matvec(&w);
        if noise_sd > 0.0 {
            y.iter_mut().for_each(|v| *v += normal.sample(&mut rng));
        }
        tasks.push(Task { x, y });
        truth.push(w);
    }
    Ok(MultitaskDataset {
        tasks,
        lambda,
        true_weights: Some(truth),
    })
}

/// Sign-agreement edges between every pair of consecutive tasks on every
/// feature.
pub fn chain_edges(n_tasks: usize, n_features: usize) -> Vec<SignEdge> {
    (0..n_tasks.saturating_sub(1))
        .flat_map(|i| (0..n_features).map(move |j| SignEdge::agree((i, j), (i + 1, j))))
        .collect()
}

/// One stacked block per task, zero smooth term, start at the origin.
/// Each block sees its two neighbors (one at the ends of the chain).
pub fn build_multitask_problem(d: &MultitaskDataset) -> Result<ProblemSpec> {
    let n = d.tasks.len();
    if n < 2 {
        return Err(Error::InvalidConfig(format!("{n} tasks; need at least 2")));
    }
    let m = d.n_features();
    for (i, t) in d.tasks.iter().enumerate() {
        if t.x.cols() != m || t.x.rows() != t.y.len() || t.y.is_empty() {
            return Err(Error::DimensionMismatch(format!("task {i}")));
        }
    }
    if !(d.lambda >= 0.0) {
        return Err(Error::InvalidConfig(format!("lambda = {}", d.lambda)));
    }
    let signs = SignConstraints::new(&vec![m; n], chain_edges(n, m))?;
    build_separable(&d.tasks, d.lambda, signs)
}

/// Per-task ridge losses coupled only by `signs`.
pub(crate) fn build_separable(tasks: &[Task], lambda: f64, signs: SignConstraints) -> Result<ProblemSpec> {
    let blocks: Vec<(Matrix, Vector)> = tasks.iter().map(|t| t.ridge_quadratic(lambda)).collect();
    let constant: f64 = tasks.iter().map(|t| t.y.dot(&t.y) / t.y.len() as f64).sum();
    let dims: Vec<usize> = tasks.iter().map(|t| t.x.cols()).collect();
    let model = BlockQuadratic::block_diagonal(
        blocks,
        constant,
        signs,
        LossForm::PerBlock {
            tasks: tasks.to_vec(),
            ridge: lambda,
        },
    )?;
    let mut offset = 0;
    let specs = dims
        .iter()
        .map(|d| {
            let b = BlockSpec::stacked(*d, offset);
            offset += d;
            b
        })
        .collect();
    ProblemSpec::new(
        specs,
        offset,
        SmoothTerm::Zero,
        Arc::new(model),
        dims.iter().map(|d| Vector::zeros(*d)).collect(),
    )
}
