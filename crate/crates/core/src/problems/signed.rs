//! Learning with signed-network constraints. Each node owns a weight vector
//! and a regression task; each edge pins the relative sign of one
//! coordinate pair on two nodes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::engine::ProblemSpec;
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Vector};
use crate::problems::multitask::{build_separable, Task};
use crate::problems::sign::{Polarity, SignConstraints, SignEdge};

#[derive(Debug, Clone, PartialEq)]
pub struct SignedNetwork {
    /// Weight dimension of each node.
    pub dims: Vec<usize>,
    pub edges: Vec<SignEdge>,
}

impl SignedNetwork {
    pub fn new(dims: Vec<usize>, edges: Vec<SignEdge>) -> Result<Self> {
        SignConstraints::new(&dims, edges.clone())?;
        Ok(SignedNetwork { dims, edges })
    }

    pub fn n_nodes(&self) -> usize {
        self.dims.len()
    }
}

/// One block per node with the node's ridge loss. Every incident edge
/// contributes a sign requirement against the partner's current value;
/// conflicting requirements on a coordinate pin it to zero.
pub fn build_signed_network_problem(
    net: &SignedNetwork,
    data: &[Task],
    lambda: f64,
) -> Result<ProblemSpec> {
    if data.len() != net.n_nodes() {
        return Err(Error::DimensionMismatch(format!(
            "{} tasks for {} nodes",
            data.len(),
            net.n_nodes()
        )));
    }
    for (i, (t, d)) in data.iter().zip(&net.dims).enumerate() {
        if t.x.cols() != *d || t.x.rows() != t.y.len() || t.y.is_empty() {
            return Err(Error::DimensionMismatch(format!("node {i}")));
        }
    }
    if !(lambda >= 0.0) {
        return Err(Error::InvalidConfig(format!("lambda = {lambda}")));
    }
    let signs = SignConstraints::new(&net.dims, net.edges.clone())?;
    build_separable(data, lambda, signs)
}

/// A planted instance: true weights uniform on `[−1, 1]`, edges between
/// random coordinate pairs of distinct nodes with the polarity the true
/// weights satisfy.
#[derive(Debug, Clone)]
pub struct PlantedNetwork {
    pub network: SignedNetwork,
    pub tasks: Vec<Task>,
    pub true_weights: Vec<Vector>,
}

pub fn gen_signed_network(
    n_nodes: usize,
    dim: usize,
    samples: usize,
    n_edges: usize,
    noise_sd: f64,
    seed: u64,
) -> Result<PlantedNetwork> {
    if n_nodes < 2 || dim == 0 || samples == 0 {
        return Err(Error::InvalidConfig(format!(
            "nodes = {n_nodes}, dim = {dim}, samples = {samples}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth: Vec<Vector> = (0..n_nodes)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect())
        .collect();
    let mut edges: Vec<SignEdge> = Vec::with_capacity(n_edges);
    let max_pairs = n_nodes * (n_nodes - 1) / 2 * dim * dim;
    while edges.len() < n_edges.min(max_pairs) {
        let i = rng.random_range(0..n_nodes);
        let j = rng.random_range(0..n_nodes);
        if i == j {
            continue;
        }
        let (u, v) = (rng.random_range(0..dim), rng.random_range(0..dim));
        let dup = edges.iter().any(|e| {
            (e.a == (i, u) && e.b == (j, v)) || (e.a == (j, v) && e.b == (i, u))
        });
        if dup {
            continue;
        }
        let polarity = if truth[i][u] * truth[j][v] >= 0.0 {
            Polarity::Agree
        } else {
            Polarity::Disagree
        };
        edges.push(SignEdge {
            a: (i, u),
            b: (j, v),
            polarity,
        });
    }
    let normal = Normal::new(0.0, noise_sd.max(f64::MIN_POSITIVE)).expect("finite sd");
    let tasks = truth
        .iter()
        .map(|w| {
            let x = Matrix::from_fn(samples, dim, |_, _| rng.random_range(-1.0..=1.0));
            let mut y = x.matvec(w);
            if noise_sd > 0.0 {
                y.iter_mut().for_each(|v| *v += normal.sample(&mut rng));
            }
            Task { x, y }
        })
        .collect();
    Ok(PlantedNetwork {
        network: SignedNetwork::new(vec![dim; n_nodes], edges)?,
        tasks,
        true_weights: truth,
    })
}
