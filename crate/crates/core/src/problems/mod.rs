//! Applications expressed as [`ProblemSpec`](crate::engine::ProblemSpec)s,
//! their data generators, the block coordinate descent baseline, and
//! regression metrics.

pub mod bcd;
pub mod dictlearn;
pub mod metrics;
pub mod multitask;
pub mod nmf;
pub mod quadratic;
pub mod sign;
pub mod signed;
pub mod synthetic;

pub use bcd::bcd_solve;
pub use dictlearn::{
    build_dictlearn_problem, build_dictlearn_problem_with, dict_factors, gen_dictlearn,
    DictLearnProblem,
};
pub use metrics::{regression_metrics, RegressionMetrics};
pub use multitask::{build_multitask_problem, chain_edges, gen_multitask, MultitaskDataset, Task};
pub use nmf::{
    build_nmf_problem, build_nmf_problem_with, gen_nmf, nmf_factors, nmf_relative_error, NmfProblem,
};
pub use quadratic::{BlockQuadratic, LossForm};
pub use sign::{Polarity, SignConstraints, SignEdge};
pub use signed::{build_signed_network_problem, gen_signed_network, PlantedNetwork, SignedNetwork};
pub use synthetic::{build_synthetic_problem, gen_synthetic, SyntheticDataset};
