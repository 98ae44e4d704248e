//! Synthetic scenario generation, evaluation metrics and the replication
//! benchmark harness.

pub mod bench;
pub mod generate;
pub mod metrics;

use nalgebra::{DMatrix, DVector};

use crate::dataset::Dataset;

pub use bench::{run_benchmark, BenchConfig, KPolicy, LambdaPolicy, Method, MethodReport, RPolicy, ScenarioSpec};
pub use generate::{generate_collinearity_case, generate_scenario_ab, generate_toy, ScenarioKind};
pub use metrics::{rand_index, rmse_metrics, selection_metrics, MetricsReport, SelectionMetrics};

/// A generated dataset together with its ground truth.
#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub dataset: Dataset,
    pub true_alpha: DVector<f64>,
    pub true_beta: DVector<f64>,
    /// 1-based group labels aligned with the sorted intercept levels.
    pub true_labels: Vec<usize>,
    /// Factor scores used by the generator; `n × 0` when the scenario has no
    /// factor structure.
    pub true_factors: DMatrix<f64>,
    pub generator_tag: String,
    pub seed: u64,
}

impl SyntheticDataset {
    pub fn true_k(&self) -> usize {
        let mut labels = self.true_labels.clone();
        labels.sort_unstable();
        labels.dedup();
        labels.len()
    }
}
