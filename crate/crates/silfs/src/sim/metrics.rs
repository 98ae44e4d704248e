//! Evaluation metrics: Rand index, aggregate RMSE and support-recovery rates.

use std::collections::HashMap;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::SilfsFit;

use super::SyntheticDataset;

/// Threshold below which an estimated coefficient counts as zero.
pub const SUPPORT_TOL: f64 = 1e-10;

/// Fraction of sample pairs on which two partitions agree (both together or
/// both apart), computed from the contingency table.
pub fn rand_index(labels_a: &[usize], labels_b: &[usize]) -> Result<f64> {
    let n = labels_a.len();
    if labels_b.len() != n {
        return Err(Error::InvalidArgument(
            "partitions must have equal length".into(),
        ));
    }
    if n < 2 {
        return Err(Error::InvalidArgument(
            "need at least two samples to compare partitions".into(),
        ));
    }
    let mut joint: HashMap<(usize, usize), u64> = HashMap::new();
    let mut count_a: HashMap<usize, u64> = HashMap::new();
    let mut count_b: HashMap<usize, u64> = HashMap::new();
    for (&a, &b) in labels_a.iter().zip(labels_b) {
        *joint.entry((a, b)).or_default() += 1;
        *count_a.entry(a).or_default() += 1;
        *count_b.entry(b).or_default() += 1;
    }
    let choose2 = |m: u64| (m * m.saturating_sub(1) / 2) as f64;
    let same_both: f64 = joint.values().map(|&m| choose2(m)).sum();
    let same_a: f64 = count_a.values().map(|&m| choose2(m)).sum();
    let same_b: f64 = count_b.values().map(|&m| choose2(m)).sum();
    let total = choose2(n as u64);
    Ok((2.0 * same_both + total - same_a - same_b) / total)
}

/// Support-recovery rates of an estimated coefficient vector.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SelectionMetrics {
    pub sensitivity: f64,
    pub specificity: f64,
    /// Set when the truth has no nonzero (or no zero) entries, making the
    /// corresponding rate undefined; that rate is reported as 1.
    pub degenerate_truth: bool,
}

pub fn selection_metrics(beta_hat: &DVector<f64>, beta_true: &DVector<f64>) -> Result<SelectionMetrics> {
    if beta_hat.len() != beta_true.len() {
        return Err(Error::InvalidArgument(
            "coefficient vectors must have equal length".into(),
        ));
    }
    let mut true_nonzero = 0u64;
    let mut true_zero = 0u64;
    let mut recovered = 0u64;
    let mut kept_zero = 0u64;
    for (est, truth) in beta_hat.iter().zip(beta_true.iter()) {
        let est_active = est.abs() > SUPPORT_TOL;
        if truth.abs() > SUPPORT_TOL {
            true_nonzero += 1;
            if est_active {
                recovered += 1;
            }
        } else {
            true_zero += 1;
            if !est_active {
                kept_zero += 1;
            }
        }
    }
    let degenerate = true_nonzero == 0 || true_zero == 0;
    let sensitivity = if true_nonzero == 0 {
        1.0
    } else {
        recovered as f64 / true_nonzero as f64
    };
    let specificity = if true_zero == 0 {
        1.0
    } else {
        kept_zero as f64 / true_zero as f64
    };
    Ok(SelectionMetrics {
        sensitivity,
        specificity,
        degenerate_truth: degenerate,
    })
}

/// Aggregate root-mean-squared errors over replications:
/// `RMSE_β = (Σᵢ ‖β̂⁽ⁱ⁾ − β⁽ⁱ⁾‖² / (N·p))^{1/2}` and the same over `n` for α.
pub fn rmse_metrics(fits: &[SilfsFit], truths: &[SyntheticDataset]) -> Result<(f64, f64)> {
    if fits.len() != truths.len() || fits.is_empty() {
        return Err(Error::InvalidArgument(
            "need equally many fits and truths, at least one".into(),
        ));
    }
    let reps = fits.len() as f64;
    let n = truths[0].true_alpha.len() as f64;
    let p = truths[0].true_beta.len() as f64;
    let mut alpha_sq = 0.0;
    let mut beta_sq = 0.0;
    for (fit, truth) in fits.iter().zip(truths) {
        alpha_sq += (&fit.alpha_hat - &truth.true_alpha).norm_squared();
        beta_sq += (&fit.beta_hat - &truth.true_beta).norm_squared();
    }
    Ok(((alpha_sq / (reps * n)).sqrt(), (beta_sq / (reps * p)).sqrt()))
}

/// Aggregated benchmark outcome for one method.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rmse_alpha: f64,
    pub rmse_beta: f64,
    pub rand_index: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub k_hat_mean: f64,
    pub over_freq: usize,
    pub under_freq: usize,
    pub wall_time_ms: f64,
    pub replications: usize,
    pub failures: usize,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Prng;

    /// Exhaustive pair enumeration, the independent route.
    fn rand_index_pairs(a: &[usize], b: &[usize]) -> f64 {
        let n = a.len();
        let mut agree = 0u64;
        let mut total = 0u64;
        for i in 0..n {
            for j in (i + 1)..n {
                total += 1;
                if (a[i] == a[j]) == (b[i] == b[j]) {
                    agree += 1;
                }
            }
        }
        agree as f64 / total as f64
    }

    #[test]
    fn identical_partitions_score_one_under_relabeling() {
        let a = vec![1, 1, 2, 3, 2];
        let b = vec![7, 7, 4, 9, 4];
        assert_eq!(rand_index(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn crossed_pairs_score_one_third() {
        let a = vec![1, 1, 2, 2];
        let b = vec![1, 2, 1, 2];
        assert!((rand_index(&a, &b).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn singletons_vs_single_cluster_score_zero() {
        let a = vec![1, 2, 3];
        let b = vec![1, 1, 1];
        assert_eq!(rand_index(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn contingency_route_matches_pair_enumeration() {
        let mut rng = Prng::new(3);
        for _ in 0..200 {
            let n = 2 + (rng.next_u64() % 9) as usize;
            let a: Vec<usize> = (0..n).map(|_| 1 + (rng.next_u64() % 4) as usize).collect();
            let b: Vec<usize> = (0..n).map(|_| 1 + (rng.next_u64() % 4) as usize).collect();
            let fast = rand_index(&a, &b).unwrap();
            let slow = rand_index_pairs(&a, &b);
            assert!((fast - slow).abs() < 1e-12);
        }
    }

    #[test]
    fn rand_index_is_symmetric_and_bounded() {
        let mut rng = Prng::new(4);
        for _ in 0..50 {
            let n = 2 + (rng.next_u64() % 8) as usize;
            let a: Vec<usize> = (0..n).map(|_| 1 + (rng.next_u64() % 3) as usize).collect();
            let b: Vec<usize> = (0..n).map(|_| 1 + (rng.next_u64() % 3) as usize).collect();
            let ab = rand_index(&a, &b).unwrap();
            let ba = rand_index(&b, &a).unwrap();
            assert_eq!(ab, ba);
            assert!((0.0..=1.0).contains(&ab));
        }
    }

    #[test]
    fn rand_index_rejects_bad_input() {
        assert!(rand_index(&[1, 2], &[1]).is_err());
        assert!(rand_index(&[1], &[1]).is_err());
    }

    #[test]
    fn selection_metric_examples() {
        let truth = DVector::from_vec(vec![1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let exact = selection_metrics(&truth, &truth).unwrap();
        assert_eq!((exact.sensitivity, exact.specificity), (1.0, 1.0));
        assert!(!exact.degenerate_truth);

        let zeros = DVector::zeros(10);
        let miss = selection_metrics(&zeros, &truth).unwrap();
        assert_eq!((miss.sensitivity, miss.specificity), (0.0, 1.0));
    }

    #[test]
    fn selection_metric_partial_overlap() {
        // Truth support {1..5} of 50; estimate support {1..4, 6}.
        let mut truth = DVector::zeros(50);
        let mut est = DVector::zeros(50);
        for j in 0..5 {
            truth[j] = 1.0;
        }
        for j in 0..4 {
            est[j] = 1.0;
        }
        est[5] = 1.0;
        let m = selection_metrics(&est, &truth).unwrap();
        assert!((m.sensitivity - 0.8).abs() < 1e-15);
        assert!((m.specificity - 44.0 / 45.0).abs() < 1e-15);
    }

    #[test]
    fn selection_metric_flags_degenerate_truth() {
        let truth = DVector::zeros(4);
        let est = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
        let m = selection_metrics(&est, &truth).unwrap();
        assert!(m.degenerate_truth);
        assert_eq!(m.sensitivity, 1.0);
        assert!((m.specificity - 0.75).abs() < 1e-15);
    }

    fn fit_with(alpha: Vec<f64>, beta: Vec<f64>) -> SilfsFit {
        SilfsFit {
            alpha_hat: DVector::from_vec(alpha.clone()),
            gamma_hat: vec![0.0],
            theta_hat: DVector::zeros(0),
            beta_hat: DVector::from_vec(beta),
            labels: vec![1; alpha.len()],
            objective_trace: vec![0.0],
            converged: true,
            outer_iters: 0,
            total_inner_iters: 0,
        }
    }

    fn truth_with(alpha: Vec<f64>, beta: Vec<f64>, seed: u64) -> SyntheticDataset {
        use nalgebra::DMatrix;
        let n = alpha.len();
        SyntheticDataset {
            dataset: crate::dataset::Dataset::new(
                DVector::zeros(n),
                DMatrix::from_element(n, beta.len(), 1.0),
            )
            .unwrap(),
            true_alpha: DVector::from_vec(alpha),
            true_beta: DVector::from_vec(beta),
            true_labels: vec![1; n],
            true_factors: DMatrix::zeros(n, 0),
            generator_tag: "test".into(),
            seed,
        }
    }

    #[test]
    fn rmse_examples() {
        let truth = truth_with(vec![0.0, 0.0], vec![1.0, 0.0, 0.0, 0.0], 0);
        let exact = fit_with(vec![0.0, 0.0], vec![1.0, 0.0, 0.0, 0.0]);
        let (ra, rb) = rmse_metrics(&[exact], &[truth]).unwrap();
        assert_eq!((ra, rb), (0.0, 0.0));

        // Single replication, β error = e1 with p = 4 → 1/2.
        let truth = truth_with(vec![0.0, 0.0], vec![1.0, 0.0, 0.0, 0.0], 0);
        let off = fit_with(vec![0.0, 0.0], vec![2.0, 0.0, 0.0, 0.0]);
        let (_, rb) = rmse_metrics(&[off], &[truth]).unwrap();
        assert!((rb - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rmse_is_homogeneous_in_the_errors() {
        let truth1 = truth_with(vec![1.0, -1.0], vec![0.5, 0.0, 0.0, 0.0], 0);
        let truth2 = truth_with(vec![1.0, -1.0], vec![0.5, 0.0, 0.0, 0.0], 0);
        let small = fit_with(vec![1.1, -0.9], vec![0.6, 0.1, 0.0, 0.0]);
        let big = fit_with(vec![1.2, -0.8], vec![0.7, 0.2, 0.0, 0.0]);
        let (a1, b1) = rmse_metrics(&[small], &[truth1]).unwrap();
        let (a2, b2) = rmse_metrics(&[big], &[truth2]).unwrap();
        assert!((a2 - 2.0 * a1).abs() < 1e-12);
        assert!((b2 - 2.0 * b1).abs() < 1e-12);
    }
}
