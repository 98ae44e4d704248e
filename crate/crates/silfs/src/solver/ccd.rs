//! Cyclic coordinate descent for the squared-distance objective.
//!
//! Each sweep updates θ in closed form, β by a warm-started LASSO on the
//! idiosyncratic design, α by the exact minimizer of the linearized
//! surrogate, and γ by exact one-dimensional K-means on α. Every step is a
//! descent step, so the monitored objective never increases.

use nalgebra::DVector;

use crate::cluster1d::cluster_1d;
use crate::config::{Distance, SolverConfig};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::factor::FactorDecomposition;
use crate::numeric::{lasso_cd_from, LassoFit, LASSO_MAX_ITER, LASSO_TOL};

use super::{assign_labels, objective, pad_centroids, InitPoint, SilfsFit};

/// One coordinate-descent iterate.
#[derive(Debug, Clone)]
pub struct CcdState {
    pub alpha: DVector<f64>,
    pub gamma: Vec<f64>,
    pub theta: DVector<f64>,
    pub beta: DVector<f64>,
    pub objective: f64,
}

/// Closed-form factor-coefficient update `F̂ᵀ(Y − α)/n`, exact because the
/// estimated factors are orthogonal to the idiosyncratic design.
pub fn update_theta(
    response: &DVector<f64>,
    alpha: &DVector<f64>,
    decomposition: &FactorDecomposition,
) -> DVector<f64> {
    let n = response.len() as f64;
    decomposition.factors.transpose() * (response - alpha) / n
}

/// Sparse-coefficient update: a LASSO on the idiosyncratic design with the
/// factor-adjusted residual as target.
pub fn update_beta(
    response: &DVector<f64>,
    alpha: &DVector<f64>,
    theta: &DVector<f64>,
    decomposition: &FactorDecomposition,
    lambda2: f64,
    tol: f64,
    max_iter: usize,
    warm_start: DVector<f64>,
) -> Result<LassoFit> {
    let target = response - alpha - &decomposition.factors * theta;
    lasso_cd_from(
        &decomposition.idiosyncratic,
        &target,
        lambda2,
        tol,
        max_iter,
        warm_start,
    )
}

/// Per-sample subgradient of the concave part of the penalty under squared
/// distance, with sgn(0) = 0 at exact midpoints.
fn g2_gradient(alpha: &DVector<f64>, gamma: &[f64]) -> DVector<f64> {
    let k = gamma.len();
    DVector::from_fn(alpha.len(), |i, _| {
        let a = alpha[i];
        let mut total = 0.0;
        for kk in 1..k {
            let far = (a - gamma[kk - 1]).abs().max((a - gamma[kk]).abs());
            let mid = 0.5 * (gamma[kk - 1] + gamma[kk]);
            let s = if a > mid {
                1.0
            } else if a < mid {
                -1.0
            } else {
                0.0
            };
            total += 2.0 * far * s;
        }
        total
    })
}

/// Exact minimizer of the linearized per-sample objective:
/// `α = n/(1 + 2λ₁Kn) · [(Y − F̂θ − Ûβ)/n + 2λ₁(Σk γk)·1 + λ₁∇g₂(α_prev)]`.
pub fn update_alpha(
    response: &DVector<f64>,
    theta: &DVector<f64>,
    beta: &DVector<f64>,
    gamma: &[f64],
    alpha_prev: &DVector<f64>,
    decomposition: &FactorDecomposition,
    lambda1: f64,
) -> DVector<f64> {
    let n = response.len() as f64;
    let k = gamma.len() as f64;
    let residual =
        response - &decomposition.factors * theta - &decomposition.idiosyncratic * beta;
    if lambda1 == 0.0 {
        return residual;
    }
    let gamma_sum: f64 = gamma.iter().sum();
    let grad = g2_gradient(alpha_prev, gamma);
    let scale = n / (1.0 + 2.0 * lambda1 * k * n);
    DVector::from_fn(response.len(), |i, _| {
        scale * (residual[i] / n + 2.0 * lambda1 * gamma_sum + lambda1 * grad[i])
    })
}

/// Centroid update by exact one-dimensional K-means; duplicate intercept
/// values that leave fewer than `k` distinct points pad the centroid vector.
pub fn update_gamma(alpha: &DVector<f64>, k: usize) -> Result<Vec<f64>> {
    let distinct = {
        let mut s = alpha.as_slice().to_vec();
        s.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        s.dedup();
        s.len()
    };
    let clusters = cluster_1d(alpha.as_slice(), k.min(distinct), Distance::Squared)?;
    Ok(pad_centroids(clusters.centroids, k))
}

/// Cyclic coordinate descent under squared distance.
pub fn fit_ccd(
    data: &Dataset,
    decomposition: &FactorDecomposition,
    k: usize,
    config: &SolverConfig,
    init: &InitPoint,
) -> Result<SilfsFit> {
    config.validate()?;
    if config.distance != Distance::Squared {
        return Err(Error::InvalidArgument(
            "the coordinate-descent solver handles the squared distance only".into(),
        ));
    }
    if k < 1 {
        return Err(Error::InvalidArgument("group count must be positive".into()));
    }
    let n = data.num_samples();
    if init.alpha0.len() != n || init.gamma0.len() != k {
        return Err(Error::InvalidArgument(
            "initial point dimensions do not match the problem".into(),
        ));
    }

    let p = data.num_features();
    let mut state = CcdState {
        alpha: init.alpha0.clone(),
        gamma: init.gamma0.clone(),
        theta: update_theta(&data.response, &init.alpha0, decomposition),
        beta: DVector::zeros(p),
        objective: 0.0,
    };
    state.objective = objective(
        data,
        decomposition,
        &state.alpha,
        &state.gamma,
        &state.theta,
        &state.beta,
        config,
    );
    if !state.objective.is_finite() {
        return Err(Error::Numerical(
            "objective is not finite at the initial point".into(),
        ));
    }
    let eps = config.eps_outer * (1.0 + state.objective.abs());

    let mut trace = vec![state.objective];
    let mut converged = false;
    let mut outer_iters = 0;
    let mut total_inner_iters = 0;
    let mut best = state.clone();

    for _ in 0..config.max_outer {
        state.theta = update_theta(&data.response, &state.alpha, decomposition);
        let lasso = update_beta(
            &data.response,
            &state.alpha,
            &state.theta,
            decomposition,
            config.lambda2,
            LASSO_TOL,
            LASSO_MAX_ITER,
            state.beta.clone(),
        )?;
        total_inner_iters += lasso.sweeps;
        state.beta = lasso.coefficients;
        state.alpha = update_alpha(
            &data.response,
            &state.theta,
            &state.beta,
            &state.gamma,
            &state.alpha,
            decomposition,
            config.lambda1,
        );
        state.gamma = update_gamma(&state.alpha, k)?;
        outer_iters += 1;

        let z = objective(
            data,
            decomposition,
            &state.alpha,
            &state.gamma,
            &state.theta,
            &state.beta,
            config,
        );
        if !z.is_finite() {
            return Err(Error::Numerical("objective diverged".into()));
        }
        let z_prev = *trace.last().expect("trace is nonempty");
        if z > z_prev {
            // Only possible at the numerical floor; keep the previous sweep.
            state = best;
            converged = true;
            break;
        }
        state.objective = z;
        trace.push(z);
        best = state.clone();
        if z_prev - z <= eps {
            converged = true;
            break;
        }
    }

    let labels = assign_labels(&state.alpha, &state.gamma, Distance::Squared);
    Ok(SilfsFit {
        alpha_hat: state.alpha,
        gamma_hat: state.gamma,
        theta_hat: state.theta,
        beta_hat: state.beta,
        labels,
        objective_trace: trace,
        converged,
        outer_iters,
        total_inner_iters,
    })
}
