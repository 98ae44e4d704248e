//! Difference-of-convex ADMM for the absolute-distance objective.
//!
//! The nearest-centroid penalty is split as g₁ − g₂ with
//! g₁(δ) = Σᵢ Σk |δᵢk| and g₂(δ) = Σᵢ Σ_{k≥2} max(|δᵢ,k−1|, |δᵢk|) over the
//! differences δᵢk = αᵢ − γk, valid once the centroids are kept ordered.
//! Each outer iteration linearizes g₂ at the current anchor and solves the
//! resulting convex problem with a scaled ADMM over the splits
//! δ = C₁α − C₂γ, Dγ = y (slack, y ≤ 0) and η = β.
//!
//! Flat n·K vectors (δ, u) store entry (i, k) at position `i * K + k`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::config::{Distance, SolverConfig};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::factor::FactorDecomposition;
use crate::numeric::soft_threshold;

use super::{assign_labels, objective, InitPoint, SilfsFit};

/// ADMM iterate: primal blocks, split variables and scaled duals.
#[derive(Debug, Clone)]
pub struct AdmmState {
    pub alpha: DVector<f64>,
    /// Centroids, ordered at every outer-iteration boundary.
    pub gamma: Vec<f64>,
    pub theta: DVector<f64>,
    pub beta: DVector<f64>,
    /// Targets for αᵢ − γk, flattened row-major.
    pub delta: DVector<f64>,
    /// Slack for the ordering constraint; nonpositive after each update.
    pub y: DVector<f64>,
    /// Thresholded copy of β carrying the ℓ1 penalty.
    pub eta: DVector<f64>,
    pub u: DVector<f64>,
    pub v: DVector<f64>,
    pub w: DVector<f64>,
}

/// Subgradient of g₂ with respect to the flattened δ, with sgn(0) = 0 and
/// one-sided comparisons at the first and last centroid.
pub fn dc_subgradient(delta: &DVector<f64>, k: usize) -> DVector<f64> {
    assert!(k >= 1 && delta.len() % k == 0, "delta length must be n·K");
    let n = delta.len() / k;
    let mut grad = DVector::zeros(delta.len());
    for i in 0..n {
        for kk in 0..k {
            let cur = delta[i * k + kk];
            let mut g = 0.0;
            if kk > 0 && cur.abs() > delta[i * k + kk - 1].abs() {
                g += sign(cur);
            }
            if kk + 1 < k && cur.abs() > delta[i * k + kk + 1].abs() {
                g += sign(cur);
            }
            grad[i * k + kk] = g;
        }
    }
    grad
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Stationarity system of the joint quadratic block over (α, θ, β, γ).
///
/// The matrix depends only on the decomposition, the augmentation weights and
/// the problem shape, so a fit factors it once and reuses the factorization
/// for every inner iteration.
fn build_block_matrix(
    decomposition: &FactorDecomposition,
    n: usize,
    k: usize,
    config: &SolverConfig,
) -> DMatrix<f64> {
    let f = &decomposition.factors;
    let u = &decomposition.idiosyncratic;
    let r = f.ncols();
    let p = u.ncols();
    let nf = n as f64;
    let dim = n + r + p + k;
    let mut h = DMatrix::zeros(dim, dim);

    let (a0, t0, b0, g0) = (0, n, n + r, n + r + p);
    for i in 0..n {
        h[(a0 + i, a0 + i)] = 1.0 / nf + config.rho1 * k as f64;
    }
    let f_scaled = f / nf;
    let u_scaled = u / nf;
    for j in 0..r {
        for i in 0..n {
            h[(a0 + i, t0 + j)] = f_scaled[(i, j)];
            h[(t0 + j, a0 + i)] = f_scaled[(i, j)];
        }
    }
    for j in 0..p {
        for i in 0..n {
            h[(a0 + i, b0 + j)] = u_scaled[(i, j)];
            h[(b0 + j, a0 + i)] = u_scaled[(i, j)];
        }
    }
    for kk in 0..k {
        for i in 0..n {
            h[(a0 + i, g0 + kk)] = -config.rho1;
            h[(g0 + kk, a0 + i)] = -config.rho1;
        }
    }
    let ftf = f.transpose() * f / nf;
    for i in 0..r {
        for j in 0..r {
            h[(t0 + i, t0 + j)] = ftf[(i, j)];
        }
    }
    let ftu = f.transpose() * u / nf;
    for i in 0..r {
        for j in 0..p {
            h[(t0 + i, b0 + j)] = ftu[(i, j)];
            h[(b0 + j, t0 + i)] = ftu[(i, j)];
        }
    }
    let utu = u.transpose() * u / nf;
    for i in 0..p {
        for j in 0..p {
            h[(b0 + i, b0 + j)] = utu[(i, j)];
        }
        h[(b0 + i, b0 + i)] += config.rho3;
    }
    // ρ1·n·I + ρ2·DᵀD on the centroid block; DᵀD is tridiagonal.
    for kk in 0..k {
        h[(g0 + kk, g0 + kk)] = config.rho1 * nf;
    }
    for kk in 0..k.saturating_sub(1) {
        h[(g0 + kk, g0 + kk)] += config.rho2;
        h[(g0 + kk + 1, g0 + kk + 1)] += config.rho2;
        h[(g0 + kk, g0 + kk + 1)] -= config.rho2;
        h[(g0 + kk + 1, g0 + kk)] -= config.rho2;
    }
    h
}

fn factor_block_matrix(
    mut h: DMatrix<f64>,
) -> Result<Cholesky<f64, Dyn>> {
    match h.clone().cholesky() {
        Some(c) => Ok(c),
        None => {
            for i in 0..h.nrows() {
                h[(i, i)] += 1e-10;
            }
            h.cholesky().ok_or_else(|| {
                Error::Numerical(
                    "quadratic block remained singular after diagonal jitter".into(),
                )
            })
        }
    }
}

fn block_rhs(
    data: &Dataset,
    decomposition: &FactorDecomposition,
    state: &AdmmState,
    config: &SolverConfig,
    k: usize,
) -> DVector<f64> {
    let n = data.num_samples();
    let f = &decomposition.factors;
    let u_mat = &decomposition.idiosyncratic;
    let r = f.ncols();
    let p = u_mat.ncols();
    let nf = n as f64;
    let (a0, t0, b0, g0) = (0, n, n + r, n + r + p);
    let mut rhs = DVector::zeros(n + r + p + k);

    let du: Vec<f64> = (0..n * k).map(|i| state.delta[i] + state.u[i]).collect();
    for i in 0..n {
        let row_sum: f64 = (0..k).map(|kk| du[i * k + kk]).sum();
        rhs[a0 + i] = data.response[i] / nf + config.rho1 * row_sum;
    }
    let fy = f.transpose() * &data.response / nf;
    for j in 0..r {
        rhs[t0 + j] = fy[j];
    }
    let uy = u_mat.transpose() * &data.response / nf;
    for j in 0..p {
        rhs[b0 + j] = uy[j] + config.rho3 * (state.eta[j] + state.w[j]);
    }
    for kk in 0..k {
        let col_sum: f64 = (0..n).map(|i| du[i * k + kk]).sum();
        rhs[g0 + kk] = -config.rho1 * col_sum;
    }
    // ρ2·Dᵀ(y − v) spreads each ordered-pair residual over its two centroids.
    for kk in 0..k.saturating_sub(1) {
        let resid = state.y[kk] - state.v[kk];
        rhs[g0 + kk] += config.rho2 * resid;
        rhs[g0 + kk + 1] -= config.rho2 * resid;
    }
    rhs
}

fn split_solution(
    sol: &DVector<f64>,
    n: usize,
    r: usize,
    p: usize,
    k: usize,
) -> (DVector<f64>, Vec<f64>, DVector<f64>, DVector<f64>) {
    let alpha = DVector::from_fn(n, |i, _| sol[i]);
    let theta = DVector::from_fn(r, |j, _| sol[n + j]);
    let beta = DVector::from_fn(p, |j, _| sol[n + r + j]);
    let gamma: Vec<f64> = (0..k).map(|kk| sol[n + r + p + kk]).collect();
    (alpha, gamma, theta, beta)
}

/// Joint exact minimizer of the augmented quadratic over (α, γ, θ, β) with
/// the split variables and duals held fixed. Assembles and factors the
/// system on each call; the fit loop reuses a cached factorization instead.
pub fn theta_block_update(
    state: &AdmmState,
    data: &Dataset,
    decomposition: &FactorDecomposition,
    config: &SolverConfig,
) -> Result<(DVector<f64>, Vec<f64>, DVector<f64>, DVector<f64>)> {
    let n = data.num_samples();
    let k = state.gamma.len();
    let r = decomposition.factors.ncols();
    let p = decomposition.idiosyncratic.ncols();
    let chol = factor_block_matrix(build_block_matrix(decomposition, n, k, config))?;
    let sol = chol.solve(&block_rhs(data, decomposition, state, config, k));
    Ok(split_solution(&sol, n, r, p, k))
}

/// Soft-thresholded δ update at level λ₁/ρ₁ around the current constraint
/// residual, shifted by the anchored subgradient of g₂.
pub fn delta_update(state: &AdmmState, config: &SolverConfig, dc_grad: &DVector<f64>) -> DVector<f64> {
    let k = state.gamma.len();
    let n = state.alpha.len();
    let level = config.lambda1 / config.rho1;
    DVector::from_fn(n * k, |idx, _| {
        let (i, kk) = (idx / k, idx % k);
        let z = state.alpha[i] - state.gamma[kk] - state.u[idx]
            + config.lambda1 * dc_grad[idx] / config.rho1;
        soft_threshold(z, level)
    })
}

/// Slack update: elementwise clamp of Dγ + v at zero from above.
pub fn y_update(gamma: &[f64], v: &DVector<f64>) -> DVector<f64> {
    let k = gamma.len();
    DVector::from_fn(k.saturating_sub(1), |kk, _| {
        (gamma[kk] - gamma[kk + 1] + v[kk]).min(0.0)
    })
}

/// Surrogate objective monitored by the inner loop (constants dropped).
fn surrogate_value(
    data: &Dataset,
    decomposition: &FactorDecomposition,
    state: &AdmmState,
    config: &SolverConfig,
    dc_grad: &DVector<f64>,
) -> f64 {
    let n = data.num_samples() as f64;
    let residual = &data.response
        - &state.alpha
        - &decomposition.factors * &state.theta
        - &decomposition.idiosyncratic * &state.beta;
    let l1: f64 = state.delta.iter().map(|d| d.abs()).sum();
    let lin = dc_grad.dot(&state.delta);
    let eta1: f64 = state.eta.iter().map(|e| e.abs()).sum();
    residual.norm_squared() / (2.0 * n) + config.lambda1 * (l1 - lin) + config.lambda2 * eta1
}

/// Reorders the centroids at an outer-iteration boundary, carrying the
/// per-centroid columns of δ and u along with the permutation.
fn enforce_sorted_gamma(state: &mut AdmmState) {
    let k = state.gamma.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| state.gamma[a].partial_cmp(&state.gamma[b]).expect("finite"));
    if order.iter().enumerate().all(|(i, &o)| i == o) {
        return;
    }
    let n = state.alpha.len();
    let gamma_old = state.gamma.clone();
    let delta_old = state.delta.clone();
    let u_old = state.u.clone();
    for (new_k, &old_k) in order.iter().enumerate() {
        state.gamma[new_k] = gamma_old[old_k];
        for i in 0..n {
            state.delta[i * k + new_k] = delta_old[i * k + old_k];
            state.u[i * k + new_k] = u_old[i * k + old_k];
        }
    }
}

/// Runs the DC-ADMM and also returns the final ADMM state (split variables
/// and duals), which carries the primal feasibility information.
pub fn fit_dc_admm_detailed(
    data: &Dataset,
    decomposition: &FactorDecomposition,
    k: usize,
    config: &SolverConfig,
    init: &InitPoint,
) -> Result<(SilfsFit, AdmmState)> {
    config.validate()?;
    if config.distance != Distance::Absolute {
        return Err(Error::InvalidArgument(
            "the DC-ADMM solver handles the absolute distance only".into(),
        ));
    }
    if k < 1 {
        return Err(Error::InvalidArgument("group count must be positive".into()));
    }
    let n = data.num_samples();
    let p = data.num_features();
    let r = decomposition.factors.ncols();
    if init.alpha0.len() != n || init.gamma0.len() != k {
        return Err(Error::InvalidArgument(
            "initial point dimensions do not match the problem".into(),
        ));
    }
    if init.gamma0.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidArgument(
            "initial centroids must be sorted".into(),
        ));
    }

    let chol = factor_block_matrix(build_block_matrix(decomposition, n, k, config))?;

    let mut state = AdmmState {
        alpha: init.alpha0.clone(),
        gamma: init.gamma0.clone(),
        theta: decomposition.factors.transpose() * (&data.response - &init.alpha0) / n as f64,
        beta: DVector::zeros(p),
        delta: DVector::from_fn(n * k, |idx, _| {
            init.alpha0[idx / k] - init.gamma0[idx % k]
        }),
        y: DVector::zeros(k.saturating_sub(1)),
        eta: DVector::from_element(p, 1.0),
        u: DVector::zeros(n * k),
        v: DVector::zeros(k.saturating_sub(1)),
        w: DVector::zeros(p),
    };
    state.y = y_update(&state.gamma, &state.v);

    let z0 = objective(
        data,
        decomposition,
        &state.alpha,
        &state.gamma,
        &state.theta,
        &state.beta,
        config,
    );
    if !z0.is_finite() {
        return Err(Error::Numerical("objective is not finite at the initial point".into()));
    }
    let eps_outer = config.eps_outer * (1.0 + z0.abs());
    let eps_inner = config.eps_inner * (1.0 + z0.abs());

    let mut trace = vec![z0];
    let mut converged = false;
    let mut outer_iters = 0;
    let mut total_inner_iters = 0;
    let mut best = state.clone();

    for _ in 0..config.max_outer {
        let dc_grad = dc_subgradient(&state.delta, k);
        let mut prev_surr = f64::INFINITY;
        for s in 0..config.max_inner {
            let rhs = block_rhs(data, decomposition, &state, config, k);
            let sol = chol.solve(&rhs);
            let (alpha, gamma, theta, beta) = split_solution(&sol, n, r, p, k);
            state.alpha = alpha;
            state.gamma = gamma;
            state.theta = theta;
            state.beta = beta;
            state.delta = delta_update(&state, config, &dc_grad);
            state.y = y_update(&state.gamma, &state.v);
            for j in 0..p {
                state.eta[j] = soft_threshold(state.beta[j] - state.w[j], config.lambda2 / config.rho3);
            }
            for idx in 0..n * k {
                let (i, kk) = (idx / k, idx % k);
                state.u[idx] += state.delta[idx] - state.alpha[i] + state.gamma[kk];
            }
            for kk in 0..k.saturating_sub(1) {
                state.v[kk] += state.gamma[kk] - state.gamma[kk + 1] - state.y[kk];
            }
            for j in 0..p {
                state.w[j] += state.eta[j] - state.beta[j];
            }
            total_inner_iters += 1;
            let surr = surrogate_value(data, decomposition, &state, config, &dc_grad);
            if !surr.is_finite() {
                return Err(Error::Numerical("inner objective diverged".into()));
            }
            if s >= 1 && (surr - prev_surr).abs() <= eps_inner {
                break;
            }
            prev_surr = surr;
        }
        enforce_sorted_gamma(&mut state);
        outer_iters += 1;

        // The reported coefficients are the thresholded copy, so monitor the
        // true objective there as well.
        let z = objective(
            data,
            decomposition,
            &state.alpha,
            &state.gamma,
            &state.theta,
            &state.eta,
            config,
        );
        if !z.is_finite() {
            return Err(Error::Numerical("objective diverged".into()));
        }
        let z_prev = *trace.last().expect("trace is nonempty");
        if z >= z_prev {
            // Tolerance floor: the surrogate step could not improve the exact
            // objective, so report the previous iterate.
            state = best;
            converged = true;
            break;
        }
        trace.push(z);
        best = state.clone();
        if z_prev - z <= eps_outer {
            converged = true;
            break;
        }
    }

    let labels = assign_labels(&state.alpha, &state.gamma, Distance::Absolute);
    let fit = SilfsFit {
        alpha_hat: state.alpha.clone(),
        gamma_hat: state.gamma.clone(),
        theta_hat: state.theta.clone(),
        beta_hat: state.eta.clone(),
        labels,
        objective_trace: trace,
        converged,
        outer_iters,
        total_inner_iters,
    };
    Ok((fit, state))
}

/// Difference-of-convex ADMM solve under the absolute distance.
pub fn fit_dc_admm(
    data: &Dataset,
    decomposition: &FactorDecomposition,
    k: usize,
    config: &SolverConfig,
    init: &InitPoint,
) -> Result<SilfsFit> {
    fit_dc_admm_detailed(data, decomposition, k, config, init).map(|(fit, _)| fit)
}
