//! Shared numeric kernels: soft-thresholding and the cyclic coordinate
//! descent LASSO used as the sparse-regression building block.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Default stopping tolerance on the largest coordinate change per sweep.
pub const LASSO_TOL: f64 = 1e-7;
/// Default cap on full coordinate sweeps.
pub const LASSO_MAX_ITER: usize = 10_000;

/// Proximal operator of the absolute value: `sgn(u) · max(|u| − t, 0)`.
#[inline]
pub fn soft_threshold(u: f64, t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    if u > t {
        u - t
    } else if u < -t {
        u + t
    } else {
        0.0
    }
}

/// LASSO solution with convergence information.
#[derive(Debug, Clone)]
pub struct LassoFit {
    pub coefficients: DVector<f64>,
    pub converged: bool,
    pub sweeps: usize,
}

/// Minimizes `(1/2n)‖target − design·β‖² + lambda‖β‖₁` by cyclic coordinate
/// descent, stopping when the largest coordinate change in a sweep drops
/// below `tol`. Columns are used as given, without standardization.
pub fn lasso_cd(
    design: &DMatrix<f64>,
    target: &DVector<f64>,
    lambda: f64,
    tol: f64,
    max_iter: usize,
) -> Result<LassoFit> {
    let q = design.ncols();
    lasso_cd_from(design, target, lambda, tol, max_iter, DVector::zeros(q))
}

/// Warm-started variant of [`lasso_cd`].
pub fn lasso_cd_from(
    design: &DMatrix<f64>,
    target: &DVector<f64>,
    lambda: f64,
    tol: f64,
    max_iter: usize,
    initial: DVector<f64>,
) -> Result<LassoFit> {
    let n = design.nrows();
    let q = design.ncols();
    if target.len() != n {
        return Err(Error::InvalidArgument(format!(
            "design has {n} rows but target has {}",
            target.len()
        )));
    }
    if initial.len() != q {
        return Err(Error::InvalidArgument(format!(
            "design has {q} columns but initial point has {}",
            initial.len()
        )));
    }
    if lambda < 0.0 || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "penalty must be a nonnegative real, got {lambda}"
        )));
    }
    if tol <= 0.0 || max_iter == 0 {
        return Err(Error::InvalidArgument(
            "tolerance must be positive and the sweep cap at least 1".into(),
        ));
    }

    let nf = n as f64;
    let col_scale: Vec<f64> = (0..q).map(|j| design.column(j).norm_squared() / nf).collect();
    let mut beta = initial;
    let mut residual = target - design * &beta;
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < max_iter {
        sweeps += 1;
        let mut max_delta = 0.0f64;
        for j in 0..q {
            if col_scale[j] == 0.0 {
                continue;
            }
            let old = beta[j];
            let z = design.column(j).dot(&residual) / nf + col_scale[j] * old;
            let new = soft_threshold(z, lambda) / col_scale[j];
            let delta = new - old;
            if delta != 0.0 {
                residual.axpy(-delta, &design.column(j), 1.0);
                beta[j] = new;
            }
            max_delta = max_delta.max(delta.abs());
        }
        if max_delta < tol {
            converged = true;
            break;
        }
    }
    Ok(LassoFit {
        coefficients: beta,
        converged,
        sweeps,
    })
}
