//! Ridge initialization on the augmented design `(F̂, I_n)` and deterministic
//! cross-validation of its shrinkage weight.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Exact ridge solution split into the factor block and the per-sample block.
#[derive(Debug, Clone)]
pub struct RidgeInit {
    pub alpha0: DVector<f64>,
    pub theta0: DVector<f64>,
    pub lambda_star: f64,
}

/// Exact minimizer of `(1/2n)‖y − F θ − α‖² + λ*(‖θ‖² + ‖α‖²)`.
///
/// Solved through the dual n-dimensional system `(F Fᵀ + c I) z = y` with
/// `c = 1 + 2nλ*`, reduced by the Woodbury identity to an r×r solve; then
/// `θ = Fᵀ z` and `α = z`.
pub fn ridge_init(
    response: &DVector<f64>,
    factors: &DMatrix<f64>,
    lambda_star: f64,
) -> Result<RidgeInit> {
    let n = response.len();
    if factors.nrows() != n {
        return Err(Error::InvalidArgument(format!(
            "response has {n} rows but factor matrix has {}",
            factors.nrows()
        )));
    }
    if lambda_star <= 0.0 || !lambda_star.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "ridge weight must be positive, got {lambda_star}"
        )));
    }
    let r = factors.ncols();
    let c = 1.0 + 2.0 * n as f64 * lambda_star;
    let z = if r == 0 {
        response / c
    } else {
        let mut small = factors.transpose() * factors;
        for i in 0..r {
            small[(i, i)] += c;
        }
        let rhs = factors.transpose() * response;
        let sol = small.cholesky().ok_or_else(|| {
            Error::Numerical("ridge reduction matrix is not positive definite".into())
        })?;
        (response - factors * sol.solve(&rhs)) / c
    };
    Ok(RidgeInit {
        theta0: factors.transpose() * &z,
        alpha0: z,
        lambda_star,
    })
}

/// Picks the ridge weight from `grid` minimizing mean held-out squared error
/// over deterministic contiguous folds; ties go to the smallest weight.
/// Held-out rows are predicted by `f̂ᵢᵀθ̂` plus the mean trained intercept.
pub fn select_ridge_lambda(
    response: &DVector<f64>,
    factors: &DMatrix<f64>,
    grid: &[f64],
    folds: usize,
) -> Result<f64> {
    let n = response.len();
    if grid.is_empty() {
        return Err(Error::InvalidArgument("ridge grid is empty".into()));
    }
    if grid.iter().any(|&l| l <= 0.0 || !l.is_finite()) {
        return Err(Error::InvalidArgument(
            "ridge grid entries must be positive reals".into(),
        ));
    }
    if folds < 2 {
        return Err(Error::InvalidArgument("need at least 2 folds".into()));
    }
    if n < folds {
        return Err(Error::InvalidArgument(format!(
            "cannot split {n} samples into {folds} folds"
        )));
    }
    if factors.nrows() != n {
        return Err(Error::InvalidArgument(
            "factor matrix rows must match the response length".into(),
        ));
    }

    let r = factors.ncols();
    let mut best: Option<(f64, f64)> = None; // (mse, lambda)
    for &lambda in grid {
        let mut total_se = 0.0;
        for fold in 0..folds {
            let lo = fold * n / folds;
            let hi = (fold + 1) * n / folds;
            let train: Vec<usize> = (0..n).filter(|i| *i < lo || *i >= hi).collect();
            let y_train = DVector::from_fn(train.len(), |i, _| response[train[i]]);
            let f_train = DMatrix::from_fn(train.len(), r, |i, j| factors[(train[i], j)]);
            let fit = ridge_init(&y_train, &f_train, lambda)?;
            let alpha_bar = fit.alpha0.mean();
            for i in lo..hi {
                let pred = factors.row(i).transpose().dot(&fit.theta0) + alpha_bar;
                let err = response[i] - pred;
                total_se += err * err;
            }
        }
        let mse = total_se / n as f64;
        let better = match best {
            None => true,
            Some((best_mse, best_lambda)) => {
                mse < best_mse || (mse == best_mse && lambda < best_lambda)
            }
        };
        if better {
            best = Some((mse, lambda));
        }
    }
    Ok(best.expect("grid is nonempty").1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Prng;

    fn random_factors(n: usize, r: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = Prng::new(seed);
        DMatrix::from_fn(n, r, |_, _| rng.standard_normal())
    }

    /// Dense (r+n)-dimensional normal-equations oracle.
    fn dense_ridge(y: &DVector<f64>, f: &DMatrix<f64>, lambda: f64) -> DVector<f64> {
        let n = y.len();
        let r = f.ncols();
        let mut xstar = DMatrix::zeros(n, r + n);
        for j in 0..r {
            xstar.set_column(j, &f.column(j));
        }
        for i in 0..n {
            xstar[(i, r + i)] = 1.0;
        }
        let nf = n as f64;
        let mut lhs = xstar.transpose() * &xstar / nf;
        for i in 0..(r + n) {
            lhs[(i, i)] += 2.0 * lambda;
        }
        let rhs = xstar.transpose() * y / nf;
        lhs.lu().solve(&rhs).unwrap()
    }

    #[test]
    fn matches_dense_normal_equations_on_toy_instance() {
        let y = DVector::from_vec(vec![0.7, -1.2, 2.0]);
        let f = DMatrix::from_vec(3, 1, vec![1.0, -0.5, 0.25]);
        let lambda = 0.3;
        let fit = ridge_init(&y, &f, lambda).unwrap();
        let oracle = dense_ridge(&y, &f, lambda);
        assert!((fit.theta0[0] - oracle[0]).abs() < 1e-10);
        for i in 0..3 {
            assert!((fit.alpha0[i] - oracle[1 + i]).abs() < 1e-10);
        }
    }

    #[test]
    fn matches_dense_solve_on_wider_instances() {
        for seed in 0..5 {
            let n = 8 + seed as usize;
            let r = 1 + (seed as usize % 3);
            let f = random_factors(n, r, 50 + seed);
            let mut rng = Prng::new(60 + seed);
            let y = DVector::from_fn(n, |_, _| rng.standard_normal());
            let lambda = 0.05 * (1.0 + seed as f64);
            let fit = ridge_init(&y, &f, lambda).unwrap();
            let oracle = dense_ridge(&y, &f, lambda);
            for j in 0..r {
                assert!((fit.theta0[j] - oracle[j]).abs() < 1e-9);
            }
            for i in 0..n {
                assert!((fit.alpha0[i] - oracle[r + i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn stationarity_conditions_hold() {
        let n = 12;
        let r = 3;
        let f = random_factors(n, r, 5);
        let mut rng = Prng::new(6);
        let y = DVector::from_fn(n, |_, _| rng.uniform_in(-2.0, 2.0));
        let lambda = 0.17;
        let fit = ridge_init(&y, &f, lambda).unwrap();
        let resid = &f * &fit.theta0 + &fit.alpha0 - &y;
        let nf = n as f64;
        let grad_theta = f.transpose() * &resid / nf + 2.0 * lambda * &fit.theta0;
        let grad_alpha = &resid / nf + 2.0 * lambda * &fit.alpha0;
        let scale = y.amax().max(1.0);
        assert!(grad_theta.amax() <= 1e-8 * scale);
        assert!(grad_alpha.amax() <= 1e-8 * scale);
    }

    #[test]
    fn heavy_penalty_shrinks_everything() {
        let n = 10;
        let f = random_factors(n, 2, 9);
        let mut rng = Prng::new(10);
        let y = DVector::from_fn(n, |_, _| rng.uniform_in(-1.0, 1.0));
        let fit = ridge_init(&y, &f, 1e8).unwrap();
        assert!(fit.alpha0.amax() < 1e-4);
        assert!(fit.theta0.amax() < 1e-4);
    }

    #[test]
    fn factor_only_signal_is_recovered_with_light_penalty() {
        let n = 4000;
        let r = 2;
        let f = random_factors(n, r, 12);
        let theta0 = DVector::from_vec(vec![1.3, -0.8]);
        let y = &f * &theta0;
        let fit = ridge_init(&y, &f, 1e-8).unwrap();
        assert!((fit.theta0 - theta0).amax() < 1e-3);
        assert!(fit.alpha0.norm() / (n as f64).sqrt() < 1e-3);
    }

    #[test]
    fn rejects_invalid_inputs() {
        let f = random_factors(5, 1, 2);
        let y = DVector::zeros(5);
        assert!(ridge_init(&y, &f, 0.0).is_err());
        assert!(ridge_init(&DVector::zeros(4), &f, 0.1).is_err());
        assert!(select_ridge_lambda(&y, &f, &[], 2).is_err());
        assert!(select_ridge_lambda(&y, &f, &[0.1], 1).is_err());
        assert!(select_ridge_lambda(&y, &f, &[0.1], 6).is_err());
        assert!(select_ridge_lambda(&y, &f, &[-0.1], 2).is_err());
    }

    #[test]
    fn single_element_grid_is_returned() {
        let f = random_factors(8, 2, 3);
        let mut rng = Prng::new(4);
        let y = DVector::from_fn(8, |_, _| rng.standard_normal());
        assert_eq!(select_ridge_lambda(&y, &f, &[0.37], 3).unwrap(), 0.37);
    }

    #[test]
    fn noise_prefers_heavy_shrinkage() {
        let mut wins = 0;
        for seed in 0..20 {
            let n = 50;
            let f = random_factors(n, 10, 700 + seed);
            let mut rng = Prng::new(800 + seed);
            let y = DVector::from_fn(n, |_, _| rng.standard_normal());
            let pick = select_ridge_lambda(&y, &f, &[1e-6, 1e2], 5).unwrap();
            if pick == 1e2 {
                wins += 1;
            }
        }
        assert!(wins >= 18, "heavy shrinkage chosen only {wins}/20 times");
    }

    #[test]
    fn strong_signal_prefers_light_shrinkage() {
        let mut wins = 0;
        for seed in 0..20 {
            let n = 60;
            let f = random_factors(n, 3, 900 + seed);
            let mut rng = Prng::new(1000 + seed);
            let theta = DVector::from_vec(vec![2.0, -1.5, 1.0]);
            let y = &f * theta + DVector::from_fn(n, |_, _| rng.normal(0.0, 0.05));
            let pick = select_ridge_lambda(&y, &f, &[1e-6, 1e2], 5).unwrap();
            if pick == 1e-6 {
                wins += 1;
            }
        }
        assert!(wins >= 18, "light shrinkage chosen only {wins}/20 times");
    }
}
