//! Subgroup identification with latent factor structure.
//!
//! The library estimates a latent factor decomposition of the design matrix,
//! then recovers group-specific intercepts, group centroids, factor
//! coefficients and a sparse idiosyncratic coefficient vector by minimizing a
//! least-squares loss with a center-augmented clustering penalty and an ℓ1
//! penalty. Two solvers are provided: a difference-of-convex ADMM for the
//! absolute-distance penalty and cyclic coordinate descent for the squared
//! distance. Model selection (group count by BIC, penalty weights by GCV), a
//! seeded simulation harness with evaluation metrics, and a CLI front end
//! round out the crate.

pub mod cli;
pub mod cluster1d;
pub mod config;
pub mod dataset;
pub mod error;
pub mod factor;
pub mod io;
pub mod numeric;
pub mod ridge;
pub mod rng;
pub mod selection;
pub mod sim;
pub mod solver;

pub use cluster1d::{cluster_1d, UnivariateClustering};
pub use config::{Distance, SolverConfig};
pub use dataset::Dataset;
pub use error::{Error, Result};
pub use factor::{
    default_r_star, estimate_factors, gram_eigenvalues, select_num_factors, FactorDecomposition,
};
pub use numeric::{lasso_cd, lasso_cd_from, soft_threshold, LassoFit};
pub use ridge::{ridge_init, select_ridge_lambda, RidgeInit};
pub use selection::{
    bic, gcv, select_k, select_lambdas, select_model, SelectionReport, SolverChoice,
};
pub use solver::{
    assign_labels, car_penalty, compute_init, fit, objective, InitPoint, SilfsFit,
};
