use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distance used by the center-augmented penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distance {
    Absolute,
    Squared,
}

impl Distance {
    pub fn eval(self, a: f64, b: f64) -> f64 {
        match self {
            Distance::Absolute => (a - b).abs(),
            Distance::Squared => (a - b) * (a - b),
        }
    }
}

/// Tuning and stopping parameters shared by the two solvers.
///
/// `eps_outer` and `eps_inner` are relative tolerances: the absolute stopping
/// thresholds are `eps · (1 + |Z⁰|)` where `Z⁰` is the objective at the
/// initial point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    pub distance: Distance,
    pub lambda1: f64,
    pub lambda2: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub rho3: f64,
    pub eps_outer: f64,
    pub eps_inner: f64,
    pub max_outer: usize,
    pub max_inner: usize,
}

impl SolverConfig {
    /// Defaults for the ADMM solver under absolute distance.
    pub fn l1_admm(lambda1: f64, lambda2: f64) -> Self {
        Self {
            distance: Distance::Absolute,
            lambda1,
            lambda2,
            rho1: 0.5,
            rho2: 0.5,
            rho3: 0.5,
            eps_outer: 1e-5,
            eps_inner: 1e-4,
            max_outer: 100,
            max_inner: 500,
        }
    }

    /// Defaults for cyclic coordinate descent under squared distance.
    pub fn l2_ccd(lambda1: f64, lambda2: f64) -> Self {
        Self {
            distance: Distance::Squared,
            lambda1,
            lambda2,
            rho1: 0.5,
            rho2: 0.5,
            rho3: 0.5,
            eps_outer: 1e-6,
            eps_inner: 1e-4,
            max_outer: 200,
            max_inner: 500,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda1 < 0.0 || self.lambda2 < 0.0 {
            return Err(Error::InvalidArgument(
                "penalty weights must be nonnegative".into(),
            ));
        }
        for (name, v) in [
            ("rho1", self.rho1),
            ("rho2", self.rho2),
            ("rho3", self.rho3),
            ("eps_outer", self.eps_outer),
            ("eps_inner", self.eps_inner),
        ] {
            if v <= 0.0 || !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be positive")));
            }
        }
        if self.max_outer < 1 || self.max_inner < 1 {
            return Err(Error::InvalidArgument(
                "iteration caps must be at least 1".into(),
            ));
        }
        Ok(())
    }
}
