//! Seeded synthetic-data generators for the benchmark scenarios.
//!
//! Each generator owns a single ChaCha20 stream and consumes it in a fixed,
//! documented order, so a `(tag, seed)` pair pins the dataset bitwise.

use nalgebra::{DMatrix, DVector};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng::Prng;

use super::SyntheticDataset;

/// Two-group (±a) or three-group (−a, 0, a) intercept layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    A,
    B,
}

const AR_BURN_IN: usize = 50;
const SPECTRAL_RADIUS_CAP: f64 = 0.8;

/// Factor-score transition matrix: 0.5 on the diagonal, 0.3^|s−t| off it,
/// rescaled to spectral radius 0.8 whenever it exceeds that bound (the raw
/// matrix is explosive from r = 4 upward).
pub(crate) fn ar_transition(r: usize) -> DMatrix<f64> {
    let mut phi = DMatrix::from_fn(r, r, |s, t| {
        if s == t {
            0.5
        } else {
            0.3f64.powi((s as i32 - t as i32).abs())
        }
    });
    let radius = spectral_radius(&phi);
    if radius > SPECTRAL_RADIUS_CAP {
        phi *= SPECTRAL_RADIUS_CAP / radius;
    }
    phi
}

fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    if n == 0 {
        return 0.0;
    }
    let mut v = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut radius = 0.0;
    for _ in 0..200 {
        let w = m * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        radius = norm;
        v = w / norm;
    }
    radius
}

/// Group layouts A (K = 2, levels ±a) and B (K = 3, levels −a, 0, a) with a
/// latent factor design: `X = F Bᵀ + U`, factors from a stationary vector
/// AR(1) with 50 burn-in steps from zero, loadings U(−1, 1), idiosyncratic
/// noise N(0, 0.1), response noise N(0, 0.1) and five U(0.8, 1) signal
/// coefficients.
///
/// Draw order: β, loadings, factor path (burn-in then samples), U, α, ε.
pub fn generate_scenario_ab(
    scenario: ScenarioKind,
    a: f64,
    n: usize,
    p: usize,
    r: usize,
    seed: u64,
) -> Result<SyntheticDataset> {
    if n < 5 || p < 5 {
        return Err(Error::InvalidArgument(
            "scenario generators need n >= 5 and p >= 5".into(),
        ));
    }
    if r < 1 {
        return Err(Error::InvalidArgument("factor count must be positive".into()));
    }
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::InvalidArgument("group separation must be positive".into()));
    }
    let mut rng = Prng::new(seed);

    let mut beta = DVector::zeros(p);
    for j in 0..5.min(p) {
        beta[j] = rng.uniform_in(0.8, 1.0);
    }
    let loadings = DMatrix::from_fn(p, r, |_, _| rng.uniform_in(-1.0, 1.0));

    let phi = ar_transition(r);
    let noise_sd = 0.1f64.sqrt();
    let mut f_cur = DVector::<f64>::zeros(r);
    for _ in 0..AR_BURN_IN {
        let shock = DVector::from_fn(r, |_, _| rng.normal(0.0, noise_sd));
        f_cur = &phi * &f_cur + shock;
    }
    let mut factors = DMatrix::zeros(n, r);
    for i in 0..n {
        let shock = DVector::from_fn(r, |_, _| rng.normal(0.0, noise_sd));
        f_cur = &phi * &f_cur + shock;
        factors.set_row(i, &f_cur.transpose());
    }

    let idio = DMatrix::from_fn(n, p, |_, _| rng.normal(0.0, noise_sd));
    let design = &factors * loadings.transpose() + idio;

    let (levels, k): (Vec<f64>, usize) = match scenario {
        ScenarioKind::A => (vec![-a, a], 2),
        ScenarioKind::B => (vec![-a, 0.0, a], 3),
    };
    let mut alpha = DVector::zeros(n);
    let mut labels = vec![0usize; n];
    for i in 0..n {
        let u = rng.uniform();
        let pick = ((u * k as f64) as usize).min(k - 1);
        alpha[i] = levels[pick];
        labels[i] = pick + 1;
    }

    let noise = DVector::from_fn(n, |_, _| rng.normal(0.0, noise_sd));
    let response = &alpha + &design * &beta + noise;

    let tag = format!(
        "scenario-{}(a={a},n={n},p={p},r={r})",
        match scenario {
            ScenarioKind::A => "a",
            ScenarioKind::B => "b",
        }
    );
    Ok(SyntheticDataset {
        dataset: Dataset::new(response, design)?,
        true_alpha: alpha,
        true_beta: beta,
        true_labels: labels,
        true_factors: factors,
        generator_tag: tag,
        seed,
    })
}

/// Orthogonal spike directions for the collinearity case: the first `s`
/// columns of the Q factor of a random U(0, 1) square matrix, scaled by 5.
pub(crate) fn collinearity_spikes(p: usize, s: usize, rng: &mut Prng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(p, p, |_, _| rng.uniform());
    let q = a.qr().q();
    let mut gamma = DMatrix::zeros(p, s);
    for j in 0..s {
        gamma.set_column(j, &(q.column(j) * 5.0));
    }
    gamma
}

/// Spiked-covariance design without a factor-model data process:
/// `x ~ N(0, ΓΓᵀ + I)` with `Γ` spanning `s` orthogonal directions of
/// strength 5; `s = 0` degenerates to independent standard normal columns.
/// Ten U(1, 2) signal coefficients, intercepts ±3.
///
/// Draw order: β, spike directions, per-sample (spike scores, noise), α, ε.
pub fn generate_collinearity_case(
    s: usize,
    n: usize,
    p: usize,
    seed: u64,
) -> Result<SyntheticDataset> {
    if s > p {
        return Err(Error::InvalidArgument(format!(
            "spike count {s} exceeds the dimension {p}"
        )));
    }
    if n < 2 || p < 10 {
        return Err(Error::InvalidArgument(
            "collinearity generator needs n >= 2 and p >= 10".into(),
        ));
    }
    let mut rng = Prng::new(seed);

    let mut beta = DVector::zeros(p);
    for j in 0..10 {
        beta[j] = rng.uniform_in(1.0, 2.0);
    }
    let spikes = if s > 0 {
        Some(collinearity_spikes(p, s, &mut rng))
    } else {
        None
    };

    let mut design = DMatrix::zeros(n, p);
    for i in 0..n {
        let mut row = DVector::from_fn(p, |_, _| rng.standard_normal());
        if let Some(gamma) = &spikes {
            let scores = DVector::from_fn(s, |_, _| rng.standard_normal());
            row += gamma * scores;
        }
        design.set_row(i, &row.transpose());
    }

    let mut alpha = DVector::zeros(n);
    let mut labels = vec![0usize; n];
    for i in 0..n {
        if rng.uniform() < 0.5 {
            alpha[i] = -3.0;
            labels[i] = 1;
        } else {
            alpha[i] = 3.0;
            labels[i] = 2;
        }
    }
    let noise_sd = 0.1f64.sqrt();
    let noise = DVector::from_fn(n, |_, _| rng.normal(0.0, noise_sd));
    let response = &alpha + &design * &beta + noise;

    Ok(SyntheticDataset {
        dataset: Dataset::new(response, design)?,
        true_alpha: alpha,
        true_beta: beta,
        true_labels: labels,
        true_factors: DMatrix::zeros(n, 0),
        generator_tag: format!("collinearity(s={s},n={n},p={p})"),
        seed,
    })
}

/// Equicorrelated design (unit diagonal, off-diagonal ρ, sampled through the
/// Cholesky factor), ten U(2, 5) signal coefficients, intercepts ±1 and
/// N(0, 0.01) response noise.
///
/// Draw order: β, per-sample design rows, α, ε.
pub fn generate_toy(rho: f64, n: usize, p: usize, seed: u64) -> Result<SyntheticDataset> {
    if !(0.0..=0.95).contains(&rho) {
        return Err(Error::InvalidArgument(format!(
            "correlation {rho} outside [0, 0.95]"
        )));
    }
    if n < 2 || p < 10 {
        return Err(Error::InvalidArgument(
            "toy generator needs n >= 2 and p >= 10".into(),
        ));
    }
    let mut rng = Prng::new(seed);

    let mut beta = DVector::zeros(p);
    for j in 0..10 {
        beta[j] = rng.uniform_in(2.0, 5.0);
    }
    let sigma = DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { rho });
    let chol = sigma
        .cholesky()
        .ok_or_else(|| Error::Numerical("equicorrelation matrix is not positive definite".into()))?;
    let l = chol.l();

    let mut design = DMatrix::zeros(n, p);
    for i in 0..n {
        let g = DVector::from_fn(p, |_, _| rng.standard_normal());
        design.set_row(i, &(&l * g).transpose());
    }

    let mut alpha = DVector::zeros(n);
    let mut labels = vec![0usize; n];
    for i in 0..n {
        if rng.uniform() < 0.5 {
            alpha[i] = -1.0;
            labels[i] = 1;
        } else {
            alpha[i] = 1.0;
            labels[i] = 2;
        }
    }
    let noise = DVector::from_fn(n, |_, _| rng.normal(0.0, 0.1));
    let response = &alpha + &design * &beta + noise;

    Ok(SyntheticDataset {
        dataset: Dataset::new(response, design)?,
        true_alpha: alpha,
        true_beta: beta,
        true_labels: labels,
        true_factors: DMatrix::zeros(n, 0),
        generator_tag: format!("toy(rho={rho},n={n},p={p})"),
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transition_matrix_is_stable_for_all_sizes() {
        for r in 1..=8 {
            let phi = ar_transition(r);
            assert!(spectral_radius(&phi) <= SPECTRAL_RADIUS_CAP + 1e-9, "r = {r}");
        }
        // Small sizes keep the printed matrix exactly.
        let phi2 = ar_transition(2);
        assert_eq!(phi2[(0, 0)], 0.5);
        assert_eq!(phi2[(0, 1)], 0.3);
    }

    #[test]
    fn scenario_datasets_are_bitwise_reproducible() {
        let a = generate_scenario_ab(ScenarioKind::A, 3.0, 20, 12, 2, 9).unwrap();
        let b = generate_scenario_ab(ScenarioKind::A, 3.0, 20, 12, 2, 9).unwrap();
        assert_eq!(a.dataset.design, b.dataset.design);
        assert_eq!(a.dataset.response, b.dataset.response);
        assert_eq!(a.true_labels, b.true_labels);
        let c = generate_scenario_ab(ScenarioKind::A, 3.0, 20, 12, 2, 10).unwrap();
        assert_ne!(a.dataset.design, c.dataset.design);
    }

    #[test]
    fn scenario_a_label_proportions_are_binomial() {
        let n = 100;
        let mut worst: f64 = 0.0;
        for seed in 0..10 {
            let d = generate_scenario_ab(ScenarioKind::A, 3.0, n, 10, 2, 100 + seed).unwrap();
            let ones = d.true_labels.iter().filter(|&&l| l == 1).count() as f64;
            let dev = (ones - n as f64 / 2.0).abs() / (n as f64 * 0.25).sqrt();
            worst = worst.max(dev);
        }
        assert!(worst <= 4.0, "label imbalance {worst} standard deviations");
    }

    #[test]
    fn scenario_b_has_five_bounded_signal_coefficients() {
        let d = generate_scenario_ab(ScenarioKind::B, 5.0, 30, 20, 3, 4).unwrap();
        let nonzero: Vec<f64> = d.true_beta.iter().copied().filter(|&b| b != 0.0).collect();
        assert_eq!(nonzero.len(), 5);
        for b in nonzero {
            assert!(b > 0.8 && b < 1.0);
        }
        assert_eq!(d.true_labels.len(), 30);
        assert!(d.true_labels.iter().all(|&l| (1..=3).contains(&l)));
    }

    #[test]
    fn labels_are_consistent_with_alpha_levels() {
        let d = generate_scenario_ab(ScenarioKind::B, 4.0, 40, 15, 2, 77).unwrap();
        for i in 0..40 {
            let expect = match d.true_labels[i] {
                1 => -4.0,
                2 => 0.0,
                3 => 4.0,
                other => panic!("label {other} out of range"),
            };
            assert_eq!(d.true_alpha[i], expect);
        }
    }

    #[test]
    fn collinearity_spike_spectrum_is_constructed() {
        let p = 20;
        let s = 3;
        let mut rng = Prng::new(5);
        let gamma = collinearity_spikes(p, s, &mut rng);
        let mut lambda = &gamma * gamma.transpose();
        for i in 0..p {
            lambda[(i, i)] += 1.0;
        }
        let mut eig: Vec<f64> = lambda
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect();
        eig.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for j in 0..s {
            assert!((eig[j] - 26.0).abs() < 1e-8);
        }
        for j in s..p {
            assert!((eig[j] - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn uncorrelated_case_has_small_cross_correlations() {
        let d = generate_collinearity_case(0, 500, 20, 3).unwrap();
        let x = &d.dataset.design;
        let n = 500.0;
        let mut max_off = 0.0f64;
        for a in 0..20 {
            for b in (a + 1)..20 {
                let ca = x.column(a);
                let cb = x.column(b);
                let ma = ca.mean();
                let mb = cb.mean();
                let cov = (ca.map(|v| v - ma).dot(&cb.map(|v| v - mb))) / n;
                max_off = max_off.max(cov.abs());
            }
        }
        assert!(max_off <= 0.5, "max off-diagonal covariance {max_off}");
    }

    #[test]
    fn collinearity_rejects_bad_arguments() {
        assert!(generate_collinearity_case(21, 50, 20, 0).is_err());
        assert!(generate_collinearity_case(2, 50, 5, 0).is_err());
    }

    #[test]
    fn toy_equicorrelation_is_spiked_for_large_rho() {
        let d = generate_toy(0.9, 100, 100, 2).unwrap();
        let x = &d.dataset.design;
        let cov = x.transpose() * x / 100.0;
        let mut eig: Vec<f64> = cov.symmetric_eigen().eigenvalues.iter().copied().collect();
        eig.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert!(eig[0] > 10.0 * eig[1], "{} vs {}", eig[0], eig[1]);
    }

    #[test]
    fn toy_zero_rho_matches_independent_columns() {
        let d = generate_toy(0.0, 200, 12, 6).unwrap();
        let x = &d.dataset.design;
        for j in 0..12 {
            let col = x.column(j);
            let var = col.map(|v| v * v).sum() / 200.0;
            assert!((var - 1.0).abs() < 0.4);
        }
        assert!(generate_toy(0.96, 20, 12, 0).is_err());
    }

    #[test]
    fn toy_is_reproducible() {
        let a = generate_toy(0.5, 15, 11, 42).unwrap();
        let b = generate_toy(0.5, 15, 11, 42).unwrap();
        assert_eq!(a.dataset.design, b.dataset.design);
        assert_eq!(a.dataset.response, b.dataset.response);
    }
}
