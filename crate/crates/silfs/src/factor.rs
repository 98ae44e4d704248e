//! Principal-component estimation of the latent factor structure
//! `X = F Bᵀ + U` and selection of the number of factors.

use nalgebra::DMatrix;

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Result of the constrained least-squares factor estimation.
///
/// `factors` is scaled so that `factorsᵀ·factors / n = I_r`, `loadings` is
/// `p × r`, and `idiosyncratic = X − factors·loadingsᵀ`. `eigenvalues` holds
/// the leading `min(n, p)` eigenvalues of `X Xᵀ` in nonincreasing order.
#[derive(Debug, Clone)]
pub struct FactorDecomposition {
    pub factors: DMatrix<f64>,
    pub loadings: DMatrix<f64>,
    pub idiosyncratic: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    pub num_factors: usize,
}

impl FactorDecomposition {
    /// Pass-through decomposition with no factor structure (`r = 0`,
    /// idiosyncratic component equal to the raw design). This realizes the
    /// factor-free baseline on the same code path as the full model.
    pub fn without_factors(data: &Dataset) -> Self {
        let n = data.num_samples();
        let p = data.num_features();
        Self {
            factors: DMatrix::zeros(n, 0),
            loadings: DMatrix::zeros(p, 0),
            idiosyncratic: data.design.clone(),
            eigenvalues: Vec::new(),
            num_factors: 0,
        }
    }
}

const EIGEN_MAX_ITER: usize = 50_000;

/// Eigenvalues of the Gram matrix `X Xᵀ`, nonincreasing, truncated to the
/// leading `min(n, p)` entries. Works on whichever of `X Xᵀ` / `XᵀX` is
/// smaller; the nonzero spectra coincide.
pub fn gram_eigenvalues(data: &Dataset) -> Result<Vec<f64>> {
    let x = &data.design;
    let (n, p) = (x.nrows(), x.ncols());
    let gram = if n <= p { x * x.transpose() } else { x.transpose() * x };
    let eig = symmetric_eigen_sorted(gram)?;
    Ok(eig.0)
}

fn symmetric_eigen_sorted(m: DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let dim = m.nrows();
    let eig = m
        .try_symmetric_eigen(f64::EPSILON, EIGEN_MAX_ITER)
        .ok_or_else(|| {
            Error::Numerical(format!(
                "symmetric eigensolver failed to converge on a {dim}×{dim} matrix within {EIGEN_MAX_ITER} iterations"
            ))
        })?;
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("eigenvalues are finite")
    });
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(dim, dim);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((values, vectors))
}

/// Flips each column so its entry of largest absolute value is positive,
/// which pins down the eigenvector sign ambiguity deterministically.
fn fix_column_signs(m: &mut DMatrix<f64>) {
    for j in 0..m.ncols() {
        let mut best = 0usize;
        let mut best_abs = f64::NEG_INFINITY;
        for i in 0..m.nrows() {
            let a = m[(i, j)].abs();
            if a > best_abs {
                best_abs = a;
                best = i;
            }
        }
        if m[(best, j)] < 0.0 {
            for i in 0..m.nrows() {
                m[(i, j)] = -m[(i, j)];
            }
        }
    }
}

/// Constrained least-squares factor estimation by principal components.
///
/// The estimated factor matrix is `√n` times the top-`r` eigenvectors of
/// `X Xᵀ`, loadings are `XᵀF̂ / n`, and the idiosyncratic component is the
/// reconstruction residual. When `p < n` the computation runs on the
/// `p × p` Gram matrix instead and maps back through `X`.
pub fn estimate_factors(data: &Dataset, r: usize) -> Result<FactorDecomposition> {
    let x = &data.design;
    let (n, p) = (x.nrows(), x.ncols());
    let max_rank = n.min(p);
    if r < 1 || r > max_rank {
        return Err(Error::InvalidArgument(format!(
            "factor count {r} out of range 1..={max_rank} for an {n}×{p} design"
        )));
    }

    let nf = n as f64;
    let (eigenvalues, mut factors) = if n <= p {
        let (values, vectors) = symmetric_eigen_sorted(x * x.transpose())?;
        let mut f = DMatrix::zeros(n, r);
        for j in 0..r {
            f.set_column(j, &(vectors.column(j) * nf.sqrt()));
        }
        (values, f)
    } else {
        let (values, vectors) = symmetric_eigen_sorted(x.transpose() * x)?;
        let scale = values[0].max(1.0) * f64::EPSILON * (n * p) as f64;
        let mut f = DMatrix::zeros(n, r);
        for j in 0..r {
            if values[j] <= scale {
                return Err(Error::Numerical(format!(
                    "requested {r} factors but the design has numerical rank {j}"
                )));
            }
            let u = (x * vectors.column(j)) / values[j].sqrt();
            f.set_column(j, &(u * nf.sqrt()));
        }
        (values, f)
    };

    fix_column_signs(&mut factors);
    let loadings = (x.transpose() * &factors) / nf;
    let idiosyncratic = x - &factors * loadings.transpose();
    Ok(FactorDecomposition {
        factors,
        loadings,
        idiosyncratic,
        eigenvalues: eigenvalues.into_iter().take(max_rank).collect(),
        num_factors: r,
    })
}

/// Default scan bound for the factor-number search: `min(8, min(n, p) − 1)`.
pub fn default_r_star(n: usize, p: usize) -> usize {
    8.min(n.min(p).saturating_sub(1))
}

/// Modified eigenvalue-ratio choice of the number of factors: the index
/// `i ≤ r_star` maximizing `(λ_i + c) / (λ_{i+1} + c)` over the spectrum of
/// `X Xᵀ`, ties broken toward the smallest index. The shift `c_np` defaults
/// to zero in callers.
pub fn select_num_factors(data: &Dataset, r_star: usize, c_np: f64) -> Result<usize> {
    if c_np < 0.0 || !c_np.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "eigenvalue shift must be a nonnegative real, got {c_np}"
        )));
    }
    let max_rank = data.num_samples().min(data.num_features());
    if r_star < 1 || r_star + 1 > max_rank {
        return Err(Error::InvalidArgument(format!(
            "scan bound {r_star} out of range: need 1 <= r_star <= {}",
            max_rank.saturating_sub(1)
        )));
    }
    let eigenvalues = gram_eigenvalues(data)?;
    Ok(eigenvalue_ratio_argmax(&eigenvalues, r_star, c_np))
}

fn eigenvalue_ratio_argmax(eigenvalues: &[f64], r_star: usize, c_np: f64) -> usize {
    let mut best_i = 1usize;
    let mut best_ratio = f64::NEG_INFINITY;
    for i in 1..=r_star {
        let num = eigenvalues[i - 1] + c_np;
        let den = eigenvalues[i] + c_np;
        let ratio = if den.abs() > 0.0 {
            num / den
        } else if num > 0.0 {
            f64::INFINITY
        } else {
            1.0
        };
        if ratio > best_ratio {
            best_ratio = ratio;
            best_i = i;
        }
    }
    best_i
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Prng;
    use nalgebra::{DMatrix, DVector};

    fn random_dataset(n: usize, p: usize, seed: u64) -> Dataset {
        let mut rng = Prng::new(seed);
        let x = DMatrix::from_fn(n, p, |_, _| rng.standard_normal());
        let y = DVector::from_fn(n, |_, _| rng.standard_normal());
        Dataset::new(y, x).unwrap()
    }

    /// Brute-force cyclic Jacobi eigensolver, kept independent of the
    /// library path that goes through nalgebra.
    fn jacobi_eigen(mut a: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
        let n = a.nrows();
        let mut v = DMatrix::<f64>::identity(n, n);
        for _ in 0..200 {
            let mut off = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    off += a[(i, j)] * a[(i, j)];
                }
            }
            if off < 1e-24 {
                break;
            }
            for i in 0..n {
                for j in (i + 1)..n {
                    if a[(i, j)].abs() < 1e-18 {
                        continue;
                    }
                    let theta = 0.5 * (a[(j, j)] - a[(i, i)]) / a[(i, j)];
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let aki = a[(k, i)];
                        let akj = a[(k, j)];
                        a[(k, i)] = c * aki - s * akj;
                        a[(k, j)] = s * aki + c * akj;
                    }
                    for k in 0..n {
                        let aik = a[(i, k)];
                        let ajk = a[(j, k)];
                        a[(i, k)] = c * aik - s * ajk;
                        a[(j, k)] = s * aik + c * ajk;
                    }
                    for k in 0..n {
                        let vki = v[(k, i)];
                        let vkj = v[(k, j)];
                        v[(k, i)] = c * vki - s * vkj;
                        v[(k, j)] = s * vki + c * vkj;
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&x, &y| a[(y, y)].partial_cmp(&a[(x, x)]).unwrap());
        let values = order.iter().map(|&i| a[(i, i)]).collect();
        let mut vectors = DMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            vectors.set_column(dst, &v.column(src));
        }
        (values, vectors)
    }

    fn check_invariants(data: &Dataset, d: &FactorDecomposition) {
        let n = data.num_samples() as f64;
        let r = d.num_factors;
        let gram = d.factors.transpose() * &d.factors / n;
        for i in 0..r {
            for j in 0..r {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((gram[(i, j)] - expect).abs() < 1e-8);
            }
        }
        let cross = d.factors.transpose() * &d.idiosyncratic;
        let scale = data.design.amax().max(1.0);
        assert!(cross.amax() <= 1e-8 * scale);
        let recon = &d.factors * d.loadings.transpose() + &d.idiosyncratic;
        assert!((recon - &data.design).amax() < 1e-10);
        for w in d.eigenvalues.windows(2) {
            assert!(w[0] >= w[1] - 1e-12);
        }
        for &ev in &d.eigenvalues {
            assert!(ev >= -1e-10);
        }
    }

    #[test]
    fn noiseless_rank_r_input_reconstructs_exactly() {
        let n = 12;
        let p = 7;
        let r = 3;
        let mut rng = Prng::new(3);
        let g = DMatrix::from_fn(n, r, |_, _| rng.standard_normal());
        let qr = g.qr();
        let f0 = qr.q() * (n as f64).sqrt();
        let b0 = DMatrix::from_fn(p, r, |_, _| rng.standard_normal());
        let x = &f0 * b0.transpose();
        let data = Dataset::new(DVector::zeros(n).add_scalar(1.0), x).unwrap();
        let d = estimate_factors(&data, r).unwrap();
        assert!(d.idiosyncratic.amax() < 1e-8);
        check_invariants(&data, &d);
    }

    #[test]
    fn single_factor_is_normalized() {
        let data = random_dataset(9, 4, 17);
        let d = estimate_factors(&data, 1).unwrap();
        let gram = d.factors.transpose() * &d.factors / 9.0;
        assert!((gram[(0, 0)] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn matches_jacobi_oracle_up_to_sign() {
        let data = random_dataset(8, 5, 99);
        let d = estimate_factors(&data, 2).unwrap();
        let gram = &data.design * data.design.transpose();
        let (values, vectors) = jacobi_eigen(gram);
        for j in 0..2 {
            assert!((d.eigenvalues[j] - values[j]).abs() <= 1e-8 * values[0].max(1.0));
            let est = d.factors.column(j) / (8.0f64).sqrt();
            let oracle = vectors.column(j);
            let dot: f64 = est.iter().zip(oracle.iter()).map(|(a, b)| a * b).sum();
            let sign = if dot >= 0.0 { 1.0 } else { -1.0 };
            for i in 0..8 {
                assert!((est[i] - sign * oracle[i]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn wide_and_tall_routes_agree_with_oracle() {
        // p < n exercises the p×p fallback.
        let data = random_dataset(10, 6, 5);
        let d = estimate_factors(&data, 3).unwrap();
        check_invariants(&data, &d);
        let (values, _) = jacobi_eigen(&data.design * data.design.transpose());
        for j in 0..6 {
            assert!((d.eigenvalues[j] - values[j]).abs() <= 1e-8 * values[0].max(1.0));
        }
    }

    #[test]
    fn invariants_hold_on_random_matrices() {
        for seed in 0..25 {
            let mut rng = Prng::new(1000 + seed);
            let n = 2 + (rng.next_u64() % 20) as usize;
            let p = 1 + (rng.next_u64() % 20) as usize;
            let data = random_dataset(n, p, 2000 + seed);
            let r = 1 + (rng.next_u64() as usize) % n.min(p);
            let d = match estimate_factors(&data, r) {
                Ok(d) => d,
                Err(Error::Numerical(_)) => continue,
                Err(e) => panic!("unexpected error: {e}"),
            };
            check_invariants(&data, &d);
            assert!(d.idiosyncratic.norm() <= data.design.norm() + 1e-12);
        }
    }

    #[test]
    fn scale_equivariance() {
        let data = random_dataset(8, 11, 31);
        let d1 = estimate_factors(&data, 2).unwrap();
        let scaled = Dataset::new(data.response.clone(), &data.design * 2.5).unwrap();
        let d2 = estimate_factors(&scaled, 2).unwrap();
        assert!((&d1.factors - &d2.factors).amax() < 1e-9);
        assert!((&d1.loadings * 2.5 - &d2.loadings).amax() < 1e-9);
    }

    #[test]
    fn determinism_is_bitwise() {
        let data = random_dataset(7, 9, 8);
        let d1 = estimate_factors(&data, 2).unwrap();
        let d2 = estimate_factors(&data, 2).unwrap();
        assert_eq!(d1.factors, d2.factors);
        assert_eq!(d1.loadings, d2.loadings);
        assert_eq!(d1.eigenvalues, d2.eigenvalues);
    }

    #[test]
    fn rejects_out_of_range_factor_counts() {
        let data = random_dataset(6, 4, 1);
        assert!(matches!(
            estimate_factors(&data, 0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            estimate_factors(&data, 5),
            Err(Error::InvalidArgument(_))
        ));
    }

    fn dataset_with_spectrum(spectrum: &[f64]) -> Dataset {
        let n = spectrum.len();
        let x = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                spectrum[i].sqrt()
            } else {
                0.0
            }
        });
        Dataset::new(DVector::zeros(n).add_scalar(1.0), x).unwrap()
    }

    #[test]
    fn ratio_criterion_finds_the_spike_boundary() {
        let data = dataset_with_spectrum(&[100.0, 90.0, 80.0, 2.0, 1.0, 0.5]);
        assert_eq!(select_num_factors(&data, 5, 0.0).unwrap(), 3);
    }

    #[test]
    fn ratio_criterion_single_dominant_spike() {
        let data = dataset_with_spectrum(&[10.0, 1.0, 1.0, 1.0]);
        assert_eq!(select_num_factors(&data, 3, 0.0).unwrap(), 1);
    }

    #[test]
    fn ratio_criterion_breaks_ties_toward_smallest_index() {
        assert_eq!(eigenvalue_ratio_argmax(&[8.0, 4.0, 2.0, 1.0], 3, 0.0), 1);
    }

    #[test]
    fn ratio_criterion_rejects_bad_scan_bound() {
        let data = dataset_with_spectrum(&[10.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            select_num_factors(&data, 4, 0.0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            select_num_factors(&data, 3, -1.0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn default_scan_bound() {
        assert_eq!(default_r_star(100, 50), 8);
        assert_eq!(default_r_star(6, 100), 5);
        assert_eq!(default_r_star(2, 2), 1);
    }
}
