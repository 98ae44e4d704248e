use nalgebra::DVector;
use silfs::numeric::{lasso_cd, LASSO_MAX_ITER, LASSO_TOL};
use silfs::sim::{generate_collinearity_case, rand_index};
use silfs::{assign_labels, cluster_1d, estimate_factors, Distance};

#[test]
fn manual_iteration_818() {
    let d = generate_collinearity_case(5, 100, 100, 20260818).unwrap();
    let n = 100.0;
    let r = silfs::select_num_factors(&d.dataset, 8, 0.0).unwrap();
    let decomp = estimate_factors(&d.dataset, r).unwrap();

    // Round 0: raw mild sweep.
    let theta0 = decomp.factors.transpose() * &d.dataset.response / n;
    let target0 = &d.dataset.response - &decomp.factors * &theta0;
    let lmax0 = (decomp.idiosyncratic.transpose()
        * (&target0 - DVector::from_element(100, target0.mean())))
    .amax()
        / n;
    let sweep0 = lasso_cd(&decomp.idiosyncratic, &target0, 0.1 * lmax0, LASSO_TOL, LASSO_MAX_ITER).unwrap();
    let mut beta = sweep0.coefficients;

    for round in 0..8 {
        let swept = &d.dataset.response - &decomp.idiosyncratic * &beta;
        let theta = decomp.factors.transpose() * &swept / n;
        let levels = &swept - &decomp.factors * &theta;
        let cl = cluster_1d(levels.as_slice(), 2, Distance::Squared).unwrap();
        let labels = assign_labels(&levels, &cl.centroids, Distance::Squared);
        let ri = rand_index(&labels, &d.true_labels).unwrap();
        let flips = labels
            .iter()
            .zip(&d.true_labels)
            .filter(|(a, b)| a != b)
            .count()
            .min(
                labels
                    .iter()
                    .zip(&d.true_labels)
                    .filter(|(a, b)| a == b)
                    .count(),
            );
        let beta_err = (&beta - &d.true_beta).norm();
        eprintln!(
            "round {round}: ri={ri:.3} flips={flips} beta_err={beta_err:.3} centroids={:?}",
            cl.centroids
        );

        // Group-center the factor-adjusted response within the current
        // labels (scale-free deflation), then re-sweep with a relaxed refit.
        let theta_d = decomp.factors.transpose() * &d.dataset.response / n;
        let raw_target = &d.dataset.response - &decomp.factors * &theta_d;
        let mut sums = vec![0.0f64; 2];
        let mut counts = vec![0usize; 2];
        for i in 0..100 {
            sums[labels[i] - 1] += raw_target[i];
            counts[labels[i] - 1] += 1;
        }
        let target = DVector::from_fn(100, |i, _| {
            raw_target[i] - sums[labels[i] - 1] / counts[labels[i] - 1].max(1) as f64
        });
        let lmax_t = (decomp.idiosyncratic.transpose()
            * (&target - DVector::from_element(100, target.mean())))
        .amax()
            / n;
        let sweep = lasso_cd(&decomp.idiosyncratic, &target, 0.15 * lmax_t, LASSO_TOL, LASSO_MAX_ITER).unwrap();
        beta = sweep.coefficients;
        let support: Vec<usize> = (0..100).filter(|&j| beta[j] != 0.0).collect();
        eprint!("   support={}", support.len());
        if !support.is_empty() && support.len() <= 50 {
            let sub = nalgebra::DMatrix::from_fn(100, support.len(), |i, t| {
                decomp.idiosyncratic[(i, support[t])]
            });
            let gram = sub.transpose() * &sub;
            let rhs = sub.transpose() * target;
            if let Some(chol) = gram.cholesky() {
                let refit = chol.solve(&rhs);
                beta.fill(0.0);
                for (t, &j) in support.iter().enumerate() {
                    beta[j] = refit[t];
                }
                let err = (&beta - &d.true_beta).norm();
                eprintln!(" relaxed beta_err={err:.3}");
            }
        } else {
            eprintln!(" (refit skipped)");
        }
    }
}
