use silfs::selection::{self, SolverChoice};
use silfs::sim::{generate_collinearity_case, rand_index};
use silfs::solver::{compute_init_set, fit_from};
use silfs::{estimate_factors, Distance};

#[test]
fn ccd_polish_on_bad_seeds() {
    for seed in [20260818u64, 20260820, 20260822, 20260826, 20260827, 20260813] {
        let d = generate_collinearity_case(5, 100, 100, seed).unwrap();
        let r = silfs::select_num_factors(&d.dataset, 8, 0.0).unwrap();
        let decomp = estimate_factors(&d.dataset, r).unwrap();
        let lmax = selection::lambda_max(&d.dataset, &decomp);
        let inits = compute_init_set(&d.dataset, &decomp, 2, Distance::Squared).unwrap();
        for l1 in [0.001f64, 0.01, 0.05] {
            let cfg = SolverChoice::L2Ccd.config(l1, 0.1 * lmax);
            let f = fit_from(&d.dataset, &decomp, 2, &cfg, &inits[1]).unwrap();
            let ri = rand_index(&f.labels, &d.true_labels).unwrap();
            eprint!(" l1={l1}: ri={ri:.3} sweeps={}", f.outer_iters);
        }
        eprintln!("  (seed {seed})");
    }
}
