use silfs::selection::{self, SolverChoice};
use silfs::sim::{generate_scenario_ab, rand_index, selection_metrics, ScenarioKind};
use silfs::{estimate_factors, fit, gcv, SolverConfig};

#[test]
fn gcv_surface_with_quality() {
    let d = generate_scenario_ab(ScenarioKind::A, 3.0, 100, 50, 4, 20260808).unwrap();
    let decomp = estimate_factors(&d.dataset, 4).unwrap();
    let lmax = selection::lambda_max(&d.dataset, &decomp);
    let l1g = selection::default_lambda1_grid();
    let l2g = selection::default_lambda2_grid(lmax);
    for &l1 in &l1g {
        let mut row = String::new();
        for &l2 in &l2g {
            let f = fit(&d.dataset, &decomp, 2, &SolverConfig::l2_ccd(l1, l2)).unwrap();
            let g = gcv(&f, &d.dataset, &decomp).unwrap();
            let m = selection_metrics(&f.beta_hat, &d.true_beta).unwrap();
            let ri = rand_index(&f.labels, &d.true_labels).unwrap();
            row.push_str(&format!(
                " | g={g:9.3e} sp={:.2} ri={ri:.2}",
                m.specificity
            ));
        }
        eprintln!("l1={l1:8.4}{row}");
    }
    let rep = selection::select_lambdas(&d.dataset, &decomp, 2, &l1g, &l2g, SolverChoice::L2Ccd).unwrap();
    eprintln!("chosen l1={} l2={} (l2/lmax={:.4})", rep.lambda1_hat, rep.lambda2_hat, rep.lambda2_hat / lmax);
}
