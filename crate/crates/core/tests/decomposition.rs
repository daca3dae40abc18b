use symext::decomp::{extract_edge_state, shift_is_infeasible, test_decomposable, Decomposability};
use symext::hierarchy::{run_test, ExtensionSpec, HierarchyOptions, Verdict};
use symext::qlinalg::trace_product;
use symext::states::{choi_state, choi_witness};

#[test]
fn extracted_choi_witness_yields_an_edge_state() {
    let opts = HierarchyOptions::default();
    let report = run_test(&choi_state(3.5).unwrap(), &ExtensionSpec::level(2), &opts).unwrap();
    assert_eq!(report.status, Verdict::Entangled);
    let w = report.witness.unwrap().operator;
    let t = std::time::Instant::now();
    let dec = test_decomposable(&w, 3, 3).unwrap();
    eprintln!(
        "eps {} cross {} state {} resid {} agree {} notes {:?} forms {:?} {:?} ({:.1?})",
        dec.epsilon, dec.epsilon_cross_check, dec.state_value, dec.reconstruction_residual,
        dec.rho_agreement, dec.notes, dec.state_form, dec.decomposition_form, t.elapsed()
    );
    assert_eq!(dec.verdict, Decomposability::Indecomposable);
    let (rho, diag) = extract_edge_state(&dec).unwrap();
    eprintln!("{diag:?}");
    assert!(diag.min_eigenvalue >= -1e-9 && diag.pt_min_eigenvalue >= -1e-9);
    assert!(trace_product(&w, rho.matrix()).re < -1e-9);
    assert!(diag.p_range_residual <= 1e-6 && diag.q_range_residual <= 1e-6);
    let again = run_test(&rho, &ExtensionSpec::level(2), &opts).unwrap();
    assert_eq!(again.status, Verdict::Entangled);
}

#[test]
fn analytic_choi_witness_is_indecomposable_and_epsilon_is_tight() {
    let w = choi_witness();
    let dec = test_decomposable(&w, 3, 3).unwrap();
    eprintln!("eps {} cross {} notes {:?}", dec.epsilon, dec.epsilon_cross_check, dec.notes);
    assert_eq!(dec.verdict, Decomposability::Indecomposable);
    assert!(dec.epsilon <= -1.0 / 7.0 + 1e-9);
    assert!(shift_is_infeasible(&w, 3, 3, dec.epsilon + 1e-5).unwrap());
    assert!(!shift_is_infeasible(&w, 3, 3, dec.epsilon - 1e-5).unwrap());
}
