use symext::hierarchy::{ExtensionSpec, HierarchyOptions};
use symext::states::{bell_state, choi_state};
use symext::witness::find_gamma_star;
use symext::Error;

#[test]
fn gamma_star_for_the_choi_boundary_state() {
    let t = std::time::Instant::now();
    let rho = choi_state(3.0001).unwrap();
    let b = find_gamma_star(&rho, &ExtensionSpec::level(2), 0.01, &HierarchyOptions::default()).unwrap();
    for e in &b.evaluations {
        eprintln!("{:.6} {:?} {:?}", e.gamma, e.verdict, e.margin_t);
    }
    eprintln!("bracket [{}, {}] in {:.1?}", b.lower, b.upper, t.elapsed());
    assert!(b.lower >= 0.46 && b.upper <= 0.52);
}

#[test]
fn npt_state_never_flips() {
    let err = find_gamma_star(&bell_state(), &ExtensionSpec::level(1), 0.01, &HierarchyOptions::default()).unwrap_err();
    assert!(matches!(err, Error::NoSignChange(_)));
}
