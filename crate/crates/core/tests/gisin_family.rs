use symext::hierarchy::{run_test, ExtensionSpec, HierarchyOptions, Verdict};
use symext::states::gisin_state;

fn verdict(alpha: f64, k: usize) -> Verdict {
    let rho = gisin_state(alpha).unwrap();
    let t = std::time::Instant::now();
    let r = run_test(&rho, &ExtensionSpec::level(k), &HierarchyOptions::default()).unwrap();
    eprintln!("alpha {alpha} k {k}: {:?} t = {:?} iters {} ({:.1?})", r.status, r.margin_t(), r.solver.iterations, t.elapsed());
    r.status
}

#[test]
fn level_one_threshold() {
    assert_eq!(verdict(2.8, 1), Verdict::Entangled);
    assert_eq!(verdict(2.9, 1), Verdict::SeparableConsistent);
}

#[test]
fn level_two_detects_the_ppt_members() {
    for a in [3.0, 5.0, 10.0] {
        assert_eq!(verdict(a, 2), Verdict::Entangled, "alpha {a}");
    }
}
