use symext::hierarchy::{run_test, ExtensionSpec, HierarchyOptions, Verdict};
use symext::states::choi_state;

fn verdict(alpha: f64, spec: ExtensionSpec) -> Verdict {
    let rho = choi_state(alpha).unwrap();
    let t = std::time::Instant::now();
    let r = run_test(&rho, &spec, &HierarchyOptions::default()).unwrap();
    eprintln!(
        "alpha {alpha} k {} ppt {}: {:?} t = {:?} iters {} warnings {:?} ({:.1?})",
        spec.k, spec.ppt, r.status, r.margin_t(), r.solver.iterations, r.warnings, t.elapsed()
    );
    if let Some(w) = &r.witness {
        eprintln!("  witness verification {:?}", w.verification);
    }
    r.status
}

#[test]
fn level_two_window() {
    for a in [2.0, 2.5, 3.0] {
        let v = verdict(a, ExtensionSpec::level(2));
        assert!(v == Verdict::SeparableConsistent || (a == 3.0 && v == Verdict::Marginal), "alpha {a}: {v:?}");
    }
    for a in [3.1, 3.5, 4.0] {
        assert_eq!(verdict(a, ExtensionSpec::level(2)), Verdict::Entangled, "alpha {a}");
    }
}

#[test]
fn level_one_detects_npt_members() {
    for a in [0.5, 4.5] {
        assert_eq!(verdict(a, ExtensionSpec::level(1)), Verdict::Entangled);
    }
    assert_eq!(verdict(3.5, ExtensionSpec::level(1)), Verdict::SeparableConsistent);
}

#[test]
fn level_two_without_ppt_is_weaker() {
    let spec = ExtensionSpec::new(2, false, true).unwrap();
    assert_eq!(verdict(3.5, spec), Verdict::SeparableConsistent);
}
