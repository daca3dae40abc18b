//! Corpus-level properties of the hierarchy on 2⊗2 and 2⊗3 states.

use proptest::prelude::*;
use symext::hierarchy::{
    check_extension, required_resources, run_test, DensityMatrix, ExtensionLayout, ExtensionSpec,
    HierarchyOptions, Verdict,
};
use symext::qlinalg::{
    c, min_eigenvalue, partial_trace, partial_transpose, permute_factors, CMat, SymmetricSubspace,
    TensorSpace,
};
use symext::states::{from_ensemble, random_state, separable_extension, ProductEnsemble};

fn binom(n: usize, k: usize) -> usize {
    (1..=k).fold(1u128, |acc, i| acc * (n + 1 - i) as u128 / i as u128) as usize
}

/// `p ρ_G + (1 − p) 1/n` with ρ_G a seeded Ginibre state of the given rank.
fn noisy_state(d_a: usize, d_b: usize, rank: usize, p: f64, seed: u64) -> DensityMatrix {
    let n = d_a * d_b;
    let g = random_state(d_a, d_b, rank, seed).unwrap();
    let m = g.matrix() * c(p, 0.0) + CMat::identity(n, n) * c((1.0 - p) / n as f64, 0.0);
    DensityMatrix::new(m, d_a, d_b).unwrap()
}

/// Twenty states alternating 2⊗2 and 2⊗3 with varying rank and noise.
fn corpus() -> Vec<DensityMatrix> {
    (0..20u64)
        .map(|i| {
            let d_b = if i % 2 == 0 { 2 } else { 3 };
            let rank = 1 + (i as usize / 2) % (2 * d_b);
            let p = 0.35 + 0.065 * (i / 2) as f64;
            noisy_state(2, d_b, rank, p, 1000 + i)
        })
        .collect()
}

fn pt_min(rho: &DensityMatrix) -> f64 {
    let space = TensorSpace::bipartite(rho.d_a(), rho.d_b()).unwrap();
    min_eigenvalue(&partial_transpose(rho.matrix(), &space, &[0]).unwrap())
}

fn options() -> HierarchyOptions {
    HierarchyOptions { ksos_samples: 200, ..HierarchyOptions::default() }
}

#[test]
fn monotone_across_levels_on_corpus() {
    let corpus = corpus();
    let mut separable_at_three = 0;
    for (i, rho) in corpus.iter().enumerate() {
        let verdicts: Vec<Verdict> =
            (1..=3).map(|k| run_test(rho, &ExtensionSpec::level(k), &options()).unwrap().status).collect();
        for k in 1..3 {
            if verdicts[k] == Verdict::SeparableConsistent {
                assert_eq!(verdicts[k - 1], Verdict::SeparableConsistent, "state {i}: {verdicts:?}");
            }
        }
        separable_at_three += usize::from(verdicts[2] == Verdict::SeparableConsistent);
    }
    assert!(separable_at_three > 0 && separable_at_three < corpus.len(), "{separable_at_three}");
}

#[test]
fn level_one_matches_exact_ppt_characterization() {
    for d_b in [2, 3] {
        let (mut entangled, mut separable) = (0, 0);
        for i in 0..100u64 {
            let rank = 1 + (i as usize) % (2 * d_b);
            let p = 0.2 + 0.8 * ((i * 37) % 100) as f64 / 100.0;
            let rho = noisy_state(2, d_b, rank, p, 5000 + 100 * d_b as u64 + i);
            let lam = pt_min(&rho);
            let status = run_test(&rho, &ExtensionSpec::level(1), &options()).unwrap().status;
            if lam.abs() < 1e-7 {
                continue;
            }
            let expected = if lam < 0.0 { Verdict::Entangled } else { Verdict::SeparableConsistent };
            assert_eq!(status, expected, "2x{d_b} state {i}: λ_min(ρ^T_A) = {lam:e}");
            if lam < 0.0 {
                entangled += 1;
            } else {
                separable += 1;
            }
        }
        assert!(entangled >= 10 && separable >= 10, "2x{d_b}: {entangled} / {separable}");
    }
}

#[test]
fn reduced_and_unreduced_agree_on_corpus() {
    for (i, rho) in corpus().iter().enumerate() {
        for k in [2, 3] {
            let reduced = run_test(rho, &ExtensionSpec::new(k, true, true).unwrap(), &options()).unwrap();
            let full = run_test(rho, &ExtensionSpec::new(k, true, false).unwrap(), &options()).unwrap();
            assert_eq!(reduced.status, full.status, "state {i}, k = {k}");
        }
    }
}

/// Recomputes the extension properties from scratch on the reported ρ̃.
fn assert_valid_extension(x: &CMat, rho: &DensityMatrix, k: usize) {
    let mut dims = vec![rho.d_a(); k];
    dims.push(rho.d_b());
    let space = TensorSpace::new(dims).unwrap();
    let max_abs = |m: &CMat| m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let traced = if k == 1 { x.clone() } else { partial_trace(x, &space, &(1..k).collect::<Vec<_>>()).unwrap().0 };
    assert!(max_abs(&(traced - rho.matrix())) <= 1e-7);
    for i in 0..k {
        for j in i + 1..k {
            let mut perm: Vec<usize> = (0..=k).collect();
            perm.swap(i, j);
            let (y, _) = permute_factors(x, &space, &perm).unwrap();
            assert!(max_abs(&(y - x)) <= 1e-7);
        }
    }
    assert!(min_eigenvalue(x) >= -1e-7);
    for l in 1..=k {
        let pt = partial_transpose(x, &space, &(0..l).collect::<Vec<_>>()).unwrap();
        assert!(min_eigenvalue(&pt) >= -1e-7, "l = {l}");
    }
}

#[test]
fn separable_consistent_reports_carry_valid_extensions() {
    let mut checked = 0;
    for rho in corpus() {
        for k in [1, 2, 3] {
            let r = run_test(&rho, &ExtensionSpec::level(k), &options()).unwrap();
            if r.status == Verdict::SeparableConsistent {
                assert_valid_extension(r.extension.as_ref().expect("extension fits the cap"), &rho, k);
                checked += 1;
            }
        }
    }
    assert!(checked > 0);
}

#[test]
fn separable_ensembles_pass_and_their_extension_is_valid() {
    for (i, (d_a, d_b)) in [(2, 2), (2, 3), (3, 2), (3, 3)].into_iter().enumerate() {
        let e = ProductEnsemble::random(d_a, d_b, 4, 40 + i as u64).unwrap();
        let rho = from_ensemble(&e).unwrap();
        for k in [2, 3] {
            let x = separable_extension(&e, k).unwrap();
            let check = check_extension(&x, rho.matrix(), d_a, d_b, k, true).unwrap();
            assert!(check.passed, "{d_a}x{d_b}, k = {k}: {check:?}");
            assert_valid_extension(&x, &rho, k);
            if d_a.pow(k as u32) * d_b <= 54 {
                let status = run_test(&rho, &ExtensionSpec::level(k), &options()).unwrap().status;
                assert_ne!(status, Verdict::Entangled, "{d_a}x{d_b}, k = {k}");
            }
        }
    }
}

#[test]
fn dimension_formulas() {
    for d_a in 2..=4usize {
        for k in 1..=5usize {
            let d_s = binom(d_a + k - 1, k);
            assert_eq!(SymmetricSubspace::new(d_a, k).unwrap().dim(), d_s);
            for d_b in [2usize, 3] {
                for reduced in [true, false] {
                    let spec = ExtensionSpec { k, ppt: true, reduced };
                    let m = if reduced {
                        (d_s * d_s - d_a * d_a) * d_b * d_b
                    } else {
                        (binom(d_a * d_a + k - 1, k) - d_a * d_a) * d_b * d_b
                    };
                    let est = required_resources(d_a, d_b, &spec);
                    assert_eq!(est.num_vars, m, "d_A = {d_a}, k = {k}, reduced = {reduced}");
                    assert_eq!(est.block_dims.len(), k + 1);
                    if reduced {
                        assert_eq!(est.block_dims[0], d_s * d_b);
                    } else {
                        assert!(est.block_dims.iter().all(|&n| n == d_a.pow(k as u32) * d_b));
                    }
                    if est.num_vars <= 4000 && est.ambient_dim <= 512 {
                        let layout = ExtensionLayout::build(d_a, d_b, &spec).unwrap();
                        assert_eq!(layout.num_vars(), m, "built: d_A = {d_a}, k = {k}, reduced = {reduced}");
                        assert_eq!(layout.block_dims(), est.block_dims);
                    }
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    /// Level-1 verdict follows the sign of λ_min(ρ^{T_A}) for random 2⊗2 states.
    #[test]
    fn level_one_is_the_ppt_test(seed in any::<u64>(), rank in 1usize..=4, p in 0.1f64..1.0) {
        let rho = noisy_state(2, 2, rank, p, seed);
        let lam = pt_min(&rho);
        prop_assume!(lam.abs() > 1e-7);
        let status = run_test(&rho, &ExtensionSpec::level(1), &options()).unwrap().status;
        prop_assert_eq!(status == Verdict::Entangled, lam < 0.0);
    }
}
