//! Map–operator isomorphism and monotonicity of the composed certificate.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use symext::posmap::{
    apply_map, compose_with_symmetric_embedding, map_from_witness, table1_maps, witness_from_map, Direction,
    LinearMap, CP_TOL,
};
use symext::qlinalg::{c, kron, max_abs, min_eigenvalue, partial_trace, CMat, TensorSpace};

fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> CMat {
    let g = CMat::from_fn(n, n, |_, _| c(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    (&g + g.adjoint()) * c(0.5, 0.0)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn isomorphism_round_trips(seed in any::<u64>(), d_a in 2usize..=4, d_b in 2usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = random_hermitian(d_a * d_b, &mut rng);
        for direction in [Direction::AToB, Direction::BToA] {
            let map = map_from_witness(&w, d_a, d_b, direction).unwrap();
            let back = witness_from_map(&map, direction).unwrap();
            prop_assert!(max_abs(&(back - &w)) <= 1e-12);
            let again = map_from_witness(&witness_from_map(&map, direction).unwrap(), d_a, d_b, direction).unwrap();
            prop_assert!(max_abs(&(again.choi - &map.choi)) <= 1e-12);
        }
    }

    /// `Λ(X) = Tr_in[L (Xᵀ ⊗ 1)]` evaluated through the partial trace.
    #[test]
    fn apply_map_matches_the_partial_trace_formula(seed in any::<u64>(), d_in in 2usize..=4, d_out in 2usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let map = LinearMap::new(random_hermitian(d_in * d_out, &mut rng), d_in, d_out).unwrap();
        let space = TensorSpace::bipartite(d_in, d_out).unwrap();
        for i in 0..d_in {
            for j in 0..d_in {
                let mut e = CMat::zeros(d_in, d_in);
                e[(i, j)] = c(1.0, 0.0);
                let lifted = &map.choi * kron(&e.transpose(), &CMat::identity(d_out, d_out));
                let (want, _) = partial_trace(&lifted, &space, &[0]).unwrap();
                let got = apply_map(&map, &e).unwrap();
                prop_assert!(max_abs(&(got - want)) <= 1e-13);
            }
        }
    }
}

#[test]
fn composed_certificate_is_monotone_in_k() {
    let (tracial, choi_map) = table1_maps().unwrap();
    let mut rows = Vec::new();
    for step in 0..=20 {
        let alpha = step as f64 / 20.0;
        let map = tracial.mix(&choi_map, alpha).unwrap();
        let mins: Vec<f64> =
            (1..=5).map(|k| min_eigenvalue(&compose_with_symmetric_embedding(&map, k).unwrap())).collect();
        for k in 1..mins.len() {
            if mins[k - 1] >= -CP_TOL {
                assert!(mins[k] >= -CP_TOL, "α = {alpha}: certified at k = {k}, not at {}: {mins:?}", k + 1);
            }
        }
        rows.push((alpha, mins));
    }
    for (alpha, mins) in rows.iter().step_by(5) {
        eprintln!("α = {alpha:.2}: λ_min per k = {mins:.3?}");
    }
}
