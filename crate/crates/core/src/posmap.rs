//! Linear maps between matrix algebras and positivity certificates.
//!
//! A map `Λ: M_in → M_out` is stored as its defining operator `L` on
//! `[in, out]`: `⟨k|Λ(|i⟩⟨j|)|l⟩ = ⟨i k|L|j l⟩`, equivalently
//! `Λ(ρ) = Tr_in[L (ρᵀ ⊗ 1)]`. `Λ` is completely positive iff `L ⪰ 0`.
//!
//! `Λ̄_k(ρ) = π_k (ρ ⊗ 1^{⊗(k−1)}) π_k` embeds the output into `k` symmetric
//! copies. If `Λ̄_k ∘ Λ` is completely positive for some `k`, `Λ` is
//! positive, and every strictly positive `Λ` passes at some finite `k`.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qlinalg::{
    c, eigh, hermitian_function, max_eigenvalue, min_eigenvalue, outer, permute_factors,
    SymmetricSubspace, CMat, CVec, TensorSpace, C64,
};
use crate::witness::gaussian_vector;

/// Largest composed operator built by [`compose_with_symmetric_embedding`].
pub const COMPOSED_DIM_CAP: usize = 4000;
/// Completely positive when `λ_min(L) ≥ −CP_TOL`.
pub const CP_TOL: f64 = 1e-10;
/// A positivity violation must reach below `−VIOLATION_TOL`.
pub const VIOLATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `Λ: M_A → M_B`, defining operator `W` itself.
    AToB,
    /// `Λ: M_B → M_A`, defining operator `W` with its factors exchanged.
    BToA,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearMap {
    pub in_dim: usize,
    pub out_dim: usize,
    /// Defining operator on `[in, out]`.
    pub choi: CMat,
}

impl LinearMap {
    pub fn new(choi: CMat, in_dim: usize, out_dim: usize) -> Result<Self> {
        TensorSpace::bipartite(in_dim, out_dim)?.check_matrix(&choi)?;
        crate::qlinalg::ensure_hermitian(&choi)?;
        Ok(Self { in_dim, out_dim, choi })
    }

    /// `ρ ↦ ρᵀ`, defined by the swap operator.
    pub fn transpose(d: usize) -> Self {
        let space = TensorSpace::new(vec![d, d]).expect("valid dimension");
        let swap = crate::qlinalg::swap_operator(&space, 0, 1).expect("two factors");
        Self { in_dim: d, out_dim: d, choi: swap }
    }

    /// The identity channel, defined by `Σ_ij |ii⟩⟨jj|`.
    pub fn identity(d: usize) -> Self {
        let mut choi = CMat::zeros(d * d, d * d);
        for i in 0..d {
            for j in 0..d {
                choi[(i * d + i, j * d + j)] = c(1.0, 0.0);
            }
        }
        Self { in_dim: d, out_dim: d, choi }
    }

    /// `ρ ↦ Tr[ρ] · 1/out`.
    pub fn tracial(in_dim: usize, out_dim: usize) -> Self {
        let n = in_dim * out_dim;
        Self { in_dim, out_dim, choi: CMat::identity(n, n) * c(1.0 / out_dim as f64, 0.0) }
    }

    pub fn is_completely_positive(&self) -> bool {
        min_eigenvalue(&self.choi) >= -CP_TOL
    }

    /// `(1 − t)·self + t·other`.
    pub fn mix(&self, other: &LinearMap, t: f64) -> Result<LinearMap> {
        if self.in_dim != other.in_dim || self.out_dim != other.out_dim {
            return Err(Error::Dimension("maps act between different spaces".into()));
        }
        Ok(LinearMap {
            in_dim: self.in_dim,
            out_dim: self.out_dim,
            choi: &self.choi * c(1.0 - t, 0.0) + &other.choi * c(t, 0.0),
        })
    }
}

/// `Λ(ρ) = Tr_in[L (ρᵀ ⊗ 1)]`.
pub fn apply_map(map: &LinearMap, rho: &CMat) -> Result<CMat> {
    if rho.nrows() != map.in_dim || rho.ncols() != map.in_dim {
        return Err(Error::Dimension(format!(
            "input is {}x{}, map expects {}",
            rho.nrows(),
            rho.ncols(),
            map.in_dim
        )));
    }
    let (di, dout) = (map.in_dim, map.out_dim);
    Ok(CMat::from_fn(dout, dout, |k, l| {
        let mut s = C64::new(0.0, 0.0);
        for i in 0..di {
            for j in 0..di {
                s += map.choi[(i * dout + k, j * dout + l)] * rho[(i, j)];
            }
        }
        s
    }))
}

/// Defining operator of a map given as a function on matrix units.
pub fn operator_from_map(in_dim: usize, out_dim: usize, f: impl Fn(&CMat) -> CMat) -> Result<LinearMap> {
    let mut choi = CMat::zeros(in_dim * out_dim, in_dim * out_dim);
    for i in 0..in_dim {
        for j in 0..in_dim {
            let mut e = CMat::zeros(in_dim, in_dim);
            e[(i, j)] = c(1.0, 0.0);
            let out = f(&e);
            if out.nrows() != out_dim || out.ncols() != out_dim {
                return Err(Error::Dimension("map output has the wrong size".into()));
            }
            for k in 0..out_dim {
                for l in 0..out_dim {
                    choi[(i * out_dim + k, j * out_dim + l)] = out[(k, l)];
                }
            }
        }
    }
    LinearMap::new(choi, in_dim, out_dim)
}

/// The map defined by a witness on `[d_A, d_B]`.
pub fn map_from_witness(w: &CMat, d_a: usize, d_b: usize, direction: Direction) -> Result<LinearMap> {
    let space = TensorSpace::bipartite(d_a, d_b)?;
    space.check_matrix(w)?;
    match direction {
        Direction::AToB => LinearMap::new(w.clone(), d_a, d_b),
        Direction::BToA => {
            let (swapped, _) = permute_factors(w, &space, &[1, 0])?;
            LinearMap::new(swapped, d_b, d_a)
        }
    }
}

/// The witness operator on `[d_A, d_B]` that defines `map` in `direction`.
pub fn witness_from_map(map: &LinearMap, direction: Direction) -> Result<CMat> {
    match direction {
        Direction::AToB => Ok(map.choi.clone()),
        Direction::BToA => {
            let space = TensorSpace::bipartite(map.in_dim, map.out_dim)?;
            Ok(permute_factors(&map.choi, &space, &[1, 0])?.0)
        }
    }
}

/// Rescales `map` so that `Λ(1) = 1`; fails when `Λ(1)` is not a positive multiple of the identity.
pub fn normalize_unital(map: &LinearMap) -> Result<LinearMap> {
    let image = apply_map(map, &CMat::identity(map.in_dim, map.in_dim))?;
    let s = image[(0, 0)].re;
    let target = CMat::identity(map.out_dim, map.out_dim) * c(s, 0.0);
    let dev = (&image - target).iter().fold(0.0f64, |a, v| a.max(v.norm()));
    if !(s > 0.0) || dev > 1e-12 * s.abs().max(1.0) {
        return Err(Error::InvalidParameter("Λ(1) is not a positive multiple of 1".into()));
    }
    Ok(LinearMap { choi: &map.choi * c(1.0 / s, 0.0), ..map.clone() })
}

/// Defining operator of `Λ̄_k ∘ Λ` on `[in, Sym_k(out)]`, in the occupation-number basis:
/// `(1 ⊗ V)† (L ⊗ 1^{⊗(k−1)}) (1 ⊗ V)`.
pub fn compose_with_symmetric_embedding(map: &LinearMap, k: usize) -> Result<CMat> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let d = map.out_dim;
    let sym = SymmetricSubspace::new(d, k)?;
    let ds = sym.dim();
    let n = map.in_dim * ds;
    if n > COMPOSED_DIM_CAP {
        return Err(Error::TooLarge(format!(
            "composed operator has dimension {n} > {COMPOSED_DIM_CAP}"
        )));
    }
    // |S_n⟩ = Σ_a √(n_a/k) |a⟩ ⊗ |S_{n − e_a}⟩ for normalized symmetric states.
    let lower: HashMap<Vec<usize>, usize> = if k > 1 {
        SymmetricSubspace::new(d, k - 1)?
            .occupations()
            .iter()
            .enumerate()
            .map(|(i, o)| (o.clone(), i))
            .collect()
    } else {
        HashMap::from([(vec![0; d], 0)])
    };
    let split: Vec<Vec<(usize, f64, usize)>> = sym
        .occupations()
        .iter()
        .map(|occ| {
            (0..d)
                .filter(|&a| occ[a] > 0)
                .map(|a| {
                    let mut rest = occ.clone();
                    rest[a] -= 1;
                    (a, (occ[a] as f64 / k as f64).sqrt(), lower[&rest])
                })
                .collect()
        })
        .collect();
    let di = map.in_dim;
    let mut out = CMat::zeros(n, n);
    for s in 0..ds {
        for t in 0..ds {
            for &(a, wa, ra) in &split[s] {
                for &(b, wb, rb) in &split[t] {
                    if ra != rb {
                        continue;
                    }
                    let w = c(wa * wb, 0.0);
                    for i in 0..di {
                        for j in 0..di {
                            out[(i * ds + s, j * ds + t)] += w * map.choi[(i * d + a, j * d + b)];
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum PositivityVerdict {
    CompletelyPositive,
    StrictlyPositiveCertified { k: usize },
    /// A pure input `|x⟩⟨x|` whose image has a negative eigenvalue.
    NotPositive { input: Vec<(f64, f64)>, image_min_eigenvalue: f64 },
    Undetermined { k_max: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PositivityReport {
    pub verdict: PositivityVerdict,
    pub choi_min_eigenvalue: f64,
    /// Smallest `λ_min(Λ(|x⟩⟨x|))` found by the violation search.
    pub sampled_min_eigenvalue: f64,
    /// `(k, λ_min)` of the composed operator for each level tried.
    pub per_k_min_eigenvalues: Vec<(usize, f64)>,
}

/// Pure inputs sampled by the positivity-violation search.
pub const VIOLATION_SAMPLES: usize = 10_000;
/// Best samples refined by alternating minimization.
pub const VIOLATION_POLISH: usize = 50;

fn lowest(m: &CMat) -> (f64, CVec) {
    let (vals, vecs) = eigh(m);
    (vals[0], vecs.column(0).into_owned())
}

/// `G_ij = ⟨y|Λ(|i⟩⟨j|)|y⟩`, so that `⟨y|Λ(|x⟩⟨x|)|y⟩ = x̄† G x̄`.
fn contract_output(map: &LinearMap, y: &CVec) -> CMat {
    let (di, dout) = (map.in_dim, map.out_dim);
    CMat::from_fn(di, di, |i, j| {
        let mut s = C64::new(0.0, 0.0);
        for k in 0..dout {
            for l in 0..dout {
                s += y[k].conj() * map.choi[(i * dout + k, j * dout + l)] * y[l];
            }
        }
        s
    })
}

/// Minimum of `λ_min(Λ(|x⟩⟨x|))` over sampled unit `x`, with alternating refinement.
pub fn search_positivity_violation<R: Rng + ?Sized>(
    map: &LinearMap,
    samples: usize,
    polish: usize,
    rng: &mut R,
) -> Result<(f64, CVec)> {
    if samples == 0 {
        return Err(Error::InvalidParameter("at least one sample is needed".into()));
    }
    let eval = |x: &CVec| -> Result<(f64, CVec)> { Ok(lowest(&apply_map(map, &outer(x, x))?)) };
    let mut found: Vec<(f64, CVec, CVec)> = Vec::with_capacity(samples);
    for _ in 0..samples {
        let x = gaussian_vector(map.in_dim, rng);
        let x = &x / c(x.norm(), 0.0);
        let (v, y) = eval(&x)?;
        found.push((v, x, y));
    }
    found.sort_by(|a, b| a.0.total_cmp(&b.0));
    for entry in found.iter_mut().take(polish) {
        let (mut value, mut x, mut y) = entry.clone();
        for _ in 0..200 {
            let (_, u) = lowest(&contract_output(map, &y));
            let nx = u.map(|z| z.conj());
            let (v, ny) = eval(&nx)?;
            let improved = value - v;
            if v < value {
                value = v;
                x = nx;
                y = ny;
            }
            if improved.abs() <= 1e-15 * value.abs().max(1.0) {
                break;
            }
        }
        *entry = (value, x, y);
    }
    let best = found.into_iter().min_by(|a, b| a.0.total_cmp(&b.0)).expect("nonempty");
    Ok((best.0, best.1))
}

/// Complete positivity, then a violation search, then `k = 1..=k_max` composed checks.
pub fn check_strict_positivity<R: Rng + ?Sized>(map: &LinearMap, k_max: usize, rng: &mut R) -> Result<PositivityReport> {
    if k_max == 0 {
        return Err(Error::InvalidParameter("k_max must be at least 1".into()));
    }
    let choi_min = min_eigenvalue(&map.choi);
    let (sampled, x) = search_positivity_violation(map, VIOLATION_SAMPLES, VIOLATION_POLISH, rng)?;
    let mut report = PositivityReport {
        verdict: PositivityVerdict::Undetermined { k_max },
        choi_min_eigenvalue: choi_min,
        sampled_min_eigenvalue: sampled,
        per_k_min_eigenvalues: Vec::new(),
    };
    if choi_min >= -CP_TOL {
        report.verdict = PositivityVerdict::CompletelyPositive;
        return Ok(report);
    }
    if sampled < -VIOLATION_TOL {
        report.verdict = PositivityVerdict::NotPositive {
            input: x.iter().map(|z| (z.re, z.im)).collect(),
            image_min_eigenvalue: sampled,
        };
        return Ok(report);
    }
    for k in 1..=k_max {
        let lam = min_eigenvalue(&compose_with_symmetric_embedding(map, k)?);
        report.per_k_min_eigenvalues.push((k, lam));
        if lam >= -CP_TOL {
            report.verdict = PositivityVerdict::StrictlyPositiveCertified { k };
            break;
        }
    }
    Ok(report)
}

/// Largest `α` with `(1 − α) C_0 + α C_1 ⪰ 0`, where `C_i` are the level-k
/// composed operators of `Λ_0` and `Λ_1`.
pub fn alpha_threshold(map0: &LinearMap, map1: &LinearMap, k: usize) -> Result<f64> {
    if map0.in_dim != map1.in_dim || map0.out_dim != map1.out_dim {
        return Err(Error::Dimension("maps act between different spaces".into()));
    }
    let c0 = compose_with_symmetric_embedding(map0, k)?;
    let c1 = compose_with_symmetric_embedding(map1, k)?;
    let lam0 = min_eigenvalue(&c0);
    if lam0 <= 1e-12 * max_eigenvalue(&c0).abs().max(1.0) {
        return Err(Error::InvalidParameter(format!(
            "the composed operator of Λ₀ is not positive definite (λ_min = {lam0:.3e}); rescale or replace Λ₀"
        )));
    }
    let whiten = hermitian_function(&c0, |v| 1.0 / v.sqrt());
    let m = &whiten * (&c0 - &c1) * &whiten;
    let top = max_eigenvalue(&m);
    Ok(if top > 0.0 { (1.0 / top).min(1.0) } else { 1.0 })
}

/// `Λ_0(ρ) = Tr[ρ]·1/3` and `Λ_1 = Λ_W / 2` (B → A) for the `3 ⊗ 3` Choi-family witness,
/// both unital.
pub fn table1_maps() -> Result<(LinearMap, LinearMap)> {
    let map0 = LinearMap::tracial(3, 3);
    let map1 = normalize_unital(&map_from_witness(&crate::states::choi_witness(), 3, 3, Direction::BToA)?)?;
    Ok((map0, map1))
}

/// `(k, α_k)` for `k = 1..=k_max`.
pub fn table1(k_max: usize) -> Result<Vec<(usize, f64)>> {
    let (m0, m1) = table1_maps()?;
    (1..=k_max).map(|k| Ok((k, alpha_threshold(&m0, &m1, k)?))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qlinalg::symmetric_projector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(n: usize, rng: &mut ChaCha8Rng) -> CMat {
        let cols: Vec<CVec> = (0..n).map(|_| gaussian_vector(n, rng)).collect();
        CMat::from_columns(&cols)
    }

    #[test]
    fn transpose_and_identity_maps() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..5 {
            let m = random_matrix(3, &mut rng);
            let t = apply_map(&LinearMap::transpose(3), &m).unwrap();
            assert!((t - m.transpose()).iter().all(|z| z.norm() < 1e-14));
            let i = apply_map(&LinearMap::identity(3), &m).unwrap();
            assert!((i - &m).iter().all(|z| z.norm() < 1e-14));
        }
        let r = apply_map(&LinearMap::tracial(3, 3), &CMat::identity(3, 3)).unwrap();
        assert!((r - CMat::identity(3, 3)).iter().all(|z| z.norm() < 1e-14));
    }

    #[test]
    fn matrix_element_formula_and_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = random_matrix(6, &mut rng);
        let w = &g + g.adjoint();
        let map = map_from_witness(&w, 2, 3, Direction::AToB).unwrap();
        let again = operator_from_map(2, 3, |e| apply_map(&map, e).unwrap()).unwrap();
        assert!((&again.choi - &w).iter().all(|z| z.norm() < 1e-12));
        let back = map_from_witness(&w, 2, 3, Direction::BToA).unwrap();
        assert!((witness_from_map(&back, Direction::BToA).unwrap() - &w).iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn composition_matches_dense_projector() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = random_matrix(4, &mut rng);
        let map = LinearMap::new(&g + g.adjoint(), 2, 2).unwrap();
        for k in 1..=3 {
            let fast = compose_with_symmetric_embedding(&map, k).unwrap();
            let sym = SymmetricSubspace::new(2, k).unwrap();
            let v = kron_identity_left(2, &sym.isometry().to_dense());
            let rest = 2usize.pow(k as u32 - 1);
            let big = crate::qlinalg::kron(&map.choi, &CMat::identity(rest, rest));
            let dense = v.adjoint() * big * &v;
            assert!((fast - dense).iter().all(|z| z.norm() < 1e-12), "k = {k}");
            let p = symmetric_projector(2, k).unwrap();
            assert!((&p * &p - &p).iter().all(|z| z.norm() < 1e-12));
        }
    }

    fn kron_identity_left(d: usize, v: &CMat) -> CMat {
        crate::qlinalg::kron(&CMat::identity(d, d), v)
    }

    #[test]
    fn first_table_entries() {
        let t = table1(2).unwrap();
        assert!((t[0].1 - 0.4).abs() < 1e-12);
    }
}
