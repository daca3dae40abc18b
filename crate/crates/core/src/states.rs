//! Example states and witnesses, separable ensembles, random states.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::DensityMatrix;
use crate::qlinalg::{c, kron, kron_vec, outer, trace, CMat, CVec, TensorSpace, C64};
use crate::witness::gaussian_vector;

fn ket(dim: usize, entries: &[(usize, f64)]) -> CVec {
    let mut v = CVec::zeros(dim);
    for &(i, a) in entries {
        v[i] += c(a, 0.0);
    }
    v
}

fn projector(dim: usize, i: usize) -> CMat {
    let mut m = CMat::zeros(dim, dim);
    m[(i, i)] = c(1.0, 0.0);
    m
}

/// `|ab⟩` index on `d ⊗ d`.
fn pair(d: usize, a: usize, b: usize) -> usize {
    a * d + b
}

fn psi_plus3() -> CVec {
    let s = 1.0 / 3f64.sqrt();
    ket(9, &[(pair(3, 0, 0), s), (pair(3, 1, 1), s), (pair(3, 2, 2), s)])
}

/// `ρ_α = 2/7 |ψ₊⟩⟨ψ₊| + α/7 σ₊ + (5 − α)/7 V σ₊ V` on `3 ⊗ 3`.
pub fn choi_state(alpha: f64) -> Result<DensityMatrix> {
    if !(0.0..=5.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!("α = {alpha} is outside [0, 5]")));
    }
    let psi = psi_plus3();
    let mut m = outer(&psi, &psi) * c(2.0 / 7.0, 0.0);
    for (a, b) in [(0, 1), (1, 2), (2, 0)] {
        m[(pair(3, a, b), pair(3, a, b))] += c(alpha / 21.0, 0.0);
        m[(pair(3, b, a), pair(3, b, a))] += c((5.0 - alpha) / 21.0, 0.0);
    }
    DensityMatrix::new(m, 3, 3)
}

/// `2 Σ|ii⟩⟨ii| + |02⟩⟨02| + |10⟩⟨10| + |21⟩⟨21| − 3|ψ₊⟩⟨ψ₊|`, with `Tr[W ρ_α] = (3 − α)/7`.
pub fn choi_witness() -> CMat {
    let psi = psi_plus3();
    let mut w = outer(&psi, &psi) * c(-3.0, 0.0);
    for i in 0..3 {
        w[(pair(3, i, i), pair(3, i, i))] += c(2.0, 0.0);
    }
    for (a, b) in [(0, 2), (1, 0), (2, 1)] {
        w += projector(9, pair(3, a, b));
    }
    w
}

/// The `4 ⊗ 4` family `(|ψ₁⟩⟨ψ₁| + |ψ₂⟩⟨ψ₂| + α σ) / (2 + α)`.
pub fn gisin_state(alpha: f64) -> Result<DensityMatrix> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!("α = {alpha} must be nonnegative")));
    }
    let r = std::f64::consts::SQRT_2 / 2.0;
    let psi1 = ket(16, &[(pair(4, 0, 0), 0.5), (pair(4, 1, 1), 0.5), (pair(4, 2, 2), r)]);
    let psi2 = ket(16, &[(pair(4, 0, 1), 0.5), (pair(4, 1, 0), 0.5), (pair(4, 3, 3), r)]);
    let mut m = outer(&psi1, &psi1) + outer(&psi2, &psi2);
    for (a, b) in [(0, 2), (0, 3), (1, 2), (1, 3), (2, 0), (2, 1), (3, 0), (3, 1)] {
        m[(pair(4, a, b), pair(4, a, b))] += c(alpha / 8.0, 0.0);
    }
    DensityMatrix::new(m * c(1.0 / (2.0 + alpha), 0.0), 4, 4)
}

/// Witness with `Tr[W ρ_α] = −2(√2 − 1)/(2 + α)` for the `4 ⊗ 4` family.
pub fn gisin_witness() -> CMat {
    let diff = |a: (usize, usize), b: (usize, usize)| {
        let v = ket(16, &[(pair(4, a.0, a.1), 1.0), (pair(4, b.0, b.1), -1.0)]);
        outer(&v, &v)
    };
    let mut w = diff((2, 2), (0, 0)) + diff((2, 2), (1, 1)) + diff((3, 3), (0, 1)) + diff((3, 3), (1, 0));
    w += projector(16, pair(4, 2, 3)) + projector(16, pair(4, 3, 2));
    w -= projector(16, pair(4, 2, 2)) + projector(16, pair(4, 3, 3));
    w
}

/// Convex combination of pure product states.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProductEnsemble {
    pub d_a: usize,
    pub d_b: usize,
    pub terms: Vec<ProductTerm>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProductTerm {
    pub weight: f64,
    /// Unit vector on A as (re, im) pairs.
    pub a: Vec<(f64, f64)>,
    pub b: Vec<(f64, f64)>,
}

fn to_vec(v: &[(f64, f64)]) -> CVec {
    CVec::from_iterator(v.len(), v.iter().map(|&(r, i)| c(r, i)))
}

fn from_vec(v: &CVec) -> Vec<(f64, f64)> {
    v.iter().map(|z| (z.re, z.im)).collect()
}

impl ProductEnsemble {
    pub fn validate(&self) -> Result<()> {
        TensorSpace::bipartite(self.d_a, self.d_b)?;
        if self.terms.is_empty() {
            return Err(Error::InvalidParameter("ensemble has no terms".into()));
        }
        let total: f64 = self.terms.iter().map(|t| t.weight).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("weights sum to {total}")));
        }
        for (i, t) in self.terms.iter().enumerate() {
            if !(t.weight > 0.0) {
                return Err(Error::InvalidParameter(format!("term {i} has weight {}", t.weight)));
            }
            if t.a.len() != self.d_a || t.b.len() != self.d_b {
                return Err(Error::Dimension(format!("term {i} has the wrong local dimensions")));
            }
            for v in [&t.a, &t.b] {
                let n = to_vec(v).norm();
                if (n - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidParameter(format!("term {i} has a vector of norm {n}")));
                }
            }
        }
        Ok(())
    }

    /// `n` terms with Dirichlet-like weights and Haar-random local vectors.
    pub fn random(d_a: usize, d_b: usize, n: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("ensemble needs at least one term".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let terms = raw
            .iter()
            .map(|w| {
                let a = gaussian_vector(d_a, &mut rng);
                let b = gaussian_vector(d_b, &mut rng);
                ProductTerm {
                    weight: w / total,
                    a: from_vec(&(&a / c(a.norm(), 0.0))),
                    b: from_vec(&(&b / c(b.norm(), 0.0))),
                }
            })
            .collect();
        let e = Self { d_a, d_b, terms };
        e.validate()?;
        Ok(e)
    }
}

/// `Σ p_i |ψ_i⟩⟨ψ_i| ⊗ |φ_i⟩⟨φ_i|`.
pub fn from_ensemble(e: &ProductEnsemble) -> Result<DensityMatrix> {
    e.validate()?;
    let n = e.d_a * e.d_b;
    let mut m = CMat::zeros(n, n);
    for t in &e.terms {
        let v = kron_vec(&to_vec(&t.a), &to_vec(&t.b));
        m += outer(&v, &v) * c(t.weight, 0.0);
    }
    DensityMatrix::new(m, e.d_a, e.d_b)
}

/// `Σ p_i |ψ_i⟩⟨ψ_i|^{⊗k} ⊗ |φ_i⟩⟨φ_i|` on `[A; k] ⊗ B`.
pub fn separable_extension(e: &ProductEnsemble, k: usize) -> Result<CMat> {
    e.validate()?;
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let n = e.d_a.pow(k as u32) * e.d_b;
    let mut m = CMat::zeros(n, n);
    for t in &e.terms {
        let a = to_vec(&t.a);
        let mut v = CVec::from_element(1, C64::new(1.0, 0.0));
        for _ in 0..k {
            v = kron_vec(&v, &a);
        }
        v = kron_vec(&v, &to_vec(&t.b));
        m += outer(&v, &v) * c(t.weight, 0.0);
    }
    Ok(m)
}

/// `G G† / Tr[G G†]` with `G` a `d_A d_B × rank` complex Gaussian matrix drawn
/// column by column from `ChaCha8Rng::seed_from_u64(seed)`.
pub fn random_state(d_a: usize, d_b: usize, rank: usize, seed: u64) -> Result<DensityMatrix> {
    let n = d_a * d_b;
    if rank == 0 || rank > n {
        return Err(Error::InvalidParameter(format!("rank {rank} must lie in 1..={n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cols: Vec<CVec> = (0..rank).map(|_| gaussian_vector(n, &mut rng)).collect();
    let g = CMat::from_columns(&cols);
    let m = &g * g.adjoint();
    let tr = trace(&m).re;
    DensityMatrix::new(m * c(1.0 / tr, 0.0), d_a, d_b)
}

/// Named catalog entries for the command-line tool.
pub const CATALOG: &[(&str, &str)] = &[
    ("choi", "3x3 Choi-family state, parameter alpha in [0, 5]"),
    ("choi-witness", "3x3 witness with Tr[W rho_alpha] = (3 - alpha)/7"),
    ("gisin", "4x4 state family, parameter alpha >= 0"),
    ("gisin-witness", "4x4 witness negative on the whole family"),
    ("bell", "2x2 maximally entangled state"),
    ("maximally-mixed", "identity over d_A d_B, parameters d_A and d_B"),
];

/// `|Φ₊⟩⟨Φ₊|` on `2 ⊗ 2`.
pub fn bell_state() -> DensityMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let v = ket(4, &[(0, s), (3, s)]);
    DensityMatrix::new(outer(&v, &v), 2, 2).expect("valid state")
}

pub fn maximally_mixed(d_a: usize, d_b: usize) -> Result<DensityMatrix> {
    let n = d_a * d_b;
    DensityMatrix::new(CMat::identity(n, n) * c(1.0 / n as f64, 0.0), d_a, d_b)
}

/// `ψ ⊗ φ` projector, used by tests and corpora.
pub fn product_state(a: &CVec, b: &CVec) -> Result<DensityMatrix> {
    let a = a / c(a.norm(), 0.0);
    let b = b / c(b.norm(), 0.0);
    DensityMatrix::new(kron(&outer(&a, &a), &outer(&b, &b)), a.len(), b.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qlinalg::{min_eigenvalue, permute_factors, trace_product};

    #[test]
    fn choi_family_is_valid_and_swap_covariant() {
        for a in [0.0, 2.5, 5.0] {
            assert!(choi_state(a).unwrap().warnings().is_empty());
        }
        assert!(choi_state(5.5).is_err());
        let space = TensorSpace::bipartite(3, 3).unwrap();
        let (swapped, _) = permute_factors(choi_state(1.3).unwrap().matrix(), &space, &[1, 0]).unwrap();
        assert!((swapped - choi_state(3.7).unwrap().matrix()).iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn choi_ppt_window() {
        assert!(choi_state(4.5).unwrap().pt_min_eigenvalue() < 0.0);
        assert!(choi_state(0.5).unwrap().pt_min_eigenvalue() < 0.0);
        assert!(choi_state(3.5).unwrap().pt_min_eigenvalue() >= -1e-14);
    }

    #[test]
    fn choi_witness_values() {
        let w = choi_witness();
        for a in [3.0, 4.0] {
            let v = trace_product(choi_state(a).unwrap().matrix(), &w).re;
            assert!((v - (3.0 - a) / 7.0).abs() < 1e-14);
        }
    }

    #[test]
    fn gisin_values() {
        let w = gisin_witness();
        for a in [0.0, 3.0, 10.0] {
            let rho = gisin_state(a).unwrap();
            let v = trace_product(rho.matrix(), &w).re;
            assert!((v + 2.0 * (2f64.sqrt() - 1.0) / (2.0 + a)).abs() < 1e-14);
        }
        assert!(gisin_state(2.8).unwrap().pt_min_eigenvalue() < 0.0);
        assert!(gisin_state(2.9).unwrap().pt_min_eigenvalue() >= -1e-14);
        assert!(gisin_state(-0.1).is_err());
    }

    #[test]
    fn random_states_are_deterministic() {
        let a = random_state(2, 3, 6, 11).unwrap();
        let b = random_state(2, 3, 6, 11).unwrap();
        assert_eq!(a.matrix(), b.matrix());
        let pure = random_state(2, 2, 1, 3).unwrap();
        let p2 = trace_product(pure.matrix(), pure.matrix()).re;
        assert!((p2 - 1.0).abs() < 1e-12);
        assert!(random_state(2, 2, 5, 0).is_err());
    }

    #[test]
    fn single_term_extension_is_pure_product() {
        let e = ProductEnsemble::random(2, 2, 1, 4).unwrap();
        let x = separable_extension(&e, 3).unwrap();
        assert!((trace_product(&x, &x).re - 1.0).abs() < 1e-12);
        assert!(min_eigenvalue(&x) > -1e-14);
    }
}
