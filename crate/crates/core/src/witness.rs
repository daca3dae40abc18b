//! Entanglement witnesses from dual certificates.
//!
//! For a level-k run with dual blocks `Z_b`, the witness is
//! `W = E†(Σ_b L_b†(Z_b))`, where `E` is the fixed-part embedding and `L_b`
//! the block maps. Then `Tr[ρ W] = Σ_b Tr[F_0^b Z_b]`, and for every product
//! vector
//!
//! ```text
//! ⟨xy|W|xy⟩ ⟨x|x⟩^{k−1} = Σ_b v_b† Z_b v_b,   v_b = (J_b ⊗ 1)†(x̄^{⊗l_b} ⊗ x^{⊗(k−l_b)} ⊗ y),
//! ```
//!
//! a sum of squares whenever the `Z_b` are positive and satisfy the dual
//! constraints.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::{
    block_isometry, block_kinds, compressed_product, run_test, BlockKind, DensityMatrix,
    ExtensionLayout, ExtensionSpec, HierarchyOptions, Verdict,
};
use crate::qlinalg::{
    eigh, frobenius, kron, max_abs, min_eigenvalue, partial_trace, permute_factors, trace, CMat,
    CVec, TensorSpace, C64,
};

/// Tolerance of the trace identity `Tr[ρ W] = Tr[F_0 Z]`, relative to `max(1, |Tr[F_0 Z]|)`.
pub const TRACE_IDENTITY_TOL: f64 = 1e-9;
/// Largest accepted relative residual of the Gram identity.
pub const KSOS_TOL: f64 = 1e-8;

/// Level and dual blocks a witness was built from.
#[derive(Debug, Clone)]
pub struct WitnessProvenance {
    pub spec: ExtensionSpec,
    pub block_kinds: Vec<BlockKind>,
    pub dual_blocks: Vec<CMat>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct WitnessVerification {
    /// Tr[ρ W] for the target state, with W normalized.
    pub target_value: Option<f64>,
    /// Tr[F_0 Z] reported by the dual solution (raw scale).
    pub dual_value: Option<f64>,
    /// |Tr[ρ W_raw] − Tr[F_0 Z]| / max(1, |Tr[F_0 Z]|).
    pub trace_identity_residual: Option<f64>,
    pub ksos: Option<KsosRecord>,
    pub product_minimum: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Witness {
    /// Hermitian operator on `A ⊗ B`, scaled to unit spectral radius.
    pub operator: CMat,
    /// Unnormalized operator as produced from the dual blocks.
    pub raw: CMat,
    /// `raw = scale · operator`.
    pub scale: f64,
    pub d_a: usize,
    pub d_b: usize,
    pub provenance: Option<WitnessProvenance>,
    pub verification: WitnessVerification,
}

impl Witness {
    /// Wraps a Hermitian operator without provenance.
    pub fn from_operator(w: CMat, d_a: usize, d_b: usize) -> Result<Self> {
        TensorSpace::bipartite(d_a, d_b)?.check_matrix(&w)?;
        crate::qlinalg::ensure_hermitian(&w)?;
        let raw = crate::qlinalg::hermitian_part(&w);
        let (vals, _) = eigh(&raw);
        let scale = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if scale == 0.0 {
            return Err(Error::InvalidParameter("witness operator is zero".into()));
        }
        Ok(Self {
            operator: &raw * C64::new(1.0 / scale, 0.0),
            raw,
            scale,
            d_a,
            d_b,
            provenance: None,
            verification: WitnessVerification::default(),
        })
    }

    /// Negative on the target and certified positive on product states.
    pub fn verified(&self) -> bool {
        let v = &self.verification;
        v.target_value.map_or(false, |t| t < 0.0)
            && v.trace_identity_residual.map_or(true, |r| r <= TRACE_IDENTITY_TOL)
            && v.ksos.as_ref().map_or(false, |k| k.passed)
    }

    /// Tr[ρ W] with the normalized operator.
    pub fn value(&self, rho: &CMat) -> f64 {
        crate::qlinalg::trace_product(rho, &self.operator).re
    }
}

/// Witness from the dual blocks of a level-k run, with all checks filled in.
pub fn extract_witness(layout: &ExtensionLayout, rho: &CMat, z: &[CMat], options: &HierarchyOptions) -> Result<Witness> {
    let tol = options.solver.cert_tol;
    let total: f64 = z.iter().map(|b| trace(b).re).sum();
    for (b, zb) in z.iter().enumerate() {
        let lam = min_eigenvalue(zb);
        if lam < -tol * total.abs().max(1.0) {
            return Err(Error::InvalidParameter(format!("dual block {b} has eigenvalue {lam:.3e}")));
        }
    }
    let raw = layout.witness_from_dual(z)?;
    let mut w = Witness::from_operator(raw, layout.d_a, layout.d_b)?;
    w.provenance = Some(WitnessProvenance {
        spec: layout.spec,
        block_kinds: layout.blocks.iter().map(|b| b.kind).collect(),
        dual_blocks: z.to_vec(),
    });
    let problem = layout.problem(rho)?;
    let dual_value: f64 = problem.f0().iter().zip(z).map(|(f, zb)| (f * zb).trace().re).sum();
    let direct = crate::qlinalg::trace_product(rho, &w.raw).re;
    w.verification.dual_value = Some(dual_value);
    w.verification.trace_identity_residual = Some((direct - dual_value).abs() / dual_value.abs().max(1.0));
    w.verification.target_value = Some(w.value(rho));
    w.verification.ksos = Some(verify_ksos_identity(&w, options.ksos_samples, options.seed)?);
    Ok(w)
}

/// Builds a witness directly from blocks for `spec`, without a target state.
pub fn witness_from_blocks(d_a: usize, d_b: usize, spec: &ExtensionSpec, z: &[CMat]) -> Result<Witness> {
    let layout = ExtensionLayout::build(d_a, d_b, spec)?;
    let raw = layout.witness_from_dual(z)?;
    let mut w = Witness::from_operator(raw, d_a, d_b)?;
    w.provenance = Some(WitnessProvenance {
        spec: *spec,
        block_kinds: layout.blocks.iter().map(|b| b.kind).collect(),
        dual_blocks: z.to_vec(),
    });
    Ok(w)
}

/// Complex vector with independent standard Gaussian real and imaginary parts.
pub fn gaussian_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVec {
    DVector::from_fn(n, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
}

fn normalized(v: CVec) -> CVec {
    let n = v.norm();
    v / C64::new(n, 0.0)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KsosRecord {
    pub samples: usize,
    /// max |lhs − rhs| / Σ_b ‖Z_b‖_F ‖v_b‖².
    pub max_relative_residual: f64,
    pub passed: bool,
}

/// Evaluates both sides of the Gram identity at random, unnormalized product vectors.
pub fn verify_ksos_identity(w: &Witness, samples: usize, seed: u64) -> Result<KsosRecord> {
    let prov = w
        .provenance
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("witness carries no dual blocks".into()))?;
    let spec = prov.spec;
    let isometries = prov
        .block_kinds
        .iter()
        .map(|&kind| block_isometry(w.d_a, spec.k, spec.reduced, kind))
        .collect::<Result<Vec<_>>>()?;
    let norms: Vec<f64> = prov.dual_blocks.iter().map(frobenius).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let x = gaussian_vector(w.d_a, &mut rng);
        let y = gaussian_vector(w.d_b, &mut rng);
        let xy = kron_vector(&x, &y);
        let lhs = crate::qlinalg::expectation(&w.raw, &xy) * x.norm_squared().powi(spec.k as i32 - 1);
        let mut rhs = 0.0;
        let mut scale = 0.0;
        for ((iso, &kind), (zb, nz)) in isometries.iter().zip(&prov.block_kinds).zip(prov.dual_blocks.iter().zip(&norms)) {
            let v = compressed_product(iso, kind, spec.k, &x, &y);
            rhs += crate::qlinalg::expectation(zb, &v);
            scale += nz * v.norm_squared();
        }
        let residual = (lhs - rhs).abs() / scale.max(f64::MIN_POSITIVE);
        worst = worst.max(residual);
    }
    Ok(KsosRecord { samples, max_relative_residual: worst, passed: worst < KSOS_TOL })
}

fn kron_vector(x: &CVec, y: &CVec) -> CVec {
    crate::qlinalg::kron_vec(x, y)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProductMinimum {
    /// min over sampled unit product vectors of ⟨xy|W|xy⟩.
    pub value: f64,
    pub x: Vec<(f64, f64)>,
    pub y: Vec<(f64, f64)>,
    pub samples: usize,
    pub polished: usize,
}

/// Number of best samples refined by alternating minimization.
pub const POLISH_RUNS: usize = 50;

/// `⟨x|_A W |x⟩_A`, an operator on B.
fn contract_a(w: &CMat, x: &CVec, d_b: usize) -> CMat {
    let d_a = x.len();
    CMat::from_fn(d_b, d_b, |b1, b2| {
        let mut s = C64::new(0.0, 0.0);
        for a1 in 0..d_a {
            for a2 in 0..d_a {
                s += x[a1].conj() * w[(a1 * d_b + b1, a2 * d_b + b2)] * x[a2];
            }
        }
        s
    })
}

/// `⟨y|_B W |y⟩_B`, an operator on A.
fn contract_b(w: &CMat, y: &CVec, d_a: usize) -> CMat {
    let d_b = y.len();
    CMat::from_fn(d_a, d_a, |a1, a2| {
        let mut s = C64::new(0.0, 0.0);
        for b1 in 0..d_b {
            for b2 in 0..d_b {
                s += y[b1].conj() * w[(a1 * d_b + b1, a2 * d_b + b2)] * y[b2];
            }
        }
        s
    })
}

fn lowest(m: &CMat) -> (f64, CVec) {
    let (vals, vecs) = eigh(m);
    (vals[0], vecs.column(0).into_owned())
}

/// Minimum of `⟨xy|W|xy⟩` over Haar-random unit product vectors, optionally
/// refined by alternating lowest-eigenvector steps from the best samples.
pub fn evaluate_on_product_states<R: Rng + ?Sized>(
    w: &CMat,
    d_a: usize,
    d_b: usize,
    n_samples: usize,
    optimize: bool,
    rng: &mut R,
) -> Result<ProductMinimum> {
    TensorSpace::bipartite(d_a, d_b)?.check_matrix(w)?;
    if n_samples == 0 {
        return Err(Error::InvalidParameter("at least one sample is needed".into()));
    }
    let mut samples: Vec<(f64, CVec, CVec)> = (0..n_samples)
        .map(|_| {
            let x = normalized(gaussian_vector(d_a, rng));
            let y = normalized(gaussian_vector(d_b, rng));
            let v = crate::qlinalg::expectation(w, &kron_vector(&x, &y));
            (v, x, y)
        })
        .collect();
    samples.sort_by(|a, b| a.0.total_cmp(&b.0));
    let polished = if optimize { POLISH_RUNS.min(samples.len()) } else { 0 };
    for s in samples.iter_mut().take(polished) {
        let (mut value, mut x, mut y) = (s.0, s.1.clone(), s.2.clone());
        for _ in 0..200 {
            let (_, ny) = lowest(&contract_a(w, &x, d_b));
            let (v, nx) = lowest(&contract_b(w, &ny, d_a));
            y = ny;
            x = nx;
            let improved = value - v;
            value = v;
            if improved.abs() <= 1e-15 * value.abs().max(1.0) {
                break;
            }
        }
        *s = (value, x, y);
    }
    let best = samples
        .into_iter()
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .expect("at least one sample");
    let pairs = |v: &CVec| v.iter().map(|z| (z.re, z.im)).collect();
    Ok(ProductMinimum { value: best.0, x: pairs(&best.1), y: pairs(&best.2), samples: n_samples, polished })
}

fn filter(d_a: usize, gamma: f64) -> Result<CMat> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidParameter(format!("γ must be positive, got {gamma}")));
    }
    Ok(CMat::from_fn(d_a, d_a, |i, j| {
        if i != j {
            C64::new(0.0, 0.0)
        } else if i == 0 {
            C64::new(1.0, 0.0)
        } else {
            C64::new(gamma, 0.0)
        }
    }))
}

/// `(A ⊗ 1) ρ (A† ⊗ 1) / N` with `A = diag(1, γ, …, γ)`. Returns the state and `N`.
pub fn scale_state(rho: &DensityMatrix, gamma: f64) -> Result<(DensityMatrix, f64)> {
    let a = kron(&filter(rho.d_a(), gamma)?, &CMat::identity(rho.d_b(), rho.d_b()));
    let m = &a * rho.matrix() * a.adjoint();
    let n = trace(&m).re;
    let scaled = DensityMatrix::new(m * C64::new(1.0 / n, 0.0), rho.d_a(), rho.d_b())?;
    Ok((scaled, n))
}

/// `(A^{−1})† ⊗ 1 · Z · A^{−1} ⊗ 1`, so that `Tr[ρ_γ Z_γ] = Tr[ρ Z] / N`.
pub fn scale_witness(z: &CMat, d_a: usize, d_b: usize, gamma: f64) -> Result<CMat> {
    TensorSpace::bipartite(d_a, d_b)?.check_matrix(z)?;
    let inv = filter(d_a, 1.0 / gamma)?;
    let a = kron(&inv, &CMat::identity(d_b, d_b));
    Ok(a.adjoint() * z * a)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GammaEvaluation {
    pub gamma: f64,
    pub verdict: Verdict,
    pub margin_t: Option<f64>,
}

/// Bracket `[lower, upper]` around the largest γ whose filtered state still passes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GammaBracket {
    /// Largest γ found not detected (SeparableConsistent or Marginal).
    pub lower: f64,
    /// Smallest γ found detected as Entangled.
    pub upper: f64,
    pub evaluations: Vec<GammaEvaluation>,
}

impl GammaBracket {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Smallest γ tried while looking for an undetected filtered state.
pub const GAMMA_FLOOR: f64 = 1e-3;

/// Bisection for the detection threshold of the filtered family `ρ_γ`.
///
/// Marginal verdicts count as undetected, so the returned `upper` is always
/// a certified Entangled point.
pub fn find_gamma_star(
    rho: &DensityMatrix,
    spec: &ExtensionSpec,
    tol: f64,
    options: &HierarchyOptions,
) -> Result<GammaBracket> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter("tol must be positive".into()));
    }
    let mut evaluations = Vec::new();
    let mut eval = |gamma: f64| -> Result<Verdict> {
        let (state, _) = scale_state(rho, gamma)?;
        let report = run_test(&state, spec, options)?;
        log::info!("γ = {gamma:.6}: {:?} (t = {:?})", report.status, report.margin_t());
        evaluations.push(GammaEvaluation { gamma, verdict: report.status, margin_t: report.margin_t() });
        Ok(report.status)
    };
    if eval(1.0)? != Verdict::Entangled {
        return Err(Error::NoSignChange("the unfiltered state is not detected at this level".into()));
    }
    let mut upper = 1.0;
    let mut lower = None;
    let mut gamma = 0.5;
    while gamma >= GAMMA_FLOOR {
        if eval(gamma)? == Verdict::Entangled {
            upper = gamma;
            gamma *= 0.5;
        } else {
            lower = Some(gamma);
            break;
        }
    }
    let mut lower = lower.ok_or_else(|| {
        Error::NoSignChange(format!("every filtered state down to γ = {GAMMA_FLOOR} is detected"))
    })?;
    while upper - lower > tol {
        let mid = 0.5 * (lower + upper);
        if eval(mid)? == Verdict::Entangled {
            upper = mid;
        } else {
            lower = mid;
        }
    }
    Ok(GammaBracket { lower, upper, evaluations })
}

/// Closed-form level-2 embedding on `[A, B, A]`:
/// `Λ(X) = X ⊗ 1/d_A + P (X ⊗ 1/d_A) P − 1_A ⊗ Tr_A[X] ⊗ 1_A / d_A²`, with `P` swapping the two A factors.
pub fn level2_embedding(x: &CMat, d_a: usize, d_b: usize) -> Result<CMat> {
    let space = TensorSpace::bipartite(d_a, d_b)?;
    space.check_matrix(x)?;
    let aba = TensorSpace::new(vec![d_a, d_b, d_a])?;
    let inv = C64::new(1.0 / d_a as f64, 0.0);
    let first = kron(x, &CMat::identity(d_a, d_a)) * inv;
    let (swapped, _) = permute_factors(&first, &aba, &[2, 1, 0])?;
    let (xb, _) = partial_trace(x, &space, &[0])?;
    let last = kron(&kron(&CMat::identity(d_a, d_a), &xb), &CMat::identity(d_a, d_a)) * (inv * inv);
    Ok(&first + swapped - last)
}

/// Adjoint of [`level2_embedding`]:
/// `Λ*(V) = Tr_C[V]/d_A + Tr_C[P V P]/d_A − 1_A ⊗ Tr_{AC}[V]/d_A²`.
pub fn level2_embedding_adjoint(v: &CMat, d_a: usize, d_b: usize) -> Result<CMat> {
    let aba = TensorSpace::new(vec![d_a, d_b, d_a])?;
    aba.check_matrix(v)?;
    let inv = C64::new(1.0 / d_a as f64, 0.0);
    let (first, _) = partial_trace(v, &aba, &[2])?;
    let (pvp, _) = permute_factors(v, &aba, &[2, 1, 0])?;
    let (second, _) = partial_trace(&pvp, &aba, &[2])?;
    let (vb, _) = partial_trace(v, &aba, &[0, 2])?;
    let last = kron(&CMat::identity(d_a, d_a), &vb) * (inv * inv);
    Ok((first + second) * inv - last)
}

/// Reorders an operator on `[A, A, B]` (copies first) into `[A, B, A]`.
pub fn copies_first_to_aba(m: &CMat, d_a: usize, d_b: usize) -> Result<CMat> {
    let space = TensorSpace::new(vec![d_a, d_a, d_b])?;
    Ok(permute_factors(m, &space, &[0, 2, 1])?.0)
}

/// Largest entry of `W − W†`, a quick sanity measure for reports.
pub fn hermiticity_error(w: &CMat) -> f64 {
    max_abs(&(w - w.adjoint()))
}

/// Kinds of the blocks used at `spec`, for callers building blocks by hand.
pub fn blocks_for(spec: &ExtensionSpec) -> Vec<BlockKind> {
    block_kinds(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qlinalg::{c, swap_operator};

    fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> CMat {
        let g = CMat::from_fn(n, n, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
        (&g + g.adjoint()) * c(0.5, 0.0)
    }

    #[test]
    fn level2_embedding_of_identity() {
        let v = CMat::identity(12, 12);
        let out = level2_embedding_adjoint(&v, 2, 3).unwrap();
        assert!((out - CMat::identity(6, 6)).iter().all(|z| z.norm() < 1e-13));
    }

    #[test]
    fn level2_embedding_is_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let x = random_hermitian(6, &mut rng);
            let y = random_hermitian(12, &mut rng);
            let lhs = (level2_embedding(&x, 2, 3).unwrap() * &y).trace();
            let rhs = (&x * level2_embedding_adjoint(&y, 2, 3).unwrap()).trace();
            assert!((lhs - rhs).norm() < 1e-12 * lhs.norm().max(1.0));
        }
    }

    #[test]
    fn unreduced_embedding_matches_closed_form() {
        let spec = ExtensionSpec::new(2, true, false).unwrap();
        let layout = ExtensionLayout::build(2, 3, &spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..5 {
            let x = random_hermitian(6, &mut rng);
            let e = copies_first_to_aba(&layout.lift(&layout.embed(&x).unwrap()), 2, 3).unwrap();
            let l = level2_embedding(&x, 2, 3).unwrap();
            assert!((e - l).iter().all(|z| z.norm() < 1e-12));
        }
    }

    #[test]
    fn identity_minimum_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = evaluate_on_product_states(&CMat::identity(6, 6), 2, 3, 100, true, &mut rng).unwrap();
        assert!((m.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn swap_minimum_is_zero() {
        let space = TensorSpace::new(vec![3, 3]).unwrap();
        let swap = swap_operator(&space, 0, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = evaluate_on_product_states(&swap, 3, 3, 1000, true, &mut rng).unwrap();
        assert!(m.value.abs() < 1e-9, "{}", m.value);
    }

    #[test]
    fn filter_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = CMat::from_fn(6, 6, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
        let m = &g * g.adjoint();
        let m = &m * c(1.0 / trace(&m).re, 0.0);
        let rho = DensityMatrix::new(m, 2, 3).unwrap();
        let (same, n) = scale_state(&rho, 1.0).unwrap();
        assert!((n - 1.0).abs() < 1e-14);
        assert!((same.matrix() - rho.matrix()).iter().all(|z| z.norm() < 1e-14));
        let (scaled, _) = scale_state(&rho, 0.3).unwrap();
        let (back, _) = scale_state(&scaled, 1.0 / 0.3).unwrap();
        assert!((back.matrix() - rho.matrix()).iter().all(|z| z.norm() < 1e-12));
        assert!(scale_state(&rho, 0.0).is_err());
        assert!(scale_witness(&CMat::identity(6, 6), 2, 3, -1.0).is_err());
    }

    #[test]
    fn level_one_witness_is_z0_plus_transposed_z1() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let g0 = CMat::from_fn(4, 4, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
        let g1 = CMat::from_fn(4, 4, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
        let z = vec![&g0 * g0.adjoint(), &g1 * g1.adjoint()];
        let spec = ExtensionSpec::level(1);
        let w = witness_from_blocks(2, 2, &spec, &z).unwrap();
        let space = TensorSpace::bipartite(2, 2).unwrap();
        let expected = &z[0] + crate::qlinalg::partial_transpose(&z[1], &space, &[0]).unwrap();
        assert!((&w.raw - expected).iter().all(|v| v.norm() < 1e-12));
        let rec = verify_ksos_identity(&w, 200, 9).unwrap();
        assert!(rec.passed, "{rec:?}");
    }
}
