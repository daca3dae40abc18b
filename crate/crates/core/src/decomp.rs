//! Decomposability of a witness `Z` on `A ⊗ B`.
//!
//! `ε = max { e : Z − e·1 = P + Q^{T_A}, P, Q ⪰ 0 } = min { Tr[Z ρ] : ρ ⪰ 0, ρ^{T_A} ⪰ 0, Tr ρ = 1 }`.
//! `Z` is decomposable iff `ε ≥ 0`. When `ε < 0` the minimizing `ρ_opt` is a
//! PPT entangled state detected by `Z`.
//!
//! The state form is solved over `ρ = 1/n + Σ x_i σ_i` (traceless Hermitian
//! `σ_i`), whose dual variables are `P ⊕ Q`. The decomposition form is
//! solved independently over `(e, Q)` and its dual variables give `ρ_opt`
//! a second time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::DensityMatrix;
use crate::qlinalg::{
    c, frobenius, hermitian_basis, hermitian_part, max_eigenvalue, min_eigenvalue, numerical_rank,
    partial_transpose, trace, trace_product, CMat, TensorSpace,
};
use crate::sdp::{
    Constraint, SdpOutcome, SdpProblem, SdpSolver, SdpStatus, SolverOptions, SparseHermitian,
    StartPoint,
};

/// `|ε|` below this (relative to `max(1, ‖Z‖)`) on the negative side is undecided.
pub const MARGINAL_BAND: f64 = 1e-7;
/// Largest negative `ε` still accepted as a decomposition.
pub const DECOMPOSABLE_SLACK: f64 = 1e-9;
/// Singular values below this fraction of the largest count as zero.
pub const RANK_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decomposability {
    Decomposable,
    Indecomposable,
    Marginal,
}

#[derive(Debug, Clone)]
pub struct DecompositionReport {
    pub d_a: usize,
    pub d_b: usize,
    /// Optimum of `max −Tr[P + Q^{T_A}]/(d_A d_B)`.
    pub eta: f64,
    /// `Tr[Z]/(d_A d_B) + η`.
    pub epsilon: f64,
    /// `ε` from the independent decomposition-form solve.
    pub epsilon_cross_check: f64,
    /// `min Tr[Z ρ]` evaluated at the returned `ρ_opt`.
    pub state_value: f64,
    pub verdict: Decomposability,
    pub p_opt: CMat,
    pub q_opt: CMat,
    /// ‖Z − ε·1 − P − Q^{T_A}‖_F / ‖Z‖_F.
    pub reconstruction_residual: f64,
    pub rho_opt: Option<DensityMatrix>,
    /// ‖ρ_state − ρ_dual‖_F between the two independent recoveries.
    pub rho_agreement: f64,
    pub state_form: SolveSummary,
    pub decomposition_form: SolveSummary,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveSummary {
    pub status: SdpStatus,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub gap: f64,
    pub iterations: usize,
}

impl From<&SdpOutcome> for SolveSummary {
    fn from(o: &SdpOutcome) -> Self {
        Self {
            status: o.status,
            primal_objective: o.primal_objective,
            dual_objective: o.dual_objective,
            gap: o.gap,
            iterations: o.iterations,
        }
    }
}

fn solver_options() -> SolverOptions {
    SolverOptions { gap_tol: 1e-12, feas_tol: 1e-11, max_iter: 300, ..SolverOptions::default() }
}

fn sparse(m: &CMat) -> SparseHermitian {
    SparseHermitian::from_dense(m, 1e-15)
}

fn check_operator(z: &CMat, d_a: usize, d_b: usize) -> Result<TensorSpace> {
    let space = TensorSpace::bipartite(d_a, d_b)?;
    space.check_matrix(z)?;
    crate::qlinalg::ensure_hermitian(z)?;
    Ok(space)
}

/// State form: `ρ(x) ⊕ ρ(x)^{T_A} ⪰ 0`, minimize `Tr[Z ρ(x)] − Tr[Z]/n`.
/// Its dual is `max −Tr[P + Q^{T_A}]/n` subject to `H(P + Q^{T_A}) = H(Z)`.
pub fn build_decomposability_sdp(z: &CMat, d_a: usize, d_b: usize) -> Result<SdpProblem> {
    let space = check_operator(z, d_a, d_b)?;
    let n = d_a * d_b;
    let basis = hermitian_basis(n)?;
    let mixed = CMat::identity(n, n) * c(1.0 / n as f64, 0.0);
    let mut constraints = Vec::with_capacity(n * n - 1);
    let mut objective = Vec::with_capacity(n * n - 1);
    for sigma in basis.elements.iter().skip(1) {
        let pt = partial_transpose(sigma, &space, &[0])?;
        constraints.push(Constraint { parts: vec![(0, sparse(sigma)), (1, sparse(&pt))] });
        objective.push(trace_product(z, sigma).re);
    }
    SdpProblem::new(vec![mixed.clone(), mixed], constraints, objective)
}

/// Decomposition form for fixed or free shift: blocks `Z − e·1 − Q^{T_A}` and `Q`.
/// With `shift = None`, `e` is the last variable and the objective is `−e`.
fn decomposition_form(z: &CMat, space: &TensorSpace, shift: Option<f64>) -> Result<SdpProblem> {
    let n = space.total();
    let basis = hermitian_basis(n)?;
    let mut constraints = Vec::with_capacity(n * n + 1);
    for h in &basis.elements {
        let pt = partial_transpose(h, space, &[0])?;
        constraints.push(Constraint { parts: vec![(0, sparse(&-pt)), (1, sparse(h))] });
    }
    let mut f0 = z.clone();
    let mut objective = vec![0.0; n * n];
    match shift {
        Some(e) => {
            for i in 0..n {
                f0[(i, i)] -= c(e, 0.0);
            }
        }
        None => {
            constraints.push(Constraint { parts: vec![(0, sparse(&-CMat::identity(n, n)))] });
            objective.push(-1.0);
        }
    }
    SdpProblem::new(vec![f0, CMat::zeros(n, n)], constraints, objective)
}

/// Strictly feasible pair for the state form: `ρ = 1/n`, `P = Z + a·1`, `Q = 1`.
pub fn state_form_start(z: &CMat, n: usize) -> StartPoint {
    let a = 1.0 - min_eigenvalue(z).min(0.0);
    let p = z + CMat::identity(n, n) * c(a, 0.0);
    StartPoint { x: vec![0.0; n * n - 1], s: None, z: vec![p, CMat::identity(n, n)] }
}

/// Strictly feasible pair for the decomposition form: `Q = 1`, `e = λ_min(Z) − 2`,
/// dual blocks `1/n` and `(1/n)^{T_A} = 1/n`.
fn decomposition_form_start(z: &CMat, n: usize) -> Result<StartPoint> {
    let mut x = hermitian_basis(n)?.coefficients(&CMat::identity(n, n))?;
    x.push(min_eigenvalue(z) - 2.0);
    let mixed = CMat::identity(n, n) * c(1.0 / n as f64, 0.0);
    Ok(StartPoint { x, s: None, z: vec![mixed.clone(), mixed] })
}

fn normalized_state(m: &CMat) -> CMat {
    let h = hermitian_part(m);
    let t = trace(&h).re;
    h * c(1.0 / t, 0.0)
}

/// Solves both forms and classifies `Z`.
pub fn test_decomposable(z: &CMat, d_a: usize, d_b: usize) -> Result<DecompositionReport> {
    let space = check_operator(z, d_a, d_b)?;
    let n = d_a * d_b;
    let z = hermitian_part(z);
    let z_scale = frobenius(&z).max(1.0);
    let tr_z = trace(&z).re / n as f64;
    let mut notes = Vec::new();

    let state_problem = build_decomposability_sdp(&z, d_a, d_b)?;
    let state = SdpSolver::new(solver_options()).solve_from(&state_problem, state_form_start(&z, n))?;
    let blocks = state_problem.evaluate(&state.x);
    let rho_state = normalized_state(&blocks[0]);
    let p_opt = hermitian_part(&state.z[0]);
    let q_opt = hermitian_part(&state.z[1]);
    let pq = &p_opt + partial_transpose(&q_opt, &space, &[0])?;
    let eta = -trace(&pq).re / n as f64;
    let epsilon = tr_z + eta;
    let mut shifted = z.clone();
    for i in 0..n {
        shifted[(i, i)] -= c(epsilon, 0.0);
    }
    let reconstruction_residual = frobenius(&(shifted - &pq)) / z_scale;

    let dec_problem = decomposition_form(&z, &space, None)?;
    let dec = SdpSolver::new(solver_options()).solve_from(&dec_problem, decomposition_form_start(&z, n)?)?;
    let epsilon_cross_check = *dec.x.last().expect("shift variable");
    let rho_dual = normalized_state(&dec.z[0]);
    let rho_agreement = frobenius(&(&rho_state - &rho_dual));
    let state_value = trace_product(&z, &rho_state).re;

    if (epsilon - epsilon_cross_check).abs() > 1e-7 * z_scale {
        notes.push(format!(
            "the two forms disagree: ε = {epsilon:.3e} vs {epsilon_cross_check:.3e}"
        ));
    }
    if (state_value - epsilon).abs() > 1e-7 * z_scale {
        notes.push(format!("duality gap: Tr[Zρ] = {state_value:.3e}, ε = {epsilon:.3e}"));
    }

    let psd_tol = 1e-9 * z_scale;
    let pq_valid = min_eigenvalue(&p_opt) >= -psd_tol
        && min_eigenvalue(&q_opt) >= -psd_tol
        && reconstruction_residual <= 1e-7;
    let rho_pt = partial_transpose(&rho_state, &space, &[0])?;
    let rho_valid = min_eigenvalue(&rho_state) >= -1e-9 && min_eigenvalue(&rho_pt) >= -1e-9;

    let verdict = if epsilon >= -DECOMPOSABLE_SLACK * z_scale && pq_valid {
        Decomposability::Decomposable
    } else if epsilon <= -MARGINAL_BAND * z_scale && state_value < -1e-9 && rho_valid {
        Decomposability::Indecomposable
    } else {
        notes.push("ε lies in the undecided band or a certificate failed its check".into());
        Decomposability::Marginal
    };

    let rho_opt = if verdict == Decomposability::Indecomposable {
        Some(DensityMatrix::new(clip_psd(&rho_state), d_a, d_b)?)
    } else {
        None
    };

    Ok(DecompositionReport {
        d_a,
        d_b,
        eta,
        epsilon,
        epsilon_cross_check,
        state_value,
        verdict,
        p_opt,
        q_opt,
        reconstruction_residual,
        rho_opt,
        rho_agreement,
        state_form: SolveSummary::from(&state),
        decomposition_form: SolveSummary::from(&dec),
        notes,
    })
}

/// Removes eigenvalues below `1e-12` and renormalizes.
fn clip_psd(m: &CMat) -> CMat {
    let clipped = crate::qlinalg::hermitian_function(m, |v| if v < 1e-12 { 0.0 } else { v });
    normalized_state(&clipped)
}

/// `true` when `Z − shift·1` admits no decomposition `P + Q^{T_A}`.
pub fn shift_is_infeasible(z: &CMat, d_a: usize, d_b: usize, shift: f64) -> Result<bool> {
    let space = check_operator(z, d_a, d_b)?;
    let p = decomposition_form(&hermitian_part(z), &space, Some(shift))?;
    let out = SdpSolver::new(SolverOptions::default()).feasibility_margin(&p)?;
    Ok(out.status == SdpStatus::Infeasible)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeDiagnostics {
    /// ‖P_opt ρ_opt‖_F / (‖P_opt‖_F ‖ρ_opt‖_F).
    pub p_range_residual: f64,
    /// ‖Q_opt ρ_opt^{T_A}‖_F / (‖Q_opt‖_F ‖ρ_opt^{T_A}‖_F).
    pub q_range_residual: f64,
    pub rank_rho: usize,
    pub rank_rho_pt: usize,
    pub rank_p: usize,
    pub rank_q: usize,
    pub min_eigenvalue: f64,
    pub pt_min_eigenvalue: f64,
}

fn relative_product(a: &CMat, b: &CMat) -> f64 {
    let den = frobenius(a) * frobenius(b);
    if den == 0.0 {
        0.0
    } else {
        frobenius(&(a * b)) / den
    }
}

/// The PPT entangled state of an indecomposable report, with range diagnostics.
pub fn extract_edge_state(report: &DecompositionReport) -> Result<(DensityMatrix, EdgeDiagnostics)> {
    let rho = match (&report.verdict, &report.rho_opt) {
        (Decomposability::Indecomposable, Some(r)) => r.clone(),
        _ => {
            return Err(Error::InvalidParameter(format!(
                "no edge state for a {:?} witness",
                report.verdict
            )))
        }
    };
    let pt = rho.partial_transpose_a();
    let rank = |m: &CMat| numerical_rank(m, RANK_TOL);
    let diag = EdgeDiagnostics {
        p_range_residual: relative_product(&report.p_opt, rho.matrix()),
        q_range_residual: relative_product(&report.q_opt, &pt),
        rank_rho: rank(rho.matrix()),
        rank_rho_pt: rank(&pt),
        rank_p: rank(&report.p_opt),
        rank_q: rank(&report.q_opt),
        min_eigenvalue: min_eigenvalue(rho.matrix()),
        pt_min_eigenvalue: min_eigenvalue(&pt),
    };
    Ok((rho, diag))
}

/// Spectral radius, used to put tolerances on a common scale.
pub fn spectral_radius(z: &CMat) -> f64 {
    max_eigenvalue(z).abs().max(min_eigenvalue(z).abs())
}
