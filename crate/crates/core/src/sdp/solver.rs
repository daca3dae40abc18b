use std::io::Write;

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{Constraint, SdpProblem, SparseHermitian};
use crate::error::{Error, Result};
use crate::qlinalg::{
    cholesky, eigvalsh, frobenius, hermitian_part, is_positive_definite, max_eigenvalue,
    min_eigenvalue, CMat, C64,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverOptions {
    pub gap_tol: f64,
    pub feas_tol: f64,
    pub cert_tol: f64,
    pub margin_tol: f64,
    pub cert_margin: f64,
    pub max_iter: usize,
    /// Fraction of the distance to the cone boundary taken per step.
    pub step_fraction: f64,
    /// Iterates with `max |x_i|` above this are declared divergent.
    pub divergence_cap: f64,
    /// Stop the margin problem as soon as the verdict can no longer change.
    pub stop_when_decided: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            gap_tol: 1e-8,
            feas_tol: 1e-9,
            cert_tol: 1e-8,
            margin_tol: 1e-7,
            cert_margin: 1e-7,
            max_iter: 200,
            step_fraction: 0.98,
            divergence_cap: 1e7,
            stop_when_decided: true,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("gap_tol", self.gap_tol),
            ("feas_tol", self.feas_tol),
            ("cert_tol", self.cert_tol),
            ("margin_tol", self.margin_tol),
            ("cert_margin", self.cert_margin),
            ("divergence_cap", self.divergence_cap),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.step_fraction > 0.0 && self.step_fraction < 1.0) {
            return Err(Error::InvalidParameter("step_fraction must lie in (0, 1)".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SdpStatus {
    Feasible,
    Infeasible,
    Marginal,
    IterLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    Converged,
    Decided,
    Stagnated,
    Diverged,
    IterLimit,
}

/// Diagnostics of one accepted iterate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// cᵀx + Tr[F_0 Z].
    pub gap: f64,
    /// Tr[S Z] for the current slack S.
    pub complementarity: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub step_primal: f64,
    pub step_dual: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone)]
pub struct SdpOutcome {
    pub status: SdpStatus,
    pub termination: Termination,
    pub x: Vec<f64>,
    pub z: Vec<CMat>,
    /// Optimal `t` of the margin problem; `None` for objective problems.
    pub margin_t: Option<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub gap: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    /// λ_min(F(x)) of the original problem at the returned x.
    pub min_eigenvalue: f64,
    pub iterations: usize,
    pub history: Vec<IterationRecord>,
}

/// Initial iterate. `s = None` takes the slack equal to F(x).
#[derive(Debug, Clone)]
pub struct StartPoint {
    pub x: Vec<f64>,
    pub s: Option<Vec<CMat>>,
    pub z: Vec<CMat>,
}

enum Mode {
    Objective,
    Margin { original_vars: usize },
}

/// Infeasible-start primal-dual interior-point method with the HKM search
/// direction and Mehrotra predictor-corrector steps.
pub struct SdpSolver {
    options: SolverOptions,
    trace: Option<Box<dyn Write + Send>>,
}

impl Default for SdpSolver {
    fn default() -> Self {
        Self::new(SolverOptions::default())
    }
}

impl SdpSolver {
    pub fn new(options: SolverOptions) -> Self {
        Self { options, trace: None }
    }

    /// Writes one line per iteration to `sink`.
    pub fn with_trace(mut self, sink: Box<dyn Write + Send>) -> Self {
        self.trace = Some(sink);
        self
    }

    pub fn options(&self) -> &SolverOptions {
        &self.options
    }

    /// Minimizes cᵀx; feasibility problems are dispatched to
    /// [`SdpSolver::feasibility_margin`].
    pub fn solve(&mut self, p: &SdpProblem) -> Result<SdpOutcome> {
        if p.is_feasibility() {
            return self.feasibility_margin(p);
        }
        let start = default_start(p);
        self.solve_from(p, start)
    }

    /// Minimizes cᵀx from the default start, even when `c = 0`.
    pub fn minimize(&mut self, p: &SdpProblem) -> Result<SdpOutcome> {
        let start = default_start(p);
        self.solve_from(p, start)
    }

    pub fn solve_from(&mut self, p: &SdpProblem, start: StartPoint) -> Result<SdpOutcome> {
        self.options.validate()?;
        self.run(p, start, Mode::Objective)
    }

    /// Solves `minimize t  s.t.  t·1 + F(x) ⪰ 0`. The problem is always
    /// strictly feasible; its optimum `t*` decides the original inequality.
    pub fn feasibility_margin(&mut self, p: &SdpProblem) -> Result<SdpOutcome> {
        self.options.validate()?;
        let aug = p.with_margin_variable();
        let n = p.total_dim() as f64;
        let lam = p.f0().iter().map(min_eigenvalue).fold(f64::INFINITY, f64::min);
        let lam = if lam.is_finite() { lam } else { 0.0 };
        let t0 = -lam + 1.0;
        let mut x = vec![0.0; p.num_vars()];
        x.push(t0);
        let z = p
            .block_dims()
            .iter()
            .map(|&d| CMat::identity(d, d) * C64::new(1.0 / n, 0.0))
            .collect();
        self.run(&aug, StartPoint { x, s: None, z }, Mode::Margin { original_vars: p.num_vars() })
    }

    fn trace_line(&mut self, rec: &IterationRecord) {
        if let Some(sink) = self.trace.as_mut() {
            let _ = writeln!(
                sink,
                "iter {:3} pobj {:+.9e} dobj {:+.9e} gap {:.3e} pinf {:.3e} dinf {:.3e} ap {:.4} ad {:.4} sigma {:.3e}",
                rec.iteration,
                rec.primal_objective,
                rec.dual_objective,
                rec.gap,
                rec.primal_infeasibility,
                rec.dual_infeasibility,
                rec.step_primal,
                rec.step_dual,
                rec.sigma
            );
        }
    }

    fn run(&mut self, p: &SdpProblem, start: StartPoint, mode: Mode) -> Result<SdpOutcome> {
        let opts = self.options.clone();
        let m = p.num_vars();
        let nb = p.block_dims().len();
        let n_total = p.total_dim() as f64;
        if start.x.len() != m {
            return Err(Error::Dimension(format!("start has {} variables, problem {m}", start.x.len())));
        }
        p.check_blocks(&start.z)?;
        let mut x = start.x;
        let mut s = match start.s {
            Some(s) => {
                p.check_blocks(&s)?;
                s
            }
            None => p.evaluate(&x),
        };
        let mut z = start.z;
        for (b, (sb, zb)) in s.iter().zip(&z).enumerate() {
            if !is_positive_definite(sb) || !is_positive_definite(zb) {
                return Err(Error::Numerical(format!("start point is not interior in block {b}")));
            }
        }

        let members = block_members(p);
        let c = DVector::from_row_slice(p.objective());
        let f0_norm = p.f0().iter().map(|f| frobenius(f).powi(2)).sum::<f64>().sqrt();
        let c_norm = c.norm();

        let mut history = Vec::new();
        let mut termination = Termination::IterLimit;
        let mut last_steps = (1.0, 1.0, 0.0);
        let mut stalls = 0usize;
        let mut centering_steps = 0usize;
        // Best converged iterate by complementarity ratio: (ratio, history index, x, z).
        let mut best: Option<(f64, usize, Vec<f64>, Vec<CMat>)> = None;

        for iter in 0..=opts.max_iter {
            let fx = p.evaluate(&x);
            let rp: Vec<CMat> = fx.iter().zip(&s).map(|(f, sb)| f - sb).collect();
            let rd: Vec<f64> = p
                .constraints()
                .iter()
                .zip(c.iter())
                .map(|(con, &ci)| ci - con.dot(&z))
                .collect();
            let pobj = c.dot(&DVector::from_row_slice(&x));
            let dobj = -p.f0().iter().zip(&z).map(|(f, zb)| trace_prod_re(f, zb)).sum::<f64>();
            let compl: f64 = s.iter().zip(&z).map(|(sb, zb)| trace_prod_re(sb, zb)).sum();
            let pinf = rp.iter().map(|r| frobenius(r).powi(2)).sum::<f64>().sqrt() / (1.0 + f0_norm);
            let dinf = rd.iter().map(|v| v * v).sum::<f64>().sqrt() / (1.0 + c_norm);
            let rec = IterationRecord {
                iteration: iter,
                primal_objective: pobj,
                dual_objective: dobj,
                gap: pobj - dobj,
                complementarity: compl,
                primal_infeasibility: pinf,
                dual_infeasibility: dinf,
                step_primal: last_steps.0,
                step_dual: last_steps.1,
                sigma: last_steps.2,
            };
            self.trace_line(&rec);
            history.push(rec);

            let gap = pobj - dobj;
            let feasible_iterate = pinf <= opts.feas_tol && dinf <= opts.feas_tol;
            let scale = 1.0f64.max(dobj.abs().min(pobj.abs()));
            let converged = feasible_iterate && gap.abs() <= opts.gap_tol * scale;
            match mode {
                Mode::Objective => {
                    if converged {
                        let ratio = complementarity_ratio(&fx, &z);
                        if best.as_ref().map_or(true, |b| ratio < b.0) {
                            best = Some((ratio, history.len() - 1, x.clone(), z.clone()));
                        }
                        if ratio <= opts.gap_tol {
                            termination = Termination::Converged;
                            break;
                        }
                    }
                    if best.is_some() && (!converged || centering_steps >= MAX_CENTERING_STEPS) {
                        let (_, index, bx, bz) = best.take().expect("checked");
                        let restored = IterationRecord { iteration: iter + 1, ..history[index].clone() };
                        self.trace_line(&restored);
                        history.push(restored);
                        (x, z) = (bx, bz);
                        termination = Termination::Converged;
                        break;
                    }
                }
                Mode::Margin { .. } => {
                    let t = x[m - 1];
                    let decided_feasible = t <= opts.feas_tol && pinf <= opts.feas_tol;
                    let radius = farkas_radius(&x[..m - 1]);
                    let res_l1: f64 = rd[..m - 1].iter().map(|v| v.abs()).sum();
                    let decided_infeasible = dinf <= opts.feas_tol
                        && -dobj + res_l1 * radius <= -opts.cert_margin
                        && gap <= opts.gap_tol.max(1e-3 * dobj);
                    if opts.stop_when_decided && (decided_feasible || decided_infeasible) {
                        termination = Termination::Decided;
                        break;
                    }
                    if converged && (decided_feasible || decided_infeasible) {
                        termination = Termination::Converged;
                        break;
                    }
                    // Undecided at the gap tolerance: keep tightening while progress is possible.
                    if feasible_iterate && gap.abs() <= 1e-4 * opts.feas_tol {
                        termination = Termination::Converged;
                        break;
                    }
                }
            }
            if x.iter().any(|v| v.abs() > opts.divergence_cap) {
                termination = Termination::Diverged;
                break;
            }
            if iter == opts.max_iter {
                break;
            }

            let mu = compl / n_total;
            let sinv: Vec<CMat> = match s.iter().map(inverse_pd).collect::<Option<Vec<_>>>() {
                Some(v) => v,
                None => {
                    termination = Termination::Stagnated;
                    break;
                }
            };
            let schur = schur_complement(p, &members, &sinv, &z);
            let chol = match factor_schur(schur) {
                Some(ch) => ch,
                None => {
                    termination = Termination::Stagnated;
                    break;
                }
            };

            let zero_corr: Vec<Option<CMat>> = vec![None; nb];
            // Near the optimum the iterates drift off the central path, leaving
            // ‖SZ‖ far above Tr[SZ]. Pure centering steps at fixed μ restore SZ ≈ μI.
            let centering = matches!(mode, Mode::Objective) && converged;
            if centering {
                centering_steps += 1;
                let (dx, ds, dz) = direction(p, &chol, &sinv, &z, &rp, &c, mu, &zero_corr);
                let ap = (opts.step_fraction * step_length(&s, &ds)).min(1.0);
                let ad = (opts.step_fraction * step_length(&z, &dz)).min(1.0);
                for (xi, d) in x.iter_mut().zip(dx.iter()) {
                    *xi += ap * d;
                }
                for b in 0..nb {
                    s[b] = hermitian_part(&(&s[b] + &ds[b] * C64::new(ap, 0.0)));
                    z[b] = hermitian_part(&(&z[b] + &dz[b] * C64::new(ad, 0.0)));
                }
                last_steps = (ap, ad, 1.0);
                continue;
            }

            // Predictor.
            let (dx_a, ds_a, dz_a) =
                direction(p, &chol, &sinv, &z, &rp, &c, 0.0, &zero_corr);
            let ap_a = step_length(&s, &ds_a).min(1.0);
            let ad_a = step_length(&z, &dz_a).min(1.0);
            let mut mu_aff = 0.0;
            for b in 0..nb {
                let sa = &s[b] + &ds_a[b] * C64::new(ap_a, 0.0);
                let za = &z[b] + &dz_a[b] * C64::new(ad_a, 0.0);
                mu_aff += trace_prod_re(&sa, &za);
            }
            mu_aff /= n_total;
            let sigma = if mu > 0.0 { (mu_aff / mu).clamp(0.0, 1.0).powi(3) } else { 0.0 };
            drop(dx_a);

            // Corrector.
            let corr: Vec<Option<CMat>> = ds_a.iter().zip(&dz_a).map(|(a, b)| Some(a * b)).collect();
            let (dx, ds, dz) = direction(p, &chol, &sinv, &z, &rp, &c, sigma * mu, &corr);
            let ap = (opts.step_fraction * step_length(&s, &ds)).min(1.0);
            let ad = (opts.step_fraction * step_length(&z, &dz)).min(1.0);

            for (xi, d) in x.iter_mut().zip(dx.iter()) {
                *xi += ap * d;
            }
            for b in 0..nb {
                s[b] = hermitian_part(&(&s[b] + &ds[b] * C64::new(ap, 0.0)));
                z[b] = hermitian_part(&(&z[b] + &dz[b] * C64::new(ad, 0.0)));
            }
            last_steps = (ap, ad, sigma);
            if ap < 1e-10 && ad < 1e-10 {
                stalls += 1;
                if stalls >= 3 {
                    termination = Termination::Stagnated;
                    break;
                }
            } else {
                stalls = 0;
            }
        }

        let last = history.last().cloned().expect("at least one record");
        let iterations = history.len() - 1;
        let (status, margin_t, min_eig, x_out) = match mode {
            Mode::Objective => {
                let lam = min_block_eigenvalue(&p.evaluate(&x));
                let status = match termination {
                    Termination::Converged => SdpStatus::Feasible,
                    Termination::IterLimit => SdpStatus::IterLimit,
                    _ => SdpStatus::Marginal,
                };
                (status, None, lam, x)
            }
            Mode::Margin { original_vars } => {
                let t = x[original_vars];
                let mut fo = p.evaluate(&x);
                for f in fo.iter_mut() {
                    let n = f.nrows();
                    for i in 0..n {
                        f[(i, i)] -= C64::new(t, 0.0);
                    }
                }
                let lam = min_block_eigenvalue(&fo);
                let z_min = min_block_eigenvalue(&z);
                let residuals: Vec<f64> = p.constraints()[..original_vars]
                    .iter()
                    .map(|con| con.dot(&z).abs())
                    .collect();
                let max_res = residuals.iter().copied().fold(0.0, f64::max);
                let res_l1: f64 = residuals.iter().sum();
                let f0z: f64 = p.f0().iter().zip(&z).map(|(f, zb)| trace_prod_re(f, zb)).sum();
                let status = if z_min >= -opts.cert_tol
                    && max_res <= opts.cert_tol
                    && f0z + res_l1 * farkas_radius(&x[..original_vars]) <= -opts.cert_margin
                {
                    SdpStatus::Infeasible
                } else if t <= opts.feas_tol && lam >= -opts.feas_tol {
                    SdpStatus::Feasible
                } else if termination == Termination::IterLimit {
                    SdpStatus::IterLimit
                } else {
                    SdpStatus::Marginal
                };
                let mut xo = x;
                xo.truncate(original_vars);
                (status, Some(t), lam, xo)
            }
        };
        log::debug!(
            "sdp finished: {:?} after {} iterations ({:?}), gap {:.3e}",
            status,
            iterations,
            termination,
            last.gap
        );
        Ok(SdpOutcome {
            status,
            termination,
            x: x_out,
            z,
            margin_t,
            primal_objective: last.primal_objective,
            dual_objective: last.dual_objective,
            gap: last.gap,
            primal_infeasibility: last.primal_infeasibility,
            dual_infeasibility: last.dual_infeasibility,
            min_eigenvalue: min_eig,
            iterations,
            history,
        })
    }
}

/// [`SdpSolver::solve`] with default options.
pub fn solve(p: &SdpProblem) -> Result<SdpOutcome> {
    SdpSolver::default().solve(p)
}

/// [`SdpSolver::feasibility_margin`] with default options.
pub fn feasibility_margin(p: &SdpProblem) -> Result<SdpOutcome> {
    SdpSolver::default().feasibility_margin(p)
}

fn default_start(p: &SdpProblem) -> StartPoint {
    let x = vec![0.0; p.num_vars()];
    let positive = p.f0().iter().all(is_positive_definite);
    let s = if positive {
        p.f0().to_vec()
    } else {
        let norm = p
            .f0()
            .iter()
            .map(|f| max_eigenvalue(f).abs().max(min_eigenvalue(f).abs()))
            .fold(0.0, f64::max);
        let beta = 1.0 + norm;
        p.block_dims()
            .iter()
            .map(|&d| CMat::identity(d, d) * C64::new(beta, 0.0))
            .collect()
    };
    let traces: Vec<f64> = p.constraints().iter().map(Constraint::trace).collect();
    let num: f64 = traces.iter().zip(p.objective()).map(|(t, c)| t * c).sum();
    let den: f64 = traces.iter().map(|t| t * t).sum();
    let zeta = if den > 0.0 && num / den > 0.0 { num / den } else { 1.0 };
    let z = p
        .block_dims()
        .iter()
        .map(|&d| CMat::identity(d, d) * C64::new(zeta, 0.0))
        .collect();
    StartPoint { x, s: Some(s), z }
}

/// Radius of the box around the origin within which a near-feasible dual
/// point must exclude primal solutions: for Z ⪰ 0 and every x with
/// `max |x_i| ≤ R`, `Tr[F(x) Z] ≤ Tr[F_0 Z] + R·Σ|Tr[F_i Z]|`.
fn farkas_radius(x: &[f64]) -> f64 {
    1f64.max(10.0 * x.iter().fold(0.0f64, |a, v| a.max(v.abs())))
}

fn min_block_eigenvalue(blocks: &[CMat]) -> f64 {
    blocks.iter().map(min_eigenvalue).fold(f64::INFINITY, f64::min)
}

/// Re Tr[A B] for Hermitian A, B.
fn trace_prod_re(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.transpose().iter()).map(|(x, y)| (x * y).re).sum()
}

fn inverse_pd(m: &CMat) -> Option<CMat> {
    cholesky(m).map(|ch| hermitian_part(&ch.inverse()))
}

/// For each block, the (constraint, part) pairs that touch it.
fn block_members(p: &SdpProblem) -> Vec<Vec<(usize, usize)>> {
    let mut out = vec![Vec::new(); p.block_dims().len()];
    for (i, con) in p.constraints().iter().enumerate() {
        for (k, (b, _)) in con.parts.iter().enumerate() {
            out[*b].push((i, k));
        }
    }
    out
}

/// S⁻¹ F Z for sparse F.
fn sandwich(sinv: &CMat, f: &SparseHermitian, z: &CMat, out: &mut CMat) {
    let n = sinv.nrows();
    out.fill(C64::new(0.0, 0.0));
    if f.nnz() <= n {
        for &(r, c, v) in &f.entries {
            for q in 0..n {
                let zq = v * z[(c, q)];
                if zq == C64::new(0.0, 0.0) {
                    continue;
                }
                let col = sinv.column(r);
                let mut dst = out.column_mut(q);
                for p in 0..n {
                    dst[p] += col[p] * zq;
                }
            }
        }
    } else {
        let mut t = CMat::zeros(n, n);
        for &(r, c, v) in &f.entries {
            let col = sinv.column(r) * v;
            let mut dst = t.column_mut(c);
            dst += col;
        }
        out.copy_from(&(t * z));
    }
}

/// M_ij = Re Tr[F_i S⁻¹ F_j Z].
fn schur_complement(
    p: &SdpProblem,
    members: &[Vec<(usize, usize)>],
    sinv: &[CMat],
    z: &[CMat],
) -> DMatrix<f64> {
    let m = p.num_vars();
    let cons = p.constraints();
    let mut out = DMatrix::<f64>::zeros(m, m);
    for (b, list) in members.iter().enumerate() {
        let n = p.block_dims()[b];
        let mut u = CMat::zeros(n, n);
        for (jj, &(j, kj)) in list.iter().enumerate() {
            sandwich(&sinv[b], &cons[j].parts[kj].1, &z[b], &mut u);
            for &(i, ki) in &list[jj..] {
                let val = cons[i].parts[ki].1.dot(&u).re;
                out[(i, j)] += val;
                if i != j {
                    out[(j, i)] += val;
                }
            }
        }
    }
    out
}

fn factor_schur(mut m: DMatrix<f64>) -> Option<Cholesky<f64, nalgebra::Dyn>> {
    let n = m.nrows();
    let sym = (&m + m.transpose()) * 0.5;
    m = sym;
    if let Some(ch) = Cholesky::new(m.clone()) {
        return Some(ch);
    }
    let diag_max = (0..n).map(|i| m[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut delta = 1e-14 * diag_max;
    for _ in 0..8 {
        let mut reg = m.clone();
        for i in 0..n {
            reg[(i, i)] += delta;
        }
        if let Some(ch) = Cholesky::new(reg) {
            log::debug!("schur complement regularized by {delta:.3e}");
            return Some(ch);
        }
        delta *= 100.0;
    }
    None
}

/// Newton direction for target σμ and second-order correction.
#[allow(clippy::too_many_arguments)]
/// Centering steps allowed after the gap criterion is met.
const MAX_CENTERING_STEPS: usize = 25;

/// `‖F Z‖ / (‖F‖ ‖Z‖)` over the direct sum of blocks, Frobenius norms.
fn complementarity_ratio(f: &[CMat], z: &[CMat]) -> f64 {
    let norm = |m: &CMat| frobenius(m).powi(2);
    let fz: f64 = f.iter().zip(z).map(|(a, b)| norm(&(a * b))).sum::<f64>().sqrt();
    let nf: f64 = f.iter().map(norm).sum::<f64>().sqrt();
    let nz: f64 = z.iter().map(norm).sum::<f64>().sqrt();
    if nf == 0.0 || nz == 0.0 {
        0.0
    } else {
        fz / (nf * nz)
    }
}

fn direction(
    p: &SdpProblem,
    chol: &Cholesky<f64, nalgebra::Dyn>,
    sinv: &[CMat],
    z: &[CMat],
    rp: &[CMat],
    c: &DVector<f64>,
    sigma_mu: f64,
    corr: &[Option<CMat>],
) -> (DVector<f64>, Vec<CMat>, Vec<CMat>) {
    let nb = sinv.len();
    let target = C64::new(sigma_mu, 0.0);
    let r: Vec<CMat> = (0..nb)
        .map(|b| {
            let mut inner = &rp[b] * &z[b];
            if let Some(cb) = &corr[b] {
                inner += cb;
            }
            &sinv[b] * target - &sinv[b] * inner
        })
        .collect();
    let rhs = DVector::from_iterator(
        p.num_vars(),
        p.constraints().iter().zip(c.iter()).map(|(con, &ci)| {
            con.parts.iter().map(|(b, f)| f.dot(&r[*b]).re).sum::<f64>() - ci
        }),
    );
    let dx = chol.solve(&rhs);
    let mut ds: Vec<CMat> = rp.to_vec();
    for (con, &d) in p.constraints().iter().zip(dx.iter()) {
        for (b, f) in &con.parts {
            f.add_to(&mut ds[*b], d);
        }
    }
    let dz: Vec<CMat> = (0..nb)
        .map(|b| {
            let mut raw = &sinv[b] * target - &z[b] - &sinv[b] * &ds[b] * &z[b];
            if let Some(cb) = &corr[b] {
                raw -= &sinv[b] * cb;
            }
            hermitian_part(&raw)
        })
        .collect();
    (dx, ds, dz)
}

/// Largest α with X + αΔ ⪰ 0 (infinite when Δ ⪰ 0).
fn step_length(x: &[CMat], dx: &[CMat]) -> f64 {
    let mut alpha = f64::INFINITY;
    for (xb, db) in x.iter().zip(dx) {
        let Some(ch) = cholesky(xb) else {
            return 0.0;
        };
        let l = ch.l();
        let y = l.solve_lower_triangular(db).expect("triangular solve");
        let w = l.solve_lower_triangular(&y.adjoint()).expect("triangular solve");
        let lam = eigvalsh(&w)[0];
        if lam < 0.0 {
            alpha = alpha.min(-1.0 / lam);
        }
    }
    alpha
}
