//! Level-k PPT symmetric-extension test.
//!
//! A state ρ on `A ⊗ B` passes level k when there is an operator ρ̃ on
//! `A^⊗k ⊗ B` that is positive, invariant under exchanging any two copies
//! of A, reduces to ρ after tracing out copies `2..k`, and (optionally)
//! stays positive under every partial transpose of the copies. Failing any
//! level proves entanglement; the infeasibility certificate becomes a
//! witness.

mod density;
mod layout;

pub use density::{DensityMatrix, STATE_TOL};
pub use layout::{
    block_isometry, block_kinds, compressed_product, required_resources, BlockKind, BlockLayout,
    ExtensionLayout, ResourceEstimate, SparseOp,
};

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qlinalg::{
    frobenius, min_eigenvalue, partial_trace, partial_transpose, permute_factors, CMat, TensorSpace,
};
use crate::sdp::{
    verify_certificate, CertificateCheck, SdpOutcome, SdpProblem, SdpSolver, SdpStatus,
    SolverOptions, Termination,
};
use crate::witness::{extract_witness, Witness};

/// Tolerance of the direct re-check of a reconstructed extension.
pub const EXTENSION_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtensionSpec {
    /// Number of copies of A, at least 1.
    pub k: usize,
    /// Include the partial-transpose blocks.
    pub ppt: bool,
    /// Compress onto symmetric subspaces.
    pub reduced: bool,
}

impl ExtensionSpec {
    pub fn new(k: usize, ppt: bool, reduced: bool) -> Result<Self> {
        let spec = Self { k, ppt, reduced };
        spec.validate()?;
        Ok(spec)
    }

    /// PPT, reduced level k.
    pub fn level(k: usize) -> Self {
        Self { k, ppt: true, reduced: true }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        if self.k == 1 && !self.ppt {
            return Err(Error::InvalidParameter("level 1 is the PPT test and needs ppt = true".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    SeparableConsistent,
    Entangled,
    Marginal,
}

impl Verdict {
    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Verdict::SeparableConsistent => 0,
            Verdict::Entangled => 1,
            Verdict::Marginal => 2,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HierarchyOptions {
    pub solver: SolverOptions,
    /// Largest ambient dimension `d_A^k d_B` accepted.
    pub size_cap: usize,
    /// Random product vectors used to test the k-SOS identity of a witness.
    pub ksos_samples: usize,
    pub seed: u64,
}

impl Default for HierarchyOptions {
    fn default() -> Self {
        Self { solver: SolverOptions::default(), size_cap: 4000, ksos_samples: 1000, seed: 7 }
    }
}

/// Solver diagnostics carried into reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverSummary {
    pub status: SdpStatus,
    pub termination: Termination,
    pub margin_t: Option<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub gap: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub min_eigenvalue: f64,
    pub iterations: usize,
}

impl From<&SdpOutcome> for SolverSummary {
    fn from(o: &SdpOutcome) -> Self {
        Self {
            status: o.status,
            termination: o.termination,
            margin_t: o.margin_t,
            primal_objective: o.primal_objective,
            dual_objective: o.dual_objective,
            gap: o.gap,
            primal_infeasibility: o.primal_infeasibility,
            dual_infeasibility: o.dual_infeasibility,
            min_eigenvalue: o.min_eigenvalue,
            iterations: o.iterations,
        }
    }
}

/// Assembly metadata needed to reproduce a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssemblyInfo {
    pub d_a: usize,
    pub d_b: usize,
    pub spec: ExtensionSpec,
    pub num_vars: usize,
    pub block_kinds: Vec<BlockKind>,
    pub block_dims: Vec<usize>,
    pub operator_space_dim: usize,
    pub copy_space_dim: usize,
    /// Human-readable description of the compression basis.
    pub basis: String,
}

impl AssemblyInfo {
    fn new(layout: &ExtensionLayout) -> Self {
        let basis = if layout.spec.reduced {
            "occupation-number vectors of the symmetric subspaces".to_string()
        } else {
            "computational basis of A^k; copy-permutation orbit sums of operator units".to_string()
        };
        Self {
            d_a: layout.d_a,
            d_b: layout.d_b,
            spec: layout.spec,
            num_vars: layout.num_vars(),
            block_kinds: layout.blocks.iter().map(|b| b.kind).collect(),
            block_dims: layout.block_dims(),
            operator_space_dim: layout.operator_space_dim(),
            copy_space_dim: layout.copy_space_dim(),
            basis,
        }
    }
}

/// Direct check of the three extension properties on the ambient space.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtensionCheck {
    /// ‖Tr_{2..k} ρ̃ − ρ‖_max.
    pub marginal_error: f64,
    /// max over copy pairs of ‖P_ij ρ̃ P_ij − ρ̃‖_max.
    pub swap_error: f64,
    /// λ_min(ρ̃).
    pub min_eigenvalue: f64,
    /// λ_min of ρ̃ with the first l copies transposed, for l = 1..k.
    pub pt_min_eigenvalues: Vec<f64>,
    pub passed: bool,
}

/// Checks `x` (on `[A; k] ⊗ B`, copies first) as an extension of `rho`.
pub fn check_extension(x: &CMat, rho: &CMat, d_a: usize, d_b: usize, k: usize, ppt: bool) -> Result<ExtensionCheck> {
    let mut dims = vec![d_a; k];
    dims.push(d_b);
    let space = TensorSpace::new(dims)?;
    space.check_matrix(x)?;
    let max_abs = |m: &CMat| m.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let marginal = if k == 1 {
        x.clone()
    } else {
        partial_trace(x, &space, &(1..k).collect::<Vec<_>>())?.0
    };
    let marginal_error = max_abs(&(marginal - rho));
    let mut swap_error: f64 = 0.0;
    for i in 0..k {
        for j in i + 1..k {
            let mut perm: Vec<usize> = (0..=k).collect();
            perm.swap(i, j);
            let (swapped, _) = permute_factors(x, &space, &perm)?;
            swap_error = swap_error.max(max_abs(&(swapped - x)));
        }
    }
    let min_eig = min_eigenvalue(x);
    let pt_min_eigenvalues = if ppt {
        (1..=k)
            .map(|l| partial_transpose(x, &space, &(0..l).collect::<Vec<_>>()).map(|m| min_eigenvalue(&m)))
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    let passed = marginal_error <= EXTENSION_TOL
        && swap_error <= EXTENSION_TOL
        && min_eig >= -EXTENSION_TOL
        && pt_min_eigenvalues.iter().all(|&v| v >= -EXTENSION_TOL);
    Ok(ExtensionCheck { marginal_error, swap_error, min_eigenvalue: min_eig, pt_min_eigenvalues, passed })
}

#[derive(Debug, Clone)]
pub struct TestReport {
    pub spec: ExtensionSpec,
    pub status: Verdict,
    pub assembly: AssemblyInfo,
    /// The extension ρ̃ on `[A; k] ⊗ B` (present when the ambient space fits the cap).
    pub extension: Option<CMat>,
    pub extension_check: Option<ExtensionCheck>,
    pub dual_blocks: Option<Vec<CMat>>,
    pub certificate: Option<CertificateCheck>,
    pub witness: Option<Witness>,
    pub solver: SolverSummary,
    pub warnings: Vec<String>,
}

impl TestReport {
    pub fn margin_t(&self) -> Option<f64> {
        self.solver.margin_t
    }
}

/// Builds the feasibility problem and its layout.
pub fn build_extension_problem(
    rho: &DensityMatrix,
    spec: &ExtensionSpec,
    options: &HierarchyOptions,
) -> Result<(SdpProblem, ExtensionLayout)> {
    spec.validate()?;
    let (d_a, d_b) = (rho.d_a(), rho.d_b());
    let estimate = required_resources(d_a, d_b, spec);
    if estimate.ambient_dim > options.size_cap {
        return Err(Error::TooLarge(format!(
            "ambient dimension {} exceeds the cap {} (m = {}, blocks {:?}, flop estimate {:.3e})",
            estimate.ambient_dim, options.size_cap, estimate.num_vars, estimate.block_dims, estimate.flop_estimate
        )));
    }
    let layout = ExtensionLayout::build(d_a, d_b, spec)?;
    let problem = layout.problem(rho.matrix())?;
    Ok((problem, layout))
}

/// Runs one level of the hierarchy.
pub fn run_test(rho: &DensityMatrix, spec: &ExtensionSpec, options: &HierarchyOptions) -> Result<TestReport> {
    let (problem, layout) = build_extension_problem(rho, spec, options)?;
    run_prepared(rho, &problem, &layout, options)
}

/// Solves an already assembled problem and post-processes the outcome.
pub fn run_prepared(
    rho: &DensityMatrix,
    problem: &SdpProblem,
    layout: &ExtensionLayout,
    options: &HierarchyOptions,
) -> Result<TestReport> {
    let spec = layout.spec;
    let outcome = SdpSolver::new(options.solver.clone()).feasibility_margin(problem)?;
    debug!(
        "level {} ({}ppt, {}reduced): {:?} after {} iterations, t = {:?}",
        spec.k,
        if spec.ppt { "" } else { "no " },
        if spec.reduced { "" } else { "un" },
        outcome.status,
        outcome.iterations,
        outcome.margin_t
    );
    let mut report = TestReport {
        spec,
        status: Verdict::Marginal,
        assembly: AssemblyInfo::new(layout),
        extension: None,
        extension_check: None,
        dual_blocks: None,
        certificate: None,
        witness: None,
        solver: SolverSummary::from(&outcome),
        warnings: rho.warnings().to_vec(),
    };
    match outcome.status {
        SdpStatus::Feasible => {
            let blocks = problem.evaluate(&outcome.x);
            let x = layout.lift(&blocks[0]);
            let check = check_extension(&x, rho.matrix(), layout.d_a, layout.d_b, spec.k, spec.ppt)?;
            if check.passed {
                report.status = Verdict::SeparableConsistent;
            } else {
                warn!("solver reported feasibility but the extension check failed: {check:?}");
                report.warnings.push("reconstructed extension failed the direct check".into());
            }
            report.extension = Some(x);
            report.extension_check = Some(check);
        }
        SdpStatus::Infeasible => {
            let cert = verify_certificate(problem, &outcome.z, &options.solver)?;
            let witness = extract_witness(layout, rho.matrix(), &outcome.z, options)?;
            if cert.passed && witness.verified() {
                report.status = Verdict::Entangled;
            } else {
                report.warnings.push("infeasibility certificate failed independent verification".into());
            }
            report.certificate = Some(cert);
            report.witness = Some(witness);
            report.dual_blocks = Some(outcome.z.clone());
        }
        SdpStatus::Marginal | SdpStatus::IterLimit => {
            report.dual_blocks = Some(outcome.z.clone());
        }
    }
    Ok(report)
}

/// Runs levels `1..=k_max`, stopping at the first Entangled verdict.
///
/// `base` supplies `ppt` and `reduced`; level 1 always includes the PPT block.
/// Whenever a level-k extension is found, tracing out one copy must give a
/// valid level-(k−1) extension; a violation is recorded as a warning.
pub fn run_ladder(
    rho: &DensityMatrix,
    k_max: usize,
    base: &ExtensionSpec,
    options: &HierarchyOptions,
) -> Result<Vec<TestReport>> {
    if k_max == 0 {
        return Err(Error::InvalidParameter("k_max must be at least 1".into()));
    }
    let mut reports: Vec<TestReport> = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let spec = ExtensionSpec { k, ppt: base.ppt || k == 1, reduced: base.reduced };
        let mut report = run_test(rho, &spec, options)?;
        if k > 1 {
            if let Some(x) = &report.extension {
                let mut dims = vec![rho.d_a(); k];
                dims.push(rho.d_b());
                let space = TensorSpace::new(dims)?;
                let (down, _) = partial_trace(x, &space, &[k - 1])?;
                let check = check_extension(&down, rho.matrix(), rho.d_a(), rho.d_b(), k - 1, spec.ppt)?;
                if !check.passed {
                    report.warnings.push(format!("traced-down extension fails level {}: {check:?}", k - 1));
                }
                let below = &reports[k - 2];
                if report.status == Verdict::SeparableConsistent && below.status == Verdict::Entangled {
                    report.warnings.push(format!("monotonicity violated between levels {} and {k}", k - 1));
                }
            }
        }
        let stop = report.status == Verdict::Entangled;
        reports.push(report);
        if stop {
            break;
        }
    }
    Ok(reports)
}

/// `‖A − B‖_F` helper used by callers comparing extensions.
pub fn extension_distance(a: &CMat, b: &CMat) -> f64 {
    frobenius(&(a - b))
}
