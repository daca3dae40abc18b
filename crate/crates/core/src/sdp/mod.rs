//! Block-diagonal semidefinite programs over complex Hermitian matrices.
//!
//! A problem is the linear matrix inequality
//!
//! ```text
//! F(x) = F_0 + Σ_i x_i F_i ⪰ 0,     minimize cᵀx,
//! ```
//!
//! with dual `maximize −Tr[F_0 Z]` subject to `Z ⪰ 0`, `Tr[F_i Z] = c_i`.
//! Constraint matrices are stored sparsely per block; `F_0` is dense.

mod certificate;
mod solver;

pub use certificate::{check_slater, verify_certificate, CertificateCheck};
pub use solver::{
    feasibility_margin, solve, IterationRecord, SdpOutcome, SdpSolver, SdpStatus, SolverOptions,
    StartPoint, Termination,
};

use crate::error::{Error, Result};
use crate::qlinalg::{hermiticity_deviation, max_abs, CMat, C64, HERMITIAN_TOL};

/// Hermitian matrix stored as its nonzero entries (both triangles).
#[derive(Debug, Clone, PartialEq)]
pub struct SparseHermitian {
    pub dim: usize,
    pub entries: Vec<(usize, usize, C64)>,
}

impl SparseHermitian {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, entries: Vec::new() }
    }

    /// Keeps entries with magnitude above `drop_tol`.
    pub fn from_dense(m: &CMat, drop_tol: f64) -> Self {
        let mut entries = Vec::new();
        for c in 0..m.ncols() {
            for r in 0..m.nrows() {
                let v = m[(r, c)];
                if v.norm() > drop_tol {
                    entries.push((r, c, v));
                }
            }
        }
        Self { dim: m.nrows(), entries }
    }

    pub fn to_dense(&self) -> CMat {
        let mut out = CMat::zeros(self.dim, self.dim);
        self.add_to(&mut out, 1.0);
        out
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn trace(&self) -> C64 {
        self.entries
            .iter()
            .filter(|(r, c, _)| r == c)
            .map(|&(_, _, v)| v)
            .sum()
    }

    /// Tr[F X].
    pub fn dot(&self, x: &CMat) -> C64 {
        self.entries.iter().map(|&(r, c, v)| v * x[(c, r)]).sum()
    }

    /// `out += scale · F`.
    pub fn add_to(&self, out: &mut CMat, scale: f64) {
        for &(r, c, v) in &self.entries {
            out[(r, c)] += v * scale;
        }
    }

    pub fn frobenius(&self) -> f64 {
        self.entries.iter().map(|(_, _, v)| v.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// One scalar variable's contribution: its sparse matrix in each block it touches.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub parts: Vec<(usize, SparseHermitian)>,
}

impl Constraint {
    pub fn trace(&self) -> f64 {
        self.parts.iter().map(|(_, f)| f.trace().re).sum()
    }

    /// Tr[F_i Z] over the direct sum.
    pub fn dot(&self, blocks: &[CMat]) -> f64 {
        self.parts.iter().map(|(b, f)| f.dot(&blocks[*b]).re).sum()
    }
}

#[derive(Debug, Clone)]
pub struct SdpProblem {
    block_dims: Vec<usize>,
    f0: Vec<CMat>,
    constraints: Vec<Constraint>,
    objective: Vec<f64>,
    traceless_constraints: bool,
}

impl SdpProblem {
    /// Validates sizes and Hermiticity of every matrix.
    pub fn new(f0: Vec<CMat>, constraints: Vec<Constraint>, objective: Vec<f64>) -> Result<Self> {
        if objective.len() != constraints.len() {
            return Err(Error::Dimension(format!(
                "objective has length {} for {} variables",
                objective.len(),
                constraints.len()
            )));
        }
        let block_dims: Vec<usize> = f0.iter().map(|m| m.nrows()).collect();
        for (b, m) in f0.iter().enumerate() {
            if !m.is_square() {
                return Err(Error::Dimension(format!("F_0 block {b} is not square")));
            }
            let allowed = HERMITIAN_TOL * max_abs(m).max(1.0);
            let dev = hermiticity_deviation(m);
            if dev > allowed {
                return Err(Error::NotHermitian { deviation: dev, allowed });
            }
        }
        for (i, con) in constraints.iter().enumerate() {
            for (b, f) in &con.parts {
                let dim = *block_dims.get(*b).ok_or_else(|| {
                    Error::Dimension(format!("constraint {i} refers to missing block {b}"))
                })?;
                if f.dim != dim || f.entries.iter().any(|&(r, c, _)| r >= dim || c >= dim) {
                    return Err(Error::Dimension(format!(
                        "constraint {i} block {b} does not fit dimension {dim}"
                    )));
                }
                let dense = f.to_dense();
                let allowed = HERMITIAN_TOL * max_abs(&dense).max(1.0);
                let dev = hermiticity_deviation(&dense);
                if dev > allowed {
                    return Err(Error::NotHermitian { deviation: dev, allowed });
                }
            }
        }
        let total: usize = block_dims.iter().sum();
        let traceless_constraints = constraints
            .iter()
            .all(|con| con.trace().abs() <= 1e-12 * (total as f64).max(1.0));
        Ok(Self { block_dims, f0, constraints, objective, traceless_constraints })
    }

    /// Builds a problem from per-block dense matrix lists `{F_0^b, F_1^b, …, F_m^b}`.
    pub fn from_blocks(blocks: Vec<Vec<CMat>>, objective: Vec<f64>) -> Result<Self> {
        let m = objective.len();
        let mut f0 = Vec::with_capacity(blocks.len());
        let mut constraints: Vec<Constraint> = (0..m).map(|_| Constraint { parts: vec![] }).collect();
        for (b, mats) in blocks.into_iter().enumerate() {
            if mats.len() != m + 1 {
                return Err(Error::Dimension(format!(
                    "block {b} has {} matrices, expected {}",
                    mats.len(),
                    m + 1
                )));
            }
            let mut it = mats.into_iter();
            let base = it.next().unwrap();
            let dim = base.nrows();
            for (i, fi) in it.enumerate() {
                if fi.nrows() != dim || fi.ncols() != dim {
                    return Err(Error::Dimension(format!("F_{} in block {b} has the wrong size", i + 1)));
                }
                let sparse = SparseHermitian::from_dense(&fi, 0.0);
                if !sparse.is_empty() {
                    constraints[i].parts.push((b, sparse));
                }
            }
            f0.push(base);
        }
        Self::new(f0, constraints, objective)
    }

    /// Feasibility problem (zero objective).
    pub fn feasibility(f0: Vec<CMat>, constraints: Vec<Constraint>) -> Result<Self> {
        let m = constraints.len();
        Self::new(f0, constraints, vec![0.0; m])
    }

    pub fn block_dims(&self) -> &[usize] {
        &self.block_dims
    }

    pub fn total_dim(&self) -> usize {
        self.block_dims.iter().sum()
    }

    pub fn num_vars(&self) -> usize {
        self.constraints.len()
    }

    pub fn f0(&self) -> &[CMat] {
        &self.f0
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn traceless_constraints(&self) -> bool {
        self.traceless_constraints
    }

    pub fn is_feasibility(&self) -> bool {
        self.objective.iter().all(|&c| c == 0.0)
    }

    /// F(x), block by block.
    pub fn evaluate(&self, x: &[f64]) -> Vec<CMat> {
        let mut out = self.f0.clone();
        for (con, &xi) in self.constraints.iter().zip(x) {
            if xi != 0.0 {
                for (b, f) in &con.parts {
                    f.add_to(&mut out[*b], xi);
                }
            }
        }
        out
    }

    /// Problem with one extra variable `t` multiplying the identity in every
    /// block, and objective `t`.
    pub fn with_margin_variable(&self) -> SdpProblem {
        let mut constraints = self.constraints.clone();
        let parts = self
            .block_dims
            .iter()
            .enumerate()
            .map(|(b, &n)| {
                let entries = (0..n).map(|i| (i, i, C64::new(1.0, 0.0))).collect();
                (b, SparseHermitian { dim: n, entries })
            })
            .collect();
        constraints.push(Constraint { parts });
        let mut objective = vec![0.0; self.num_vars()];
        objective.push(1.0);
        SdpProblem {
            block_dims: self.block_dims.clone(),
            f0: self.f0.clone(),
            constraints,
            objective,
            traceless_constraints: false,
        }
    }

    pub(crate) fn check_blocks(&self, z: &[CMat]) -> Result<()> {
        if z.len() != self.block_dims.len()
            || z.iter().zip(&self.block_dims).any(|(m, &n)| m.nrows() != n || m.ncols() != n)
        {
            return Err(Error::Dimension(format!(
                "dual blocks {:?} do not match block sizes {:?}",
                z.iter().map(|m| m.nrows()).collect::<Vec<_>>(),
                self.block_dims
            )));
        }
        Ok(())
    }
}
