//! Assembly of the level-k extension problem.
//!
//! The extension lives on `H_S ⊗ B`, where `H_S` is either all of `A^⊗k`
//! (unreduced) or its symmetric subspace (reduced), and the ambient factor
//! order is `[A, …, A, B]`. Extensions are written as
//! `X = E(ρ) + Σ_J x_J F_J`, where `E` is the minimum-norm solution of the
//! marginal constraint and `F_J = K_a ⊗ τ_β` spans its kernel, with `K_a`
//! Hermitian, copy-symmetric and traceless under the partial trace over
//! copies `2..k`.

use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::ExtensionSpec;
use crate::error::{Error, Result};
use crate::qlinalg::{
    eigh, matrix_unit_basis, CMat, CVec, Isometry, SymmetricSubspace, TensorSpace, C64,
};
use crate::sdp::{Constraint, SdpProblem, SparseHermitian};

const DROP_TOL: f64 = 1e-15;
const NULL_TOL: f64 = 1e-10;
const COMPRESSION_TOL: f64 = 1e-10;

/// Sparse square complex matrix with sorted, unique entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOp {
    pub dim: usize,
    pub entries: Vec<(usize, usize, C64)>,
}

impl SparseOp {
    fn from_map(dim: usize, map: BTreeMap<(usize, usize), C64>) -> Self {
        let entries = map
            .into_iter()
            .filter(|(_, v)| v.norm() > DROP_TOL)
            .map(|((r, c), v)| (r, c, v))
            .collect();
        Self { dim, entries }
    }

    fn combination(dim: usize, terms: &[(C64, &SparseOp)]) -> Self {
        let mut map = BTreeMap::new();
        for (coef, op) in terms {
            for &(r, c, v) in &op.entries {
                *map.entry((r, c)).or_insert(C64::new(0.0, 0.0)) += coef * v;
            }
        }
        Self::from_map(dim, map)
    }

    pub fn adjoint(&self) -> Self {
        let map = self.entries.iter().map(|&(r, c, v)| ((c, r), v.conj())).collect();
        Self::from_map(self.dim, map)
    }

    pub fn frobenius(&self) -> f64 {
        self.entries.iter().map(|(_, _, v)| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn to_dense(&self) -> CMat {
        let mut out = CMat::zeros(self.dim, self.dim);
        for &(r, c, v) in &self.entries {
            out[(r, c)] += v;
        }
        out
    }

    /// `self ⊗ τ` for a dense `τ`, as a sparse Hermitian block.
    fn tensor_dense(&self, tau: &CMat) -> SparseHermitian {
        let db = tau.nrows();
        let nz: Vec<(usize, usize, C64)> = (0..db)
            .flat_map(|i| (0..db).map(move |j| (i, j)))
            .filter_map(|(i, j)| {
                let v = tau[(i, j)];
                (v.norm() > 0.0).then_some((i, j, v))
            })
            .collect();
        let mut entries = Vec::with_capacity(self.entries.len() * nz.len());
        for &(r, c, v) in &self.entries {
            for &(i, j, t) in &nz {
                entries.push((r * db + i, c * db + j, v * t));
            }
        }
        SparseHermitian { dim: self.dim * db, entries }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BlockKind {
    /// The extension itself.
    Extension,
    /// The extension with the first `copies` copies of A transposed.
    PartialTranspose { copies: usize },
}

impl BlockKind {
    pub fn transposed_copies(&self) -> usize {
        match self {
            BlockKind::Extension => 0,
            BlockKind::PartialTranspose { copies } => *copies,
        }
    }
}

/// One diagonal block of the problem: `L_b(X) = J_b† (J_0 X J_0†)^{Γ_b} J_b`,
/// with `J_b` acting on the copies of A only.
#[derive(Debug, Clone)]
pub struct BlockLayout {
    pub kind: BlockKind,
    pub dim: usize,
    pub isometry: Isometry,
}

/// Block kinds of a level-k run.
pub fn block_kinds(spec: &ExtensionSpec) -> Vec<BlockKind> {
    let mut kinds = vec![BlockKind::Extension];
    if spec.ppt {
        kinds.extend((1..=spec.k).map(|copies| BlockKind::PartialTranspose { copies }));
    }
    kinds
}

/// Isometry onto the support of block `kind` inside `A^⊗k`.
pub fn block_isometry(d_a: usize, k: usize, reduced: bool, kind: BlockKind) -> Result<Isometry> {
    let full = d_a.pow(k as u32);
    if !reduced {
        return Ok(Isometry::identity(full));
    }
    Ok(match kind {
        BlockKind::Extension => SymmetricSubspace::new(d_a, k)?.isometry().clone(),
        BlockKind::PartialTranspose { copies } => {
            let left = SymmetricSubspace::new(d_a, copies)?;
            let right = SymmetricSubspace::new(d_a, k - copies)?;
            left.isometry().tensor(right.isometry())
        }
    })
}

/// Orthonormal basis of the copy-symmetric operators on `H_S`, each
/// element carrying its occupation weight `occ(row) − occ(col)`.
#[derive(Debug, Clone)]
struct OperatorSpace {
    d: usize,
    k: usize,
    hs: Isometry,
    basis: Vec<SparseOp>,
    weights: Vec<Vec<i32>>,
    adjoint: Vec<usize>,
}

fn nondecreasing(symbols: usize, len: usize) -> Vec<Vec<usize>> {
    fn rec(symbols: usize, len: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == len {
            out.push(cur.clone());
            return;
        }
        for s in start..symbols {
            cur.push(s);
            rec(symbols, len, s, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(symbols, len, 0, &mut Vec::with_capacity(len), &mut out);
    out
}

/// All distinct orderings of a sorted sequence, in lexicographic order.
fn distinct_permutations(sorted: &[usize]) -> Vec<Vec<usize>> {
    let mut cur = sorted.to_vec();
    let mut out = vec![cur.clone()];
    loop {
        let n = cur.len();
        let Some(i) = (1..n).rev().find(|&i| cur[i - 1] < cur[i]) else {
            return out;
        };
        let j = (i..n).rev().find(|&j| cur[j] > cur[i - 1]).expect("successor exists");
        cur.swap(i - 1, j);
        cur[i..].reverse();
        out.push(cur.clone());
    }
}

impl OperatorSpace {
    fn new(d: usize, k: usize, reduced: bool) -> Result<Self> {
        if reduced {
            Self::reduced(d, k)
        } else {
            Self::unreduced(d, k)
        }
    }

    fn unreduced(d: usize, k: usize) -> Result<Self> {
        let full = d.pow(k as u32);
        let space = TensorSpace::new(vec![d; k])?;
        let multisets = nondecreasing(d * d, k);
        let index: HashMap<Vec<usize>, usize> =
            multisets.iter().enumerate().map(|(i, m)| (m.clone(), i)).collect();
        let mut basis = Vec::with_capacity(multisets.len());
        let mut weights = Vec::with_capacity(multisets.len());
        let mut adjoint = Vec::with_capacity(multisets.len());
        for ms in &multisets {
            let perms = distinct_permutations(ms);
            let w = 1.0 / (perms.len() as f64).sqrt();
            let mut map = BTreeMap::new();
            for perm in &perms {
                let p: Vec<usize> = perm.iter().map(|s| s / d).collect();
                let q: Vec<usize> = perm.iter().map(|s| s % d).collect();
                map.insert((space.index(&p), space.index(&q)), C64::new(w, 0.0));
            }
            basis.push(SparseOp::from_map(full, map));
            let mut wt = vec![0i32; d];
            for s in ms {
                wt[s / d] += 1;
                wt[s % d] -= 1;
            }
            weights.push(wt);
            let mut swapped: Vec<usize> = ms.iter().map(|s| (s % d) * d + s / d).collect();
            swapped.sort_unstable();
            adjoint.push(index[&swapped]);
        }
        Ok(Self { d, k, hs: Isometry::identity(full), basis, weights, adjoint })
    }

    fn reduced(d: usize, k: usize) -> Result<Self> {
        let sym = SymmetricSubspace::new(d, k)?;
        let ds = sym.dim();
        let mut basis = Vec::with_capacity(ds * ds);
        let mut weights = Vec::with_capacity(ds * ds);
        let mut adjoint = Vec::with_capacity(ds * ds);
        for i in 0..ds {
            for j in 0..ds {
                basis.push(SparseOp { dim: ds, entries: vec![(i, j, C64::new(1.0, 0.0))] });
                let wt = sym.occupations()[i]
                    .iter()
                    .zip(&sym.occupations()[j])
                    .map(|(&a, &b)| a as i32 - b as i32)
                    .collect();
                weights.push(wt);
                adjoint.push(j * ds + i);
            }
        }
        Ok(Self { d, k, hs: sym.isometry().clone(), basis, weights, adjoint })
    }

    fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Tr over copies 2..k of `J_0 X J_0†`.
    fn reduce(&self, op: &SparseOp) -> CMat {
        let tail = self.d.pow(self.k as u32 - 1);
        let mut out = CMat::zeros(self.d, self.d);
        for &(r, c, v) in &op.entries {
            for &(pr, wr) in &self.hs.columns()[r] {
                for &(pc, wc) in &self.hs.columns()[c] {
                    if pr % tail == pc % tail {
                        out[(pr / tail, pc / tail)] += v * (wr * wc);
                    }
                }
            }
        }
        out
    }
}

fn is_positive_weight(w: &[i32]) -> Option<bool> {
    w.iter().find(|&&v| v != 0).map(|&v| v > 0)
}

/// `e_p − e_q` decoded from a weight vector.
fn single_transfer(w: &[i32]) -> Option<(usize, usize)> {
    let plus: Vec<usize> = (0..w.len()).filter(|&i| w[i] == 1).collect();
    let minus: Vec<usize> = (0..w.len()).filter(|&i| w[i] == -1).collect();
    let others = w.iter().filter(|&&v| v != 0 && v != 1 && v != -1).count();
    (plus.len() == 1 && minus.len() == 1 && others == 0).then(|| (plus[0], minus[0]))
}

/// Null space (as columns) of a Hermitian positive semidefinite Gram matrix.
fn null_vectors(gram: &CMat) -> Vec<CVec> {
    let (vals, vecs) = eigh(gram);
    let top = vals.last().copied().unwrap_or(0.0).max(1.0);
    vals.iter()
        .enumerate()
        .filter(|(_, &v)| v <= NULL_TOL * top)
        .map(|(j, _)| vecs.column(j).into_owned())
        .collect()
}

fn real_null_vectors(gram: &DMatrix<f64>) -> Vec<Vec<f64>> {
    let eig = SymmetricEigen::new(gram.clone());
    let top = eig.eigenvalues.iter().fold(1.0f64, |a, &b| a.max(b));
    let mut idx: Vec<usize> = (0..gram.nrows())
        .filter(|&j| eig.eigenvalues[j] <= NULL_TOL * top)
        .collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    idx.iter()
        .map(|&j| eig.eigenvectors.column(j).iter().copied().collect())
        .collect()
}

/// Hermitian kernel directions `K_a` and the particular solution
/// `E_A(|p⟩⟨q|)` (index `p·d + q`), computed weight sector by weight sector.
fn kernel_and_particular(space: &OperatorSpace) -> Result<(Vec<SparseOp>, Vec<SparseOp>)> {
    let d = space.d;
    let n = space.hs.dim();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut sectors: BTreeMap<Vec<i32>, Vec<usize>> = BTreeMap::new();
    for (i, w) in space.weights.iter().enumerate() {
        sectors.entry(w.clone()).or_default().push(i);
    }
    let reduced: Vec<CMat> = space.basis.iter().map(|b| space.reduce(b)).collect();
    let mut kernel = Vec::new();
    let mut particular: Vec<Option<SparseOp>> = vec![None; d * d];

    for (w, members) in &sectors {
        match is_positive_weight(w) {
            None => {
                // Hermitian basis of the sector.
                let mut herm: Vec<SparseOp> = Vec::new();
                for &i in members {
                    let j = space.adjoint[i];
                    if j == i {
                        herm.push(space.basis[i].clone());
                    } else if j > i {
                        let (bi, bj) = (&space.basis[i], &space.basis[j]);
                        herm.push(SparseOp::combination(n, &[(C64::new(h, 0.0), bi), (C64::new(h, 0.0), bj)]));
                        herm.push(SparseOp::combination(n, &[(C64::new(0.0, h), bi), (C64::new(0.0, -h), bj)]));
                    }
                }
                let r = DMatrix::<f64>::from_fn(d, herm.len(), |p, j| space.reduce(&herm[j])[(p, p)].re);
                let rrt = &r * r.transpose();
                let inv = rrt
                    .clone()
                    .try_inverse()
                    .ok_or_else(|| Error::Numerical("marginal map is not onto the diagonal".into()))?;
                let pinv = r.transpose() * inv;
                for p in 0..d {
                    let terms: Vec<(C64, &SparseOp)> = herm
                        .iter()
                        .enumerate()
                        .map(|(j, hj)| (C64::new(pinv[(j, p)], 0.0), hj))
                        .collect();
                    particular[p * d + p] = Some(SparseOp::combination(n, &terms));
                }
                for u in real_null_vectors(&(r.transpose() * &r)) {
                    let terms: Vec<(C64, &SparseOp)> =
                        herm.iter().zip(&u).map(|(hj, &c)| (C64::new(c, 0.0), hj)).collect();
                    kernel.push(SparseOp::combination(n, &terms));
                }
            }
            Some(false) => {}
            Some(true) => {
                let nullspace: Vec<CVec> = match single_transfer(w) {
                    Some((p, q)) => {
                        let t = CVec::from_iterator(members.len(), members.iter().map(|&i| reduced[i][(p, q)]));
                        let norm2 = t.norm_squared();
                        if norm2 <= 0.0 {
                            return Err(Error::Numerical(format!("no preimage for |{p}><{q}|")));
                        }
                        let terms: Vec<(C64, &SparseOp)> = members
                            .iter()
                            .zip(t.iter())
                            .map(|(&i, ti)| (ti.conj() / norm2, &space.basis[i]))
                            .collect();
                        let e = SparseOp::combination(n, &terms);
                        particular[q * d + p] = Some(e.adjoint());
                        particular[p * d + q] = Some(e);
                        let row = CMat::from_iterator(1, t.len(), t.iter().copied());
                        null_vectors(&(row.adjoint() * row))
                    }
                    None => (0..members.len())
                        .map(|i| {
                            let mut v = CVec::zeros(members.len());
                            v[i] = C64::new(1.0, 0.0);
                            v
                        })
                        .collect(),
                };
                for u in nullspace {
                    let terms: Vec<(C64, &SparseOp)> =
                        members.iter().zip(u.iter()).map(|(&i, &c)| (c, &space.basis[i])).collect();
                    let kop = SparseOp::combination(n, &terms);
                    let kad = kop.adjoint();
                    kernel.push(SparseOp::combination(n, &[(C64::new(h, 0.0), &kop), (C64::new(h, 0.0), &kad)]));
                    kernel.push(SparseOp::combination(n, &[(C64::new(0.0, h), &kop), (C64::new(0.0, -h), &kad)]));
                }
            }
        }
    }
    let expected = space.dim() - d * d;
    if kernel.len() != expected {
        return Err(Error::Numerical(format!(
            "kernel has dimension {}, expected {expected}",
            kernel.len()
        )));
    }
    let particular = particular
        .into_iter()
        .enumerate()
        .map(|(i, e)| e.ok_or_else(|| Error::Numerical(format!("no preimage for matrix unit {i}"))))
        .collect::<Result<Vec<_>>>()?;
    Ok((kernel, particular))
}

/// Problem sizes of a level-k run, computed without assembling anything.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ResourceEstimate {
    pub num_vars: usize,
    pub block_dims: Vec<usize>,
    pub ambient_dim: usize,
    /// ∝ m² · Σ n_b², the cost of one Schur-complement assembly.
    pub flop_estimate: f64,
}

fn binomial_f(n: usize, k: usize) -> usize {
    crate::qlinalg::binomial(n, k)
}

/// Sizes of the level-k problem for `d_A ⊗ d_B`.
pub fn required_resources(d_a: usize, d_b: usize, spec: &ExtensionSpec) -> ResourceEstimate {
    let k = spec.k;
    let space_dim = if spec.reduced {
        binomial_f(d_a + k - 1, k).pow(2)
    } else {
        binomial_f(d_a * d_a + k - 1, k)
    };
    let num_vars = (space_dim - d_a * d_a) * d_b * d_b;
    let block_dims: Vec<usize> = block_kinds(spec)
        .iter()
        .map(|kind| {
            let a = if spec.reduced {
                match kind {
                    BlockKind::Extension => binomial_f(d_a + k - 1, k),
                    BlockKind::PartialTranspose { copies } => {
                        binomial_f(d_a + copies - 1, *copies) * binomial_f(d_a + k - copies - 1, k - copies)
                    }
                }
            } else {
                d_a.pow(k as u32)
            };
            a * d_b
        })
        .collect();
    let sq: f64 = block_dims.iter().map(|&n| (n * n) as f64).sum();
    ResourceEstimate {
        num_vars,
        block_dims,
        ambient_dim: d_a.pow(k as u32) * d_b,
        flop_estimate: (num_vars as f64).powi(2) * sq,
    }
}

/// Everything needed to build, solve and post-process one level-k problem.
#[derive(Debug, Clone)]
pub struct ExtensionLayout {
    pub d_a: usize,
    pub d_b: usize,
    pub spec: ExtensionSpec,
    pub blocks: Vec<BlockLayout>,
    space: OperatorSpace,
    b_basis: Vec<CMat>,
    kernel_blocks: Vec<Vec<SparseOp>>,
    particular_blocks: Vec<Vec<SparseOp>>,
    kernel: Vec<SparseOp>,
    particular: Vec<SparseOp>,
}

impl ExtensionLayout {
    pub fn build(d_a: usize, d_b: usize, spec: &ExtensionSpec) -> Result<Self> {
        spec.validate()?;
        TensorSpace::bipartite(d_a, d_b)?;
        let space = OperatorSpace::new(d_a, spec.k, spec.reduced)?;
        let (kernel, particular) = kernel_and_particular(&space)?;
        let blocks = block_kinds(spec)
            .into_iter()
            .map(|kind| {
                let isometry = if kind == BlockKind::Extension {
                    space.hs.clone()
                } else {
                    block_isometry(d_a, spec.k, spec.reduced, kind)?
                };
                Ok(BlockLayout { kind, dim: isometry.dim() * d_b, isometry })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut layout = Self {
            d_a,
            d_b,
            spec: *spec,
            blocks,
            space,
            b_basis: matrix_unit_basis(d_b).elements,
            kernel_blocks: Vec::new(),
            particular_blocks: Vec::new(),
            kernel,
            particular,
        };
        for b in 0..layout.blocks.len() {
            let kb = layout
                .kernel
                .iter()
                .map(|op| layout.block_map_a(b, op))
                .collect::<Result<Vec<_>>>()?;
            let pb = layout
                .particular
                .iter()
                .map(|op| layout.block_map_a(b, op))
                .collect::<Result<Vec<_>>>()?;
            layout.kernel_blocks.push(kb);
            layout.particular_blocks.push(pb);
        }
        Ok(layout)
    }

    pub fn num_vars(&self) -> usize {
        self.kernel.len() * self.d_b * self.d_b
    }

    /// Dimension of the copy-symmetric operator space on `H_S`.
    pub fn operator_space_dim(&self) -> usize {
        self.space.dim()
    }

    /// Dimension of `H_S`.
    pub fn copy_space_dim(&self) -> usize {
        self.space.hs.dim()
    }

    pub fn block_dims(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.dim).collect()
    }

    /// `[d_A; k] ++ [d_B]`.
    pub fn ambient_space(&self) -> TensorSpace {
        let mut dims = vec![self.d_a; self.spec.k];
        dims.push(self.d_b);
        TensorSpace::new(dims).expect("valid dimensions")
    }

    /// The A-side part of `L_b` applied to an operator on `H_S`.
    fn block_map_a(&self, b: usize, op: &SparseOp) -> Result<SparseOp> {
        let block = &self.blocks[b];
        if block.kind == BlockKind::Extension {
            return Ok(op.clone());
        }
        let l = block.kind.transposed_copies();
        let d = self.d_a;
        let k = self.spec.k;
        let tail = d.pow((k - l) as u32);
        let hs = &self.space.hs;
        let mut map: BTreeMap<(usize, usize), C64> = BTreeMap::new();
        for &(r, c, v) in &op.entries {
            for &(pr, wr) in &hs.columns()[r] {
                for &(pc, wc) in &hs.columns()[c] {
                    // Exchange the leading l digits of row and column.
                    let (hr, tr) = (pr / tail, pr % tail);
                    let (hc, tc) = (pc / tail, pc % tail);
                    let nr = hc * tail + tr;
                    let nc = hr * tail + tc;
                    if let (Some((cr, xr)), Some((cc, xc))) =
                        (block.isometry.compress_index(nr), block.isometry.compress_index(nc))
                    {
                        *map.entry((cr, cc)).or_insert(C64::new(0.0, 0.0)) += v * (wr * wc * xr * xc);
                    }
                }
            }
        }
        let out = SparseOp::from_map(block.isometry.dim(), map);
        let (before, after) = (op.frobenius(), out.frobenius());
        if (before - after).abs() > COMPRESSION_TOL * before.max(1.0) {
            return Err(Error::Numerical(format!(
                "compression of block {b} ({:?}) lost norm: {before:.6e} -> {after:.6e}",
                block.kind
            )));
        }
        Ok(out)
    }

    fn check_state(&self, rho: &CMat) -> Result<()> {
        let n = self.d_a * self.d_b;
        if rho.nrows() != n || rho.ncols() != n {
            return Err(Error::Dimension(format!(
                "state is {}x{}, layout expects {n}",
                rho.nrows(),
                rho.ncols()
            )));
        }
        Ok(())
    }

    /// Adds `Σ_pq op_pq ⊗ ρ_pq` to a dense block.
    fn add_embedded(&self, ops: &[SparseOp], rho: &CMat, out: &mut CMat) {
        let (d, db) = (self.d_a, self.d_b);
        for p in 0..d {
            for q in 0..d {
                for &(s, t, v) in &ops[p * d + q].entries {
                    for b1 in 0..db {
                        for b2 in 0..db {
                            out[(s * db + b1, t * db + b2)] += v * rho[(p * db + b1, q * db + b2)];
                        }
                    }
                }
            }
        }
    }

    /// The fixed part `E(ρ)` on `H_S ⊗ B`.
    pub fn embed(&self, rho: &CMat) -> Result<CMat> {
        self.check_state(rho)?;
        let n = self.copy_space_dim() * self.d_b;
        let mut out = CMat::zeros(n, n);
        self.add_embedded(&self.particular, rho, &mut out);
        Ok(out)
    }

    /// Adjoint of [`ExtensionLayout::embed`] in the Hilbert-Schmidt product.
    pub fn embed_adjoint(&self, y: &CMat) -> Result<CMat> {
        let n = self.copy_space_dim() * self.d_b;
        if y.nrows() != n || y.ncols() != n {
            return Err(Error::Dimension(format!("operator must be {n}x{n}")));
        }
        Ok(self.pull_back(&[(&self.particular, y)]))
    }

    /// `Σ_pq |q⟩⟨p| ⊗ Σ_b Tr_S[(ops_b(pq) ⊗ 1) Y_b]`.
    fn pull_back(&self, parts: &[(&[SparseOp], &CMat)]) -> CMat {
        let (d, db) = (self.d_a, self.d_b);
        let mut w = CMat::zeros(d * db, d * db);
        for p in 0..d {
            for q in 0..d {
                for (ops, y) in parts {
                    for &(s, t, v) in &ops[p * d + q].entries {
                        for b1 in 0..db {
                            for b2 in 0..db {
                                w[(q * db + b2, p * db + b1)] += v * y[(t * db + b2, s * db + b1)];
                            }
                        }
                    }
                }
            }
        }
        w
    }

    /// The feasibility problem for `ρ`: blocks `L_b(E(ρ) + Σ x_J F_J) ⪰ 0`.
    pub fn problem(&self, rho: &CMat) -> Result<SdpProblem> {
        self.check_state(rho)?;
        let f0: Vec<CMat> = self
            .blocks
            .iter()
            .zip(&self.particular_blocks)
            .map(|(block, ops)| {
                let mut m = CMat::zeros(block.dim, block.dim);
                self.add_embedded(ops, rho, &mut m);
                m
            })
            .collect();
        let mut constraints = Vec::with_capacity(self.num_vars());
        for a in 0..self.kernel.len() {
            for tau in &self.b_basis {
                let parts = (0..self.blocks.len())
                    .map(|b| (b, self.kernel_blocks[b][a].tensor_dense(tau)))
                    .filter(|(_, f)| !f.is_empty())
                    .collect();
                constraints.push(Constraint { parts });
            }
        }
        SdpProblem::feasibility(f0, constraints)
    }

    /// Direction `F_J` on `H_S ⊗ B`.
    pub fn direction(&self, j: usize) -> CMat {
        let nb = self.b_basis.len();
        self.kernel[j / nb].tensor_dense(&self.b_basis[j % nb]).to_dense()
    }

    /// `W = E†(Σ_b L_b†(Z_b))`, so that `Tr[ρ W] = Σ_b Tr[F_0^b Z_b]`.
    pub fn witness_from_dual(&self, z: &[CMat]) -> Result<CMat> {
        if z.len() != self.blocks.len()
            || z.iter().zip(&self.blocks).any(|(m, b)| m.nrows() != b.dim || m.ncols() != b.dim)
        {
            return Err(Error::Dimension("dual blocks do not match the layout".into()));
        }
        let parts: Vec<(&[SparseOp], &CMat)> = self
            .particular_blocks
            .iter()
            .zip(z)
            .map(|(ops, zb)| (ops.as_slice(), zb))
            .collect();
        Ok(self.pull_back(&parts))
    }

    /// `(J_0 ⊗ 1) X (J_0 ⊗ 1)†` on the ambient space `[A^k, B]`.
    pub fn lift(&self, x: &CMat) -> CMat {
        self.space.hs.tensor(&Isometry::identity(self.d_b)).lift(x)
    }

    /// Compressed product vectors `v_b = (J_b ⊗ 1)† (x̄^{⊗l} ⊗ x^{⊗(k−l)} ⊗ y)`.
    pub fn product_vectors(&self, x: &CVec, y: &CVec) -> Vec<CVec> {
        self.blocks
            .iter()
            .map(|block| compressed_product(&block.isometry, block.kind, self.spec.k, x, y))
            .collect()
    }
}

/// `(J ⊗ 1)† (x̄^{⊗l} ⊗ x^{⊗(k−l)} ⊗ y)` with `l` the transposed copies.
pub fn compressed_product(j: &Isometry, kind: BlockKind, k: usize, x: &CVec, y: &CVec) -> CVec {
    let l = kind.transposed_copies();
    let xc = x.map(|v| v.conj());
    let mut full = CVec::from_element(1, C64::new(1.0, 0.0));
    for i in 0..k {
        full = crate::qlinalg::kron_vec(&full, if i < l { &xc } else { x });
    }
    let db = y.len();
    let mut out = CVec::zeros(j.dim() * db);
    for (c, col) in j.columns().iter().enumerate() {
        for &(r, w) in col {
            for b in 0..db {
                out[c * db + b] += full[r] * y[b] * w;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distinct_permutation_counts() {
        assert_eq!(distinct_permutations(&[0, 0, 1]).len(), 3);
        assert_eq!(distinct_permutations(&[0, 1, 2]).len(), 6);
        assert_eq!(distinct_permutations(&[1, 1]).len(), 1);
    }

    #[test]
    fn operator_space_dimensions() {
        let s = OperatorSpace::new(3, 2, false).unwrap();
        assert_eq!(s.dim(), 45);
        let s = OperatorSpace::new(3, 2, true).unwrap();
        assert_eq!(s.dim(), 36);
        let s = OperatorSpace::new(2, 3, false).unwrap();
        assert_eq!(s.dim(), crate::qlinalg::binomial(4 + 2, 3));
    }

    #[test]
    fn unreduced_basis_is_orthonormal() {
        let s = OperatorSpace::new(2, 2, false).unwrap();
        for (i, a) in s.basis.iter().enumerate() {
            for (j, b) in s.basis.iter().enumerate() {
                let ip = crate::qlinalg::trace_product(&a.to_dense().adjoint(), &b.to_dense());
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((ip.re - e).abs() < 1e-14 && ip.im.abs() < 1e-14);
            }
        }
    }
}
