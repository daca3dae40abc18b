use std::collections::HashMap;

use super::{basis::matrix_unit_basis, CMat, OperatorBasis, C64};
use crate::error::{Error, Result};

/// Largest ambient dimension for which dense symmetric projectors are built.
pub const DENSE_PROJECTOR_CAP: usize = 4096;

/// Real isometry from a subspace into a larger space whose columns have
/// pairwise disjoint supports.
#[derive(Debug, Clone, PartialEq)]
pub struct Isometry {
    full_dim: usize,
    columns: Vec<Vec<(usize, f64)>>,
    row_map: Vec<Option<(usize, f64)>>,
}

impl Isometry {
    pub fn identity(n: usize) -> Self {
        Self {
            full_dim: n,
            columns: (0..n).map(|i| vec![(i, 1.0)]).collect(),
            row_map: (0..n).map(|i| Some((i, 1.0))).collect(),
        }
    }

    pub fn from_columns(full_dim: usize, columns: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let mut row_map = vec![None; full_dim];
        for (col, entries) in columns.iter().enumerate() {
            let norm: f64 = entries.iter().map(|(_, w)| w * w).sum();
            if (norm - 1.0).abs() > 1e-12 {
                return Err(Error::Numerical(format!("isometry column {col} has norm² {norm}")));
            }
            for &(row, w) in entries {
                if row >= full_dim || row_map[row].is_some() {
                    return Err(Error::Numerical(format!(
                        "isometry columns overlap or exceed the space at row {row}"
                    )));
                }
                row_map[row] = Some((col, w));
            }
        }
        Ok(Self { full_dim, columns, row_map })
    }

    /// Dimension of the subspace.
    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn full_dim(&self) -> usize {
        self.full_dim
    }

    pub fn columns(&self) -> &[Vec<(usize, f64)>] {
        &self.columns
    }

    /// Subspace coordinate and weight of a full-space basis vector, if any.
    pub fn compress_index(&self, full: usize) -> Option<(usize, f64)> {
        self.row_map[full]
    }

    /// `self ⊗ other`, with `self` as the leading factor.
    pub fn tensor(&self, other: &Isometry) -> Isometry {
        let mut columns = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.columns {
            for b in &other.columns {
                let mut col = Vec::with_capacity(a.len() * b.len());
                for &(ra, wa) in a {
                    for &(rb, wb) in b {
                        col.push((ra * other.full_dim + rb, wa * wb));
                    }
                }
                columns.push(col);
            }
        }
        let full_dim = self.full_dim * other.full_dim;
        let mut row_map = vec![None; full_dim];
        for (ci, col) in columns.iter().enumerate() {
            for &(r, w) in col {
                row_map[r] = Some((ci, w));
            }
        }
        Isometry { full_dim, columns, row_map }
    }

    /// Dense `full_dim × dim` matrix.
    pub fn to_dense(&self) -> CMat {
        let mut out = CMat::zeros(self.full_dim, self.dim());
        for (c, col) in self.columns.iter().enumerate() {
            for &(r, w) in col {
                out[(r, c)] = C64::new(w, 0.0);
            }
        }
        out
    }

    /// V X V† for an operator on the subspace.
    pub fn lift(&self, x: &CMat) -> CMat {
        let mut out = CMat::zeros(self.full_dim, self.full_dim);
        for (i, ci) in self.columns.iter().enumerate() {
            for (j, cj) in self.columns.iter().enumerate() {
                let v = x[(i, j)];
                if v == C64::new(0.0, 0.0) {
                    continue;
                }
                for &(ri, wi) in ci {
                    for &(rj, wj) in cj {
                        out[(ri, rj)] += v * (wi * wj);
                    }
                }
            }
        }
        out
    }

    /// V† X V for an operator on the full space.
    pub fn compress(&self, x: &CMat) -> CMat {
        let n = self.dim();
        let mut out = CMat::zeros(n, n);
        for (i, ci) in self.columns.iter().enumerate() {
            for (j, cj) in self.columns.iter().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for &(ri, wi) in ci {
                    for &(rj, wj) in cj {
                        acc += x[(ri, rj)] * (wi * wj);
                    }
                }
                out[(i, j)] = acc;
            }
        }
        out
    }
}

/// Symmetric subspace of k copies of a d-dimensional space, with the
/// orthonormal occupation-number basis.
#[derive(Debug, Clone)]
pub struct SymmetricSubspace {
    d: usize,
    k: usize,
    occupations: Vec<Vec<usize>>,
    isometry: Isometry,
}

impl SymmetricSubspace {
    /// `k = 0` gives the one-dimensional space of scalars.
    pub fn new(d: usize, k: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidParameter(format!("local dimension {d} < 2")));
        }
        let full = d
            .checked_pow(k as u32)
            .filter(|&n| n <= 1 << 24)
            .ok_or_else(|| Error::TooLarge(format!("{d}^{k} copies")))?;
        let mut index: HashMap<Vec<usize>, usize> = HashMap::new();
        let mut occupations: Vec<Vec<usize>> = Vec::new();
        let mut members: Vec<Vec<usize>> = Vec::new();
        let mut digits = vec![0usize; k];
        for flat in 0..full {
            let mut rem = flat;
            for slot in (0..k).rev() {
                digits[slot] = rem % d;
                rem /= d;
            }
            let mut occ = vec![0usize; d];
            for &x in &digits {
                occ[x] += 1;
            }
            let id = *index.entry(occ.clone()).or_insert_with(|| {
                occupations.push(occ);
                members.push(Vec::new());
                occupations.len() - 1
            });
            members[id].push(flat);
        }
        let columns = members
            .into_iter()
            .map(|rows| {
                let w = 1.0 / (rows.len() as f64).sqrt();
                rows.into_iter().map(|r| (r, w)).collect()
            })
            .collect();
        let isometry = Isometry::from_columns(full, columns)?;
        Ok(Self { d, k, occupations, isometry })
    }

    pub fn local_dim(&self) -> usize {
        self.d
    }

    pub fn copies(&self) -> usize {
        self.k
    }

    /// C(d + k - 1, k).
    pub fn dim(&self) -> usize {
        self.occupations.len()
    }

    pub fn occupations(&self) -> &[Vec<usize>] {
        &self.occupations
    }

    pub fn isometry(&self) -> &Isometry {
        &self.isometry
    }

    /// Trace of the orthogonal projector, computed from its diagonal.
    pub fn projector_trace(&self) -> f64 {
        self.isometry
            .columns()
            .iter()
            .flat_map(|c| c.iter().map(|(_, w)| w * w))
            .sum()
    }
}

/// Binomial coefficient C(n, k).
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as usize
}

/// Dense orthogonal projector onto the symmetric subspace of `k` copies.
pub fn symmetric_projector(d: usize, k: usize) -> Result<CMat> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let sym = SymmetricSubspace::new(d, k)?;
    let full = sym.isometry().full_dim();
    if full > DENSE_PROJECTOR_CAP {
        return Err(Error::TooLarge(format!(
            "dense projector of dimension {full} exceeds {DENSE_PROJECTOR_CAP}; use SymmetricSubspace"
        )));
    }
    Ok(sym.isometry().lift(&CMat::identity(sym.dim(), sym.dim())))
}

/// d_S² Hermitian operators on the k-copy space supported on its
/// symmetric subspace, orthonormal in the Hilbert-Schmidt product.
pub fn symmetric_operator_basis(d: usize, k: usize) -> Result<OperatorBasis> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("need k >= 2, got {k}")));
    }
    let sym = SymmetricSubspace::new(d, k)?;
    let full = sym.isometry().full_dim();
    if full > DENSE_PROJECTOR_CAP {
        return Err(Error::TooLarge(format!("operator basis on dimension {full}")));
    }
    let inner = matrix_unit_basis(sym.dim());
    let elements = inner.elements.iter().map(|h| sym.isometry().lift(h)).collect();
    Ok(OperatorBasis { dim: full, elements })
}
