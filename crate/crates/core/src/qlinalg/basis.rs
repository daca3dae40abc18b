use super::{trace_product, CMat, C64, I, ONE};
use crate::error::{Error, Result};

/// Hermitian operator basis of a `dim`-dimensional space.
///
/// For bases built by [`hermitian_basis`] the first element is the only
/// one with nonzero trace (`Tr = 1`) and the traceless elements satisfy
/// `Tr[σ_i σ_j] = δ_ij`.
#[derive(Debug, Clone)]
pub struct OperatorBasis {
    pub dim: usize,
    pub elements: Vec<CMat>,
}

impl OperatorBasis {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Matrix of pairwise Hilbert-Schmidt products Tr[σ_i σ_j].
    pub fn gram(&self) -> nalgebra::DMatrix<f64> {
        let n = self.elements.len();
        nalgebra::DMatrix::from_fn(n, n, |i, j| {
            trace_product(&self.elements[i], &self.elements[j]).re
        })
    }

    /// Real coefficients of a Hermitian operator in this (orthogonal) basis.
    pub fn coefficients(&self, m: &CMat) -> Result<Vec<f64>> {
        if m.nrows() != self.dim || m.ncols() != self.dim {
            return Err(Error::Dimension(format!(
                "operator is {}x{}, basis acts on dimension {}",
                m.nrows(),
                m.ncols(),
                self.dim
            )));
        }
        Ok(self
            .elements
            .iter()
            .map(|s| {
                let norm = trace_product(s, s).re;
                trace_product(s, m).re / norm
            })
            .collect())
    }

    pub fn resum(&self, coefficients: &[f64]) -> CMat {
        let mut out = CMat::zeros(self.dim, self.dim);
        for (s, &x) in self.elements.iter().zip(coefficients) {
            out += s * C64::new(x, 0.0);
        }
        out
    }
}

/// Traceless Hermitian generators of dimension `d`, unit Hilbert-Schmidt norm.
fn traceless_generators(d: usize) -> Vec<CMat> {
    let mut out = Vec::with_capacity(d * d - 1);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    for j in 0..d {
        for k in (j + 1)..d {
            let mut sym = CMat::zeros(d, d);
            sym[(j, k)] = C64::new(h, 0.0);
            sym[(k, j)] = C64::new(h, 0.0);
            out.push(sym);
            let mut anti = CMat::zeros(d, d);
            anti[(j, k)] = -I * h;
            anti[(k, j)] = I * h;
            out.push(anti);
        }
    }
    for l in 1..d {
        let norm = ((l * (l + 1)) as f64).sqrt();
        let mut diag = CMat::zeros(d, d);
        for j in 0..l {
            diag[(j, j)] = C64::new(1.0 / norm, 0.0);
        }
        diag[(l, l)] = C64::new(-(l as f64) / norm, 0.0);
        out.push(diag);
    }
    out
}

/// Identity/d followed by the d² - 1 traceless generalized Gell-Mann
/// matrices, normalized so that `Tr[σ_i σ_j] = δ_ij` on the traceless part.
pub fn hermitian_basis(d: usize) -> Result<OperatorBasis> {
    if d < 2 {
        return Err(Error::InvalidParameter(format!("local dimension {d} < 2")));
    }
    let mut elements = Vec::with_capacity(d * d);
    elements.push(CMat::identity(d, d) * C64::new(1.0 / d as f64, 0.0));
    elements.extend(traceless_generators(d));
    Ok(OperatorBasis { dim: d, elements })
}

/// Orthonormal Hermitian basis built from matrix units: `E_jj`,
/// `(E_jk + E_kj)/√2` and `i(E_jk - E_kj)/√2`. Every element has at most
/// two nonzero entries.
pub fn matrix_unit_basis(d: usize) -> OperatorBasis {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut elements = Vec::with_capacity(d * d);
    for j in 0..d {
        let mut e = CMat::zeros(d, d);
        e[(j, j)] = ONE;
        elements.push(e);
    }
    for j in 0..d {
        for k in (j + 1)..d {
            let mut sym = CMat::zeros(d, d);
            sym[(j, k)] = C64::new(h, 0.0);
            sym[(k, j)] = C64::new(h, 0.0);
            elements.push(sym);
            let mut anti = CMat::zeros(d, d);
            anti[(j, k)] = I * h;
            anti[(k, j)] = -I * h;
            elements.push(anti);
        }
    }
    OperatorBasis { dim: d, elements }
}
