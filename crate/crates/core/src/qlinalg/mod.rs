//! Dense complex linear algebra and tensor-structure primitives.
//!
//! Matrices are `nalgebra` dense matrices over `Complex<f64>`. Tensor
//! factors are ordered left to right: factor 0 is the most significant
//! digit of a row or column index.

mod basis;
mod symmetric;
mod tensor;

pub use basis::{hermitian_basis, matrix_unit_basis, OperatorBasis};
pub use symmetric::{
    binomial, symmetric_operator_basis, symmetric_projector, Isometry, SymmetricSubspace,
    DENSE_PROJECTOR_CAP,
};
pub use tensor::{
    kron, partial_trace, partial_transpose, permute_factors, swap_operator, TensorSpace,
};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// Relative tolerance for Hermiticity checks.
pub const HERMITIAN_TOL: f64 = 1e-12;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Largest entry magnitude.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Max |M - M†| relative to max |M|.
pub fn hermiticity_deviation(m: &CMat) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    let n = m.nrows();
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in 0..=i {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

pub fn is_hermitian(m: &CMat, rel_tol: f64) -> bool {
    m.is_square() && hermiticity_deviation(m) <= rel_tol * max_abs(m).max(f64::MIN_POSITIVE)
}

/// Rejects operators outside the Hermiticity tolerance.
pub fn ensure_hermitian(m: &CMat) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = max_abs(m);
    let dev = hermiticity_deviation(m);
    let allowed = HERMITIAN_TOL * scale;
    if dev > allowed && dev > 0.0 {
        return Err(Error::NotHermitian { deviation: dev, allowed });
    }
    Ok(())
}

/// (M + M†)/2.
pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

pub fn trace(m: &CMat) -> C64 {
    m.diagonal().iter().sum()
}

/// Tr[A B] without forming the product.
pub fn trace_product(a: &CMat, b: &CMat) -> C64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let mut acc = ZERO;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// Cholesky factorization of a Hermitian positive definite matrix, or
/// `None` when the matrix is not numerically positive definite. The complex
/// square root used internally by `nalgebra` never fails, so every pivot is
/// checked explicitly.
pub fn cholesky(m: &CMat) -> Option<Cholesky<C64, Dyn>> {
    if !m.is_square() {
        return None;
    }
    let ch = Cholesky::new(hermitian_part(m))?;
    let l = ch.l_dirty();
    for i in 0..m.nrows() {
        let d = l[(i, i)];
        if !(d.re > 0.0 && d.re.is_finite()) || d.im.abs() > 1e-6 * d.re {
            return None;
        }
    }
    Some(ch)
}

pub fn is_positive_definite(m: &CMat) -> bool {
    cholesky(m).is_some()
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Eigenvalues (ascending) and eigenvectors of a Hermitian matrix.
pub fn eigh(m: &CMat) -> (Vec<f64>, CMat) {
    let eig = SymmetricEigen::new(hermitian_part(m));
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    (vals, vecs)
}

pub fn eigvalsh(m: &CMat) -> Vec<f64> {
    let eig = SymmetricEigen::new(hermitian_part(m));
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    vals
}

pub fn min_eigenvalue(m: &CMat) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    eigvalsh(m)[0]
}

pub fn max_eigenvalue(m: &CMat) -> f64 {
    if m.nrows() == 0 {
        return f64::NEG_INFINITY;
    }
    *eigvalsh(m).last().unwrap()
}

/// Applies `f` to the eigenvalues of a Hermitian matrix.
pub fn hermitian_function(m: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let (vals, vecs) = eigh(m);
    let n = m.nrows();
    let mut scaled = vecs.clone();
    for j in 0..n {
        let s = C64::new(f(vals[j]), 0.0);
        for i in 0..n {
            scaled[(i, j)] *= s;
        }
    }
    scaled * vecs.adjoint()
}

/// Number of singular values above `rel_tol * sigma_max`.
pub fn numerical_rank(m: &CMat, rel_tol: f64) -> usize {
    let sv = m.clone().singular_values();
    let smax = sv.iter().fold(0.0f64, |a, &b| a.max(b));
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// Outer product |u><v|.
pub fn outer(u: &CVec, v: &CVec) -> CMat {
    u * v.adjoint()
}

/// Kronecker product of vectors, factor 0 leftmost.
pub fn kron_vec(a: &CVec, b: &CVec) -> CVec {
    let mut out = CVec::zeros(a.len() * b.len());
    for i in 0..a.len() {
        for j in 0..b.len() {
            out[i * b.len() + j] = a[i] * b[j];
        }
    }
    out
}

/// <v|M|v>, real part (M Hermitian).
pub fn expectation(m: &CMat, v: &CVec) -> f64 {
    let mv = m * v;
    v.iter().zip(mv.iter()).map(|(a, b)| (a.conj() * b).re).sum()
}

pub fn basis_vector(n: usize, i: usize) -> CVec {
    let mut v = CVec::zeros(n);
    v[i] = ONE;
    v
}
