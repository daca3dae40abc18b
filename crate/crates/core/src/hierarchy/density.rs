use crate::error::{Error, Result};
use crate::qlinalg::{
    eigh, ensure_hermitian, hermitian_part, partial_transpose, trace, CMat, TensorSpace, C64,
};

/// Tolerance on the smallest eigenvalue and on the trace of a state.
pub const STATE_TOL: f64 = 1e-10;

/// Eigenvalues closer to zero than `ROUNDOFF · n · ‖ρ‖` are attributed to the
/// eigensolver and left untouched.
const ROUNDOFF: f64 = 64.0 * f64::EPSILON;

/// Hermitian, positive semidefinite, unit-trace operator on `[d_A, d_B]`.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    matrix: CMat,
    space: TensorSpace,
    warnings: Vec<String>,
}

impl DensityMatrix {
    /// Validates the state. Eigenvalues in `(-1e-10, 0)` are clipped to
    /// zero and the trace renormalized; a warning records the change.
    pub fn new(matrix: CMat, d_a: usize, d_b: usize) -> Result<Self> {
        let space = TensorSpace::bipartite(d_a, d_b)?;
        space.check_matrix(&matrix)?;
        ensure_hermitian(&matrix)?;
        let matrix = hermitian_part(&matrix);
        let tr = trace(&matrix).re;
        if (tr - 1.0).abs() > STATE_TOL {
            return Err(Error::InvalidState(format!("trace is {tr}, expected 1")));
        }
        let (vals, vecs) = eigh(&matrix);
        let lam = vals[0];
        let roundoff = ROUNDOFF * vals.len() as f64 * vals.last().copied().unwrap_or(1.0).abs().max(1.0);
        if lam < -STATE_TOL {
            return Err(Error::InvalidState(format!("smallest eigenvalue {lam:.3e} is negative")));
        }
        let mut warnings = Vec::new();
        let matrix = if lam < -roundoff {
            warnings.push(format!("clipped eigenvalue {lam:.3e} to zero and renormalized"));
            let clipped: Vec<f64> = vals.iter().map(|&v| v.max(0.0)).collect();
            let total: f64 = clipped.iter().sum();
            let mut scaled = vecs.clone();
            for (j, &v) in clipped.iter().enumerate() {
                let s = C64::new(v / total, 0.0);
                for i in 0..scaled.nrows() {
                    scaled[(i, j)] *= s;
                }
            }
            hermitian_part(&(scaled * vecs.adjoint()))
        } else {
            matrix
        };
        Ok(Self { matrix, space, warnings })
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn space(&self) -> &TensorSpace {
        &self.space
    }

    pub fn d_a(&self) -> usize {
        self.space.dim(0)
    }

    pub fn d_b(&self) -> usize {
        self.space.dim(1)
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// ρ^{T_A}.
    pub fn partial_transpose_a(&self) -> CMat {
        partial_transpose(&self.matrix, &self.space, &[0]).expect("bipartite space")
    }

    /// Smallest eigenvalue of ρ^{T_A}.
    pub fn pt_min_eigenvalue(&self) -> f64 {
        crate::qlinalg::min_eigenvalue(&self.partial_transpose_a())
    }

    /// Tr[ρ W].
    pub fn expectation(&self, w: &CMat) -> f64 {
        crate::qlinalg::trace_product(&self.matrix, w).re
    }

    pub fn into_matrix(self) -> CMat {
        self.matrix
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qlinalg::c;

    #[test]
    fn rejects_bad_states() {
        let m = CMat::identity(4, 4);
        assert!(matches!(DensityMatrix::new(m, 2, 2), Err(Error::InvalidState(_))));
        let mut m = CMat::identity(4, 4) * c(0.25, 0.0);
        m[(0, 1)] = c(0.1, 0.0);
        assert!(matches!(DensityMatrix::new(m, 2, 2), Err(Error::NotHermitian { .. })));
        let mut m = CMat::zeros(4, 4);
        m[(0, 0)] = c(1.5, 0.0);
        m[(1, 1)] = c(-0.5, 0.0);
        assert!(DensityMatrix::new(m, 2, 2).is_err());
        assert!(DensityMatrix::new(CMat::identity(4, 4) * c(0.25, 0.0), 2, 3).is_err());
    }

    #[test]
    fn clips_tiny_negative_eigenvalues() {
        let mut m = CMat::zeros(4, 4);
        m[(0, 0)] = c(1.0 + 1e-11, 0.0);
        m[(3, 3)] = c(-1e-11, 0.0);
        let rho = DensityMatrix::new(m, 2, 2).unwrap();
        assert_eq!(rho.warnings().len(), 1);
        assert!(rho.matrix()[(3, 3)].re.abs() < 1e-15);
        assert!((trace(rho.matrix()).re - 1.0).abs() < 1e-15);
    }
}
