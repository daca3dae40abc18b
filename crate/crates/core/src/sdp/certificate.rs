use serde::{Deserialize, Serialize};

use super::{SdpProblem, SolverOptions};
use crate::error::Result;
use crate::qlinalg::{min_eigenvalue, trace, CMat, C64};

/// Independent check of an infeasibility certificate, evaluated on `Z`
/// rescaled to unit trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateCheck {
    pub trace: f64,
    pub min_eigenvalue: f64,
    pub max_constraint_residual: f64,
    /// Tr[F_0 Z].
    pub f0_value: f64,
    pub passed: bool,
}

/// Checks `Z ⪰ 0`, `Tr[F_i Z] = 0` and `Tr[F_0 Z] < 0` from scratch.
pub fn verify_certificate(p: &SdpProblem, z: &[CMat], opts: &SolverOptions) -> Result<CertificateCheck> {
    p.check_blocks(z)?;
    let tr: f64 = z.iter().map(|b| trace(b).re).sum();
    if !(tr > 0.0 && tr.is_finite()) {
        return Ok(CertificateCheck {
            trace: tr,
            min_eigenvalue: z.iter().map(min_eigenvalue).fold(f64::INFINITY, f64::min),
            max_constraint_residual: 0.0,
            f0_value: 0.0,
            passed: false,
        });
    }
    let scale = C64::new(1.0 / tr, 0.0);
    let zn: Vec<CMat> = z.iter().map(|b| b * scale).collect();
    let min_eig = zn.iter().map(min_eigenvalue).fold(f64::INFINITY, f64::min);
    let max_res = p
        .constraints()
        .iter()
        .map(|con| con.dot(&zn).abs())
        .fold(0.0, f64::max);
    let f0_value: f64 = p
        .f0()
        .iter()
        .zip(&zn)
        .map(|(f, zb)| (f * zb).trace().re)
        .sum();
    let passed = min_eig >= -opts.cert_tol
        && max_res <= opts.cert_tol
        && f0_value <= -opts.cert_margin;
    Ok(CertificateCheck {
        trace: tr,
        min_eigenvalue: min_eig,
        max_constraint_residual: max_res,
        f0_value,
        passed,
    })
}

/// Dual Slater test: when every `F_i` is traceless, `Z₀ = 1` is a strictly
/// feasible dual point for the feasibility problem. No general search is
/// attempted otherwise.
pub fn check_slater(p: &SdpProblem) -> (bool, Option<Vec<CMat>>) {
    if p.traceless_constraints() {
        let z0 = p.block_dims().iter().map(|&d| CMat::identity(d, d)).collect();
        (true, Some(z0))
    } else {
        (false, None)
    }
}
