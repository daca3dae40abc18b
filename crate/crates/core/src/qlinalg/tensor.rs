use serde::{Deserialize, Serialize};

use super::{CMat, ONE, ZERO};
use crate::error::{Error, Result};

/// Ordered list of local dimensions of a tensor-product space.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TensorSpace {
    dims: Vec<usize>,
}

impl TensorSpace {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if let Some(pos) = dims.iter().position(|&d| d < 2) {
            return Err(Error::Factor {
                factor: pos,
                reason: format!("local dimension {} is below 2", dims[pos]),
            });
        }
        Ok(Self { dims })
    }

    /// Space with no factors (the scalars).
    pub fn trivial() -> Self {
        Self { dims: Vec::new() }
    }

    pub fn bipartite(d_a: usize, d_b: usize) -> Result<Self> {
        Self::new(vec![d_a, d_b])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn factors(&self) -> usize {
        self.dims.len()
    }

    pub fn dim(&self, factor: usize) -> usize {
        self.dims[factor]
    }

    pub fn total(&self) -> usize {
        self.dims.iter().product()
    }

    /// Strides of each factor in a flat index.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.dims.len()];
        for f in (0..self.dims.len().saturating_sub(1)).rev() {
            strides[f] = strides[f + 1] * self.dims[f + 1];
        }
        strides
    }

    pub fn digits(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        for f in (0..self.dims.len()).rev() {
            out[f] = index % self.dims[f];
            index /= self.dims[f];
        }
        out
    }

    pub fn index(&self, digits: &[usize]) -> usize {
        digits
            .iter()
            .zip(&self.dims)
            .fold(0, |acc, (&d, &n)| acc * n + d)
    }

    pub fn check_matrix(&self, m: &CMat) -> Result<()> {
        let n = self.total();
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::Dimension(format!(
                "matrix is {}x{} but space {:?} has dimension {}",
                m.nrows(),
                m.ncols(),
                self.dims,
                n
            )));
        }
        Ok(())
    }

    fn check_factor(&self, factor: usize) -> Result<()> {
        if factor >= self.dims.len() {
            return Err(Error::Factor {
                factor,
                reason: format!("space {:?} has only {} factors", self.dims, self.dims.len()),
            });
        }
        Ok(())
    }

    fn check_distinct(&self, factors: &[usize]) -> Result<()> {
        for (i, &f) in factors.iter().enumerate() {
            self.check_factor(f)?;
            if factors[..i].contains(&f) {
                return Err(Error::Factor {
                    factor: f,
                    reason: "listed twice".into(),
                });
            }
        }
        Ok(())
    }
}

/// Exchanges bra and ket indices of the listed factors.
pub fn partial_transpose(m: &CMat, space: &TensorSpace, which: &[usize]) -> Result<CMat> {
    space.check_matrix(m)?;
    space.check_distinct(which)?;
    let n = space.total();
    let strides = space.strides();
    let mut out = CMat::zeros(n, n);
    for r in 0..n {
        let rd = space.digits(r);
        for col in 0..n {
            let cd = space.digits(col);
            let (mut nr, mut nc) = (r, col);
            for &f in which {
                let delta = (cd[f] as isize - rd[f] as isize) * strides[f] as isize;
                nr = (nr as isize + delta) as usize;
                nc = (nc as isize - delta) as usize;
            }
            out[(nr, nc)] = m[(r, col)];
        }
    }
    Ok(out)
}

/// Traces out the listed factors; returns the reduced operator and its space.
pub fn partial_trace(m: &CMat, space: &TensorSpace, which: &[usize]) -> Result<(CMat, TensorSpace)> {
    space.check_matrix(m)?;
    space.check_distinct(which)?;
    let keep: Vec<usize> = (0..space.factors()).filter(|f| !which.contains(f)).collect();
    let kept = TensorSpace {
        dims: keep.iter().map(|&f| space.dim(f)).collect(),
    };
    let traced = TensorSpace {
        dims: which.iter().map(|&f| space.dim(f)).collect(),
    };
    let nk = kept.total();
    let nt = traced.total();
    let mut out = CMat::zeros(nk, nk);
    let mut full = vec![0usize; space.factors()];
    let full_index = |kd: &[usize], td: &[usize], full: &mut Vec<usize>| {
        for (slot, &f) in keep.iter().enumerate() {
            full[f] = kd[slot];
        }
        for (slot, &f) in which.iter().enumerate() {
            full[f] = td[slot];
        }
        space.index(full)
    };
    for r in 0..nk {
        let rd = kept.digits(r);
        for col in 0..nk {
            let cd = kept.digits(col);
            let mut acc = ZERO;
            for t in 0..nt {
                let td = traced.digits(t);
                let fr = full_index(&rd, &td, &mut full);
                let fc = full_index(&cd, &td, &mut full);
                acc += m[(fr, fc)];
            }
            out[(r, col)] = acc;
        }
    }
    Ok((out, kept))
}

/// Reorders tensor factors: factor `perm[i]` of the input becomes factor `i`.
pub fn permute_factors(m: &CMat, space: &TensorSpace, perm: &[usize]) -> Result<(CMat, TensorSpace)> {
    space.check_matrix(m)?;
    if perm.len() != space.factors() {
        return Err(Error::Dimension(format!(
            "permutation of length {} for {} factors",
            perm.len(),
            space.factors()
        )));
    }
    space.check_distinct(perm)?;
    let out_space = TensorSpace {
        dims: perm.iter().map(|&f| space.dim(f)).collect(),
    };
    let n = space.total();
    let map: Vec<usize> = (0..n)
        .map(|i| {
            let d = space.digits(i);
            let nd: Vec<usize> = perm.iter().map(|&f| d[f]).collect();
            out_space.index(&nd)
        })
        .collect();
    let mut out = CMat::zeros(n, n);
    for r in 0..n {
        for col in 0..n {
            out[(map[r], map[col])] = m[(r, col)];
        }
    }
    Ok((out, out_space))
}

/// Permutation matrix exchanging factors `i` and `j`.
pub fn swap_operator(space: &TensorSpace, i: usize, j: usize) -> Result<CMat> {
    space.check_factor(i)?;
    space.check_factor(j)?;
    if space.dim(i) != space.dim(j) {
        return Err(Error::Factor {
            factor: j,
            reason: format!(
                "cannot swap factors of dimension {} and {}",
                space.dim(i),
                space.dim(j)
            ),
        });
    }
    let n = space.total();
    let mut out = CMat::zeros(n, n);
    for col in 0..n {
        let mut d = space.digits(col);
        d.swap(i, j);
        out[(space.index(&d), col)] = ONE;
    }
    Ok(out)
}

/// A ⊗ B.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qlinalg::{c, eigvalsh, frobenius, identity, trace};

    fn bell() -> CMat {
        let mut m = CMat::zeros(4, 4);
        for &(r, col) in &[(0, 0), (0, 3), (3, 0), (3, 3)] {
            m[(r, col)] = c(0.5, 0.0);
        }
        m
    }

    #[test]
    fn bell_partial_transpose_spectrum() {
        let s = TensorSpace::bipartite(2, 2).unwrap();
        let pt = partial_transpose(&bell(), &s, &[0]).unwrap();
        let ev = eigvalsh(&pt);
        assert!((ev[0] + 0.5).abs() < 1e-14);
        for v in &ev[1..] {
            assert!((v - 0.5).abs() < 1e-14);
        }
        let swap = swap_operator(&s, 0, 1).unwrap();
        assert!(frobenius(&(pt - swap * c(0.5, 0.0))) < 1e-15);
    }

    #[test]
    fn real_product_is_transpose_fixed() {
        let s = TensorSpace::bipartite(2, 2).unwrap();
        let zero = CMat::from_fn(2, 2, |r, col| if r == 0 && col == 0 { c(1.0, 0.0) } else { ZERO });
        let plus = CMat::from_element(2, 2, c(0.5, 0.0));
        let m = kron(&zero, &plus);
        let pt = partial_transpose(&m, &s, &[0]).unwrap();
        assert_eq!(pt, m);
    }

    #[test]
    fn trace_of_bell_reduction() {
        let s = TensorSpace::bipartite(2, 2).unwrap();
        let (r, kept) = partial_trace(&bell(), &s, &[1]).unwrap();
        assert_eq!(kept.dims(), &[2]);
        assert!(frobenius(&(r - identity(2) * c(0.5, 0.0))) < 1e-15);
    }

    #[test]
    fn product_rule_and_full_trace() {
        let a = CMat::from_fn(2, 2, |r, col| c((r + 2 * col) as f64, r as f64 - col as f64));
        let b = CMat::from_fn(3, 3, |r, col| c(1.0 + (r * col) as f64, 0.0));
        let s = TensorSpace::new(vec![2, 3]).unwrap();
        let (r, _) = partial_trace(&kron(&a, &b), &s, &[1]).unwrap();
        assert!(frobenius(&(r - &a * trace(&b))) < 1e-12);
        let (scalar, rest) = partial_trace(&kron(&a, &b), &s, &[0, 1]).unwrap();
        assert_eq!(rest.total(), 1);
        assert!((scalar[(0, 0)] - trace(&a) * trace(&b)).norm() < 1e-12);
    }

    #[test]
    fn invalid_factor_is_named() {
        let s = TensorSpace::bipartite(2, 2).unwrap();
        match partial_transpose(&bell(), &s, &[2]) {
            Err(Error::Factor { factor, .. }) => assert_eq!(factor, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(partial_trace(&bell(), &s, &[0, 0]).is_err());
        let wrong = TensorSpace::bipartite(2, 3).unwrap();
        assert!(matches!(
            partial_transpose(&bell(), &wrong, &[0]),
            Err(Error::Dimension(_))
        ));
        assert!(TensorSpace::new(vec![2, 1]).is_err());
    }

    #[test]
    fn swap_basics() {
        let s = TensorSpace::bipartite(2, 2).unwrap();
        let p = swap_operator(&s, 0, 1).unwrap();
        // SWAP|01> = |10>
        assert_eq!(p[(2, 1)], ONE);
        let s3 = TensorSpace::new(vec![3, 3, 3]).unwrap();
        let p = swap_operator(&s3, 0, 2).unwrap();
        assert!(frobenius(&(&p * &p - identity(27))) < 1e-15);
        assert!(frobenius(&(&p - p.adjoint())) < 1e-15);
        let bad = TensorSpace::new(vec![2, 3]).unwrap();
        assert!(swap_operator(&bad, 0, 1).is_err());
    }

    #[test]
    fn permute_factors_matches_swap() {
        let s = TensorSpace::new(vec![2, 3]).unwrap();
        let m = CMat::from_fn(6, 6, |r, col| c(r as f64, col as f64 * 0.5));
        let (pm, ps) = permute_factors(&m, &s, &[1, 0]).unwrap();
        assert_eq!(ps.dims(), &[3, 2]);
        let (back, _) = permute_factors(&pm, &ps, &[1, 0]).unwrap();
        assert_eq!(back, m);
    }
}
