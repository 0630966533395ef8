//! Dense complex linear algebra helpers shared by the detector and the
//! reflection design.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// Largest condition estimate accepted by [`hermitian_solve`].
pub const MAX_CONDITION: f64 = 1e13;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Solves `a x = b` for Hermitian positive definite `a` by Cholesky.
///
/// The returned condition estimate is `(max L_ii / min L_ii)^2`, a lower
/// bound on the 2-norm condition number.
pub fn hermitian_solve(a: &CMat, b: &CMat, what: &'static str) -> Result<(CMat, f64)> {
    if !a.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::Numerical(format!("{what}: non-finite matrix entries")));
    }
    let chol = a.clone().cholesky().ok_or(Error::Conditioning {
        what,
        condition: f64::INFINITY,
    })?;
    let condition = cholesky_condition(chol.l_dirty());
    if !(condition <= MAX_CONDITION) {
        return Err(Error::Conditioning { what, condition });
    }
    Ok((chol.solve(b), condition))
}

fn cholesky_condition(l: &CMat) -> f64 {
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in 0..l.nrows() {
        let d = l[(i, i)].re.abs();
        lo = lo.min(d);
        hi = hi.max(d);
    }
    if lo == 0.0 {
        f64::INFINITY
    } else {
        (hi / lo).powi(2)
    }
}

/// Minimum-norm least-squares solution of `a x = b` via the SVD, with
/// singular values below `rel_tol * sigma_max` treated as zero.
pub fn min_norm_solve(a: &CMat, b: &CMat, rel_tol: f64) -> Result<CMat> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if smax == 0.0 {
        return Ok(CMat::zeros(a.ncols(), b.ncols()));
    }
    svd.solve(b, rel_tol * smax)
        .map_err(|e| Error::Numerical(e.to_string()))
}

/// `‖v‖²` for a complex vector or matrix (Frobenius).
pub fn norm_sqr(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

pub fn vec_norm_sqr(v: &CVec) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}
