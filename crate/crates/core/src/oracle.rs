//! Slow reference implementations used to cross-check the fast paths.
//!
//! Each routine reaches its answer by a different algorithm than the
//! production code: iterative least squares instead of a factorization,
//! exhaustive enumeration instead of belief propagation, explicit matrix
//! traces instead of per-row sums.

use crate::channel::CascadeSet;
use crate::ldpc::ParityCheck;
use crate::linalg::{c, CMat, CVec};

/// Stacked least-squares form `‖t - S phi‖²` of the reflection design
/// quadratic: one block `W A_i` per user with target `e_i - W b_i`, plus a
/// block `sqrt(sigma_v2/sigma_x2) W G` with target zero.
pub fn stacked_design_system(
    w: &CMat,
    cascades: &CascadeSet,
    base: &CMat,
    g: &CMat,
    sigma_v2: f64,
    sigma_x2: f64,
) -> (CMat, CVec) {
    let k = w.nrows();
    let n = g.ncols();
    let users = cascades.a.len();
    let blocks = users + usize::from(sigma_v2 > 0.0);
    let mut s = CMat::zeros(blocks * k, n);
    let mut t = CVec::zeros(blocks * k);
    for (i, a_i) in cascades.a.iter().enumerate() {
        s.view_mut((i * k, 0), (k, n)).copy_from(&(w * a_i));
        let wb = w * base.column(i);
        for r in 0..k {
            let e = if r == i { 1.0 } else { 0.0 };
            t[i * k + r] = c(e, 0.0) - wb[r];
        }
    }
    if sigma_v2 > 0.0 {
        let scaled = w * g * c((sigma_v2 / sigma_x2).sqrt(), 0.0);
        s.view_mut((users * k, 0), (k, n)).copy_from(&scaled);
    }
    (s, t)
}

pub fn stacked_objective(s: &CMat, t: &CVec, phi: &CVec) -> f64 {
    (t - s * phi).norm_squared()
}

/// Minimizes `‖t - S x‖²` by conjugate gradients on the normal equations
/// (CGLS), starting from zero. Stops once the normal-equation residual falls
/// below `tol` relative to its initial value.
pub fn cgls(s: &CMat, t: &CVec, max_iter: usize, tol: f64) -> CVec {
    let mut x = CVec::zeros(s.ncols());
    let mut r = t.clone();
    let mut grad = s.adjoint() * &r;
    let mut p = grad.clone();
    let mut gamma = grad.norm_squared();
    let gamma0 = gamma;
    for _ in 0..max_iter {
        if gamma <= tol * tol * gamma0 || gamma == 0.0 {
            break;
        }
        let q = s * &p;
        let qq = q.norm_squared();
        if qq == 0.0 {
            break;
        }
        let alpha = c(gamma / qq, 0.0);
        x += &p * alpha;
        r -= &q * alpha;
        grad = s.adjoint() * &r;
        let next = grad.norm_squared();
        p = &grad + &p * c(next / gamma, 0.0);
        gamma = next;
    }
    x
}

/// Surface power as `sigma_x2 tr(Phi F F^H Phi^H) + sigma_v2 tr(Phi Phi^H)`.
pub fn trace_ris_power(phi: &CVec, f: &CMat, sigma_x2: f64, sigma_v2: f64) -> f64 {
    let big_phi = CMat::from_diagonal(phi);
    let pf = &big_phi * f;
    let incident = (&pf * pf.adjoint()).trace().re;
    let own = (&big_phi * big_phi.adjoint()).trace().re;
    sigma_x2 * incident + sigma_v2 * own
}

/// Every codeword of a small code, by enumerating all `2^n` words and
/// keeping those with zero syndrome.
pub fn enumerate_codewords(code: &ParityCheck) -> Vec<Vec<u8>> {
    let n = code.n();
    assert!(n <= 24, "exhaustive enumeration limited to n <= 24");
    (0u32..1 << n)
        .map(|m| (0..n).map(|j| ((m >> j) & 1) as u8).collect::<Vec<u8>>())
        .filter(|w| code.syndrome_is_zero(w))
        .collect()
}

/// Bitwise MAP decisions from channel LLRs (`log P(0)/P(1)`) over an
/// explicit codebook. Ties decide 0.
pub fn map_decisions(codebook: &[Vec<u8>], llr: &[f64]) -> Vec<u8> {
    let n = llr.len();
    let metric: Vec<f64> = codebook
        .iter()
        .map(|cw| cw.iter().zip(llr).map(|(&b, &l)| if b == 0 { l / 2.0 } else { -l / 2.0 }).sum())
        .collect();
    let top = metric.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (0..n)
        .map(|j| {
            let (mut p0, mut p1) = (0.0, 0.0);
            for (cw, m) in codebook.iter().zip(&metric) {
                let w = (m - top).exp();
                if cw[j] == 0 {
                    p0 += w;
                } else {
                    p1 += w;
                }
            }
            u8::from(p1 > p0)
        })
        .collect()
}
