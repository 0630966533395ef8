//! Linear and soft-interference-cancellation MMSE receivers.
//!
//! The soft-SIC filter for user `k` treats its own symbol as unknown (energy
//! `sigma_x2`) and every other user as a residual with variance `v_j` left
//! after subtracting the decoder-informed soft estimate. With all priors at
//! zero this reduces to the classical linear MMSE receiver.

use crate::error::{Error, Result};
use crate::ldpc::LLR_CLIP;
use crate::linalg::{c, hermitian_solve, CMat, CVec, C64};

/// Gray-mapped QPSK symbol `((1-2b1) + j(1-2b2)) * sqrt(sigma_x2 / 2)`.
pub fn qpsk_map(b1: u8, b2: u8, sigma_x2: f64) -> C64 {
    let a = (sigma_x2 / 2.0).sqrt();
    c(a * (1.0 - 2.0 * f64::from(b1 & 1)), a * (1.0 - 2.0 * f64::from(b2 & 1)))
}

/// Soft symbol and residual variance from the two prior bit LLRs.
pub fn soft_symbol(l1: f64, l2: f64, sigma_x2: f64) -> (C64, f64) {
    let a = (sigma_x2 / 2.0).sqrt();
    let x = c(a * (l1 / 2.0).tanh(), a * (l2 / 2.0).tanh());
    let v = (sigma_x2 - x.norm_sqr()).max(0.0);
    (x, v)
}

/// Per-user soft priors for one block of symbol slots.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftState {
    /// K x S soft symbols.
    pub x_tilde: CMat,
    /// K x S residual variances.
    pub v: Vec<Vec<f64>>,
}

impl SoftState {
    /// No prior information: every soft symbol zero, every variance `sigma_x2`.
    pub fn uninformed(users: usize, slots: usize, sigma_x2: f64) -> Self {
        Self {
            x_tilde: CMat::zeros(users, slots),
            v: vec![vec![sigma_x2; slots]; users],
        }
    }

    /// Builds the priors from per-user decoder LLRs; symbol `s` of user `k`
    /// takes bits `2s` and `2s+1` of `llr[k]`.
    pub fn from_llrs(llr: &[Vec<f64>], sigma_x2: f64) -> Self {
        let users = llr.len();
        let slots = llr.first().map_or(0, |l| l.len() / 2);
        let mut x_tilde = CMat::zeros(users, slots);
        let mut v = vec![vec![0.0; slots]; users];
        for (k, l) in llr.iter().enumerate() {
            for s in 0..slots {
                let (x, var) = soft_symbol(l[2 * s], l[2 * s + 1], sigma_x2);
                x_tilde[(k, s)] = x;
                v[k][s] = var;
            }
        }
        Self { x_tilde, v }
    }

    /// Block-averaged residual variance per user.
    pub fn mean_variances(&self) -> Vec<f64> {
        self.v
            .iter()
            .map(|vk| {
                if vk.is_empty() {
                    0.0
                } else {
                    vk.iter().sum::<f64>() / vk.len() as f64
                }
            })
            .collect()
    }
}

/// `y - Heff x_tilde` with the k-th soft symbol left in place.
pub fn sic_cancel(y: &CVec, heff: &CMat, x_tilde: &CVec, k: usize) -> CVec {
    let mut out = y.clone();
    for (j, xj) in x_tilde.iter().enumerate() {
        if j != k && *xj != c(0.0, 0.0) {
            out.axpy(-*xj, &heff.column(j), c(1.0, 0.0));
        }
    }
    out
}

/// `sigma_v2 (G Phi)(G Phi)^H + sigma_s2 I`; pass `sigma_v2 = 0` for a
/// passive surface.
pub fn noise_covariance(g: &CMat, phi: &CVec, sigma_v2: f64, sigma_s2: f64) -> CMat {
    let m = g.nrows();
    let mut cov = CMat::identity(m, m) * c(sigma_s2, 0.0);
    if sigma_v2 > 0.0 {
        let mut g_phi = g.clone();
        for (mut col, p) in g_phi.column_iter_mut().zip(phi.iter()) {
            col *= *p;
        }
        cov += (&g_phi * g_phi.adjoint()) * c(sigma_v2, 0.0);
    }
    cov
}

/// Interference-plus-noise-plus-own-signal covariance seen by user `k`:
/// `Heff V_k Heff^H + noise_cov`, with `V_k = diag(v)` except `sigma_x2` at `k`.
pub fn user_covariance(heff: &CMat, k: usize, v: &[f64], noise_cov: &CMat, sigma_x2: f64) -> CMat {
    let mut cov = noise_cov.clone();
    for (j, h) in heff.column_iter().enumerate() {
        let var = if j == k { sigma_x2 } else { v[j] };
        if var != 0.0 {
            cov.ger(c(var, 0.0), &h, &h.conjugate(), c(1.0, 0.0));
        }
    }
    cov
}

/// Soft-SIC MMSE filter `w_k = sigma_x2 C_k^{-1} h_k`.
pub fn mmse_filter(heff: &CMat, k: usize, v: &[f64], noise_cov: &CMat, sigma_x2: f64) -> Result<CVec> {
    let cov = user_covariance(heff, k, v, noise_cov, sigma_x2);
    let rhs = CMat::from_column_slice(heff.nrows(), 1, heff.column(k).as_slice()) * c(sigma_x2, 0.0);
    let (w, _) = hermitian_solve(&cov, &rhs, "MMSE filter")?;
    Ok(w.column(0).into_owned())
}

/// K x M filter bank whose k-th row is `w_k^H`.
pub fn filter_bank(heff: &CMat, v: &[f64], noise_cov: &CMat, sigma_x2: f64) -> Result<CMat> {
    let (m, users) = heff.shape();
    let mut w = CMat::zeros(users, m);
    for k in 0..users {
        let wk = mmse_filter(heff, k, v, noise_cov, sigma_x2)?;
        w.row_mut(k).copy_from(&wk.adjoint());
    }
    Ok(w)
}

/// Gain and noise variance of `x_hat = mu x + z` for an arbitrary filter,
/// from the full output covariance.
pub fn gaussian_params(
    w: &CVec,
    heff: &CMat,
    k: usize,
    v: &[f64],
    noise_cov: &CMat,
    sigma_x2: f64,
) -> Result<(f64, f64)> {
    let mu = w.dotc(&heff.column(k)).re;
    let cov = user_covariance(heff, k, v, noise_cov, sigma_x2);
    let power = w.dotc(&(&cov * w)).re;
    let eta2 = power - mu * mu * sigma_x2;
    check_eta2(eta2)?;
    Ok((mu, eta2))
}

/// Shortcut valid for the exact MMSE filter: `eta2 = sigma_x2 mu (1 - mu)`.
pub fn gaussian_params_mmse(w: &CVec, h_k: &CVec, sigma_x2: f64) -> Result<(f64, f64)> {
    let mu = w.dotc(h_k).re;
    let eta2 = sigma_x2 * mu * (1.0 - mu);
    check_eta2(eta2)?;
    Ok((mu, eta2))
}

fn check_eta2(eta2: f64) -> Result<()> {
    if eta2 > 0.0 && eta2.is_finite() {
        Ok(())
    } else {
        Err(Error::Numerical(format!("non-positive output noise variance {eta2:e}")))
    }
}

/// Bit LLRs of one Gray QPSK symbol under `x_hat = mu x + z`,
/// `z ~ CN(0, eta2)`. The filter output carries no information from the
/// user's own prior, so the result is already extrinsic.
pub fn extrinsic_llr(x_hat: C64, mu: f64, eta2: f64, sigma_x2: f64) -> [f64; 2] {
    let scale = 2.0 * (2.0 * sigma_x2).sqrt() * mu / eta2;
    let clip = |l: f64| if l.is_nan() { 0.0 } else { l.clamp(-LLR_CLIP, LLR_CLIP) };
    [clip(scale * x_hat.re), clip(scale * x_hat.im)]
}

/// SINR of a linear receiver without cancellation, counting inter-user
/// interference, amplified RIS noise and static noise.
#[allow(clippy::too_many_arguments)]
pub fn sinr_linear(
    w: &CVec,
    heff: &CMat,
    k: usize,
    g: &CMat,
    phi: &CVec,
    sigma_x2: f64,
    sigma_v2: f64,
    sigma_s2: f64,
) -> f64 {
    let signal = w.dotc(&heff.column(k)).norm_sqr() * sigma_x2;
    let interference: f64 = (0..heff.ncols())
        .filter(|&j| j != k)
        .map(|j| w.dotc(&heff.column(j)).norm_sqr() * sigma_x2)
        .sum();
    let ris_noise = if sigma_v2 > 0.0 {
        // ‖w^H G Phi‖² = sum_n |w^H g_n|² |phi_n|²
        g.column_iter()
            .zip(phi.iter())
            .map(|(gn, p)| w.dotc(&gn).norm_sqr() * p.norm_sqr())
            .sum::<f64>()
            * sigma_v2
    } else {
        0.0
    };
    let static_noise = w.norm_squared() * sigma_s2;
    signal / (interference + ris_noise + static_noise)
}

pub fn sum_rate(sinr: &[f64]) -> f64 {
    sinr.iter().map(|g| (1.0 + g).log2()).sum()
}

/// Detector output for one pass over a block.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionOutput {
    /// K x S filter outputs.
    pub x_hat: CMat,
    pub mu: Vec<f64>,
    pub eta2: Vec<f64>,
    /// `mu^2 sigma_x2 / eta2` per user.
    pub sinr: Vec<f64>,
    /// K x M filter bank used for this pass.
    pub filters: CMat,
}

/// Detects every slot of a block (`y` is M x S) with one filter per user,
/// built from the block-averaged residual variances of `priors`.
pub fn detect_block(
    y: &CMat,
    heff: &CMat,
    priors: &SoftState,
    noise_cov: &CMat,
    sigma_x2: f64,
) -> Result<DetectionOutput> {
    let users = heff.ncols();
    let slots = y.ncols();
    let v = priors.mean_variances();
    let filters = filter_bank(heff, &v, noise_cov, sigma_x2)?;
    // Soft reconstruction of every user in every slot.
    let recon = heff * &priors.x_tilde;

    let mut x_hat = CMat::zeros(users, slots);
    let mut mu = Vec::with_capacity(users);
    let mut eta2 = Vec::with_capacity(users);
    let mut sinr = Vec::with_capacity(users);
    for k in 0..users {
        let w_row = filters.row(k);
        let h_k = heff.column(k);
        for s in 0..slots {
            // y_s - sum_{j != k} h_j x_j = y_s - recon_s + h_k x_k
            let mut z = c(0.0, 0.0);
            let xk = priors.x_tilde[(k, s)];
            for m in 0..y.nrows() {
                z += w_row[m] * (y[(m, s)] - recon[(m, s)] + h_k[m] * xk);
            }
            x_hat[(k, s)] = z;
        }
        let w = w_row.adjoint();
        let (mu_k, eta2_k) = gaussian_params_mmse(&w, &h_k.into_owned(), sigma_x2)?;
        mu.push(mu_k);
        eta2.push(eta2_k);
        sinr.push(mu_k * mu_k * sigma_x2 / eta2_k);
    }
    Ok(DetectionOutput {
        x_hat,
        mu,
        eta2,
        sinr,
        filters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::complex_gaussian;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> CMat {
        CMat::from_fn(rows, cols, |_, _| complex_gaussian(rng, 1.0))
    }

    #[test]
    fn soft_symbol_values() {
        let (x, v) = soft_symbol(0.0, 0.0, 1.0);
        assert_eq!(x, c(0.0, 0.0));
        assert_eq!(v, 1.0);

        let (x, v) = soft_symbol(LLR_CLIP * 2.0, LLR_CLIP * 2.0, 2.0);
        assert!((x - c(1.0, 1.0)).norm() < 1e-12);
        assert!(v < 1e-12);

        // Expectation over the four constellation points with bit
        // probabilities P(b=0) = 1/(1+e^-L).
        let (l1, l2) = (2.0f64, -1.0f64);
        let p0 = |l: f64| 1.0 / (1.0 + (-l).exp());
        let mut mean = c(0.0, 0.0);
        let mut energy = 0.0;
        for b1 in 0..2u8 {
            for b2 in 0..2u8 {
                let p = (if b1 == 0 { p0(l1) } else { 1.0 - p0(l1) })
                    * (if b2 == 0 { p0(l2) } else { 1.0 - p0(l2) });
                let s = qpsk_map(b1, b2, 1.0);
                mean += s * p;
                energy += p * s.norm_sqr();
            }
        }
        let (x, v) = soft_symbol(l1, l2, 1.0);
        assert!((x - mean).norm() < 1e-12);
        assert!((v - (energy - mean.norm_sqr())).abs() < 1e-12);
        assert!((x - c(0.5385, -0.3267)).norm() < 1e-4);
        assert!((v - 0.6033).abs() < 1e-4);
    }

    #[test]
    fn cancellation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = random_matrix(4, 2, &mut rng);
        let x = CVec::from_vec(vec![qpsk_map(0, 1, 1.0), qpsk_map(1, 1, 1.0)]);
        let y = &h * &x;
        assert_eq!(sic_cancel(&y, &h, &CVec::zeros(2), 0), y);
        let y0 = sic_cancel(&y, &h, &x, 0);
        let expect = h.column(0) * x[0];
        assert!((y0 - expect).norm() <= 1e-12 * y.norm());

        let h1 = random_matrix(3, 1, &mut rng);
        let y1 = random_matrix(3, 1, &mut rng).column(0).into_owned();
        assert_eq!(sic_cancel(&y1, &h1, &CVec::from_element(1, c(1.0, 1.0)), 0), y1);
    }

    #[test]
    fn scalar_mmse_filter() {
        let h = CMat::from_element(1, 1, c(0.3, -1.2));
        let noise = CMat::from_element(1, 1, c(0.5, 0.0));
        let sx2 = 2.0;
        let w = mmse_filter(&h, 0, &[sx2], &noise, sx2).unwrap();
        // the receiver applies w^H = sigma_x2 h^* / (|h|^2 sigma_x2 + sigma_s2)
        let expect = h[(0, 0)].conj() * sx2 / (h[(0, 0)].norm_sqr() * sx2 + 0.5);
        assert!((w[0].conj() - expect).norm() < 1e-14);
    }

    #[test]
    fn filter_solves_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let h = random_matrix(6, 3, &mut rng);
            let v: Vec<f64> = (0..3).map(|_| rng.gen::<f64>()).collect();
            let noise = CMat::identity(6, 6) * c(0.1, 0.0);
            let w = mmse_filter(&h, 1, &v, &noise, 1.0).unwrap();
            // Independent path: LU on the explicitly assembled covariance.
            let mut cov = noise.clone();
            for j in 0..3 {
                let var = if j == 1 { 1.0 } else { v[j] };
                cov += h.column(j) * h.column(j).adjoint() * c(var, 0.0);
            }
            let w2 = cov.lu().solve(&h.column(1).into_owned()).unwrap();
            assert!((&w - &w2).norm() <= 1e-10 * w.norm());
        }
    }

    #[test]
    fn mmse_shortcut_matches_covariance_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let h = random_matrix(5, 3, &mut rng);
            let v: Vec<f64> = (0..3).map(|_| rng.gen::<f64>() * 2.0).collect();
            let noise = CMat::identity(5, 5) * c(0.3, 0.0);
            let w = mmse_filter(&h, 2, &v, &noise, 2.0).unwrap();
            let (mu, eta2) = gaussian_params(&w, &h, 2, &v, &noise, 2.0).unwrap();
            let (mu2, eta2b) = gaussian_params_mmse(&w, &h.column(2).into_owned(), 2.0).unwrap();
            assert!((mu - mu2).abs() < 1e-12);
            assert!(mu > 0.0 && mu <= 1.0);
            assert!((eta2 - eta2b).abs() <= 1e-9 * eta2);
        }
    }

    #[test]
    fn genie_priors_approach_unit_gain() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = random_matrix(4, 3, &mut rng);
        let noise = CMat::identity(4, 4) * c(1e-12, 0.0);
        let w = mmse_filter(&h, 0, &[0.0; 3], &noise, 1.0).unwrap();
        let (mu, eta2) = gaussian_params_mmse(&w, &h.column(0).into_owned(), 1.0).unwrap();
        assert!((1.0 - mu) < 1e-9);
        assert!(eta2 < 1e-9);
    }

    #[test]
    fn llr_limits() {
        assert_eq!(extrinsic_llr(c(0.0, 0.0), 0.8, 0.1, 1.0), [0.0, 0.0]);
        assert_eq!(extrinsic_llr(c(0.7, 0.7), 1.0, 1e-12, 1.0), [LLR_CLIP, LLR_CLIP]);
        assert_eq!(extrinsic_llr(c(0.7, -0.7), 0.5, f64::INFINITY, 1.0), [0.0, 0.0]);
    }

    #[test]
    fn sinr_is_scale_invariant_and_reduces_without_ris_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let h = random_matrix(4, 3, &mut rng);
        let g = random_matrix(4, 5, &mut rng);
        let phi = random_matrix(5, 1, &mut rng).column(0).into_owned();
        let w = random_matrix(4, 1, &mut rng).column(0).into_owned();
        let base = sinr_linear(&w, &h, 1, &g, &phi, 1.0, 0.2, 0.1);
        let scaled = sinr_linear(&(&w * c(-3.0, 2.0)), &h, 1, &g, &phi, 1.0, 0.2, 0.1);
        assert!((base - scaled).abs() <= 1e-10 * base);

        let passive = sinr_linear(&w, &h, 1, &g, &phi, 1.0, 0.0, 0.1);
        let signal = w.dotc(&h.column(1)).norm_sqr();
        let interf: f64 = [0, 2].iter().map(|&j| w.dotc(&h.column(j)).norm_sqr()).sum();
        assert!((passive - signal / (interf + 0.1 * w.norm_squared())).abs() < 1e-12);

        let h1 = CMat::from_element(1, 1, c(0.5, 0.5));
        let w1 = CVec::from_element(1, c(2.0, 0.0));
        let g1 = CMat::zeros(1, 1);
        let p1 = CVec::zeros(1);
        let s = sinr_linear(&w1, &h1, 0, &g1, &p1, 1.0, 0.0, 0.25);
        assert!((s - 0.5 / 0.25).abs() < 1e-12);
    }

    #[test]
    fn sum_rate_values() {
        assert_eq!(sum_rate(&[0.0, 0.0]), 0.0);
        assert_eq!(sum_rate(&[1.0]), 1.0);
        assert_eq!(sum_rate(&[3.0, 3.0]), 4.0);
    }

    #[test]
    fn noise_covariance_modes() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = random_matrix(3, 4, &mut rng);
        let phi = random_matrix(4, 1, &mut rng).column(0).into_owned();
        let passive = noise_covariance(&g, &phi, 0.0, 0.5);
        assert_eq!(passive, CMat::identity(3, 3) * c(0.5, 0.0));
        let active = noise_covariance(&g, &phi, 0.2, 0.5);
        let mut gp = g.clone();
        for n in 0..4 {
            let col = g.column(n) * phi[n];
            gp.column_mut(n).copy_from(&col);
        }
        let expect = &gp * gp.adjoint() * c(0.2, 0.0) + CMat::identity(3, 3) * c(0.5, 0.0);
        assert!((active - expect).norm() < 1e-12);
    }
}
