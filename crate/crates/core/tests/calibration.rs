//! Monte Carlo and closed-form cross-checks of the receiver models.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ris_idd::channel::{cascade_matrices, complex_gaussian, draw_channels, ChannelSet};
use ris_idd::config::{split_power, Geometry, Profile, RisMode, SystemConfig};
use ris_idd::detector::{extrinsic_llr, gaussian_params_mmse, mmse_filter, noise_covariance, qpsk_map};
use ris_idd::idd::synthesize_received;
use ris_idd::linalg::{c, CMat, CVec, C64};
use ris_idd::oracle;
use ris_idd::ris_design::{alternating_design, solve_reflection, ReflectionState};

fn rand_mat(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> CMat {
    CMat::from_fn(rows, cols, |_, _| complex_gaussian(rng, 1.0))
}

#[test]
fn reflection_design_matches_iterative_least_squares_at_larger_sizes() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..50 {
        let (k, m, n) = (3, 4, 5);
        let ch = ChannelSet::new(rand_mat(m, k, &mut rng), rand_mat(m, n, &mut rng), rand_mat(n, k, &mut rng)).unwrap();
        let w = rand_mat(k, m, &mut rng);
        let sv2 = rng.gen_range(0.0..0.5);
        let cascades = cascade_matrices(&ch);
        let sol = solve_reflection(&w, &cascades, &ch.direct, &ch.g, sv2, 1.0).unwrap();
        let (s, t) = oracle::stacked_design_system(&w, &cascades, &ch.direct, &ch.g, sv2, 1.0);
        let reference = oracle::cgls(&s, &t, 2000, 1e-15);
        let gap = oracle::stacked_objective(&s, &t, &sol.phi) - oracle::stacked_objective(&s, &t, &reference);
        assert!(gap.abs() <= 1e-9 * t.norm_squared(), "gap {gap:e}");
    }
}

/// Exact bit log-likelihood ratio of a Gray QPSK symbol seen through
/// `x_hat = mu x + z`, `z ~ CN(0, eta2)`, by summing the four hypotheses.
fn exact_llrs(x_hat: C64, mu: f64, eta2: f64, sigma_x2: f64) -> [f64; 2] {
    let like = |b1: u8, b2: u8| {
        let d = x_hat - qpsk_map(b1, b2, sigma_x2) * mu;
        (-d.norm_sqr() / eta2).exp()
    };
    let l1 = ((like(0, 0) + like(0, 1)) / (like(1, 0) + like(1, 1))).ln();
    let l2 = ((like(0, 0) + like(1, 0)) / (like(0, 1) + like(1, 1))).ln();
    [l1, l2]
}

#[test]
fn llrs_match_exact_posterior_ratio() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..2000 {
        let sx2 = rng.gen_range(0.2..3.0);
        let mu: f64 = rng.gen_range(0.05..1.0);
        let eta2 = rng.gen_range(0.5..5.0) * sx2 * mu * (1.0 - mu).max(0.05);
        let x = qpsk_map(rng.gen_range(0..2), rng.gen_range(0..2), sx2);
        let x_hat = x * mu + complex_gaussian(&mut rng, eta2);
        let got = extrinsic_llr(x_hat, mu, eta2, sx2);
        let want = exact_llrs(x_hat, mu, eta2, sx2);
        for b in 0..2 {
            if want[b].abs() < 25.0 {
                assert!((got[b] - want[b]).abs() <= 1e-9 * want[b].abs().max(1.0), "{got:?} vs {want:?}");
            }
        }
    }
}

#[test]
fn llrs_are_calibrated_empirically() {
    // Within each LLR bin the observed log-odds of the transmitted bit
    // should match the bin center.
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let (sx2, mu, eta2) = (1.0, 0.6, 0.6 * 0.4);
    let mut zeros = [0usize; 8];
    let mut ones = [0usize; 8];
    let mut sums = [0.0f64; 8];
    for _ in 0..400_000 {
        let b = rng.gen_range(0..2u8);
        let x = qpsk_map(b, rng.gen_range(0..2), sx2);
        let l = extrinsic_llr(x * mu + complex_gaussian(&mut rng, eta2), mu, eta2, sx2)[0];
        let bin = ((l + 4.0) / 1.0).floor();
        if (0.0..8.0).contains(&bin) {
            let i = bin as usize;
            sums[i] += l;
            if b == 0 {
                zeros[i] += 1;
            } else {
                ones[i] += 1;
            }
        }
    }
    for i in 0..8 {
        let n = zeros[i] + ones[i];
        let mean = sums[i] / n as f64;
        let observed = (zeros[i] as f64 / ones[i] as f64).ln();
        assert!((observed - mean).abs() < 0.1, "bin {i}: observed {observed}, mean llr {mean}");
    }
}

#[test]
fn filter_output_model_matches_simulation() {
    // x_hat = mu x_k + z with residual interference of variance v_j.
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let (m, k, sx2) = (4, 3, 2.0);
    let h = rand_mat(m, k, &mut rng);
    let v = [sx2, 0.5, 0.1];
    let noise = CMat::identity(m, m) * c(0.4, 0.0);
    let user = 0;
    let w = mmse_filter(&h, user, &v, &noise, sx2).unwrap();
    let (mu, eta2) = gaussian_params_mmse(&w, &h.column(user).into_owned(), sx2).unwrap();

    let trials = 200_000;
    let (mut gain, mut power) = (c(0.0, 0.0), 0.0);
    for _ in 0..trials {
        let x = qpsk_map(rng.gen_range(0..2), rng.gen_range(0..2), sx2);
        let mut y = h.column(user) * x;
        for j in 1..k {
            y += h.column(j) * complex_gaussian(&mut rng, v[j]);
        }
        for i in 0..m {
            y[i] += complex_gaussian(&mut rng, 0.4);
        }
        let x_hat = w.dotc(&y);
        gain += x_hat * x.conj() / sx2;
        power += (x_hat - x * mu).norm_sqr();
    }
    let gain = gain / trials as f64;
    let power = power / trials as f64;
    assert!((gain.re - mu).abs() < 0.01 * mu, "gain {gain} vs {mu}");
    assert!(gain.im.abs() < 0.01);
    assert!((power / eta2 - 1.0).abs() < 0.02, "power {power} vs {eta2}");
}

#[test]
fn received_noise_covariance_matches_model() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let (m, k, n) = (3, 2, 4);
    let heff = rand_mat(m, k, &mut rng);
    let g = rand_mat(m, n, &mut rng);
    let phi = CVec::from_fn(n, |_, _| complex_gaussian(&mut rng, 2.0));
    let refl = ReflectionState {
        phi: phi.clone(),
        mode: RisMode::Active,
    };
    let (sv2, ss2) = (0.3, 0.2);
    let x = CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 1.0)]);
    let mean = &heff * &x;
    let trials = 200_000;
    let mut cov = CMat::zeros(m, m);
    for _ in 0..trials {
        let d = synthesize_received(&heff, &x, &g, &refl, sv2, ss2, &mut rng) - &mean;
        cov += &d * d.adjoint();
    }
    cov /= c(trials as f64, 0.0);
    let model = noise_covariance(&g, &phi, sv2, ss2);
    assert!((&cov - &model).norm() < 0.02 * model.norm(), "{cov} vs {model}");
}

#[test]
fn alternating_design_rarely_increases_the_objective() {
    let config = SystemConfig {
        n_alt: 3,
        ..Profile::Desk.config()
    };
    let budget = split_power(&config).unwrap();
    let mut worse = 0;
    let trials = 500;
    for seed in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let geometry = Geometry::draw(&config, &mut rng);
        let ch = draw_channels(&geometry, config.elements, config.antennas, &mut rng);
        let out = alternating_design(&ch, RisMode::Passive, &budget, 0.0, config.sigma_s2(), 3).unwrap();
        let first = out.objectives[0];
        let last = *out.objectives.last().unwrap();
        if last > first {
            worse += 1;
        }
    }
    assert!(worse * 20 <= trials as usize, "{worse} of {trials} trials increased the objective");
}
