//! Fast oracle-backed checks, shared by the `selftest` subcommand and the
//! acceptance suite.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::{cascade_matrices, complex_gaussian, db_to_gain, path_loss_strong, ChannelSet};
use crate::config::{dbm_to_linear, RisMode};
use crate::deployment::{active_near_user_limit, active_snr_from_gains, deployment_curve, metre_grid, passive_snr, SisoScenario};
use crate::detector::{detect_block, extrinsic_llr, gaussian_params, gaussian_params_mmse, mmse_filter, SoftState};
use crate::idd::{draw_payload, genie_residual};
use crate::ldpc::{construct_code, construct_with, decode, CodeProfile};
use crate::linalg::{c, CMat, CVec};
use crate::oracle;
use crate::ris_design::{solve_reflection, truncate_active, truncate_passive};

#[derive(Debug, Clone)]
pub struct Outcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl Outcome {
    pub fn line(&self) -> String {
        format!(
            "{} {}: {} ({:.2?})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail,
            self.elapsed
        )
    }
}

fn timed(name: &'static str, limit: Option<Duration>, f: impl FnOnce() -> (bool, String)) -> Outcome {
    let start = Instant::now();
    let (ok, mut detail) = f();
    let elapsed = start.elapsed();
    let in_time = limit.map_or(true, |l| elapsed < l);
    if !in_time {
        detail.push_str(&format!("; exceeded {:?}", limit.unwrap()));
    }
    Outcome {
        name,
        passed: ok && in_time,
        detail,
        elapsed,
    }
}

fn rand_mat<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> CMat {
    CMat::from_fn(rows, cols, |_, _| complex_gaussian(rng, 1.0))
}

pub fn passive_placement() -> Outcome {
    timed("analytic passive placement", Some(Duration::from_secs(1)), || {
        let sc = SisoScenario::new(400.0, 64, dbm_to_linear(6.0), dbm_to_linear(-100.0), dbm_to_linear(-95.0)).unwrap();
        let curve = deployment_curve(RisMode::Passive, &sc, &metre_grid(400.0)).unwrap();
        let symmetry = curve
            .points
            .iter()
            .map(|&(d, s)| (s - passive_snr(400.0 - d, &sc).unwrap()).abs())
            .fold(0.0, f64::max);
        let (amax, amin) = (curve.argmax(), curve.argmin());
        let ok = amax == [1.0, 399.0] && amin == [200.0] && symmetry == 0.0;
        (ok, format!("argmax {amax:?}, argmin {amin:?}, symmetry error {symmetry:e}"))
    })
}

pub fn active_limit() -> Outcome {
    timed("analytic active limit", Some(Duration::from_secs(1)), || {
        let sc = SisoScenario::new(400.0, 64, dbm_to_linear(6.0), dbm_to_linear(-95.0), dbm_to_linear(-95.0)).unwrap();
        let ah = db_to_gain(path_loss_strong(400.0).unwrap());
        let got = active_snr_from_gains(ah, 1e12, ah, &sc);
        let want = active_near_user_limit(ah, &sc);
        let rel = (got - want).abs() / want;
        (rel <= 1e-6, format!("relative error {rel:e}"))
    })
}

/// Worst normalized objective gap between `solve_reflection` and CGLS on
/// random K = M = N = 2 instances.
pub fn reflection_oracle(instances: usize) -> Outcome {
    timed("reflection design oracle", Some(Duration::from_secs(30)), || {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0003);
        let mut worst = 0.0f64;
        for i in 0..instances {
            let ch = ChannelSet::new(rand_mat(2, 2, &mut rng), rand_mat(2, 2, &mut rng), rand_mat(2, 2, &mut rng)).unwrap();
            let w = rand_mat(2, 2, &mut rng);
            let sv2 = if i % 4 == 0 { 0.0 } else { rng.gen_range(0.01..1.0) };
            let sx2 = rng.gen_range(0.5..2.0);
            let cascades = cascade_matrices(&ch);
            let sol = match solve_reflection(&w, &cascades, &ch.direct, &ch.g, sv2, sx2) {
                Ok(s) => s,
                Err(e) => return (false, format!("instance {i}: {e}")),
            };
            let (s, t) = oracle::stacked_design_system(&w, &cascades, &ch.direct, &ch.g, sv2, sx2);
            let reference = oracle::cgls(&s, &t, 500, 1e-14);
            let scale = t.norm_squared();
            let gap = (oracle::stacked_objective(&s, &t, &sol.phi) - oracle::stacked_objective(&s, &t, &reference)) / scale;
            worst = worst.max(gap.abs());
        }
        (worst <= 1e-6, format!("{instances} instances, worst normalized gap {worst:e}"))
    })
}

pub fn constraint_exactness(instances: usize) -> Outcome {
    timed("constraint exactness", None, || {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0004);
        let (mut worst_active, mut worst_passive) = (0.0f64, 0.0f64);
        for _ in 0..instances {
            let n = rng.gen_range(1..65);
            let k = rng.gen_range(1..9);
            let scale = 10f64.powf(rng.gen_range(-6.0..6.0));
            let phi = CVec::from_fn(n, |_, _| complex_gaussian(&mut rng, scale));
            let f = rand_mat(n, k, &mut rng) * c(10f64.powf(rng.gen_range(-5.0..0.0)), 0.0);
            let (sx2, sv2) = (rng.gen_range(1e-3..1.0), 10f64.powf(rng.gen_range(-13.0..-3.0)));
            let p_ris = 10f64.powf(rng.gen_range(-4.0..1.0));
            let state = truncate_active(&phi, &f, sx2, sv2, p_ris).unwrap();
            let used = oracle::trace_ris_power(&state.phi, &f, sx2, sv2);
            worst_active = worst_active.max((used - p_ris).abs() / p_ris);

            let passive = truncate_passive(&phi);
            let dev = passive.phi.iter().map(|z| (z.norm() - 1.0).abs()).fold(0.0, f64::max);
            worst_passive = worst_passive.max(dev);
        }
        (
            worst_active <= 1e-9 && worst_passive <= 1e-12,
            format!("active power rel error {worst_active:e}, passive modulus deviation {worst_passive:e}"),
        )
    })
}

/// Noiseless K=4, M=8 frames detected with the true symbols as priors.
pub fn genie_sic(frames: usize) -> Outcome {
    timed("genie SIC exactness", None, || {
        let code = construct_code(512, 0.5, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0005);
        let (users, antennas, sx2) = (4, 8, 1.0);
        let mut worst = 0.0f64;
        let mut errors = 0usize;
        for _ in 0..frames {
            let heff = rand_mat(antennas, users, &mut rng);
            let payload = draw_payload(&code, users, sx2, &mut rng);
            worst = worst.max(genie_residual(&heff, &payload.symbols));
            let y = &heff * &payload.symbols;
            let slots = y.ncols();
            let priors = SoftState {
                x_tilde: payload.symbols.clone(),
                v: vec![vec![0.0; slots]; users],
            };
            // vanishing regularizer keeps the rank-one covariance invertible
            let noise = CMat::identity(antennas, antennas) * c(1e-9, 0.0);
            let det = match detect_block(&y, &heff, &priors, &noise, sx2) {
                Ok(d) => d,
                Err(e) => return (false, e.to_string()),
            };
            for k in 0..users {
                let llr: Vec<f64> = (0..slots)
                    .flat_map(|s| extrinsic_llr(det.x_hat[(k, s)], det.mu[k], det.eta2[k], sx2))
                    .collect();
                let out = decode(&code, &llr, 10);
                let info = code.extract_info(&out.hard_bits);
                errors += info.iter().zip(&payload.info[k]).filter(|(a, b)| a != b).count();
            }
        }
        (
            worst <= 1e-12 && errors == 0,
            format!("{frames} frames, worst residual {worst:e}, bit errors {errors}"),
        )
    })
}

pub fn mmse_identity(instances: usize) -> Outcome {
    timed("MMSE identity", None, || {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0006);
        let mut worst = 0.0f64;
        for _ in 0..instances {
            let users = rng.gen_range(1..7);
            let antennas = rng.gen_range(users..13);
            let sx2 = rng.gen_range(0.1..10.0);
            let h = rand_mat(antennas, users, &mut rng);
            let v: Vec<f64> = (0..users).map(|_| rng.gen_range(0.0..sx2)).collect();
            let g = rand_mat(antennas, 3, &mut rng);
            let phi = rand_mat(3, 1, &mut rng).column(0).into_owned();
            let noise = crate::detector::noise_covariance(&g, &phi, rng.gen_range(0.0..0.5), rng.gen_range(0.01..1.0));
            let k = rng.gen_range(0..users);
            let w = mmse_filter(&h, k, &v, &noise, sx2).unwrap();
            let (_, cov) = gaussian_params(&w, &h, k, &v, &noise, sx2).unwrap();
            let (_, short) = gaussian_params_mmse(&w, &h.column(k).into_owned(), sx2).unwrap();
            worst = worst.max((cov - short).abs() / short);
        }
        (worst <= 1e-9, format!("{instances} instances, worst relative gap {worst:e}"))
    })
}

/// Syndrome check on converged n=512 decodes and bitwise agreement with
/// exhaustive MAP on the toy code.
pub fn ldpc_sanity(frames: usize, toy_trials: usize) -> Outcome {
    timed("LDPC sanity", None, || {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0010);
        let code = construct_code(512, 0.5, 1).unwrap();
        let sigma = 0.8;
        let (mut converged, mut bad_syndrome) = (0, 0);
        for _ in 0..frames {
            let info: Vec<u8> = (0..code.k_info()).map(|_| rng.gen_range(0..2)).collect();
            let cw = code.encode(&info);
            let llr = bpsk_llrs(&cw, sigma, &mut rng);
            let out = decode(&code, &llr, 50);
            if out.converged {
                converged += 1;
                bad_syndrome += usize::from(!code.syndrome_is_zero(&out.hard_bits));
            }
        }

        let toy = construct_with(
            CodeProfile {
                n: 16,
                checks: 8,
                col_weight: 2,
                full_rank: false,
            },
            1,
        )
        .unwrap();
        let book = oracle::enumerate_codewords(&toy);
        let toy_sigma = 0.5;
        let mut agree = 0;
        for _ in 0..toy_trials {
            let cw = &book[rng.gen_range(0..book.len())];
            let llr = bpsk_llrs(cw, toy_sigma, &mut rng);
            let bp = decode(&toy, &llr, 50).hard_bits;
            agree += usize::from(bp == oracle::map_decisions(&book, &llr));
        }
        let rate = agree as f64 / toy_trials as f64;
        (
            converged > 0 && bad_syndrome == 0 && rate >= 0.99,
            format!(
                "{converged}/{frames} converged with {bad_syndrome} bad syndromes; toy MAP agreement {agree}/{toy_trials}"
            ),
        )
    })
}

fn bpsk_llrs<R: Rng>(bits: &[u8], sigma: f64, rng: &mut R) -> Vec<f64> {
    let normal = rand_distr::Normal::new(0.0, sigma).unwrap();
    bits.iter()
        .map(|&b| {
            let y = 1.0 - 2.0 * f64::from(b) + rng.sample(normal);
            2.0 * y / (sigma * sigma)
        })
        .collect()
}

/// Every fast check at its acceptance size.
pub fn run_all() -> Vec<Outcome> {
    vec![
        passive_placement(),
        active_limit(),
        reflection_oracle(100),
        constraint_exactness(1000),
        genie_sic(5),
        mmse_identity(500),
        ldpc_sanity(100, 1000),
    ]
}
