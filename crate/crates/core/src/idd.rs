//! One coded frame end to end: encoding, QPSK mapping, block-fading
//! transmission and the detector/decoder exchange.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::{complex_gaussian, draw_channels, effective_channel, ChannelSet};
use crate::config::{split_power, Geometry, RisMode, SystemConfig};
use crate::detector::{detect_block, extrinsic_llr, noise_covariance, qpsk_map, sinr_linear, sum_rate, DetectionOutput, SoftState};
use crate::error::{Error, Result};
use crate::ldpc::{decode, DecodeOutput, ParityCheck};
use crate::linalg::{CMat, CVec};
use crate::ris_design::{alternating_design, ReflectionState};

#[derive(Debug, Clone, PartialEq)]
pub struct FrameResult {
    /// Information-bit errors per user after the last decode.
    pub bit_errors: Vec<usize>,
    pub bits_total: Vec<usize>,
    /// Per-user SINR of the last detection pass.
    pub sinr_final: Vec<f64>,
    pub sum_rate: f64,
    /// Users whose last decode satisfied every parity check.
    pub converged_users: usize,
    /// Feedback rounds executed.
    pub iterations_used: usize,
}

impl FrameResult {
    pub fn errors(&self) -> usize {
        self.bit_errors.iter().sum()
    }

    pub fn bits(&self) -> usize {
        self.bits_total.iter().sum()
    }

    pub fn ber(&self) -> f64 {
        self.errors() as f64 / self.bits() as f64
    }
}

/// `sum_j h_j x_j + G diag(phi) n_v + n_s`. The RIS noise term is drawn only
/// for an active surface.
pub fn synthesize_received<R: Rng + ?Sized>(
    heff: &CMat,
    x: &CVec,
    g: &CMat,
    refl: &ReflectionState,
    sigma_v2: f64,
    sigma_s2: f64,
    rng: &mut R,
) -> CVec {
    let mut y = heff * x;
    if refl.mode == RisMode::Active && sigma_v2 > 0.0 {
        let nv = CVec::from_fn(refl.elements(), |n, _| refl.phi[n] * complex_gaussian(rng, sigma_v2));
        y += g * nv;
    }
    if sigma_s2 > 0.0 {
        for m in 0..y.len() {
            y[m] += complex_gaussian(rng, sigma_s2);
        }
    }
    y
}

/// Transmitted content of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FramePayload {
    /// Per-user information bits.
    pub info: Vec<Vec<u8>>,
    /// K x S transmitted symbols.
    pub symbols: CMat,
}

pub fn draw_payload<R: Rng + ?Sized>(code: &ParityCheck, users: usize, sigma_x2: f64, rng: &mut R) -> FramePayload {
    let slots = code.n() / 2;
    let mut symbols = CMat::zeros(users, slots);
    let info = (0..users)
        .map(|k| {
            let bits: Vec<u8> = (0..code.k_info()).map(|_| rng.gen_range(0..2u8)).collect();
            let cw = code.encode(&bits);
            for s in 0..slots {
                symbols[(k, s)] = qpsk_map(cw[2 * s], cw[2 * s + 1], sigma_x2);
            }
            bits
        })
        .collect();
    FramePayload { info, symbols }
}

/// Runs one frame over a fixed channel and reflection state. `tau = 0` is
/// the linear MMSE receiver followed by one decode; each further round
/// feeds the decoder extrinsics back as soft-SIC priors and decodes again.
pub fn run_frame<R: Rng + ?Sized>(
    config: &SystemConfig,
    code: &ParityCheck,
    ch: &ChannelSet,
    refl: &ReflectionState,
    rng: &mut R,
) -> Result<FrameResult> {
    run_frame_traced(config, code, ch, refl, rng).map(|(r, _)| r)
}

/// As [`run_frame`], also returning every detection pass.
pub fn run_frame_traced<R: Rng + ?Sized>(
    config: &SystemConfig,
    code: &ParityCheck,
    ch: &ChannelSet,
    refl: &ReflectionState,
    rng: &mut R,
) -> Result<(FrameResult, Vec<DetectionOutput>)> {
    let budget = split_power(config)?;
    let sx2 = budget.sigma_x2;
    let sv2 = config.sigma_v2();
    let ss2 = config.sigma_s2();
    let users = ch.users();
    if code.n() % 2 != 0 {
        return Err(Error::InvalidConfig("code length must be even for QPSK".into()));
    }

    let heff = effective_channel(ch, &refl.phi)?;
    let payload = draw_payload(code, users, sx2, rng);
    let slots = payload.symbols.ncols();
    let mut y = CMat::zeros(ch.antennas(), slots);
    for s in 0..slots {
        let x = payload.symbols.column(s).into_owned();
        y.set_column(s, &synthesize_received(&heff, &x, &ch.g, refl, sv2, ss2, rng));
    }

    let noise_cov = noise_covariance(&ch.g, &refl.phi, sv2, ss2);
    let mut priors = SoftState::uninformed(users, slots, sx2);
    let mut passes = Vec::with_capacity(config.tau + 1);
    let mut decoded = Vec::new();

    for round in 0..=config.tau {
        if round > 0 {
            let lc: Vec<Vec<f64>> = decoded.iter().map(|d: &DecodeOutput| d.extrinsic.clone()).collect();
            priors = SoftState::from_llrs(&lc, sx2);
        }
        let det = detect_block(&y, &heff, &priors, &noise_cov, sx2)?;
        decoded = (0..users)
            .map(|k| {
                let mut ld = Vec::with_capacity(code.n());
                for s in 0..slots {
                    ld.extend(extrinsic_llr(det.x_hat[(k, s)], det.mu[k], det.eta2[k], sx2));
                }
                decode(code, &ld, config.max_inner)
            })
            .collect();
        passes.push(det);
    }

    let last = passes.last().expect("at least one pass");
    let sinr_final: Vec<f64> = if config.tau == 0 {
        (0..users)
            .map(|k| sinr_linear(&last.filters.row(k).adjoint(), &heff, k, &ch.g, &refl.phi, sx2, sv2, ss2))
            .collect()
    } else {
        last.sinr.clone()
    };
    if !sinr_final.iter().all(|g| g.is_finite() && *g >= 0.0) {
        return Err(Error::Numerical(format!("invalid SINR {sinr_final:?}")));
    }

    let bit_errors = decoded
        .iter()
        .zip(&payload.info)
        .map(|(d, info)| {
            code.extract_info(&d.hard_bits)
                .iter()
                .zip(info)
                .filter(|(a, b)| a != b)
                .count()
        })
        .collect();
    let result = FrameResult {
        bit_errors,
        bits_total: vec![code.k_info(); users],
        sum_rate: sum_rate(&sinr_final),
        sinr_final,
        converged_users: decoded.iter().filter(|d| d.converged).count(),
        iterations_used: config.tau,
    };
    Ok((result, passes))
}

/// One Monte Carlo trial with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub seed: u64,
    pub config_hash: String,
    pub frame: FrameResult,
    /// Design objective at the start and after each alternation round.
    pub design_objectives: Vec<f64>,
    pub below_unit_gain: usize,
}

/// Geometry and channel draw, reflection design and one frame, all from a
/// single seeded stream. Only the receiver depends on `tau`, so trials that
/// share a seed see the same channel, bits and noise.
pub fn run_trial(config: &SystemConfig, code: &ParityCheck, seed: u64) -> Result<TrialRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let budget = split_power(config)?;
    let geometry = Geometry::draw(config, &mut rng);
    let ch = draw_channels(&geometry, config.elements, config.antennas, &mut rng);
    let design = alternating_design(
        &ch,
        config.ris_mode,
        &budget,
        config.sigma_v2(),
        config.sigma_s2(),
        config.n_alt,
    )?;
    let frame = run_frame(config, code, &ch, &design.state, &mut rng)?;
    Ok(TrialRecord {
        seed,
        config_hash: config.hash(),
        frame,
        design_objectives: design.objectives,
        below_unit_gain: design.below_unit_gain,
    })
}

/// Noiseless frame with genie soft symbols: returns the largest residual
/// `‖y_k - h_k x_k‖` over users and slots, relative to `‖y‖`.
pub fn genie_residual(heff: &CMat, symbols: &CMat) -> f64 {
    let mut worst = 0.0f64;
    for s in 0..symbols.ncols() {
        let x = symbols.column(s).into_owned();
        let y = heff * &x;
        for k in 0..heff.ncols() {
            let yk = crate::detector::sic_cancel(&y, heff, &x, k);
            let resid = (yk - heff.column(k) * x[k]).norm() / y.norm().max(f64::MIN_POSITIVE);
            worst = worst.max(resid);
        }
    }
    worst
}
