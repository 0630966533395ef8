//! Flooding sum-product decoder in the tanh domain.

use super::ParityCheck;

/// Magnitude bound on every check-to-variable message.
pub const LLR_CLIP: f64 = 30.0;

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeOutput {
    /// `channel + extrinsic`, exactly.
    pub posterior: Vec<f64>,
    /// Sum of the incoming check messages per bit.
    pub extrinsic: Vec<f64>,
    /// Sign of the posterior, bit 0 on ties.
    pub hard_bits: Vec<u8>,
    pub converged: bool,
    pub iterations: usize,
}

fn clip(x: f64) -> f64 {
    x.clamp(-LLR_CLIP, LLR_CLIP)
}

fn boxplus_inverse(t: f64) -> f64 {
    if t >= 1.0 {
        LLR_CLIP
    } else if t <= -1.0 {
        -LLR_CLIP
    } else {
        clip(2.0 * t.atanh())
    }
}

/// Decodes one block of channel LLRs (positive favours bit 0), stopping as
/// soon as the hard decisions satisfy every check.
pub fn decode(code: &ParityCheck, channel_llr: &[f64], max_inner: usize) -> DecodeOutput {
    let n = code.n();
    assert_eq!(channel_llr.len(), n, "LLR block length");
    let rows = code.rows();

    // Edges enumerated row-major.
    let mut edge_var = Vec::with_capacity(code.edges());
    let mut row_start = Vec::with_capacity(rows.len() + 1);
    for row in rows {
        row_start.push(edge_var.len());
        edge_var.extend_from_slice(row);
    }
    row_start.push(edge_var.len());

    let mut v2c: Vec<f64> = edge_var.iter().map(|&v| clip(channel_llr[v])).collect();
    let mut c2v = vec![0.0; edge_var.len()];
    let mut extrinsic = vec![0.0; n];
    let mut hard_bits = vec![0u8; n];
    let mut converged = false;
    let mut iterations = 0;
    let mut prefix = Vec::new();

    while iterations < max_inner {
        iterations += 1;
        for r in 0..rows.len() {
            let (s, e) = (row_start[r], row_start[r + 1]);
            // Leave-one-out products of tanh(q/2) via prefix/suffix sweeps.
            prefix.clear();
            let mut acc = 1.0;
            for &q in &v2c[s..e] {
                prefix.push(acc);
                acc *= (q / 2.0).tanh();
            }
            let mut suffix = 1.0;
            for i in (s..e).rev() {
                c2v[i] = boxplus_inverse(prefix[i - s] * suffix);
                suffix *= (v2c[i] / 2.0).tanh();
            }
        }

        extrinsic.iter_mut().for_each(|x| *x = 0.0);
        for (e, &v) in edge_var.iter().enumerate() {
            extrinsic[v] += c2v[e];
        }
        for (e, &v) in edge_var.iter().enumerate() {
            v2c[e] = clip(channel_llr[v] + extrinsic[v] - c2v[e]);
        }
        for v in 0..n {
            hard_bits[v] = u8::from(channel_llr[v] + extrinsic[v] < 0.0);
        }
        if code.syndrome_is_zero(&hard_bits) {
            converged = true;
            break;
        }
    }

    if iterations == 0 {
        for v in 0..n {
            hard_bits[v] = u8::from(channel_llr[v] < 0.0);
        }
        converged = code.syndrome_is_zero(&hard_bits);
    }

    let posterior = channel_llr.iter().zip(&extrinsic).map(|(c, e)| c + e).collect();
    DecodeOutput {
        posterior,
        extrinsic,
        hard_bits,
        converged,
        iterations,
    }
}
