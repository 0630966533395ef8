//! Large-scale (log-distance path loss) and small-scale (Rayleigh) fading
//! for the direct, AP-RIS and RIS-user links.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::config::{distance, Geometry, D_MIN};
use crate::error::{Error, Result};
use crate::linalg::{c, CMat, CVec, C64};

/// Path gain (dB, negative) of the strong AP-RIS and RIS-user links.
pub fn path_loss_strong(d: f64) -> Result<f64> {
    check_distance(d)?;
    Ok(-(37.3 + 22.0 * d.log10()))
}

/// Path gain (dB, negative) of the obstructed direct AP-user link.
pub fn path_loss_weak(d: f64) -> Result<f64> {
    check_distance(d)?;
    Ok(-(41.2 + 28.7 * d.log10()))
}

fn check_distance(d: f64) -> Result<()> {
    if d >= D_MIN {
        Ok(())
    } else {
        Err(Error::DistanceBelowMinimum {
            distance: d,
            min: D_MIN,
        })
    }
}

pub fn db_to_gain(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Linear strong-model gain at distance `d`, clamped to `D_MIN`.
pub fn strong_gain(d: f64) -> f64 {
    db_to_gain(path_loss_strong(d.max(D_MIN)).expect("clamped"))
}

/// Linear weak-model gain at distance `d`, clamped to `D_MIN`.
pub fn weak_gain(d: f64) -> f64 {
    db_to_gain(path_loss_weak(d.max(D_MIN)).expect("clamped"))
}

/// All link matrices of one block-fading realization. Path gains are folded
/// into the entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// M x K, column k is the AP-user link `h_k`.
    pub direct: CMat,
    /// M x N AP-RIS link.
    pub g: CMat,
    /// N x K, column k is the RIS-user link `f_k`.
    pub f: CMat,
}

impl ChannelSet {
    pub fn new(direct: CMat, g: CMat, f: CMat) -> Result<Self> {
        let (m, k) = direct.shape();
        let n = g.ncols();
        if g.nrows() != m || f.shape() != (n, k) {
            return Err(Error::Dimension(format!(
                "direct {:?}, G {:?}, F {:?}",
                direct.shape(),
                g.shape(),
                f.shape()
            )));
        }
        Ok(Self { direct, g, f })
    }

    pub fn antennas(&self) -> usize {
        self.direct.nrows()
    }

    pub fn users(&self) -> usize {
        self.direct.ncols()
    }

    pub fn elements(&self) -> usize {
        self.g.ncols()
    }
}

pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c(s * re, s * im)
}

/// Draws independent Rayleigh entries whose variance is the linear path
/// gain of their link: weak model for AP-user, strong model for the RIS legs.
/// Distances are full 2-D and clamped to `D_MIN`.
pub fn draw_channels<R: Rng + ?Sized>(
    geometry: &Geometry,
    elements: usize,
    antennas: usize,
    rng: &mut R,
) -> ChannelSet {
    let users = geometry.user_pos.len();
    let ap_ris = strong_gain(distance(geometry.ap_pos, geometry.ris_pos));
    let ap_user: Vec<f64> = geometry
        .user_pos
        .iter()
        .map(|u| weak_gain(distance(geometry.ap_pos, *u)))
        .collect();
    let ris_user: Vec<f64> = geometry
        .user_pos
        .iter()
        .map(|u| strong_gain(distance(geometry.ris_pos, *u)))
        .collect();

    let direct = CMat::from_fn(antennas, users, |_, k| complex_gaussian(rng, ap_user[k]));
    let g = CMat::from_fn(antennas, elements, |_, _| complex_gaussian(rng, ap_ris));
    let f = CMat::from_fn(elements, users, |_, k| complex_gaussian(rng, ris_user[k]));
    ChannelSet { direct, g, f }
}

/// `h_k + G diag(phi) f_k` for every user, as an M x K matrix.
pub fn effective_channel(ch: &ChannelSet, phi: &CVec) -> Result<CMat> {
    if phi.len() != ch.elements() {
        return Err(Error::Dimension(format!(
            "phi has {} entries, RIS has {} elements",
            phi.len(),
            ch.elements()
        )));
    }
    let mut scaled_f = ch.f.clone();
    for (mut row, p) in scaled_f.row_iter_mut().zip(phi.iter()) {
        row *= *p;
    }
    Ok(&ch.direct + &ch.g * scaled_f)
}

/// Per-user cascade matrices `A_k = G diag(f_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeSet {
    pub a: Vec<CMat>,
}

impl CascadeSet {
    /// `h_k + A_k phi` for every user.
    pub fn effective(&self, direct: &CMat, phi: &CVec) -> CMat {
        let mut out = direct.clone();
        for (k, a_k) in self.a.iter().enumerate() {
            let col = a_k * phi;
            out.column_mut(k).zip_apply(&col, |o, v| *o += v);
        }
        out
    }
}

pub fn cascade_matrices(ch: &ChannelSet) -> CascadeSet {
    let a = (0..ch.users())
        .map(|k| {
            let mut a_k = ch.g.clone();
            for (mut col, fk) in a_k.column_iter_mut().zip(ch.f.column(k).iter()) {
                col *= *fk;
            }
            a_k
        })
        .collect();
    CascadeSet { a }
}
