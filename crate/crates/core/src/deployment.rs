//! Closed-form SISO placement analysis for passive and active surfaces.

use crate::channel::{db_to_gain, path_loss_strong, path_loss_weak};
use crate::config::{RisMode, D_MIN, RIS_POWER_FRACTION};
use crate::error::{Error, Result};

/// Path-loss model used for the direct AP-user term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirectModel {
    Strong,
    Weak,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SisoScenario {
    /// AP-user span in metres.
    pub span: f64,
    pub elements: usize,
    pub sigma_x2: f64,
    pub sigma_n2: f64,
    pub sigma_v2: f64,
    pub p_ris_fraction: f64,
    pub direct_model: DirectModel,
}

impl SisoScenario {
    pub fn new(span: f64, elements: usize, sigma_x2: f64, sigma_n2: f64, sigma_v2: f64) -> Result<Self> {
        let sc = SisoScenario {
            span,
            elements,
            sigma_x2,
            sigma_n2,
            sigma_v2,
            p_ris_fraction: RIS_POWER_FRACTION,
            direct_model: DirectModel::Strong,
        };
        sc.validate()?;
        Ok(sc)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.span > 2.0 * D_MIN) {
            return Err(Error::InvalidConfig(format!(
                "span {} must exceed {}",
                self.span,
                2.0 * D_MIN
            )));
        }
        for (name, v) in [
            ("sigma_x2", self.sigma_x2),
            ("sigma_n2", self.sigma_n2),
            ("sigma_v2", self.sigma_v2),
            ("p_ris_fraction", self.p_ris_fraction),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// `(A^g, A^f, A^h)` for a surface `d` metres from the AP.
    pub fn gains(&self, d: f64) -> Result<(f64, f64, f64)> {
        if !(d >= D_MIN && d <= self.span - D_MIN) {
            return Err(Error::DistanceBelowMinimum {
                distance: d.min(self.span - d),
                min: D_MIN,
            });
        }
        let direct = match self.direct_model {
            DirectModel::Strong => path_loss_strong(self.span)?,
            DirectModel::Weak => path_loss_weak(self.span)?,
        };
        Ok((
            db_to_gain(path_loss_strong(d)?),
            db_to_gain(path_loss_strong(self.span - d)?),
            db_to_gain(direct),
        ))
    }
}

pub fn passive_snr(d: f64, sc: &SisoScenario) -> Result<f64> {
    let (ag, af, ah) = sc.gains(d)?;
    let n = sc.elements as f64;
    Ok((ah + ag * af * n * n) * sc.sigma_x2 / sc.sigma_n2)
}

/// Endpoints of the feasible interval, both optimal by symmetry.
pub fn passive_optimal_d(sc: &SisoScenario) -> [f64; 2] {
    [D_MIN, sc.span - D_MIN]
}

/// Active-surface SNR from explicit path gains, with the surface power
/// fraction entering as `1/fraction` weights (10 for a 0.1 split).
pub fn active_snr_from_gains(ag: f64, af: f64, ah: f64, sc: &SisoScenario) -> f64 {
    let r = 1.0 / sc.p_ris_fraction;
    let (sx2, sn2, sv2) = (sc.sigma_x2, sc.sigma_n2, sc.sigma_v2);
    let num = r * ah * sx2 * sv2 + r * ah * af * sx2 * sx2 + ag * af * sx2 * sx2;
    let den = af * sv2 * sx2 + r * af * sx2 * sn2 + r * sn2 * sv2;
    num / den
}

pub fn active_snr(d: f64, sc: &SisoScenario) -> Result<f64> {
    let (ag, af, ah) = sc.gains(d)?;
    Ok(active_snr_from_gains(ag, af, ah, sc))
}

/// Limit of the active SNR as the surface approaches the user with
/// `A^g = A^h`.
pub fn active_near_user_limit(ah: f64, sc: &SisoScenario) -> f64 {
    let r = 1.0 / sc.p_ris_fraction;
    (r + 1.0) * ah * sc.sigma_x2 / (sc.sigma_v2 + r * sc.sigma_n2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trend {
    Increasing,
    Decreasing,
    Flat,
}

/// Maximal run of grid points sharing one trend, as indices into the curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
    pub trend: Trend,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeploymentCurve {
    pub points: Vec<(f64, f64)>,
    pub segments: Vec<Segment>,
}

impl DeploymentCurve {
    pub fn argmax(&self) -> Vec<f64> {
        self.extremes(|a, b| a > b)
    }

    pub fn argmin(&self) -> Vec<f64> {
        self.extremes(|a, b| a < b)
    }

    fn extremes(&self, better: impl Fn(f64, f64) -> bool) -> Vec<f64> {
        let Some(&(_, first)) = self.points.first() else {
            return Vec::new();
        };
        let best = self
            .points
            .iter()
            .fold(first, |acc, &(_, s)| if better(s, acc) { s } else { acc });
        self.points.iter().filter(|p| p.1 == best).map(|p| p.0).collect()
    }
}

fn segments(snr: &[f64]) -> Vec<Segment> {
    let mut out: Vec<Segment> = Vec::new();
    for i in 1..snr.len() {
        let trend = match snr[i].partial_cmp(&snr[i - 1]) {
            Some(std::cmp::Ordering::Greater) => Trend::Increasing,
            Some(std::cmp::Ordering::Less) => Trend::Decreasing,
            _ => Trend::Flat,
        };
        match out.last_mut() {
            Some(seg) if seg.trend == trend => seg.end = i,
            _ => out.push(Segment {
                start: i - 1,
                end: i,
                trend,
            }),
        }
    }
    out
}

pub fn deployment_curve(mode: RisMode, sc: &SisoScenario, grid: &[f64]) -> Result<DeploymentCurve> {
    sc.validate()?;
    let points = grid
        .iter()
        .map(|&d| {
            let snr = match mode {
                RisMode::Passive => passive_snr(d, sc)?,
                RisMode::Active => active_snr(d, sc)?,
            };
            Ok((d, snr))
        })
        .collect::<Result<Vec<_>>>()?;
    let snr: Vec<f64> = points.iter().map(|p| p.1).collect();
    Ok(DeploymentCurve {
        segments: segments(&snr),
        points,
    })
}

/// Integer-metre grid over the feasible interval.
pub fn metre_grid(span: f64) -> Vec<f64> {
    let last = (span - D_MIN).floor() as usize;
    (D_MIN.ceil() as usize..=last).map(|d| d as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::dbm_to_linear;

    fn scenario(elements: usize) -> SisoScenario {
        SisoScenario::new(
            400.0,
            elements,
            dbm_to_linear(6.0),
            dbm_to_linear(-95.0),
            dbm_to_linear(-95.0),
        )
        .unwrap()
    }

    #[test]
    fn passive_symmetry_is_exact() {
        let sc = scenario(64);
        for d in metre_grid(400.0) {
            assert_eq!(passive_snr(d, &sc).unwrap(), passive_snr(400.0 - d, &sc).unwrap());
        }
    }

    #[test]
    fn passive_without_elements_is_direct_link() {
        let sc = scenario(0);
        let ah = db_to_gain(path_loss_strong(400.0).unwrap());
        let expect = ah * sc.sigma_x2 / sc.sigma_n2;
        for d in [1.0, 57.0, 200.0] {
            let got = passive_snr(d, &sc).unwrap();
            assert!((got - expect).abs() <= 1e-15 * expect);
        }
    }

    #[test]
    fn passive_grid_extremes() {
        let sc = scenario(64);
        let curve = deployment_curve(RisMode::Passive, &sc, &metre_grid(400.0)).unwrap();
        assert_eq!(curve.argmax(), vec![1.0, 399.0]);
        assert_eq!(curve.argmin(), vec![200.0]);
        assert_eq!(passive_optimal_d(&sc), [1.0, 399.0]);
        let inner_max = curve
            .points
            .iter()
            .filter(|p| p.0 > 400.0 / 3.0 && p.0 < 800.0 / 3.0)
            .map(|p| p.1)
            .fold(0.0, f64::max);
        assert!(curve.points[0].1 > inner_max);
        let trends: Vec<Trend> = curve.segments.iter().map(|s| s.trend).collect();
        assert_eq!(trends, vec![Trend::Decreasing, Trend::Increasing]);
    }

    #[test]
    fn active_prefers_the_access_point_side() {
        let sc = scenario(64);
        let grid: Vec<f64> = (1..=200).map(f64::from).collect();
        let curve = deployment_curve(RisMode::Active, &sc, &grid).unwrap();
        assert!(curve.points.windows(2).all(|w| w[1].1 < w[0].1));
        assert!(active_snr(1.0, &sc).unwrap() > active_snr(399.0, &sc).unwrap());
    }

    #[test]
    fn active_limit_is_approached_monotonically() {
        let sc = scenario(64);
        let ah = db_to_gain(path_loss_strong(400.0).unwrap());
        let limit = active_near_user_limit(ah, &sc);
        let mut prev = f64::INFINITY;
        for e in 0..=12 {
            let af = 10f64.powi(e);
            let err = (active_snr_from_gains(ah, af, ah, &sc) - limit).abs();
            assert!(err < prev || err <= 1e-13 * limit, "A^f = {af:e}: {err:e} after {prev:e}");
            prev = err;
        }
        assert!(prev / limit < 1e-6);
    }

    #[test]
    fn active_stays_finite_without_surface_noise() {
        let mut sc = scenario(64);
        sc.sigma_v2 = 1e-300;
        let s = active_snr(150.0, &sc).unwrap();
        assert!(s.is_finite() && s > 0.0);
    }

    #[test]
    fn domain_is_enforced() {
        let sc = scenario(8);
        assert!(passive_snr(0.5, &sc).is_err());
        assert!(active_snr(399.5, &sc).is_err());
        assert!(SisoScenario::new(2.0, 8, 1.0, 1.0, 1.0).is_err());
        assert!(SisoScenario::new(100.0, 8, 0.0, 1.0, 1.0).is_err());
        let one = deployment_curve(RisMode::Active, &sc, &[42.0]).unwrap();
        assert_eq!(one.points.len(), 1);
        assert!(one.segments.is_empty());
    }
}
