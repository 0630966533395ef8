//! Scenario parameters, power bookkeeping and node placement.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Minimum link distance fed to the path-loss models (m).
pub const D_MIN: f64 = 1.0;

/// Fraction of the total transmit power granted to an active RIS.
pub const RIS_POWER_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Hash)]
#[serde(rename_all = "lowercase")]
pub enum RisMode {
    Passive,
    Active,
}

impl fmt::Display for RisMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RisMode::Passive => f.write_str("passive"),
            RisMode::Active => f.write_str("active"),
        }
    }
}

impl FromStr for RisMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "passive" => Ok(RisMode::Passive),
            "active" => Ok(RisMode::Active),
            other => Err(format!("unknown RIS mode `{other}` (expected passive|active)")),
        }
    }
}

/// Every parameter of one simulated scenario.
///
/// The file form is TOML with exactly these keys; see `README.md`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemConfig {
    /// Number of single-antenna users (K).
    pub users: usize,
    /// Number of AP antennas (M).
    pub antennas: usize,
    /// Number of RIS elements (N).
    pub elements: usize,
    pub ris_mode: RisMode,
    /// Static receiver noise power (dBm).
    pub sigma_s2_dbm: f64,
    /// Dynamic RIS noise power (dBm); only read in active mode.
    pub sigma_v2_dbm: f64,
    /// Total transmit power divided by the number of users (dBm).
    pub pt_per_user_dbm: f64,
    /// Detector/decoder feedback rounds; 0 is the linear receiver.
    pub tau: usize,
    pub ldpc_n: usize,
    pub ldpc_rate: f64,
    /// Sum-product iterations per decoder activation.
    pub max_inner: usize,
    pub frames: usize,
    pub seed: u64,
    /// Filter/reflection alternations per channel realization.
    pub n_alt: usize,
    /// Horizontal AP-RIS distance (m); the RIS sits at (ris_x, ris_y).
    pub ris_x: f64,
    pub ris_y: f64,
    /// Horizontal AP-user span L (m); users are centered at (span, 0).
    pub span: f64,
    pub user_radius: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            users: 12,
            antennas: 32,
            elements: 64,
            ris_mode: RisMode::Passive,
            sigma_s2_dbm: -100.0,
            sigma_v2_dbm: -95.0,
            pt_per_user_dbm: 6.0,
            tau: 0,
            ldpc_n: 512,
            ldpc_rate: 0.5,
            max_inner: 10,
            frames: 200,
            seed: 1,
            n_alt: 3,
            ris_x: 0.0,
            ris_y: 10.0,
            span: 400.0,
            user_radius: 5.0,
        }
    }
}

/// Named parameter presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// K=4, M=8, N=16, 200 frames.
    Desk,
    /// K=12, M=32, N=64, 1000 frames.
    Paper,
}

impl FromStr for Profile {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "desk" => Ok(Profile::Desk),
            "paper" => Ok(Profile::Paper),
            other => Err(format!("unknown profile `{other}` (expected desk|paper)")),
        }
    }
}

impl Profile {
    pub fn config(self) -> SystemConfig {
        match self {
            Profile::Desk => SystemConfig {
                users: 4,
                antennas: 8,
                elements: 16,
                frames: 200,
                ..SystemConfig::default()
            },
            Profile::Paper => SystemConfig {
                frames: 1000,
                ..SystemConfig::default()
            },
        }
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.users == 0 || self.antennas == 0 || self.elements == 0 {
            return bad("users, antennas and elements must be positive".into());
        }
        if self.users > self.antennas {
            return bad(format!(
                "users ({}) must not exceed antennas ({})",
                self.users, self.antennas
            ));
        }
        for (name, v) in [
            ("sigma_s2_dbm", self.sigma_s2_dbm),
            ("sigma_v2_dbm", self.sigma_v2_dbm),
            ("pt_per_user_dbm", self.pt_per_user_dbm),
            ("ris_x", self.ris_x),
            ("ris_y", self.ris_y),
            ("span", self.span),
            ("user_radius", self.user_radius),
        ] {
            if !v.is_finite() {
                return bad(format!("{name} must be finite"));
            }
        }
        if self.seed > i64::MAX as u64 {
            return bad(format!("seed ({}) must fit in a signed 64-bit TOML integer", self.seed));
        }
        if self.ldpc_n == 0 || self.ldpc_n % 2 != 0 {
            return bad(format!("ldpc_n ({}) must be even and positive", self.ldpc_n));
        }
        if !(self.ldpc_rate > 0.0 && self.ldpc_rate < 1.0) {
            return bad(format!("ldpc_rate ({}) must lie in (0, 1)", self.ldpc_rate));
        }
        let checks = self.ldpc_n as f64 * (1.0 - self.ldpc_rate);
        if (checks - checks.round()).abs() > 1e-9 {
            return bad(format!(
                "ldpc_n * (1 - ldpc_rate) = {checks} is not an integer"
            ));
        }
        if self.user_radius < 0.0 || self.span <= 0.0 {
            return bad("span must be positive and user_radius non-negative".into());
        }
        Ok(())
    }

    /// Number of parity checks of the configured code.
    pub fn ldpc_checks(&self) -> usize {
        (self.ldpc_n as f64 * (1.0 - self.ldpc_rate)).round() as usize
    }

    pub fn sigma_s2(&self) -> f64 {
        dbm_to_linear(self.sigma_s2_dbm)
    }

    /// RIS noise power actually consumed by the model: zero when passive.
    pub fn sigma_v2(&self) -> f64 {
        match self.ris_mode {
            RisMode::Passive => 0.0,
            RisMode::Active => dbm_to_linear(self.sigma_v2_dbm),
        }
    }

    /// Stable 16-hex-digit digest of every field.
    pub fn hash(&self) -> String {
        let canonical = toml::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn from_toml_str(s: &str) -> std::result::Result<Self, String> {
        toml::from_str(s).map_err(|e| e.to_string())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_toml_str(&text).map_err(|message| Error::Parse {
            path: path.to_owned(),
            message,
        })
    }

    /// Applies the keys present in `text` on top of `self`; absent keys keep
    /// their current values, unknown keys are rejected.
    pub fn overlay_toml_str(&self, text: &str) -> std::result::Result<Self, String> {
        let patch: toml::Table = toml::from_str(text).map_err(|e| e.to_string())?;
        let mut merged: toml::Table = toml::from_str(&self.to_toml_string()).map_err(|e| e.to_string())?;
        merged.extend(patch);
        merged.try_into().map_err(|e: toml::de::Error| e.to_string())
    }

    pub fn overlay_file(&self, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        self.overlay_toml_str(&text).map_err(|message| Error::Parse {
            path: path.to_owned(),
            message,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

pub fn dbm_to_linear(p_dbm: f64) -> f64 {
    10f64.powf(p_dbm / 10.0)
}

pub fn linear_to_db(p: f64) -> f64 {
    10.0 * p.log10()
}

/// Per-user and RIS power split, in mW.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerBudget {
    /// Total transmit power P_T.
    pub p_total: f64,
    /// Per-user transmit power before code-rate normalization.
    pub p_user: f64,
    /// Symbol energy after code-rate normalization, `p_user / rate`.
    pub sigma_x2: f64,
    /// RIS amplification budget; zero for a passive surface.
    pub p_ris: f64,
}

pub fn split_power(config: &SystemConfig) -> Result<PowerBudget> {
    let k = config.users as f64;
    let p_total = k * dbm_to_linear(config.pt_per_user_dbm);
    if !(p_total.is_finite() && p_total > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "total transmit power must be positive, got {p_total} mW"
        )));
    }
    let (p_user, p_ris) = match config.ris_mode {
        RisMode::Passive => (p_total / k, 0.0),
        RisMode::Active => {
            let p_ris = RIS_POWER_FRACTION * p_total;
            ((p_total - p_ris) / k, p_ris)
        }
    };
    Ok(PowerBudget {
        p_total,
        p_user,
        sigma_x2: p_user / config.ldpc_rate,
        p_ris,
    })
}

pub type Point = [f64; 2];

pub fn distance(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Node positions for one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub ap_pos: Point,
    pub ris_pos: Point,
    pub user_pos: Vec<Point>,
    pub span: f64,
}

impl Geometry {
    /// AP at the origin, RIS at `(ris_x, ris_y)`, users drawn in the disc
    /// around `(span, 0)`.
    pub fn draw<R: Rng + ?Sized>(config: &SystemConfig, rng: &mut R) -> Self {
        Self {
            ap_pos: [0.0, 0.0],
            ris_pos: [config.ris_x, config.ris_y],
            user_pos: place_users([config.span, 0.0], config.user_radius, config.users, rng),
            span: config.span,
        }
    }
}

/// Draws `count` points uniformly over the closed disc.
pub fn place_users<R: Rng + ?Sized>(
    center: Point,
    radius: f64,
    count: usize,
    rng: &mut R,
) -> Vec<Point> {
    (0..count)
        .map(|_| {
            let r = radius * rng.gen::<f64>().sqrt();
            let theta = 2.0 * PI * rng.gen::<f64>();
            [center[0] + r * theta.cos(), center[1] + r * theta.sin()]
        })
        .collect()
}
