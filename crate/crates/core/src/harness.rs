//! Parameter sweeps: seeding, parallel trials, aggregation and CSV output.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{RisMode, SystemConfig};
use crate::error::{Error, Result};
use crate::idd::{run_trial, TrialRecord};
use crate::ldpc::{construct_code, ParityCheck};

/// Fraction of failed trials above which a point aborts the sweep.
pub const MAX_FAILURE_FRACTION: f64 = 0.01;

pub const CSV_HEADER: [&str; 10] = [
    "scheme",
    "tau",
    "variable",
    "value",
    "frames",
    "ber",
    "sum_rate_mean",
    "sum_rate_stderr",
    "seed",
    "config_hash",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    RisDistance,
    PowerPerUser,
    Users,
    Antennas,
    Elements,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::RisDistance => "ris_distance",
            SweepVariable::PowerPerUser => "power_per_user",
            SweepVariable::Users => "users",
            SweepVariable::Antennas => "antennas",
            SweepVariable::Elements => "elements",
        }
    }

    /// Writes `value` into the matching field of `config`.
    pub fn apply(self, config: &mut SystemConfig, value: f64) -> Result<()> {
        let count = || {
            if value >= 1.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(Error::InvalidConfig(format!(
                    "{} must be a positive integer, got {value}",
                    self.name()
                )))
            }
        };
        match self {
            SweepVariable::RisDistance => config.ris_x = value,
            SweepVariable::PowerPerUser => config.pt_per_user_dbm = value,
            SweepVariable::Users => config.users = count()?,
            SweepVariable::Antennas => config.antennas = count()?,
            SweepVariable::Elements => config.elements = count()?,
        }
        Ok(())
    }
}

impl fmt::Display for SweepVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepVariable {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        [
            SweepVariable::RisDistance,
            SweepVariable::PowerPerUser,
            SweepVariable::Users,
            SweepVariable::Antennas,
            SweepVariable::Elements,
        ]
        .into_iter()
        .find(|v| v.name() == s)
        .ok_or_else(|| format!("unknown sweep variable `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    LinearPassive,
    LinearActive,
    IddPassive,
    IddActive,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::LinearPassive => "linear_passive",
            Scheme::LinearActive => "linear_active",
            Scheme::IddPassive => "idd_passive",
            Scheme::IddActive => "idd_active",
        }
    }

    pub fn mode(self) -> RisMode {
        match self {
            Scheme::LinearPassive | Scheme::IddPassive => RisMode::Passive,
            Scheme::LinearActive | Scheme::IddActive => RisMode::Active,
        }
    }

    pub fn is_linear(self) -> bool {
        matches!(self, Scheme::LinearPassive | Scheme::LinearActive)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        [
            Scheme::LinearPassive,
            Scheme::LinearActive,
            Scheme::IddPassive,
            Scheme::IddActive,
        ]
        .into_iter()
        .find(|v| v.name() == s)
        .ok_or_else(|| format!("unknown scheme `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    pub base: SystemConfig,
    pub scheme: Scheme,
    /// IDD depths; linear schemes always run `tau = 0` only.
    pub taus: Vec<usize>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::InvalidConfig("sweep values are empty".into()));
        }
        if !self.values.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidConfig(format!(
                "sweep values must be strictly increasing: {:?}",
                self.values
            )));
        }
        if !self.scheme.is_linear() && self.taus.is_empty() {
            return Err(Error::InvalidConfig("IDD scheme needs at least one tau".into()));
        }
        Ok(())
    }

    pub fn taus(&self) -> Vec<usize> {
        if self.scheme.is_linear() {
            vec![0]
        } else {
            self.taus.clone()
        }
    }

    /// Full configuration of the point `(value_index, tau)`.
    pub fn point_config(&self, value_index: usize, tau: usize) -> Result<SystemConfig> {
        let mut config = self.base.clone();
        config.ris_mode = self.scheme.mode();
        config.tau = tau;
        self.variable.apply(&mut config, self.values[value_index])?;
        config.validate()?;
        Ok(config)
    }
}

/// One aggregated sweep point, exactly as written to CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scheme: String,
    pub tau: usize,
    pub variable: String,
    pub value: f64,
    /// Successful frames aggregated into this row.
    pub frames: usize,
    pub ber: f64,
    pub sum_rate_mean: f64,
    pub sum_rate_stderr: f64,
    pub seed: u64,
    pub config_hash: String,
}

/// Aggregate of one point, with the per-frame series kept for statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSummary {
    pub errors: usize,
    pub bits: usize,
    pub frame_ber: Vec<f64>,
    pub frame_sum_rate: Vec<f64>,
    pub failed: usize,
}

impl PointSummary {
    pub fn ber(&self) -> f64 {
        if self.bits == 0 {
            0.0
        } else {
            self.errors as f64 / self.bits as f64
        }
    }

    pub fn ber_stderr(&self) -> f64 {
        mean_and_stderr(&self.frame_ber).1
    }

    pub fn sum_rate(&self) -> (f64, f64) {
        mean_and_stderr(&self.frame_sum_rate)
    }
}

pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `trial_index` at sweep value `value_index`. For a fixed
/// base the map is injective over indices below 2^32 (a packed counter
/// through two bijective mixers).
pub fn trial_seed(base: u64, trial_index: usize, value_index: usize) -> u64 {
    let counter = ((value_index as u64) << 32) | (trial_index as u64 & 0xFFFF_FFFF);
    splitmix64(base ^ splitmix64(counter))
}

fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))
}

/// Runs `config.frames` trials of one point. Failed trials are logged and
/// excluded; more than 1% failures abort. Aggregation follows trial index,
/// never completion order.
pub fn run_point(
    config: &SystemConfig,
    code: &ParityCheck,
    value_index: usize,
    threads: usize,
) -> Result<PointSummary> {
    let pool = thread_pool(threads)?;
    let results: Vec<(usize, u64, Result<TrialRecord>)> = pool.install(|| {
        (0..config.frames)
            .into_par_iter()
            .map(|t| {
                let seed = trial_seed(config.seed, t, value_index);
                (t, seed, run_trial(config, code, seed))
            })
            .collect()
    });

    let mut summary = PointSummary {
        errors: 0,
        bits: 0,
        frame_ber: Vec::with_capacity(results.len()),
        frame_sum_rate: Vec::with_capacity(results.len()),
        failed: 0,
    };
    for (trial, seed, result) in results {
        match result {
            Ok(rec) => {
                summary.errors += rec.frame.errors();
                summary.bits += rec.frame.bits();
                summary.frame_ber.push(rec.frame.ber());
                summary.frame_sum_rate.push(rec.frame.sum_rate);
            }
            Err(source) => {
                let err = Error::Trial {
                    trial,
                    seed,
                    source: Box::new(source),
                };
                eprintln!("warning: {err}");
                summary.failed += 1;
            }
        }
    }
    if summary.failed as f64 > MAX_FAILURE_FRACTION * config.frames as f64 {
        return Err(Error::SweepAborted {
            failed: summary.failed,
            total: config.frames,
        });
    }
    Ok(summary)
}

/// Builds the CSV row of one point.
pub fn make_row(scheme: Scheme, variable: SweepVariable, value: f64, config: &SystemConfig, s: &PointSummary) -> ResultRow {
    let (mean, stderr) = s.sum_rate();
    ResultRow {
        scheme: scheme.name().to_owned(),
        tau: config.tau,
        variable: variable.name().to_owned(),
        value,
        frames: s.frame_ber.len(),
        ber: s.ber(),
        sum_rate_mean: mean,
        sum_rate_stderr: stderr,
        seed: config.seed,
        config_hash: config.hash(),
    }
}

/// Provenance of one row: enough to regenerate it in isolation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointMeta {
    pub config_hash: String,
    pub value_index: usize,
    pub config: SystemConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMeta {
    pub variable: SweepVariable,
    pub scheme: Scheme,
    pub values: Vec<f64>,
    pub taus: Vec<usize>,
    pub points: Vec<PointMeta>,
}

impl SweepMeta {
    pub fn find(&self, config_hash: &str) -> Option<&PointMeta> {
        self.points.iter().find(|p| p.config_hash == config_hash)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| Error::Parse {
            path: path.to_owned(),
            message: e.to_string(),
        })?;
        std::fs::write(path, text).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_owned(),
            message: e.to_string(),
        })
    }
}

/// Caches constructed codes by `(n, rate bits, seed)`.
#[derive(Default)]
pub struct CodeCache {
    codes: HashMap<(usize, u64, u64), ParityCheck>,
}

impl CodeCache {
    pub fn get(&mut self, config: &SystemConfig) -> Result<&ParityCheck> {
        let key = (config.ldpc_n, config.ldpc_rate.to_bits(), config.seed);
        if !self.codes.contains_key(&key) {
            let code = construct_code(config.ldpc_n, config.ldpc_rate, config.seed)?;
            self.codes.insert(key, code);
        }
        Ok(&self.codes[&key])
    }
}

/// Runs every `(value, tau)` point in order: values outer, taus inner.
pub fn run_sweep(spec: &SweepSpec, threads: usize) -> Result<(Vec<ResultRow>, SweepMeta)> {
    spec.validate()?;
    let mut cache = CodeCache::default();
    let mut rows = Vec::new();
    let mut points = Vec::new();
    for (vi, &value) in spec.values.iter().enumerate() {
        for tau in spec.taus() {
            let config = spec.point_config(vi, tau)?;
            let code = cache.get(&config)?;
            let summary = run_point(&config, code, vi, threads)?;
            rows.push(make_row(spec.scheme, spec.variable, value, &config, &summary));
            points.push(PointMeta {
                config_hash: config.hash(),
                value_index: vi,
                config,
            });
        }
    }
    let meta = SweepMeta {
        variable: spec.variable,
        scheme: spec.scheme,
        values: spec.values.clone(),
        taus: spec.taus(),
        points,
    };
    Ok((rows, meta))
}

/// Regenerates the row whose provenance is `point`.
pub fn reproduce_row(meta: &SweepMeta, point: &PointMeta, threads: usize) -> Result<ResultRow> {
    let code = construct_code(point.config.ldpc_n, point.config.ldpc_rate, point.config.seed)?;
    let summary = run_point(&point.config, &code, point.value_index, threads)?;
    Ok(make_row(
        meta.scheme,
        meta.variable,
        meta.values[point.value_index],
        &point.config,
        &summary,
    ))
}

fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> std::io::Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.scheme.clone(),
            r.tau.to_string(),
            r.variable.clone(),
            fmt_f64(r.value),
            r.frames.to_string(),
            fmt_f64(r.ber),
            fmt_f64(r.sum_rate_mean),
            fmt_f64(r.sum_rate_stderr),
            r.seed.to_string(),
            r.config_hash.clone(),
        ])?;
    }
    w.flush()
}

pub fn emit_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_owned(),
        source,
    };
    let file = std::fs::File::create(path).map_err(io_err)?;
    write_csv(rows, std::io::BufWriter::new(file)).map_err(io_err)
}

pub fn read_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let parse_err = |message: String| Error::Parse {
        path: path.to_owned(),
        message,
    };
    let mut r = csv::Reader::from_path(path).map_err(|e| parse_err(e.to_string()))?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| parse_err(e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    if header != CSV_HEADER {
        return Err(parse_err(format!("unexpected header {header:?}")));
    }
    r.deserialize()
        .collect::<std::result::Result<Vec<ResultRow>, _>>()
        .map_err(|e| parse_err(e.to_string()))
}

/// `<out>.meta.toml` next to a CSV file.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    let mut name = csv_path.as_os_str().to_owned();
    name.push(".meta.toml");
    PathBuf::from(name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn row(i: usize) -> ResultRow {
        ResultRow {
            scheme: "idd_passive".into(),
            tau: i,
            variable: "elements".into(),
            value: 16.0 * (i + 1) as f64,
            frames: 200,
            ber: 0.012_345_678_901_234_5 / (i + 1) as f64,
            sum_rate_mean: 1.0 / 3.0,
            sum_rate_stderr: 2.0f64.sqrt() * 1e-3,
            seed: u64::MAX - i as u64,
            config_hash: format!("{:016x}", i),
        }
    }

    #[test]
    fn seeds_repeat_and_do_not_collide() {
        assert_eq!(trial_seed(5, 3, 4), trial_seed(5, 3, 4));
        assert_ne!(trial_seed(5, 3, 4), trial_seed(5, 4, 3));
        let mut seen = HashSet::with_capacity(1_000_000);
        for v in 0..10 {
            for t in 0..100_000 {
                assert!(seen.insert(trial_seed(1, t, v)));
            }
        }
    }

    #[test]
    fn csv_layout_and_round_trip() {
        let dir = std::env::temp_dir().join(format!("ris-idd-csv-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();

        let empty = dir.join("empty.csv");
        emit_csv(&[], &empty).unwrap();
        assert_eq!(std::fs::read_to_string(&empty).unwrap(), CSV_HEADER.join(",") + "\n");

        let path = dir.join("rows.csv");
        let rows: Vec<_> = (0..3).map(row).collect();
        emit_csv(&rows, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(!text.contains('\r'));
        assert_eq!(read_csv(&path).unwrap(), rows);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn spec_validation() {
        let mut spec = SweepSpec {
            variable: SweepVariable::Elements,
            values: vec![16.0, 32.0],
            base: SystemConfig::default(),
            scheme: Scheme::IddPassive,
            taus: vec![1],
        };
        assert!(spec.validate().is_ok());
        spec.values = vec![32.0, 16.0];
        assert!(spec.validate().is_err());
        spec.values = vec![];
        assert!(spec.validate().is_err());
        spec.values = vec![16.5];
        assert!(spec.point_config(0, 1).is_err());
    }

    #[test]
    fn stderr_of_known_series() {
        let (m, s) = mean_and_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        // sample sd = sqrt(5/3)
        assert!((s - (5.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn variable_names_round_trip() {
        for v in ["ris_distance", "power_per_user", "users", "antennas", "elements"] {
            assert_eq!(v.parse::<SweepVariable>().unwrap().name(), v);
        }
        for s in ["linear_passive", "linear_active", "idd_passive", "idd_active"] {
            assert_eq!(s.parse::<Scheme>().unwrap().name(), s);
        }
    }
}
