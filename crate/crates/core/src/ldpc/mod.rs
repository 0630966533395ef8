//! Regular LDPC codes: progressive edge growth construction, systematic
//! encoding and sum-product decoding.

mod decode;
mod encode;
mod peg;

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

pub use decode::{decode, DecodeOutput, LLR_CLIP};
pub use encode::Encoder;
pub use peg::peg_construct;

use crate::error::{Error, Result};

/// Attempts (with successive derived seeds) before construction gives up.
pub const MAX_CONSTRUCTION_ATTEMPTS: usize = 64;

/// Sparse binary parity-check matrix together with its encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct ParityCheck {
    n: usize,
    /// Check node -> variable nodes.
    rows: Vec<Vec<usize>>,
    /// Variable node -> check nodes.
    cols: Vec<Vec<usize>>,
    encoder: Encoder,
}

impl ParityCheck {
    /// Builds the code from its check rows. Column lists and the encoder are
    /// derived.
    pub fn from_rows(n: usize, mut rows: Vec<Vec<usize>>) -> Result<Self> {
        let mut cols = vec![Vec::new(); n];
        for (r, row) in rows.iter_mut().enumerate() {
            row.sort_unstable();
            row.dedup();
            for &v in row.iter() {
                if v >= n {
                    return Err(Error::Dimension(format!(
                        "check {r} references column {v} >= n = {n}"
                    )));
                }
                cols[v].push(r);
            }
        }
        let encoder = Encoder::new(n, &rows);
        Ok(Self {
            n,
            rows,
            cols,
            encoder,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn checks(&self) -> usize {
        self.rows.len()
    }

    /// Information length `n - rank(H)`.
    pub fn k_info(&self) -> usize {
        self.encoder.k_info()
    }

    pub fn rank(&self) -> usize {
        self.n - self.k_info()
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.rows
    }

    pub fn cols(&self) -> &[Vec<usize>] {
        &self.cols
    }

    pub fn edges(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// `(column weight, row weight)` when the code is regular.
    pub fn regular_weights(&self) -> Option<(usize, usize)> {
        let cw = self.cols.first()?.len();
        let rw = self.rows.first()?.len();
        let regular = self.cols.iter().all(|c| c.len() == cw) && self.rows.iter().all(|r| r.len() == rw);
        regular.then_some((cw, rw))
    }

    /// True when two checks share more than one variable.
    pub fn has_four_cycle(&self) -> bool {
        let mut seen = HashSet::new();
        for row in &self.rows {
            for (i, &a) in row.iter().enumerate() {
                for &b in &row[i + 1..] {
                    if !seen.insert((a, b)) {
                        return true;
                    }
                }
            }
        }
        false
    }

    pub fn syndrome_is_zero(&self, bits: &[u8]) -> bool {
        self.rows
            .iter()
            .all(|row| row.iter().fold(0u8, |acc, &v| acc ^ (bits[v] & 1)) == 0)
    }

    pub fn encode(&self, info: &[u8]) -> Vec<u8> {
        self.encoder.encode(info)
    }

    /// Recovers the information bits from a codeword.
    pub fn extract_info(&self, codeword: &[u8]) -> Vec<u8> {
        self.encoder.extract_info(codeword)
    }

    /// Sparse text form: a `n m` header, then one `row: col col ...` line
    /// per check.
    pub fn to_sparse_text(&self) -> String {
        let mut out = format!("{} {}\n", self.n, self.rows.len());
        for (r, row) in self.rows.iter().enumerate() {
            let _ = write!(out, "{r}:");
            for v in row {
                let _ = write!(out, " {v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_sparse_text(text: &str) -> std::result::Result<Self, String> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or("empty input")?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| format!("bad header `{header}`")))
            .collect::<std::result::Result<_, _>>()?;
        let [n, m] = dims[..] else {
            return Err(format!("header must be `n m`, got `{header}`"));
        };
        let mut rows = vec![Vec::new(); m];
        for line in lines {
            let (idx, rest) = line
                .split_once(':')
                .ok_or_else(|| format!("missing `:` in `{line}`"))?;
            let r: usize = idx.trim().parse().map_err(|_| format!("bad row `{idx}`"))?;
            if r >= m {
                return Err(format!("row {r} out of range"));
            }
            rows[r] = rest
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| format!("bad column `{t}`")))
                .collect::<std::result::Result<_, _>>()?;
        }
        Self::from_rows(n, rows).map_err(|e| e.to_string())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_sparse_text()).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_sparse_text(&text).map_err(|message| Error::Parse {
            path: path.to_owned(),
            message,
        })
    }
}

/// Degree profile and acceptance requirements for a PEG construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CodeProfile {
    pub n: usize,
    pub checks: usize,
    pub col_weight: usize,
    /// Require `rank(H) = checks` so that `k_info = n - checks`.
    pub full_rank: bool,
}

impl CodeProfile {
    /// The (3,6)-regular profile for block length `n` and rate `rate`.
    pub fn regular_3_6(n: usize, rate: f64) -> Result<Self> {
        let checks = n as f64 * (1.0 - rate);
        if (checks - checks.round()).abs() > 1e-9 || checks.round() < 1.0 {
            return Err(Error::InvalidConfig(format!(
                "n * (1 - rate) = {checks} is not a positive integer"
            )));
        }
        Ok(Self {
            n,
            checks: checks.round() as usize,
            col_weight: 3,
            full_rank: true,
        })
    }

    pub fn row_weight(&self) -> Option<usize> {
        let edges = self.n * self.col_weight;
        (self.checks > 0 && edges % self.checks == 0).then(|| edges / self.checks)
    }
}

/// Builds a regular code with girth at least 6, retrying with derived
/// seeds until every requirement of `profile` holds.
pub fn construct_with(profile: CodeProfile, seed: u64) -> Result<ParityCheck> {
    let fail = |reason: String| Error::CodeConstruction {
        seed,
        attempts: MAX_CONSTRUCTION_ATTEMPTS,
        reason,
    };
    let row_weight = profile.row_weight().ok_or_else(|| {
        fail(format!(
            "{} edges do not split evenly over {} checks",
            profile.n * profile.col_weight,
            profile.checks
        ))
    })?;
    if profile.col_weight > profile.checks || row_weight > profile.n {
        return Err(fail("degrees exceed the matrix dimensions".into()));
    }
    // Any two checks may share at most one variable: each variable supplies
    // C(col_weight, 2) distinct check pairs.
    let pairs_needed = profile.n * profile.col_weight * (profile.col_weight - 1) / 2;
    let pairs_available = profile.checks * (profile.checks - 1) / 2;
    if pairs_needed > pairs_available {
        return Err(fail(format!(
            "girth 6 impossible: needs {pairs_needed} distinct check pairs, only {pairs_available} exist"
        )));
    }

    let mut last = String::new();
    for attempt in 0..MAX_CONSTRUCTION_ATTEMPTS {
        let s = seed.wrapping_add((attempt as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let rows = match peg_construct(profile.n, profile.checks, profile.col_weight, row_weight, s) {
            Some(rows) => rows,
            None => {
                last = "ran out of admissible checks".into();
                continue;
            }
        };
        let code = ParityCheck::from_rows(profile.n, rows)?;
        if code.has_four_cycle() {
            last = "4-cycle present".into();
            continue;
        }
        if profile.full_rank && code.rank() != profile.checks {
            last = format!("rank {} < {}", code.rank(), profile.checks);
            continue;
        }
        return Ok(code);
    }
    Err(fail(last))
}

/// The (3,6)-regular code used by the simulator.
pub fn construct_code(n: usize, rate: f64, seed: u64) -> Result<ParityCheck> {
    construct_with(CodeProfile::regular_3_6(n, rate)?, seed)
}
