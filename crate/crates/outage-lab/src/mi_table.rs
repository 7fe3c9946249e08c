//! Cached `I_X(s)` curves.
//!
//! Outage decisions compare `I_X(P γ_i)` against a rate threshold millions of
//! times, so the Monte Carlo estimator is sampled once on a log-spaced grid
//! and interpolated. The stored values are monotonized (pool-adjacent
//! violators) and interpolated with a shape-preserving cubic in `ln(1 + s)`,
//! which keeps lookups nondecreasing in `s`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constellation::{awgn_mutual_information, Constellation, ConstellationKind};

/// Grid points used when a table is built implicitly.
pub const DEFAULT_POINTS: usize = 96;
/// Noise draws per grid point when a table is built implicitly.
pub const DEFAULT_NOISE_DRAWS: usize = 200_000;
pub const DEFAULT_SNR_MIN: f64 = 1e-4;
pub const DEFAULT_SNR_MAX: f64 = 1e6;

#[derive(Debug, Error)]
pub enum MiTableError {
    #[error("invalid table: {0}")]
    Invalid(String),
    #[error("malformed table JSON: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTable {
    kind: ConstellationKind,
    #[serde(rename = "M")]
    bits: u32,
    snr_grid: Vec<f64>,
    mi_values: Vec<f64>,
    abs_error_bound: f64,
}

/// Monotone interpolation table of `I_X(s)` for one constellation.
///
/// `snr_grid[0] = 0` with `mi_values[0] = 0`; queries above the last node
/// return the last stored value.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawTable", into = "RawTable")]
pub struct MiTable {
    raw: RawTable,
    log_grid: Vec<f64>,
    slopes: Vec<f64>,
}

impl From<MiTable> for RawTable {
    fn from(t: MiTable) -> Self {
        t.raw
    }
}

impl TryFrom<RawTable> for MiTable {
    type Error = MiTableError;

    fn try_from(raw: RawTable) -> Result<Self, Self::Error> {
        let RawTable { snr_grid, mi_values, bits, .. } = &raw;
        let invalid = |msg: &str| Err(MiTableError::Invalid(msg.to_owned()));
        if snr_grid.len() != mi_values.len() || snr_grid.len() < 2 {
            return invalid("grid and values must have equal length ≥ 2");
        }
        if snr_grid[0] != 0.0 || mi_values[0] != 0.0 {
            return invalid("first node must be the anchor s = 0 ↦ 0");
        }
        if snr_grid.windows(2).any(|w| !(w[1] > w[0])) || snr_grid.iter().any(|s| !s.is_finite()) {
            return invalid("grid must be finite and strictly increasing");
        }
        if mi_values.windows(2).any(|w| w[1] < w[0]) {
            return invalid("values must be nondecreasing");
        }
        if mi_values.iter().any(|&v| !(0.0..=*bits as f64).contains(&v)) {
            return invalid("values must lie in [0, M]");
        }
        if !(raw.abs_error_bound >= 0.0) {
            return invalid("error bound must be nonnegative");
        }
        let log_grid: Vec<f64> = snr_grid.iter().map(|s| s.ln_1p()).collect();
        let slopes = pchip_slopes(&log_grid, mi_values);
        Ok(MiTable { raw, log_grid, slopes })
    }
}

impl MiTable {
    pub fn kind(&self) -> ConstellationKind {
        self.raw.kind
    }

    pub fn bits(&self) -> u32 {
        self.raw.bits
    }

    pub fn snr_grid(&self) -> &[f64] {
        &self.raw.snr_grid
    }

    pub fn mi_values(&self) -> &[f64] {
        &self.raw.mi_values
    }

    pub fn abs_error_bound(&self) -> f64 {
        self.raw.abs_error_bound
    }

    pub fn snr_max(&self) -> f64 {
        *self.raw.snr_grid.last().expect("validated non-empty")
    }

    /// Value returned for every `s ≥ snr_max`.
    pub fn saturation_value(&self) -> f64 {
        *self.raw.mi_values.last().expect("validated non-empty")
    }

    /// Whether the table belongs to `c` (same kind and size).
    pub fn matches(&self, c: &Constellation) -> bool {
        self.raw.kind == c.kind() && self.raw.bits == c.bits()
    }

    /// Monotone interpolated `I_X(s)`.
    pub fn lookup(&self, s: f64) -> f64 {
        let grid = &self.raw.snr_grid;
        let values = &self.raw.mi_values;
        if !(s > 0.0) {
            return 0.0;
        }
        if s >= self.snr_max() {
            return self.saturation_value();
        }
        // First node strictly greater than s; s lies in [grid[k], grid[k+1]).
        let k = grid.partition_point(|&g| g <= s) - 1;
        if grid[k] == s {
            return values[k];
        }
        let (x0, x1) = (self.log_grid[k], self.log_grid[k + 1]);
        let h = x1 - x0;
        let t = (s.ln_1p() - x0) / h;
        let (t2, t3) = (t * t, t * t * t);
        let v = (2.0 * t3 - 3.0 * t2 + 1.0) * values[k]
            + (t3 - 2.0 * t2 + t) * h * self.slopes[k]
            + (-2.0 * t3 + 3.0 * t2) * values[k + 1]
            + (t3 - t2) * h * self.slopes[k + 1];
        v.clamp(values[k], values[k + 1])
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tables always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, MiTableError> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Builds a table on `n_points` log-spaced SNRs in `[s_min, s_max]`.
///
/// Every node reuses the same noise draws, which keeps neighbouring
/// estimates strongly correlated before the isotonic pass.
pub fn build_mi_table(
    c: &Constellation,
    s_min: f64,
    s_max: f64,
    n_points: usize,
    n_noise: usize,
    seed: u64,
) -> Result<MiTable, MiTableError> {
    if !(s_min > 0.0 && s_max > s_min && s_max.is_finite()) {
        return Err(MiTableError::Invalid(format!("need 0 < s_min < s_max, got [{s_min}, {s_max}]")));
    }
    if n_points < 16 {
        return Err(MiTableError::Invalid(format!("need at least 16 grid points, got {n_points}")));
    }
    let ratio = (s_max / s_min).ln();
    let mut grid = vec![0.0];
    grid.extend((0..n_points).map(|k| {
        if k + 1 == n_points {
            s_max
        } else {
            s_min * (ratio * k as f64 / (n_points - 1) as f64).exp()
        }
    }));
    let estimates: Vec<_> = grid[1..].par_iter().map(|&s| awgn_mutual_information(c, s, n_noise, seed)).collect();
    let mut values = vec![0.0];
    values.extend(estimates.iter().map(|e| e.value));
    let values = isotonic_nondecreasing(&values);
    let max_se = estimates.iter().map(|e| e.std_error).fold(0.0, f64::max);
    let max_gap = values.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let raw = RawTable {
        kind: c.kind(),
        bits: c.bits(),
        snr_grid: grid,
        mi_values: values,
        // Truth and interpolant are both monotone between nodes, so they differ
        // by at most one node gap plus the Monte Carlo error.
        abs_error_bound: max_se + max_gap,
    };
    MiTable::try_from(raw)
}

/// Builds a table with the crate defaults.
pub fn default_mi_table(c: &Constellation, seed: u64) -> MiTable {
    build_mi_table(c, DEFAULT_SNR_MIN, DEFAULT_SNR_MAX, DEFAULT_POINTS, DEFAULT_NOISE_DRAWS, seed)
        .expect("default table parameters are valid")
}

/// Least-squares nondecreasing fit (pool adjacent violators), equal weights.
pub(crate) fn isotonic_nondecreasing(values: &[f64]) -> Vec<f64> {
    // Blocks of (mean, count).
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() >= 2 {
            let (m1, c1) = blocks[blocks.len() - 1];
            let (m0, c0) = blocks[blocks.len() - 2];
            if m0 <= m1 {
                break;
            }
            blocks.pop();
            let merged = (m0 * c0 as f64 + m1 * c1 as f64) / (c0 + c1) as f64;
            *blocks.last_mut().unwrap() = (merged, c0 + c1);
        }
    }
    blocks.into_iter().flat_map(|(m, c)| std::iter::repeat_n(m, c)).collect()
}

/// Fritsch–Carlson derivative estimates for monotone cubic Hermite interpolation.
fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
    if n == 2 {
        return vec![delta[0]; 2];
    }
    let mut d = vec![0.0; n];
    for k in 1..n - 1 {
        if delta[k - 1] * delta[k] > 0.0 {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
        }
    }
    d[0] = pchip_end(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = pchip_end(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

fn pchip_end(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d.signum() != d0.signum() || d0 == 0.0 {
        0.0
    } else if d0.signum() != d1.signum() && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}
