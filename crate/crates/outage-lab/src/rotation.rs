//! Full-diversity rotations and the mutual information of rotated groups.
//!
//! A codeword of `B` blocks is split into `K = B/N` groups of `N` blocks; each
//! group sends `U s` for `s ∈ 𝒳^N` and a unitary `U`. The rotation has full
//! diversity when every nonzero difference `s − s'` is mapped to a vector
//! with all entries nonzero, so one good block in a group suffices to tell
//! all `N` symbols apart.
//!
//! The shipped family:
//!
//! * `N = 2, 4`: `U_{jk} = ζ_j^k / √N` with `ζ_j` the roots of `x^N − i`.
//!   Differences of QAM/PSK points with integer-lattice structure cannot make
//!   `Σ_k d_k ζ^k` vanish since `x^N − i` is irreducible over `ℚ(i)`.
//! * `N = 3`: the real rotation `(2/√7) cos((2j−1)(2k−1)π/14)`.

use std::f64::consts::{LN_2, PI};
use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constellation::{complex_normal, log_sum_exp, Constellation, MiEstimate, SATURATION_SNR};
use crate::mi_table::isotonic_nondecreasing;
use crate::rng::{stream_rng, DOMAIN_GROUP_MI};

/// Entries with modulus at or below this count as zero.
pub const ZERO_TOL: f64 = 1e-9;
pub const UNITARY_TOL: f64 = 1e-10;
/// Largest `(2^M)^N` enumerated by [`verify_full_diversity`].
pub const VERIFY_BUDGET: u64 = 1 << 20;
/// Largest `2^{MN}` hypothesis count for [`rotated_group_mi`].
pub const GROUP_MI_BUDGET: u64 = 1 << 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RotationError {
    #[error("unsupported rotation: {family} with N = {n}")]
    Unsupported { family: RotationFamily, n: usize },
    #[error("matrix is not unitary: ‖UUᴴ − I‖∞ = {0:e}")]
    NotUnitary(f64),
    #[error("invalid rotation: {0}")]
    Invalid(String),
    #[error("budget exceeded: {what} = {value} > {limit}")]
    BudgetExceeded { what: &'static str, value: u64, limit: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RotationFamily {
    Identity,
    Cyclotomic,
    Custom,
}

impl fmt::Display for RotationFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RotationFamily::Identity => "identity",
            RotationFamily::Cyclotomic => "cyclotomic",
            RotationFamily::Custom => "custom",
        })
    }
}

impl std::str::FromStr for RotationFamily {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "identity" => Ok(RotationFamily::Identity),
            "cyclotomic" => Ok(RotationFamily::Cyclotomic),
            "custom" => Ok(RotationFamily::Custom),
            other => Err(format!("unknown rotation family `{other}`")),
        }
    }
}

/// A square complex matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<Complex64>,
}

impl Matrix {
    pub fn from_rows(n: usize, data: Vec<Complex64>) -> Result<Self, RotationError> {
        if n == 0 || data.len() != n * n {
            return Err(RotationError::Invalid(format!("need {n}×{n} entries, got {}", data.len())));
        }
        Ok(Matrix { n, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            data[i * n + i] = Complex64::new(1.0, 0.0);
        }
        Matrix { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.n + j]
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.data
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.n];
        self.apply_into(v, &mut out);
        out
    }

    fn apply_into(&self, v: &[Complex64], out: &mut [Complex64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.data[i * self.n..(i + 1) * self.n].iter().zip(v).map(|(a, b)| a * b).sum();
        }
    }

    /// `max_{ij} |(U Uᴴ − I)_{ij}|`.
    pub fn unitarity_error(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let dot: Complex64 = (0..n).map(|k| self.get(i, k) * self.get(j, k).conj()).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).norm());
            }
        }
        worst
    }

    /// Loads `{"N": n, "entries": [[re, im], …]}` (row-major) and checks unitarity.
    pub fn from_json(text: &str) -> Result<Self, RotationError> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            #[serde(rename = "N")]
            n: usize,
            entries: Vec<[f64; 2]>,
        }
        let raw: Raw = serde_json::from_str(text).map_err(|e| RotationError::Invalid(e.to_string()))?;
        let m = Matrix::from_rows(raw.n, raw.entries.iter().map(|[re, im]| Complex64::new(*re, *im)).collect())?;
        let err = m.unitarity_error();
        if err > UNITARY_TOL {
            return Err(RotationError::NotUnitary(err));
        }
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        let entries: Vec<[f64; 2]> = self.data.iter().map(|z| [z.re, z.im]).collect();
        serde_json::json!({ "N": self.n, "entries": entries }).to_string()
    }
}

/// Builds an `N × N` rotation of the given family, certified unitary.
pub fn build_rotation(family: RotationFamily, n: usize) -> Result<Matrix, RotationError> {
    let unsupported = Err(RotationError::Unsupported { family, n });
    let m = match (family, n) {
        (_, 1) => Matrix::identity(1),
        (RotationFamily::Identity, n) if n >= 1 => Matrix::identity(n),
        (RotationFamily::Cyclotomic, 2 | 4) => {
            let scale = 1.0 / (n as f64).sqrt();
            let data = (0..n)
                .flat_map(|j| {
                    let zeta = Complex64::from_polar(1.0, PI * (4 * j + 1) as f64 / (2 * n) as f64);
                    (0..n).map(move |k| zeta.powu(k as u32) * scale)
                })
                .collect();
            Matrix { n, data }
        }
        (RotationFamily::Cyclotomic, 3) => {
            let scale = 2.0 / 7f64.sqrt();
            let data = (1..=3)
                .flat_map(|j| {
                    (1..=3).map(move |k| {
                        Complex64::new(scale * (((2 * j - 1) * (2 * k - 1)) as f64 * PI / 14.0).cos(), 0.0)
                    })
                })
                .collect();
            Matrix { n, data }
        }
        _ => return unsupported,
    };
    let err = m.unitarity_error();
    if err > UNITARY_TOL {
        return Err(RotationError::NotUnitary(err));
    }
    Ok(m)
}

/// One rotation per group of `N` consecutive blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationScheme {
    pub family: RotationFamily,
    pub matrices: Vec<Matrix>,
}

impl RotationScheme {
    /// `B/N` copies of the same rotation.
    pub fn repeated(family: RotationFamily, matrix: Matrix, b: usize) -> Result<Self, RotationError> {
        let n = matrix.dim();
        if !b.is_multiple_of(n) {
            return Err(RotationError::Invalid(format!("N = {n} does not divide B = {b}")));
        }
        Ok(RotationScheme { family, matrices: vec![matrix; b / n] })
    }

    pub fn build(family: RotationFamily, n: usize, b: usize) -> Result<Self, RotationError> {
        Self::repeated(family, build_rotation(family, n)?, b)
    }

    pub fn n(&self) -> usize {
        self.matrices[0].dim()
    }

    pub fn k(&self) -> usize {
        self.matrices.len()
    }
}

fn complex_pairs<S: serde::Serializer>(v: &Option<Vec<Complex64>>, s: S) -> Result<S::Ok, S::Error> {
    v.as_ref().map(|v| v.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>()).serialize(s)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiversityReport {
    pub ok: bool,
    pub min_product_distance: f64,
    /// A difference vector with a (numerically) zero rotated entry.
    #[serde(serialize_with = "complex_pairs")]
    pub witness: Option<Vec<Complex64>>,
    pub differences_checked: u64,
}

/// Distinct values of `x − x'` over the constellation, starting with 0.
fn difference_set(c: &Constellation) -> Vec<Complex64> {
    let mut out: Vec<Complex64> = vec![Complex64::new(0.0, 0.0)];
    for a in c.points() {
        for b in c.points() {
            let d = a - b;
            if out.iter().all(|o| (o - d).norm() > ZERO_TOL) {
                out.push(d);
            }
        }
    }
    out
}

/// Exhaustively checks that `U` rotates every nonzero difference to a vector
/// without zero entries.
///
/// ```
/// use outage_lab::constellation::{Constellation, ConstellationKind};
/// use outage_lab::rotation::{build_rotation, verify_full_diversity, RotationFamily};
///
/// let qpsk = Constellation::build(ConstellationKind::Psk, 2).unwrap();
/// let u = build_rotation(RotationFamily::Cyclotomic, 2).unwrap();
/// let report = verify_full_diversity(&u, &qpsk).unwrap();
/// assert!(report.ok && report.min_product_distance > 0.0);
/// ```
pub fn verify_full_diversity(u: &Matrix, c: &Constellation) -> Result<DiversityReport, RotationError> {
    let n = u.dim();
    let size = (c.len() as u64).checked_pow(n as u32).unwrap_or(u64::MAX);
    if size > VERIFY_BUDGET {
        return Err(RotationError::BudgetExceeded { what: "(2^M)^N", value: size, limit: VERIFY_BUDGET });
    }
    let diffs = difference_set(c);
    let total = (diffs.len() as u64).pow(n as u32);
    let mut d = vec![Complex64::new(0.0, 0.0); n];
    let mut rotated = vec![Complex64::new(0.0, 0.0); n];
    let mut min_pd = f64::INFINITY;
    let mut witness = None;
    for idx in 1..total {
        let mut rest = idx;
        for slot in d.iter_mut() {
            *slot = diffs[(rest % diffs.len() as u64) as usize];
            rest /= diffs.len() as u64;
        }
        u.apply_into(&d, &mut rotated);
        let pd: f64 = rotated.iter().map(|z| z.norm()).product();
        min_pd = min_pd.min(pd);
        if witness.is_none() && rotated.iter().any(|z| z.norm() <= ZERO_TOL) {
            witness = Some(d.clone());
        }
    }
    Ok(DiversityReport {
        ok: witness.is_none(),
        min_product_distance: if total > 1 { min_pd } else { 0.0 },
        witness,
        differences_checked: total - 1,
    })
}

/// All rotated codewords `U s`, `s ∈ 𝒳^N`, flattened (`N` entries each).
fn rotated_codebook(u: &Matrix, c: &Constellation) -> Vec<Complex64> {
    let n = u.dim();
    let q = c.len();
    let count = q.pow(n as u32);
    let mut out = Vec::with_capacity(count * n);
    let mut s = vec![Complex64::new(0.0, 0.0); n];
    let mut r = vec![Complex64::new(0.0, 0.0); n];
    for idx in 0..count {
        let mut rest = idx;
        for slot in s.iter_mut() {
            *slot = c.points()[rest % q];
            rest /= q;
        }
        u.apply_into(&s, &mut r);
        out.extend_from_slice(&r);
    }
    out
}

fn check_group_budget(u: &Matrix, c: &Constellation) -> Result<(), RotationError> {
    let hyp = 1u64.checked_shl(c.bits() * u.dim() as u32).unwrap_or(u64::MAX);
    if hyp > GROUP_MI_BUDGET {
        return Err(RotationError::BudgetExceeded { what: "2^(MN)", value: hyp, limit: GROUP_MI_BUDGET });
    }
    Ok(())
}

/// Monte Carlo `(1/N)·I(s; z)` for `z_i = √snr_i (U s)_i + w_i`, in bits per block.
pub fn rotated_group_mi(
    u: &Matrix,
    c: &Constellation,
    effective_snrs: &[f64],
    n_noise: usize,
    seed: u64,
) -> Result<MiEstimate, RotationError> {
    check_group_budget(u, c)?;
    let n = u.dim();
    if effective_snrs.len() != n || effective_snrs.iter().any(|s| !(*s >= 0.0)) {
        return Err(RotationError::Invalid(format!("need {n} nonnegative SNRs")));
    }
    let book = rotated_codebook(u, c);
    Ok(group_mi_with_book(&book, n, c.bits(), effective_snrs, n_noise, seed))
}

fn group_mi_with_book(book: &[Complex64], n: usize, bits: u32, snrs: &[f64], n_noise: usize, seed: u64) -> MiEstimate {
    assert!(n_noise >= 1);
    let bits_f = bits as f64;
    if snrs.iter().all(|&s| s == 0.0) {
        return MiEstimate { value: 0.0, std_error: 0.0 };
    }
    if snrs.iter().all(|&s| s >= SATURATION_SNR) {
        return MiEstimate { value: bits_f, std_error: 0.0 };
    }
    let amps: Vec<f64> = snrs.iter().map(|s| s.min(SATURATION_SNR).sqrt()).collect();
    let hyps = book.len() / n;
    let mut rng = stream_rng(seed, DOMAIN_GROUP_MI, 0);
    let mut w = vec![Complex64::new(0.0, 0.0); n];
    let mut terms = vec![0.0; hyps];
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for k in 0..n_noise {
        let sent = &book[(k % hyps) * n..(k % hyps + 1) * n];
        for wi in w.iter_mut() {
            *wi = complex_normal(&mut rng, 1.0);
        }
        let w_energy: f64 = w.iter().map(|z| z.norm_sqr()).sum();
        for (h, t) in terms.iter_mut().enumerate() {
            let cand = &book[h * n..(h + 1) * n];
            let dist: f64 = (0..n).map(|i| (amps[i] * (sent[i] - cand[i]) + w[i]).norm_sqr()).sum();
            *t = w_energy - dist;
        }
        let sample = (bits_f * n as f64 - log_sum_exp(&terms) / LN_2) / n as f64;
        sum += sample;
        sum_sq += sample * sample;
    }
    let nf = n_noise as f64;
    let mean = sum / nf;
    let var = if n_noise > 1 { ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0) } else { 0.0 };
    MiEstimate { value: mean.clamp(0.0, bits_f), std_error: (var / nf).sqrt() }
}

/// Group mutual information tabulated on a product grid of per-block SNRs.
///
/// Values are interpolated multilinearly in `ln(1 + s)` per axis after a
/// running-maximum pass along every axis, which keeps lookups nondecreasing
/// in each SNR.
#[derive(Debug, Clone)]
pub struct GroupMiTable {
    n: usize,
    bits: u32,
    nodes: Vec<f64>,
    log_nodes: Vec<f64>,
    values: Vec<f64>,
}

/// Nodes per axis used by [`GroupMiTable::build_default`], indexed by `N`.
const DEFAULT_NODES: [usize; 5] = [0, 48, 32, 16, 10];

impl GroupMiTable {
    /// Builds the table with `nodes_per_axis` nodes (`0` plus a log grid on `[1e-2, 1e5]`).
    pub fn build(
        u: &Matrix,
        c: &Constellation,
        nodes_per_axis: usize,
        n_noise: usize,
        seed: u64,
    ) -> Result<Self, RotationError> {
        check_group_budget(u, c)?;
        if nodes_per_axis < 4 {
            return Err(RotationError::Invalid("need at least 4 nodes per axis".into()));
        }
        let n = u.dim();
        let (lo, hi): (f64, f64) = (1e-2, 1e5);
        let mut nodes = vec![0.0];
        nodes.extend((0..nodes_per_axis - 1).map(|k| lo * (hi / lo).powf(k as f64 / (nodes_per_axis - 2) as f64)));
        let total = nodes.len().pow(n as u32);
        let book = rotated_codebook(u, c);
        let mut values: Vec<f64> = (0..total)
            .into_par_iter()
            .map(|idx| {
                let snrs = Self::unflatten(idx, n, &nodes);
                group_mi_with_book(&book, n, c.bits(), &snrs, n_noise, seed).value
            })
            .collect();
        // Isotonic pass along the first axis, running maxima along the rest.
        let len = nodes.len();
        for axis in 0..n {
            let stride = len.pow(axis as u32);
            for start in 0..total {
                if (start / stride) % len != 0 {
                    continue;
                }
                let line: Vec<f64> = (0..len).map(|k| values[start + k * stride]).collect();
                let fixed = if axis == 0 { isotonic_nondecreasing(&line) } else { line };
                let mut run = f64::NEG_INFINITY;
                for (k, v) in fixed.into_iter().enumerate() {
                    run = run.max(v);
                    values[start + k * stride] = run;
                }
            }
        }
        let log_nodes = nodes.iter().map(|s| s.ln_1p()).collect();
        Ok(GroupMiTable { n, bits: c.bits(), nodes, log_nodes, values })
    }

    pub fn build_default(u: &Matrix, c: &Constellation, seed: u64) -> Result<Self, RotationError> {
        let nodes = DEFAULT_NODES.get(u.dim()).copied().unwrap_or(8);
        Self::build(u, c, nodes, 2000, seed)
    }

    fn unflatten(idx: usize, n: usize, nodes: &[f64]) -> Vec<f64> {
        let mut rest = idx;
        (0..n)
            .map(|_| {
                let v = nodes[rest % nodes.len()];
                rest /= nodes.len();
                v
            })
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// Interpolated group mutual information, bits per block.
    pub fn lookup(&self, snrs: &[f64]) -> f64 {
        assert_eq!(snrs.len(), self.n);
        let len = self.nodes.len();
        let hi = *self.nodes.last().unwrap();
        // Per axis: lower node index and weight of the upper node.
        let cells: Vec<(usize, f64)> = snrs
            .iter()
            .map(|&s| {
                if !(s > 0.0) {
                    (0, 0.0)
                } else if s >= hi {
                    (len - 2, 1.0)
                } else {
                    let k = self.nodes.partition_point(|&g| g <= s) - 1;
                    let x = s.ln_1p();
                    (k, (x - self.log_nodes[k]) / (self.log_nodes[k + 1] - self.log_nodes[k]))
                }
            })
            .collect();
        let mut acc = 0.0;
        for corner in 0..(1usize << self.n) {
            let mut weight = 1.0;
            let mut idx = 0;
            let mut stride = 1;
            for (axis, &(k, t)) in cells.iter().enumerate() {
                let up = corner >> axis & 1 == 1;
                weight *= if up { t } else { 1.0 - t };
                idx += (k + up as usize) * stride;
                stride *= len;
            }
            if weight != 0.0 {
                acc += weight * self.values[idx];
            }
        }
        acc.clamp(0.0, self.bits as f64)
    }
}
