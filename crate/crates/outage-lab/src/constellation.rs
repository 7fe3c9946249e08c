//! Normalized signal constellations and their AWGN mutual information.
//!
//! A [`Constellation`] is a set of `2^M` distinct complex points with zero
//! mean and unit average energy, used with a uniform input distribution.
//! [`awgn_mutual_information`] estimates
//!
//! ```text
//! I_X(s) = E[ log2( e^{-|Y - sqrt(s) X|^2} / sum_x' Q(x') e^{-|Y - sqrt(s) x'|^2} ) ]
//! ```
//!
//! for `Y = sqrt(s) X + W`, `W ~ CN(0, 1)`: Monte Carlo over the noise, with
//! the inputs cycled deterministically and every hypothesis enumerated inside
//! the log-sum-exp.

use std::f64::consts::{LN_2, PI};
use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{stream_rng, DOMAIN_MI_NOISE};

/// Effective SNRs at or above this value are treated as noiseless.
pub const SATURATION_SNR: f64 = 1e12;

const CENTER_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstellationError {
    #[error("unsupported constellation: {kind} with M = {bits}")]
    Unsupported { kind: ConstellationKind, bits: u32 },
    #[error("invalid constellation: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstellationKind {
    Psk,
    Qam,
    Custom,
}

impl fmt::Display for ConstellationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConstellationKind::Psk => "PSK",
            ConstellationKind::Qam => "QAM",
            ConstellationKind::Custom => "custom",
        })
    }
}

impl std::str::FromStr for ConstellationKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "psk" => Ok(ConstellationKind::Psk),
            "qam" => Ok(ConstellationKind::Qam),
            "custom" => Ok(ConstellationKind::Custom),
            other => Err(format!("unknown constellation kind `{other}`")),
        }
    }
}

/// A zero-mean, unit-energy signal set of size `2^M` with uniform prior.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    points: Vec<Complex64>,
    bits: u32,
    kind: ConstellationKind,
}

impl Constellation {
    /// Builds `2^M`-PSK or a rectangular `2^M`-QAM.
    ///
    /// PSK starts at angle 0, so `(Psk, 1)` is BPSK `{+1, -1}`. QAM supports
    /// `M ∈ {1, 2, 4, 6}`; odd sizes other than `M = 1` have no square layout.
    pub fn build(kind: ConstellationKind, bits: u32) -> Result<Self, ConstellationError> {
        let unsupported = || ConstellationError::Unsupported { kind, bits };
        let points = match kind {
            ConstellationKind::Psk if (1..=8).contains(&bits) => {
                let size = 1usize << bits;
                (0..size).map(|k| Complex64::from_polar(1.0, 2.0 * PI * k as f64 / size as f64)).collect()
            }
            ConstellationKind::Qam if bits == 1 => {
                vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)]
            }
            ConstellationKind::Qam if matches!(bits, 2 | 4 | 6) => {
                let side = 1usize << (bits / 2);
                let levels: Vec<f64> = (0..side).map(|k| (2 * k) as f64 - (side - 1) as f64).collect();
                let mut pts = Vec::with_capacity(side * side);
                for &re in &levels {
                    for &im in &levels {
                        pts.push(Complex64::new(re, im));
                    }
                }
                let energy = pts.iter().map(|p| p.norm_sqr()).sum::<f64>() / pts.len() as f64;
                let scale = energy.sqrt().recip();
                pts.into_iter().map(|p| p * scale).collect()
            }
            _ => return Err(unsupported()),
        };
        Self::from_parts(points, bits, kind)
    }

    /// Wraps user-supplied points after checking every invariant.
    pub fn custom(points: Vec<Complex64>) -> Result<Self, ConstellationError> {
        let size = points.len();
        if size < 2 || !size.is_power_of_two() {
            return Err(ConstellationError::Invalid(format!("{size} points is not a power of two ≥ 2")));
        }
        Self::from_parts(points, size.trailing_zeros(), ConstellationKind::Custom)
    }

    fn from_parts(points: Vec<Complex64>, bits: u32, kind: ConstellationKind) -> Result<Self, ConstellationError> {
        let size = points.len() as f64;
        if points.len() != 1 << bits {
            return Err(ConstellationError::Invalid("size is not 2^M".into()));
        }
        let mean = points.iter().sum::<Complex64>() / size;
        if mean.norm() > CENTER_TOL {
            return Err(ConstellationError::Invalid(format!("mean {mean} is not zero")));
        }
        let energy = points.iter().map(|p| p.norm_sqr()).sum::<f64>() / size;
        if (energy - 1.0).abs() > CENTER_TOL {
            return Err(ConstellationError::Invalid(format!("average energy {energy} is not one")));
        }
        for (i, a) in points.iter().enumerate() {
            if points[i + 1..].iter().any(|b| (a - b).norm() <= 1e-12) {
                return Err(ConstellationError::Invalid("points are not distinct".into()));
            }
        }
        Ok(Constellation { points, bits, kind })
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    /// `M`, the number of bits per symbol.
    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn kind(&self) -> ConstellationKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Short label such as `4-QAM` or `2-PSK`.
    pub fn label(&self) -> String {
        format!("{}-{}", self.len(), self.kind)
    }
}

/// A Monte Carlo estimate together with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiEstimate {
    /// Bits per channel use, clamped to `[0, M]`.
    pub value: f64,
    pub std_error: f64,
}

/// Numerically stable `ln(sum_k exp(t_k))`.
pub(crate) fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

pub(crate) fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let sd = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(sd * re, sd * im)
}

/// Estimates `I_X(s)` with `n_noise` noise draws.
///
/// Draw `k` transmits point `k mod 2^M`, so the inputs are exactly balanced
/// whenever `n_noise` is a multiple of the constellation size. Identical
/// arguments give bit-identical results.
pub fn awgn_mutual_information(c: &Constellation, snr: f64, n_noise: usize, seed: u64) -> MiEstimate {
    assert!(snr >= 0.0 && snr.is_finite() || snr == f64::INFINITY, "SNR must be nonnegative");
    assert!(n_noise >= 1, "need at least one noise draw");
    let bits = c.bits() as f64;
    if snr == 0.0 {
        return MiEstimate { value: 0.0, std_error: 0.0 };
    }
    if snr >= SATURATION_SNR {
        return MiEstimate { value: bits, std_error: 0.0 };
    }
    let amp = snr.sqrt();
    let pts = c.points();
    let mut rng = stream_rng(seed, DOMAIN_MI_NOISE, 0);
    let mut terms = vec![0.0; pts.len()];
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for k in 0..n_noise {
        let x = pts[k % pts.len()];
        let w = complex_normal(&mut rng, 1.0);
        let w_energy = w.norm_sqr();
        for (t, xp) in terms.iter_mut().zip(pts) {
            *t = w_energy - (amp * (x - xp) + w).norm_sqr();
        }
        // log2 of the ratio inside the expectation, plus log2 |X| from Q(x') = 2^-M.
        let sample = bits - log_sum_exp(&terms) / LN_2;
        sum += sample;
        sum_sq += sample * sample;
    }
    let n = n_noise as f64;
    let mean = sum / n;
    let var = if n_noise > 1 { ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
    MiEstimate { value: mean.clamp(0.0, bits), std_error: (var / n).sqrt() }
}
