//! Block-fading channel with noisy CSIT.
//!
//! Each of the `B` blocks has an `m`-antenna gain vector `h_i = ĥ_i + e_i`.
//! The transmitter sees `ĥ_i`; the error `e_i` has i.i.d. `CN(0, σₑ²)`
//! entries with `σₑ² = SNR^{-dₑ}`, and `ĥ_i` has `CN(0, 1 − σₑ²)` entries so
//! that `h_i` stays unit-variance.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constellation::complex_normal;
use crate::rng::{stream_rng, DOMAIN_CHANNEL};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("invalid channel parameters: {0}")]
    InvalidParams(String),
    #[error("CSIT noisier than channel: σₑ² = {sigma2} > 1 at SNR {snr}")]
    CsitNoisierThanChannel { sigma2: f64, snr: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelParams {
    #[serde(rename = "B")]
    pub b: u32,
    pub m: u32,
    pub d_e: f64,
    /// Symbols per block; carried as metadata only.
    #[serde(rename = "L", default)]
    pub block_length: u32,
}

impl ChannelParams {
    pub fn new(b: u32, m: u32, d_e: f64) -> Self {
        ChannelParams { b, m, d_e, block_length: 0 }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if self.b < 1 || self.m < 1 {
            return Err(ChannelError::InvalidParams(format!("need B, m ≥ 1 (got {}, {})", self.b, self.m)));
        }
        if !(self.d_e >= 0.0 && self.d_e.is_finite()) {
            return Err(ChannelError::InvalidParams(format!("need finite d_e ≥ 0, got {}", self.d_e)));
        }
        Ok(())
    }

    /// `σₑ²` at `snr`, rejecting values above one.
    pub fn noise_variance(&self, snr: f64) -> Result<f64, ChannelError> {
        let sigma2 = csit_noise_variance(self.d_e, snr);
        if sigma2 > 1.0 {
            return Err(ChannelError::CsitNoisierThanChannel { sigma2, snr });
        }
        Ok(sigma2)
    }
}

/// `σₑ² = snr^{-dₑ}`.
pub fn csit_noise_variance(d_e: f64, snr: f64) -> f64 {
    assert!(snr > 0.0 && d_e >= 0.0, "need snr > 0 and d_e ≥ 0");
    snr.powf(-d_e)
}

/// One joint draw of true gains, estimates and errors. Matrices are `B × m`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSample {
    pub b: usize,
    pub m: usize,
    pub sigma2: f64,
    pub h: Vec<Complex64>,
    pub h_hat: Vec<Complex64>,
    pub e: Vec<Complex64>,
    /// `‖h_i‖²`.
    pub gamma: Vec<f64>,
    /// `‖ĥ_i‖²`.
    pub gamma_hat: Vec<f64>,
    /// `(2/σₑ²)‖h_i‖²`.
    pub gamma_bar: Vec<f64>,
}

/// Draws block gains into `gamma` and `gamma_hat` without keeping the vectors.
///
/// Consumes the generator exactly like [`sample_channel`]: per block, per
/// antenna, first `ĥ` then `e`.
pub(crate) fn draw_gains<R: Rng + ?Sized>(
    rng: &mut R,
    m: usize,
    sigma2: f64,
    gamma: &mut [f64],
    gamma_hat: &mut [f64],
) {
    let hat_var = (1.0 - sigma2).max(0.0);
    for (g, gh) in gamma.iter_mut().zip(gamma_hat.iter_mut()) {
        let (mut sg, mut sgh) = (0.0, 0.0);
        for _ in 0..m {
            let hh = complex_normal(rng, hat_var);
            let e = complex_normal(rng, sigma2);
            sg += (hh + e).norm_sqr();
            sgh += hh.norm_sqr();
        }
        *g = sg;
        *gh = sgh;
    }
}

/// Samples the channel for stream `stream` of `seed`.
pub fn sample_channel(p: &ChannelParams, snr: f64, seed: u64, stream: u64) -> Result<ChannelSample, ChannelError> {
    p.validate()?;
    let sigma2 = p.noise_variance(snr)?;
    let mut rng = stream_rng(seed, DOMAIN_CHANNEL, stream);
    Ok(sample_with(&mut rng, p, sigma2))
}

pub(crate) fn sample_with<R: Rng + ?Sized>(rng: &mut R, p: &ChannelParams, sigma2: f64) -> ChannelSample {
    let (b, m) = (p.b as usize, p.m as usize);
    let hat_var = (1.0 - sigma2).max(0.0);
    let mut h_hat = Vec::with_capacity(b * m);
    let mut e = Vec::with_capacity(b * m);
    for _ in 0..b * m {
        h_hat.push(complex_normal(rng, hat_var));
        e.push(complex_normal(rng, sigma2));
    }
    let h: Vec<Complex64> = h_hat.iter().zip(&e).map(|(a, b)| a + b).collect();
    let row_energy = |v: &[Complex64]| v.chunks(m).map(|r| r.iter().map(|z| z.norm_sqr()).sum()).collect::<Vec<f64>>();
    let gamma = row_energy(&h);
    let gamma_hat = row_energy(&h_hat);
    let gamma_bar = gamma.iter().map(|g| 2.0 / sigma2 * g).collect();
    ChannelSample { b, m, sigma2, h, h_hat, e, gamma, gamma_hat, gamma_bar }
}

/// Exponent coordinates `α̂_i = −ln γ̂_i / ln snr` and `ᾱ_i = −ln γ̄_i / ln snr`.
///
/// A zero gain maps to `+∞`.
pub fn exponent_coords(s: &ChannelSample, snr: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(snr > 1.0, "exponent coordinates need snr > 1");
    let ln_snr = snr.ln();
    let coord = |g: &f64| if *g == 0.0 { f64::INFINITY } else { -g.ln() / ln_snr };
    (s.gamma_hat.iter().map(coord).collect(), s.gamma_bar.iter().map(coord).collect())
}
