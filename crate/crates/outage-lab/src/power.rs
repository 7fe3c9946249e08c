//! Long-term power control from noisy CSIT.
//!
//! [`PolicyKind::TruncatedInversion`] spends
//!
//! ```text
//! P = scale · min( snr^{d_peak}, snr · Π_i clamp(γ̂_i, snr^{-α_cap}, 1)^{-m} )
//! ```
//!
//! per codeword, the same power on every block. Its SNR exponent is
//! `π = min(d_peak, 1 + mΣ min(α̂_i⁺, α_cap))`. The default cap `α_cap = dₑ`
//! never changes the outage exponent: clamping an estimate below the CSIT
//! noise level moves the exponent point inside the same region without
//! affecting which blocks are good.

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use statrs::distribution::{ContinuousCDF, Gamma};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::channel::{draw_gains, ChannelError, ChannelParams};
use crate::rng::{stream_rng, subdomain, CHUNK_SIZE, DOMAIN_AUDIT, DOMAIN_PILOT};

/// Pilot draws used to calibrate a policy whose peak may bind.
pub const PILOT_SAMPLES: u64 = 200_000;
/// Fitted exponents of `E[P]` above this flag the average constraint as violated.
pub const AUDIT_SLOPE_LIMIT: f64 = 1.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PowerError {
    #[error("invalid power policy: {0}")]
    InvalidPolicy(String),
    #[error("power audit needs at least 10^4 samples per point, got {0}")]
    TooFewSamples(u64),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PolicyKind {
    #[serde(alias = "uniform")]
    Uniform,
    #[serde(alias = "truncated_inversion")]
    TruncatedInversion,
}

/// A fixed power multiplier, or one chosen per SNR so that `E[P] = snr`.
///
/// Serialized as a number or the string `"calibrated"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scale {
    Fixed(f64),
    Calibrated,
}

impl Serialize for Scale {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Scale::Fixed(v) => s.serialize_f64(*v),
            Scale::Calibrated => s.serialize_str("calibrated"),
        }
    }
}

impl<'de> Deserialize<'de> for Scale {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Scale::Fixed(v)),
            Raw::Text(t) if t == "calibrated" => Ok(Scale::Calibrated),
            Raw::Text(t) => {
                Err(serde::de::Error::custom(format!("scale must be a number or \"calibrated\", got `{t}`")))
            }
        }
    }
}

impl Default for Scale {
    fn default() -> Self {
        Scale::Fixed(1.0)
    }
}

fn default_d_peak() -> f64 {
    f64::INFINITY
}

fn default_m() -> u32 {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerPolicy {
    pub kind: PolicyKind,
    #[serde(with = "crate::serde_inf", default = "default_d_peak")]
    pub d_peak: f64,
    #[serde(default)]
    pub scale: Scale,
    /// Largest exponent coordinate the inversion compensates; defaults to `dₑ`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_cap: Option<f64>,
    /// Receive antennas; taken from the channel by [`PowerPolicy::for_channel`].
    #[serde(skip, default = "default_m")]
    pub m: u32,
    #[serde(skip)]
    pub d_e: f64,
}

impl PowerPolicy {
    pub fn uniform() -> Self {
        PowerPolicy {
            kind: PolicyKind::Uniform,
            d_peak: f64::INFINITY,
            scale: Scale::Fixed(1.0),
            alpha_cap: None,
            m: 1,
            d_e: 0.0,
        }
    }

    pub fn truncated_inversion(d_peak: f64, params: &ChannelParams) -> Self {
        PowerPolicy { kind: PolicyKind::TruncatedInversion, d_peak, ..Self::uniform() }.for_channel(params)
    }

    pub fn with_scale(mut self, scale: Scale) -> Self {
        self.scale = scale;
        self
    }

    pub fn with_alpha_cap(mut self, cap: f64) -> Self {
        self.alpha_cap = Some(cap);
        self
    }

    /// Copies `m` and `dₑ` from the channel.
    pub fn for_channel(mut self, params: &ChannelParams) -> Self {
        self.m = params.m;
        self.d_e = params.d_e;
        self
    }

    pub fn validate(&self) -> Result<(), PowerError> {
        let bad = |msg: String| Err(PowerError::InvalidPolicy(msg));
        if !(self.d_peak >= 1.0) {
            return bad(format!("d_peak must be ≥ 1 (or inf), got {}", self.d_peak));
        }
        if let Scale::Fixed(s) = self.scale {
            if !(s > 0.0 && s.is_finite()) {
                return bad(format!("scale must be positive, got {s}"));
            }
        }
        if let Some(c) = self.alpha_cap {
            if !(c >= 0.0 && c.is_finite()) {
                return bad(format!("alpha_cap must be finite and ≥ 0, got {c}"));
            }
        }
        if self.m < 1 {
            return bad("m must be ≥ 1".into());
        }
        Ok(())
    }

    pub fn alpha_cap(&self) -> f64 {
        self.alpha_cap.unwrap_or(self.d_e)
    }

    /// The multiplier in force; a calibrated policy not yet resolved counts as 1.
    pub fn scale_value(&self) -> f64 {
        match self.scale {
            Scale::Fixed(s) => s,
            Scale::Calibrated => 1.0,
        }
    }

    /// `ln(P / scale)`.
    fn log_unscaled(&self, gamma_hat: &[f64], snr: f64) -> f64 {
        let ln_snr = snr.ln();
        match self.kind {
            PolicyKind::Uniform => ln_snr,
            PolicyKind::TruncatedInversion => {
                let floor = snr.powf(-self.alpha_cap()).min(1.0);
                let m = self.m as f64;
                let inversion = ln_snr - m * gamma_hat.iter().map(|g| g.clamp(floor, 1.0).ln()).sum::<f64>();
                inversion.min(self.d_peak * ln_snr)
            }
        }
    }

    /// Upper limit `scale · snr^{d_peak}` on any single allocation.
    pub fn peak_power(&self, snr: f64) -> f64 {
        self.scale_value() * snr.powf(self.d_peak)
    }

    /// Replaces a calibrated scale by its value at `snr`.
    pub fn resolve(&self, params: &ChannelParams, snr: f64, seed: u64) -> Result<PowerPolicy, PowerError> {
        match self.scale {
            Scale::Fixed(_) => Ok(*self),
            Scale::Calibrated => Ok(self.with_scale(Scale::Fixed(calibrate_scale(self, params, snr, seed)?))),
        }
    }
}

/// Per-codeword power for estimates `gamma_hat`.
///
/// ```
/// use outage_lab::channel::ChannelParams;
/// use outage_lab::power::{allocate_power, PowerPolicy};
///
/// let params = ChannelParams::new(2, 1, 2.0);
/// let policy = PowerPolicy::truncated_inversion(10.0, &params);
/// // α̂ = (1, 1) gives π = 1 + 2 = 3.
/// let p = allocate_power(&policy, &[0.01, 0.01], 100.0);
/// assert!((p / 1e6 - 1.0).abs() < 1e-12);
/// ```
pub fn allocate_power(policy: &PowerPolicy, gamma_hat: &[f64], snr: f64) -> f64 {
    assert!(snr > 0.0, "power allocation needs snr > 0");
    match policy.kind {
        PolicyKind::Uniform => policy.scale_value() * snr,
        PolicyKind::TruncatedInversion => policy.scale_value() * policy.log_unscaled(gamma_hat, snr).exp(),
    }
}

/// `E[P]/scale` in closed form, when the peak can never bind.
///
/// Estimates are independent `Gamma(m, 1 − σₑ²)` variables, so the
/// expectation factors over blocks into one-dimensional integrals.
pub fn expected_unscaled_power(
    policy: &PowerPolicy,
    params: &ChannelParams,
    snr: f64,
) -> Result<Option<f64>, PowerError> {
    policy.validate()?;
    params.validate()?;
    let sigma2 = params.noise_variance(snr)?;
    if policy.kind == PolicyKind::Uniform {
        return Ok(Some(snr));
    }
    let m = policy.m as f64;
    let cap = policy.alpha_cap();
    if policy.d_peak < 1.0 + m * params.b as f64 * cap {
        return Ok(None);
    }
    let g = clamped_inverse_moment(policy.m, 1.0 - sigma2, snr.powf(-cap));
    Ok(Some(snr * g.powi(params.b as i32)))
}

/// `E[clamp(X, floor, 1)^{-m}]` for `X ~ Gamma(shape m, scale θ)`.
fn clamped_inverse_moment(m: u32, theta: f64, floor: f64) -> f64 {
    let mf = m as f64;
    if theta <= 0.0 {
        return floor.powf(-mf);
    }
    if floor >= 1.0 {
        return 1.0;
    }
    let dist = Gamma::new(mf, 1.0 / theta).expect("positive shape and rate");
    // ∫_floor^1 x^{-m} p(x) dx with x = e^u; the integrand becomes e^{-x/θ} / (Γ(m) θ^m).
    let (a, b) = (floor.ln(), 0.0);
    let intervals = 8192;
    let h = (b - a) / intervals as f64;
    let f = |u: f64| (-(u.exp()) / theta).exp();
    let mut acc = f(a) + f(b);
    for k in 1..intervals {
        acc += if k % 2 == 1 { 4.0 } else { 2.0 } * f(a + k as f64 * h);
    }
    let middle = acc * h / 3.0 * (-ln_gamma(mf) - mf * theta.ln()).exp();
    dist.cdf(floor) * floor.powf(-mf) + middle + (1.0 - dist.cdf(1.0))
}

/// Scale making `E[P] = snr`, clamped to at most 1 so the peak limit still holds.
///
/// Exact when the peak cannot bind; otherwise estimated from
/// [`PILOT_SAMPLES`] pilot draws.
pub fn calibrate_scale(policy: &PowerPolicy, params: &ChannelParams, snr: f64, seed: u64) -> Result<f64, PowerError> {
    let unscaled = PowerPolicy { scale: Scale::Fixed(1.0), ..*policy };
    let mean = match expected_unscaled_power(&unscaled, params, snr)? {
        Some(v) => v,
        None => {
            let domain = subdomain(DOMAIN_PILOT, snr.to_bits());
            mean_power(&unscaled, params, snr, PILOT_SAMPLES, seed, domain)?.0
        }
    };
    Ok((snr / mean).min(1.0))
}

/// Monte Carlo mean of `P`, its standard error, and the number of draws above the peak limit.
fn mean_power(
    policy: &PowerPolicy,
    params: &ChannelParams,
    snr: f64,
    n_samples: u64,
    seed: u64,
    domain: u64,
) -> Result<(f64, f64, u64), PowerError> {
    let sigma2 = params.noise_variance(snr)?;
    let b = params.b as usize;
    let m = params.m as usize;
    let peak = policy.peak_power(snr) * (1.0 + 1e-12);
    let chunks = n_samples.div_ceil(CHUNK_SIZE);
    let partial: Vec<(f64, f64, u64)> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(seed, domain, k);
            let (mut g, mut gh) = (vec![0.0; b], vec![0.0; b]);
            let len = CHUNK_SIZE.min(n_samples - k * CHUNK_SIZE);
            let (mut s, mut s2, mut over) = (0.0, 0.0, 0);
            for _ in 0..len {
                draw_gains(&mut rng, m, sigma2, &mut g, &mut gh);
                let p = allocate_power(policy, &gh, snr);
                if p > peak {
                    over += 1;
                }
                let r = p / snr;
                s += r;
                s2 += r * r;
            }
            (s, s2, over)
        })
        .collect();
    let (s, s2, over) = partial.iter().fold((0.0, 0.0, 0), |a, p| (a.0 + p.0, a.1 + p.1, a.2 + p.2));
    let n = n_samples as f64;
    let mean = s / n;
    let var = ((s2 - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok((mean * snr, (var / n).sqrt() * snr, over))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditPoint {
    pub snr: f64,
    pub scale: f64,
    /// Empirical `E[P] / snr`.
    pub mean_ratio: f64,
    pub std_error: f64,
    /// Draws with `P > scale · snr^{d_peak}`.
    pub peak_violations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerAudit {
    pub points: Vec<AuditPoint>,
    /// Least-squares slope of `ln E[P]` against `ln snr`.
    pub slope: f64,
    /// True when the slope exceeds [`AUDIT_SLOPE_LIMIT`].
    pub violation: bool,
}

/// Checks the average and peak constraints empirically over `snr_grid` (linear SNRs > 1).
pub fn audit_average_power(
    policy: &PowerPolicy,
    params: &ChannelParams,
    snr_grid: &[f64],
    n_samples: u64,
    seed: u64,
) -> Result<PowerAudit, PowerError> {
    policy.validate()?;
    params.validate()?;
    if n_samples < 10_000 {
        return Err(PowerError::TooFewSamples(n_samples));
    }
    let mut points = Vec::with_capacity(snr_grid.len());
    for (j, &snr) in snr_grid.iter().enumerate() {
        let resolved = policy.resolve(params, snr, seed)?;
        let (mean, se, over) = mean_power(&resolved, params, snr, n_samples, seed, subdomain(DOMAIN_AUDIT, j as u64))?;
        points.push(AuditPoint {
            snr,
            scale: resolved.scale_value(),
            mean_ratio: mean / snr,
            std_error: se / snr,
            peak_violations: over,
        });
    }
    let slope = if points.len() >= 2 {
        let xs: Vec<f64> = points.iter().map(|p| p.snr.ln()).collect();
        let ys: Vec<f64> = points.iter().map(|p| (p.mean_ratio * p.snr).ln()).collect();
        crate::stats::least_squares(&xs, &ys, None).slope
    } else {
        f64::NAN
    };
    Ok(PowerAudit { points, slope, violation: slope > AUDIT_SLOPE_LIMIT })
}
