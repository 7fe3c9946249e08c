//! Outage SNR exponents.
//!
//! Three independent routes to the same numbers:
//!
//! * closed forms ([`outage_exponent_thm1`], [`outage_exponent_thm2`]) and the
//!   per-region case formulas ([`case_exponent_dn`]);
//! * a pattern-LP oracle ([`oracle_exponent`], [`oracle_exponent_rotated`])
//!   that enumerates good/bad block patterns and solves one small linear
//!   program per pattern;
//! * a coarse grid search ([`grid_exponent`]) that checks the LP on tiny
//!   instances.
//!
//! Exponent coordinates follow the usual change of variables
//! `γ̂ = SNR^{-α̂}`, `γ̄ = SNR^{-ᾱ}`. In region `n`, the first `B − n` blocks
//! have estimates at or below the CSIT noise level (`α̂ ≥ dₑ`, free `ᾱ ≥ 0`)
//! and the last `n` blocks are well estimated (`α̂ < dₑ`, `ᾱ = α̂ − dₑ`).

mod closed_form;
mod lp;
mod oracle;

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use closed_form::{
    case_exponent_dn, outage_exponent_thm1, outage_exponent_thm2, rotated_exponent_dn, staircase, StaircaseRow,
};
pub use lp::{solve_lp, Constraint, LpOutcome, Relation};
pub use oracle::{grid_exponent, oracle_exponent, oracle_exponent_capped, oracle_exponent_rotated, ORACLE_MAX_B};

/// Relative tolerance used to snap `BR/M` to an integer before taking ceilings.
const SNAP_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExponentError {
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("rotation size N = {n} does not divide B = {b}")]
    RotationSize { n: u32, b: u32 },
    #[error("rotated exponent defined for unconstrained peak only")]
    FinitePeakRotated,
    #[error("oracle budget exceeded: B = {b} > {max}")]
    BudgetExceeded { b: u32, max: u32 },
}

/// A nonnegative exponent, or exponential decay (`+∞`).
///
/// Serialized as a JSON number, or the string `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Decay,
}

impl Exponent {
    pub fn from_f64(v: f64) -> Self {
        if v == f64::INFINITY {
            Exponent::Decay
        } else {
            Exponent::Finite(v)
        }
    }

    /// The value as `f64`, with `Decay` mapped to `+∞`.
    pub fn value(self) -> f64 {
        match self {
            Exponent::Finite(v) => v,
            Exponent::Decay => f64::INFINITY,
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Exponent::Finite(v) => Some(v),
            Exponent::Decay => None,
        }
    }

    pub fn is_decay(self) -> bool {
        matches!(self, Exponent::Decay)
    }

    pub fn min(self, other: Self) -> Self {
        match (self, other) {
            (Exponent::Decay, x) | (x, Exponent::Decay) => x,
            (Exponent::Finite(a), Exponent::Finite(b)) => Exponent::Finite(a.min(b)),
        }
    }

    /// Equality with an absolute tolerance on finite values.
    pub fn approx_eq(self, other: Self, tol: f64) -> bool {
        match (self, other) {
            (Exponent::Decay, Exponent::Decay) => true,
            (Exponent::Finite(a), Exponent::Finite(b)) => (a - b).abs() <= tol,
            _ => false,
        }
    }
}

impl PartialOrd for Exponent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.value().partial_cmp(&other.value())
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(v) => write!(f, "{v}"),
            Exponent::Decay => f.write_str("inf"),
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        crate::serde_inf::serialize(&self.value(), s)
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        crate::serde_inf::deserialize(d).map(Exponent::from_f64)
    }
}

/// Parameters of an exponent computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentQuery {
    #[serde(rename = "B")]
    pub b: u32,
    pub m: u32,
    /// Rate in bits per channel use.
    #[serde(rename = "R")]
    pub rate: f64,
    /// Constellation bits.
    #[serde(rename = "M")]
    pub bits: u32,
    pub d_e: f64,
    #[serde(with = "crate::serde_inf")]
    pub d_peak: f64,
    /// Rotation size; 1 means unrotated.
    #[serde(rename = "N", default = "one")]
    pub n_rot: u32,
}

fn one() -> u32 {
    1
}

impl ExponentQuery {
    pub fn new(b: u32, m: u32, rate: f64, bits: u32, d_e: f64, d_peak: f64) -> Self {
        ExponentQuery { b, m, rate, bits, d_e, d_peak, n_rot: 1 }
    }

    pub fn with_rotation(mut self, n_rot: u32) -> Self {
        self.n_rot = n_rot;
        self
    }

    pub fn with_d_peak(mut self, d_peak: f64) -> Self {
        self.d_peak = d_peak;
        self
    }

    pub fn with_d_e(mut self, d_e: f64) -> Self {
        self.d_e = d_e;
        self
    }

    pub fn validate(&self) -> Result<(), ExponentError> {
        let bad = |msg: String| Err(ExponentError::InvalidQuery(msg));
        if self.b < 1 || self.m < 1 || self.bits < 1 {
            return bad(format!("need B, m, M ≥ 1 (got B={}, m={}, M={})", self.b, self.m, self.bits));
        }
        if !(self.rate > 0.0 && self.rate <= self.bits as f64) {
            return bad(format!("need 0 < R ≤ M, got R={} with M={}", self.rate, self.bits));
        }
        if !(self.d_e >= 0.0 && self.d_e.is_finite()) {
            return bad(format!("need finite d_e ≥ 0, got {}", self.d_e));
        }
        if !(self.d_peak > 0.0) {
            return bad(format!("need d_peak > 0, got {}", self.d_peak));
        }
        if self.n_rot < 1 {
            return bad("need N ≥ 1".into());
        }
        if !self.b.is_multiple_of(self.n_rot) {
            return Err(ExponentError::RotationSize { n: self.n_rot, b: self.b });
        }
        Ok(())
    }

    /// `⌈BR/M⌉`, snapped so that rounding noise such as `5 · 0.6000000000000001` counts as 3.
    pub fn rate_ceil(&self) -> u32 {
        snapped_ceil(self.b as f64 * self.rate / self.bits as f64) as u32
    }

    /// `⌈BR/(MN)⌉`, snapped.
    pub fn group_rate_ceil(&self) -> u32 {
        snapped_ceil(self.b as f64 * self.rate / (self.bits as f64 * self.n_rot as f64)) as u32
    }

    /// Whether `BR/M` sits exactly on a staircase breakpoint.
    pub fn at_breakpoint(&self) -> bool {
        is_snapped_integer(self.b as f64 * self.rate / self.bits as f64)
    }
}

fn is_snapped_integer(x: f64) -> bool {
    (x - x.round()).abs() <= SNAP_TOL * x.abs().max(1.0)
}

pub(crate) fn snapped_ceil(x: f64) -> f64 {
    if is_snapped_integer(x) {
        x.round()
    } else {
        x.ceil()
    }
}

/// `d_SB = B − ⌈BR/M⌉ + 1`.
pub fn singleton_bound(b: u32, rate: f64, bits: u32) -> Result<u32, ExponentError> {
    let q = ExponentQuery::new(b, 1, rate, bits, 0.0, f64::INFINITY);
    q.validate()?;
    Ok(b + 1 - q.rate_ceil())
}

/// `d_SB_rot = B + N − N⌈BR/(MN)⌉`.
pub fn singleton_bound_rotated(b: u32, rate: f64, bits: u32, n_rot: u32) -> Result<u32, ExponentError> {
    let q = ExponentQuery::new(b, 1, rate, bits, 0.0, f64::INFINITY).with_rotation(n_rot);
    q.validate()?;
    Ok(b + n_rot - n_rot * q.group_rate_ceil())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaseLabel {
    #[serde(rename = "Peak-limited")]
    PeakLimited,
    #[serde(rename = "CSIT-limited")]
    CsitLimited,
    #[serde(rename = "rotated")]
    Rotated,
}

impl fmt::Display for CaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CaseLabel::PeakLimited => "Peak-limited",
            CaseLabel::CsitLimited => "CSIT-limited",
            CaseLabel::Rotated => "rotated",
        })
    }
}

/// Which ordering of `d_peak` against the CSIT thresholds produced the result.
///
/// With `d_SB` the Singleton bound and `d_peak ≥ dₑ`:
/// `A` is `d_peak ≥ 1 + mBdₑ`, `B` is `1 + m·d_SB·dₑ < d_peak < 1 + mBdₑ`,
/// `C` is `d_peak ≤ 1 + m·d_SB·dₑ`. `PeakBelowNoise` is `d_peak < dₑ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    A,
    B,
    C,
    PeakBelowNoise,
}

impl Regime {
    pub fn classify(q: &ExponentQuery) -> Self {
        let m = q.m as f64;
        let d_sb = (q.b + 1 - q.rate_ceil()) as f64;
        if q.d_peak < q.d_e {
            Regime::PeakBelowNoise
        } else if q.d_peak >= 1.0 + m * q.b as f64 * q.d_e {
            Regime::A
        } else if q.d_peak > 1.0 + m * d_sb * q.d_e {
            Regime::B
        } else {
            Regime::C
        }
    }
}

/// Peak regime (`π = d_peak`, branch 1) or inversion regime (`π = 1 + mΣα̂`, branch 2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    #[serde(rename = "1")]
    Peak,
    #[serde(rename = "2")]
    Inversion,
}

/// The exponent restricted to one region, split by branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DnEntry {
    pub n: u32,
    pub peak: Exponent,
    pub inversion: Exponent,
}

impl DnEntry {
    pub fn d(&self) -> Exponent {
        self.peak.min(self.inversion)
    }

    /// The branch attaining `d`, or `None` when both are infinite.
    pub fn branch(&self) -> Option<Branch> {
        match (self.peak, self.inversion) {
            (Exponent::Decay, Exponent::Decay) => None,
            (p, i) if p.value() <= i.value() => Some(Branch::Peak),
            _ => Some(Branch::Inversion),
        }
    }
}

/// Description of the exponent region `𝓑_n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlphaRegion {
    pub n: u32,
    pub b: u32,
}

impl AlphaRegion {
    pub fn new(n: u32, b: u32) -> Self {
        assert!(n <= b, "region index {n} exceeds B = {b}");
        AlphaRegion { n, b }
    }

    /// Blocks with estimates at or below the CSIT noise level.
    pub fn unknown(&self) -> std::ops::Range<usize> {
        0..(self.b - self.n) as usize
    }

    /// Blocks whose estimates dominate the CSIT noise; their `ᾱ` is tied to `α̂`.
    pub fn tied(&self) -> std::ops::Range<usize> {
        (self.b - self.n) as usize..self.b as usize
    }

    /// Region membership of a coordinate vector, with closed boundaries.
    pub fn contains(&self, alpha_hat: &[f64], alpha_bar: &[f64], d_e: f64, tol: f64) -> bool {
        self.unknown().all(|i| alpha_hat[i] >= d_e - tol && alpha_bar[i] >= -tol)
            && self.tied().all(|i| {
                alpha_hat[i] >= -tol && alpha_hat[i] <= d_e + tol && (alpha_bar[i] - (alpha_hat[i] - d_e)).abs() <= tol
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentResult {
    pub query: ExponentQuery,
    pub d: Exponent,
    pub case_label: CaseLabel,
    pub regime: Option<Regime>,
    /// Singleton bound used by the closed form (rotated bound when `N > 1`).
    pub d_sb: u32,
    /// True when `BR/M` is an integer; `d` is then the value on the left plateau.
    pub at_breakpoint: bool,
    pub d_n_table: Vec<DnEntry>,
}

impl ExponentResult {
    /// Region indices attaining `d`.
    pub fn argmin(&self) -> Vec<u32> {
        self.d_n_table.iter().filter(|e| e.d().approx_eq(self.d, 1e-9)).map(|e| e.n).collect()
    }

    pub fn table_min(&self) -> Exponent {
        self.d_n_table.iter().map(DnEntry::d).fold(Exponent::Decay, Exponent::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singleton_bounds() {
        assert_eq!(singleton_bound(4, 1.0, 2).unwrap(), 3);
        assert_eq!(singleton_bound(4, 0.4, 2).unwrap(), 4);
        assert_eq!(singleton_bound(4, 2.0, 2).unwrap(), 1);
        assert_eq!(singleton_bound_rotated(4, 1.0, 2, 2).unwrap(), 4);
        assert_eq!(singleton_bound_rotated(4, 1.2, 2, 2).unwrap(), 2);
        assert_eq!(singleton_bound_rotated(4, 1.0, 2, 1).unwrap(), 3);
        assert_eq!(singleton_bound_rotated(4, 1.0, 2, 3), Err(ExponentError::RotationSize { n: 3, b: 4 }));
    }

    #[test]
    fn ceilings_snap_at_breakpoints() {
        // 6 · 0.1 = 0.6000000000000001, so 5 · R = 3.0000000000000004.
        let q = ExponentQuery::new(5, 1, 6.0 * 0.1, 1, 0.0, f64::INFINITY);
        assert_eq!(q.rate_ceil(), 3);
        let q = ExponentQuery::new(10, 1, 0.3, 1, 0.0, f64::INFINITY);
        assert!(q.at_breakpoint());
        assert_eq!(q.rate_ceil(), 3);
    }

    #[test]
    fn exponent_min_and_json() {
        let a = Exponent::Finite(3.0);
        assert_eq!(a.min(Exponent::Decay), a);
        assert_eq!(Exponent::Decay.min(Exponent::Decay), Exponent::Decay);
        assert_eq!(serde_json::to_string(&Exponent::Decay).unwrap(), "\"inf\"");
        assert_eq!(serde_json::from_str::<Exponent>("12.0").unwrap(), Exponent::Finite(12.0));
        assert!(a < Exponent::Decay);
    }

    #[test]
    fn query_validation() {
        assert!(ExponentQuery::new(4, 1, 0.0, 2, 1.0, 1.0).validate().is_err());
        assert!(ExponentQuery::new(4, 1, 2.5, 2, 1.0, 1.0).validate().is_err());
        assert!(ExponentQuery::new(4, 1, 1.0, 2, -1.0, 1.0).validate().is_err());
        assert!(ExponentQuery::new(4, 1, 1.0, 2, 1.0, f64::INFINITY).validate().is_ok());
        let json = r#"{"B":4,"m":1,"R":1,"M":2,"d_e":1,"d_peak":"inf"}"#;
        let q: ExponentQuery = serde_json::from_str(json).unwrap();
        assert_eq!(q.n_rot, 1);
        assert_eq!(q.d_peak, f64::INFINITY);
    }

    #[test]
    fn region_membership() {
        let r = AlphaRegion::new(1, 2);
        assert!(r.contains(&[1.5, 0.2], &[0.3, -0.8], 1.0, 1e-12));
        assert!(!r.contains(&[0.5, 0.2], &[0.3, -0.8], 1.0, 1e-12));
        assert!(!r.contains(&[1.5, 0.2], &[0.3, 0.0], 1.0, 1e-12));
    }
}
