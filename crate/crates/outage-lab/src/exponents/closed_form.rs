use serde::{Deserialize, Serialize};

use super::{Branch, CaseLabel, DnEntry, Exponent, ExponentError, ExponentQuery, ExponentResult, Regime};

/// Unrotated outage exponent with a peak-power exponent.
///
/// `d = m·d_SB·d_peak` when `d_peak ≤ 1 + m·d_SB·dₑ` (peak-limited), else
/// `d = m·d_SB·(1 + m·d_SB·dₑ)` (CSIT-limited).
///
/// ```
/// use outage_lab::exponents::{outage_exponent_thm1, CaseLabel, Exponent, ExponentQuery};
///
/// let q = ExponentQuery::new(4, 1, 1.0, 2, 1.0, f64::INFINITY);
/// let r = outage_exponent_thm1(&q).unwrap();
/// assert_eq!(r.d, Exponent::Finite(12.0));
/// assert_eq!(r.case_label, CaseLabel::CsitLimited);
/// ```
pub fn outage_exponent_thm1(q: &ExponentQuery) -> Result<ExponentResult, ExponentError> {
    q.validate()?;
    if q.n_rot != 1 {
        return Err(ExponentError::InvalidQuery(format!("unrotated exponent needs N = 1, got {}", q.n_rot)));
    }
    let m = q.m as f64;
    let d_sb = q.b + 1 - q.rate_ceil();
    let md = m * d_sb as f64;
    let threshold = 1.0 + md * q.d_e;
    let (d, case_label) = if q.d_peak <= threshold {
        (md * q.d_peak, CaseLabel::PeakLimited)
    } else {
        (md * threshold, CaseLabel::CsitLimited)
    };
    let d_n_table = (0..=q.b)
        .map(|n| DnEntry {
            n,
            peak: case_exponent_dn(q, n, Branch::Peak).expect("validated"),
            inversion: case_exponent_dn(q, n, Branch::Inversion).expect("validated"),
        })
        .collect();
    Ok(ExponentResult {
        query: *q,
        d: Exponent::Finite(d),
        case_label,
        regime: Some(Regime::classify(q)),
        d_sb,
        at_breakpoint: q.at_breakpoint(),
        d_n_table,
    })
}

/// Exponent with full-diversity rotations of size `N` and no peak constraint:
/// `d = m·d_SB_rot·(1 + m·d_SB_rot·dₑ)`.
///
/// ```
/// use outage_lab::exponents::{outage_exponent_thm2, Exponent, ExponentQuery};
///
/// let q = ExponentQuery::new(4, 1, 1.0, 2, 1.0, f64::INFINITY).with_rotation(4);
/// assert_eq!(outage_exponent_thm2(&q).unwrap().d, Exponent::Finite(20.0));
/// ```
pub fn outage_exponent_thm2(q: &ExponentQuery) -> Result<ExponentResult, ExponentError> {
    q.validate()?;
    if q.d_peak.is_finite() {
        return Err(ExponentError::FinitePeakRotated);
    }
    let m = q.m as f64;
    let d_sb = q.b + q.n_rot - q.n_rot * q.group_rate_ceil();
    let md = m * d_sb as f64;
    let d_n_table = (0..=q.b)
        .map(|n| DnEntry { n, peak: Exponent::Decay, inversion: rotated_exponent_dn(q, n).expect("validated") })
        .collect();
    Ok(ExponentResult {
        query: *q,
        d: Exponent::Finite(md * (1.0 + md * q.d_e)),
        case_label: CaseLabel::Rotated,
        regime: None,
        d_sb,
        at_breakpoint: q.at_breakpoint(),
        d_n_table,
    })
}

/// Per-region exponent `d_n` of one branch, from the piecewise formulas.
///
/// `Branch::Peak` is the region where the peak constraint binds
/// (`π = d_peak`); `Branch::Inversion` is the region where the power follows
/// the channel inversion (`π = 1 + mΣα̂`).
pub fn case_exponent_dn(q: &ExponentQuery, n: u32, branch: Branch) -> Result<Exponent, ExponentError> {
    q.validate()?;
    if n > q.b {
        return Err(ExponentError::InvalidQuery(format!("region index {n} exceeds B = {}", q.b)));
    }
    let m = q.m as f64;
    let ceil = q.rate_ceil();
    let k = (q.b - n) as f64;
    let d_e = q.d_e;
    let d_peak = q.d_peak;
    // n < BR/M  ⇔  n < ⌈BR/M⌉ for integer n; ⌈BR/M − n⌉ = ⌈BR/M⌉ − n.
    let below = n < ceil;
    let shifted = ceil as f64 - n as f64;
    let d = match branch {
        Branch::Peak if d_peak.is_infinite() => return Ok(Exponent::Decay),
        Branch::Peak if d_peak < d_e => {
            if below {
                m * k * d_e
            } else {
                m * k * d_e + m * d_peak * (n as f64 - ceil as f64 + 1.0)
            }
        }
        Branch::Peak => {
            if !below {
                return Ok(Exponent::Decay);
            }
            m * (d_peak - d_e) * (k + 1.0 - shifted) + (d_peak - 1.0).max(m * k * d_e)
        }
        Branch::Inversion => {
            if d_peak < 1.0 + m * k * d_e || !below {
                return Ok(Exponent::Decay);
            }
            m * k * d_e + m * (k - shifted + 1.0) * (1.0 + m * k * d_e - d_e)
        }
    };
    Ok(Exponent::Finite(d))
}

/// Per-region exponent with rotations of size `N`, where `n` blocks are
/// well estimated:
///
/// `d_n = mN(B/N − ⌈n/N⌉ − K_n)(1 + m(B−n)dₑ − dₑ) + m(B−n)dₑ`,
/// `K_n = ⌈BR/(MN) − ⌈n/N⌉⌉ − 1`, and `d_n = ∞` once `⌈n/N⌉ ≥ BR/(MN)`.
pub fn rotated_exponent_dn(q: &ExponentQuery, n: u32) -> Result<Exponent, ExponentError> {
    q.validate()?;
    if n > q.b {
        return Err(ExponentError::InvalidQuery(format!("region index {n} exceeds B = {}", q.b)));
    }
    let big_n = q.n_rot;
    let groups_hit = n.div_ceil(big_n);
    let gceil = q.group_rate_ceil();
    if groups_hit >= gceil {
        return Ok(Exponent::Decay);
    }
    let m = q.m as f64;
    let k_n = (gceil - groups_hit - 1) as f64;
    let k = (q.b - n) as f64;
    let groups_left = (q.b / big_n) as f64 - groups_hit as f64 - k_n;
    Ok(Exponent::Finite(m * big_n as f64 * groups_left * (1.0 + m * k * q.d_e - q.d_e) + m * k * q.d_e))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaircaseRow {
    pub r_over_m: f64,
    pub d: Exponent,
    pub at_breakpoint: bool,
}

/// Exponent as a function of `R/M`, all other parameters taken from `base`.
///
/// Uses the rotated closed form when `base.n_rot > 1`.
pub fn staircase(base: &ExponentQuery, ratios: &[f64]) -> Result<Vec<StaircaseRow>, ExponentError> {
    ratios
        .iter()
        .map(|&r| {
            let q = ExponentQuery { rate: r * base.bits as f64, ..*base };
            let res = if q.n_rot > 1 { outage_exponent_thm2(&q)? } else { outage_exponent_thm1(&q)? };
            Ok(StaircaseRow { r_over_m: r, d: res.d, at_breakpoint: res.at_breakpoint })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const INF: f64 = f64::INFINITY;

    fn q(b: u32, m: u32, r_over_m: f64, d_e: f64, d_peak: f64) -> ExponentQuery {
        ExponentQuery::new(b, m, 2.0 * r_over_m, 2, d_e, d_peak)
    }

    #[test]
    fn thm1_examples() {
        assert_eq!(outage_exponent_thm1(&q(4, 1, 0.5, 1.0, INF)).unwrap().d, Exponent::Finite(12.0));
        assert_eq!(outage_exponent_thm1(&q(4, 1, 0.5, 1.0, 2.0)).unwrap().d, Exponent::Finite(6.0));
        let r = outage_exponent_thm1(&q(4, 1, 0.5, 1.0, 1.0)).unwrap();
        assert_eq!(r.d, Exponent::Finite(3.0));
        assert_eq!(r.case_label, CaseLabel::PeakLimited);
        assert_eq!(r.regime, Some(Regime::C));
    }

    #[test]
    fn thm2_examples() {
        let base = q(4, 1, 0.5, 1.0, INF);
        for (n, d) in [(1, 12.0), (2, 20.0), (4, 20.0)] {
            assert_eq!(outage_exponent_thm2(&base.with_rotation(n)).unwrap().d, Exponent::Finite(d));
        }
        assert_eq!(
            outage_exponent_thm2(&base.with_rotation(2).with_d_peak(3.0)),
            Err(ExponentError::FinitePeakRotated)
        );
    }

    #[test]
    fn case_formula_examples() {
        let a = q(2, 1, 0.5, 1.0, INF);
        assert_eq!(case_exponent_dn(&a, 0, Branch::Inversion).unwrap(), Exponent::Finite(6.0));
        assert_eq!(case_exponent_dn(&a, 1, Branch::Inversion).unwrap(), Exponent::Decay);
        let b = q(4, 1, 0.5, 1.0, 0.5);
        assert_eq!(case_exponent_dn(&b, 4, Branch::Peak).unwrap(), Exponent::Finite(1.5));
    }

    #[test]
    fn table_minimum_matches_closed_form() {
        for b in 1..=4 {
            for m in 1..=2 {
                for k in 1..=9 {
                    for d_e in [0.0, 0.5, 1.0, 2.0] {
                        for d_peak in [0.5, 1.0, 1.5, 2.0, 5.0, INF] {
                            let r = outage_exponent_thm1(&q(b, m, k as f64 / 10.0, d_e, d_peak)).unwrap();
                            assert!(r.table_min().approx_eq(r.d, 1e-9), "{r:?}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn rotated_chain_minimum_matches_closed_form() {
        for b in 1..=6 {
            for n_rot in (1..=b).filter(|n| b % n == 0) {
                for k in 1..=9 {
                    for d_e in [0.0, 0.5, 1.0, 2.0] {
                        let r = outage_exponent_thm2(&q(b, 2, k as f64 / 10.0, d_e, INF).with_rotation(n_rot)).unwrap();
                        assert!(r.table_min().approx_eq(r.d, 1e-9), "{r:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn staircase_plateaus() {
        let base = q(4, 1, 0.5, 1.0, INF);
        let rows = staircase(&base, &[0.1, 0.25, 0.3, 0.5, 0.6, 1.0]).unwrap();
        let ds: Vec<f64> = rows.iter().map(|r| r.d.value()).collect();
        assert_eq!(ds, vec![20.0, 20.0, 12.0, 12.0, 6.0, 2.0]);
        assert!(rows[1].at_breakpoint && !rows[2].at_breakpoint);
    }
}
