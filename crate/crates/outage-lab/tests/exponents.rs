use outage_lab::exponents::*;
use proptest::prelude::*;

const INF: f64 = f64::INFINITY;
const D_PEAKS: [f64; 5] = [1.0, 1.5, 2.0, 5.0, INF];
const D_ES: [f64; 4] = [0.0, 0.5, 1.0, 2.0];

fn ratios() -> impl Iterator<Item = f64> {
    (1..=9).map(|k| k as f64 / 10.0)
}

#[test]
fn closed_form_matches_oracle_on_the_grid() {
    let mut checked = 0;
    for b in 1..=4 {
        for m in 1..=2 {
            for r in ratios() {
                for d_e in D_ES {
                    for d_peak in D_PEAKS {
                        let q = ExponentQuery::new(b, m, 2.0 * r, 2, d_e, d_peak);
                        let cf = outage_exponent_thm1(&q).unwrap();
                        let or = oracle_exponent(&q).unwrap();
                        assert!(cf.d.approx_eq(or.d, 1e-9), "{q:?}: {} vs {}", cf.d, or.d);
                        assert!(cf.table_min().approx_eq(cf.d, 1e-9), "{q:?}");
                        checked += 1;
                    }
                }
            }
        }
    }
    assert_eq!(checked, 4 * 2 * 9 * 4 * 5);
}

#[test]
fn rotated_closed_form_matches_rotated_oracle() {
    for b in 1..=4u32 {
        for n in [1, 2, 4].into_iter().filter(|n| b % n == 0) {
            for m in 1..=2 {
                for r in ratios() {
                    for d_e in D_ES {
                        let q = ExponentQuery::new(b, m, 2.0 * r, 2, d_e, INF).with_rotation(n);
                        let cf = outage_exponent_thm2(&q).unwrap();
                        let or = oracle_exponent_rotated(&q).unwrap();
                        assert!(cf.d.approx_eq(or.d, 1e-9), "{q:?}: {} vs {}", cf.d, or.d);
                    }
                }
            }
        }
    }
}

#[test]
fn paper_special_cases() {
    for b in 1..=4 {
        for m in 1..=2 {
            for r in ratios() {
                let d_sb = singleton_bound(b, 2.0 * r, 2).unwrap() as f64;
                for d_e in D_ES {
                    // Short-term power control.
                    let q = ExponentQuery::new(b, m, 2.0 * r, 2, d_e, 1.0);
                    assert_eq!(outage_exponent_thm1(&q).unwrap().d, Exponent::Finite(m as f64 * d_sb));
                }
                for d_peak in D_PEAKS {
                    // No CSIT.
                    let q = ExponentQuery::new(b, m, 2.0 * r, 2, 0.0, d_peak);
                    assert_eq!(outage_exponent_thm1(&q).unwrap().d, Exponent::Finite(m as f64 * d_sb));
                }
                for d_e in D_ES {
                    let mb = (m * b) as f64;
                    let q = ExponentQuery::new(b, m, 2.0 * r, 2, d_e, INF).with_rotation(b);
                    assert_eq!(outage_exponent_thm2(&q).unwrap().d, Exponent::Finite(mb * (1.0 + mb * d_e)));
                }
            }
        }
    }
}

#[test]
fn branches_meet_at_the_threshold() {
    for b in 1..=4 {
        for m in 1..=2 {
            for r in ratios() {
                for d_e in D_ES {
                    let d_sb = singleton_bound(b, 2.0 * r, 2).unwrap() as f64;
                    let t = 1.0 + m as f64 * d_sb * d_e;
                    let at = outage_exponent_thm1(&ExponentQuery::new(b, m, 2.0 * r, 2, d_e, t)).unwrap();
                    let above = outage_exponent_thm1(&ExponentQuery::new(b, m, 2.0 * r, 2, d_e, t + 1e-12)).unwrap();
                    assert_eq!(at.d, Exponent::Finite(m as f64 * d_sb * t));
                    assert!(at.d.approx_eq(above.d, 1e-9));
                }
            }
        }
    }
}

#[test]
fn breakpoints_take_the_left_plateau() {
    let base = ExponentQuery::new(4, 1, 1.0, 2, 1.0, INF);
    let rows = staircase(&base, &[0.25, 0.25 + 1e-9, 0.5, 0.5 + 1e-9]).unwrap();
    let d: Vec<f64> = rows.iter().map(|r| r.d.value()).collect();
    assert_eq!(d, vec![20.0, 12.0, 12.0, 6.0]);
    assert!(rows[0].at_breakpoint && !rows[1].at_breakpoint);
}

#[test]
fn argmin_is_the_last_recoverable_region() {
    // d_peak = ∞: the minimum sits where ⌈BR/M⌉ − 1 estimates are reliable.
    let q = ExponentQuery::new(4, 1, 1.0, 2, 1.0, INF);
    let res = outage_exponent_thm1(&q).unwrap();
    assert_eq!(res.argmin(), vec![q.rate_ceil() - 1]);
}

fn query() -> impl Strategy<Value = ExponentQuery> {
    (1u32..=6, 1u32..=3, 1u32..=4, 0.01f64..1.0, 0.0f64..3.0, prop_oneof![Just(INF), 1.0f64..40.0])
        .prop_map(|(b, m, bits, r, d_e, d_peak)| ExponentQuery::new(b, m, r * bits as f64, bits, d_e, d_peak))
}

proptest! {
    #[test]
    fn exponent_grows_with_csit_quality(q in query(), extra in 0.0f64..2.0) {
        let lo = outage_exponent_thm1(&q).unwrap().d;
        let hi = outage_exponent_thm1(&q.with_d_e(q.d_e + extra)).unwrap().d;
        prop_assert!(hi >= lo);
    }

    #[test]
    fn exponent_grows_with_peak(q in query(), extra in 0.0f64..10.0) {
        let lo = outage_exponent_thm1(&q).unwrap().d;
        let hi = outage_exponent_thm1(&q.with_d_peak(q.d_peak + extra)).unwrap().d;
        prop_assert!(hi >= lo);
    }

    #[test]
    fn exponent_shrinks_with_rate(q in query(), frac in 0.0f64..1.0) {
        let faster = ExponentQuery { rate: q.rate + frac * (q.bits as f64 - q.rate), ..q };
        prop_assert!(outage_exponent_thm1(&faster).unwrap().d <= outage_exponent_thm1(&q).unwrap().d);
    }

    #[test]
    fn exponent_is_bracketed(q in query()) {
        let d = outage_exponent_thm1(&q).unwrap().d.value();
        let d_sb = singleton_bound(q.b, q.rate, q.bits).unwrap() as f64;
        let m = q.m as f64;
        prop_assert!(d >= m * d_sb - 1e-9);
        prop_assert!(d <= m * d_sb * (1.0 + m * d_sb * q.d_e) + 1e-9);
    }

    #[test]
    fn rotation_never_hurts(q in query(), n_idx in 0usize..3) {
        let n = [1u32, 2, 3][n_idx];
        let b = q.b * n;
        let q = ExponentQuery { b, d_peak: INF, ..q };
        let plain = outage_exponent_thm1(&q).unwrap().d;
        let rotated = outage_exponent_thm2(&q.with_rotation(n)).unwrap().d;
        prop_assert!(rotated >= plain);
    }

    #[test]
    fn oracle_agrees_off_grid(q in query()) {
        prop_assume!(q.b <= 4);
        let cf = outage_exponent_thm1(&q).unwrap().d;
        let or = oracle_exponent(&q).unwrap().d;
        prop_assert!(cf.approx_eq(or, 1e-7), "{:?}: {} vs {}", q, cf, or);
    }
}

#[test]
fn json_roundtrip_keeps_infinite_peaks() {
    let q = ExponentQuery::new(4, 1, 1.0, 2, 1.0, INF);
    let res = outage_exponent_thm1(&q).unwrap();
    let text = serde_json::to_string(&res).unwrap();
    assert!(text.contains("\"d_peak\":\"inf\""));
    let back: ExponentResult = serde_json::from_str(&text).unwrap();
    assert_eq!(back, res);
}
