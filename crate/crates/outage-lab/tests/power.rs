use outage_lab::channel::ChannelParams;
use outage_lab::power::{
    allocate_power, audit_average_power, calibrate_scale, expected_unscaled_power, PolicyKind, PowerPolicy, Scale,
};
use proptest::prelude::*;

const INF: f64 = f64::INFINITY;

fn grid() -> Vec<f64> {
    [10.0, 15.0, 20.0, 25.0, 30.0].iter().map(|db: &f64| 10f64.powf(db / 10.0)).collect()
}

#[test]
fn calibrated_inversion_meets_the_average_constraint() {
    for (b, d_e, d_peak) in [(2, 0.5, INF), (2, 0.5, 2.0), (3, 1.0, INF), (1, 2.0, 1.5)] {
        let ch = ChannelParams::new(b, 1, d_e);
        let pol = PowerPolicy::truncated_inversion(d_peak, &ch).with_scale(Scale::Calibrated);
        let audit = audit_average_power(&pol, &ch, &grid(), 200_000, 5).unwrap();
        for p in &audit.points {
            assert!(p.mean_ratio <= 1.05, "{b} {d_e} {d_peak}: {p:?}");
            assert_eq!(p.peak_violations, 0);
        }
        assert!((0.9..=1.1).contains(&audit.slope), "{}", audit.slope);
        assert!(!audit.violation);
    }
}

#[test]
fn exact_expectation_matches_monte_carlo() {
    let ch = ChannelParams::new(2, 2, 0.5);
    let pol = PowerPolicy::truncated_inversion(INF, &ch);
    for snr in [10.0, 100.0, 1000.0] {
        let exact = expected_unscaled_power(&pol, &ch, snr).unwrap().expect("peak never binds");
        let audit = audit_average_power(&pol, &ch, &[snr], 400_000, 8).unwrap();
        let mc = audit.points[0].mean_ratio * snr;
        let se = audit.points[0].std_error * snr;
        assert!((mc - exact).abs() < 5.0 * se + 1e-9 * exact, "snr {snr}: {mc} vs {exact} ± {se}");
    }
}

#[test]
fn uncalibrated_inversion_overspends() {
    // Without the scale, the inverted power grows faster than SNR.
    let ch = ChannelParams::new(2, 1, 0.5);
    let pol = PowerPolicy::truncated_inversion(INF, &ch);
    let audit = audit_average_power(&pol, &ch, &grid(), 100_000, 3).unwrap();
    assert!(audit.points.last().unwrap().mean_ratio > 1.05);
    assert!(audit.slope > 1.0);
}

#[test]
fn calibration_is_deterministic() {
    let ch = ChannelParams::new(2, 1, 0.5);
    let pol = PowerPolicy::truncated_inversion(2.0, &ch);
    assert_eq!(calibrate_scale(&pol, &ch, 300.0, 4).unwrap(), calibrate_scale(&pol, &ch, 300.0, 4).unwrap());
}

#[test]
fn audits_need_enough_samples() {
    let ch = ChannelParams::new(2, 1, 0.5);
    assert!(audit_average_power(&PowerPolicy::uniform(), &ch, &grid(), 100, 1).is_err());
}

#[test]
fn policy_json() {
    let p: PowerPolicy =
        serde_json::from_str(r#"{"kind":"truncated_inversion","d_peak":"inf","scale":"calibrated"}"#).unwrap();
    assert_eq!(p.kind, PolicyKind::TruncatedInversion);
    assert_eq!(p.d_peak, INF);
    assert_eq!(p.scale, Scale::Calibrated);
    assert!(serde_json::from_str::<PowerPolicy>(r#"{"kind":"Uniform","bogus":0}"#).is_err());
    assert!(PowerPolicy::truncated_inversion(0.5, &ChannelParams::new(1, 1, 0.0)).validate().is_err());
}

proptest! {
    #[test]
    fn power_respects_peak_and_is_positive(
        gh in prop::collection::vec(0.0f64..10.0, 1..5),
        d_peak in prop_oneof![Just(INF), 1.0f64..6.0],
        d_e in 0.0f64..2.0,
        db in 0.0f64..40.0,
    ) {
        let ch = ChannelParams::new(gh.len() as u32, 1, d_e);
        let pol = PowerPolicy::truncated_inversion(d_peak, &ch);
        let snr = 10f64.powf(db / 10.0);
        let p = allocate_power(&pol, &gh, snr);
        prop_assert!(p > 0.0);
        prop_assert!(p <= pol.peak_power(snr) * (1.0 + 1e-12));
    }

    #[test]
    fn weaker_estimates_get_more_power(
        gh in prop::collection::vec(0.01f64..10.0, 1..5),
        shrink in 0.01f64..1.0,
        d_e in 0.1f64..2.0,
    ) {
        let ch = ChannelParams::new(gh.len() as u32, 1, d_e);
        let pol = PowerPolicy::truncated_inversion(INF, &ch);
        let mut weaker = gh.clone();
        weaker[0] *= shrink;
        prop_assert!(allocate_power(&pol, &weaker, 1e3) >= allocate_power(&pol, &gh, 1e3) * (1.0 - 1e-12));
    }
}
