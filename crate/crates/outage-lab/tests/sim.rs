use outage_lab::channel::ChannelParams;
use outage_lab::constellation::{Constellation, ConstellationKind};
use outage_lab::mi_table::{build_mi_table, MiTable};
use outage_lab::power::{PowerPolicy, Scale};
use outage_lab::rotation::{RotationFamily, RotationScheme};
use outage_lab::sim::*;

fn bpsk() -> Constellation {
    Constellation::build(ConstellationKind::Psk, 1).unwrap()
}

fn table() -> MiTable {
    build_mi_table(&bpsk(), 1e-4, 1e6, 64, 20_000, 3).unwrap()
}

fn inversion(ch: &ChannelParams) -> PowerPolicy {
    PowerPolicy::truncated_inversion(f64::INFINITY, ch).with_scale(Scale::Calibrated)
}

/// Smallest `s` with `t.lookup(s) ≥ target`, by bisection.
fn threshold(t: &MiTable, target: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, t.snr_max());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if t.lookup(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

#[test]
fn single_block_matches_the_threshold_oracle() {
    let t = table();
    let s_star = threshold(&t, 0.5);
    let cfg = SimConfig::new(ChannelParams::new(1, 1, 0.0), bpsk(), 0.5, PowerPolicy::uniform()).with_grid(
        vec![0.0, 5.0, 10.0, 20.0],
        400_000,
        17,
    );
    for e in estimate_outage(&cfg, &MiModel::Table(t)).unwrap() {
        let p = -(-s_star / db_to_linear(e.snr_db)).exp_m1();
        let sigma = (p * (1.0 - p) / e.n as f64).sqrt();
        assert!((e.pout - p).abs() <= 3.0 * sigma, "{} dB: {} vs {p}", e.snr_db, e.pout);
        assert!(e.ci_low <= e.pout && e.pout <= e.ci_high);
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let ch = ChannelParams::new(2, 1, 0.5);
    let cfg = SimConfig::new(ch, bpsk(), 0.5, inversion(&ch)).with_grid(vec![5.0, 10.0], 3 * 4096 + 17, 99);
    let model = MiModel::Table(table());
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| estimate_outage(&cfg, &model).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(2));
    assert_eq!(one, run(5));
    assert_eq!(estimates_csv(&one), estimates_csv(&run(3)));
}

#[test]
fn seeds_change_the_draws() {
    let ch = ChannelParams::new(2, 1, 0.0);
    let model = MiModel::Table(table());
    let a = SimConfig::new(ch, bpsk(), 0.5, PowerPolicy::uniform()).with_grid(vec![5.0], 50_000, 1);
    let b = a.clone().with_grid(vec![5.0], 50_000, 2);
    assert_ne!(estimate_outage(&a, &model).unwrap(), estimate_outage(&b, &model).unwrap());
}

#[test]
fn csit_and_rotation_only_help() {
    // R/M = 3/4 over two blocks: d_SB = 1 unrotated, 2 with a size-2 rotation.
    // The ordering is asymptotic: at 10 dB (σₑ² ≈ 0.3) calibrated inversion
    // still loses slightly to uniform power.
    let ch = ChannelParams::new(2, 1, 0.5);
    let grid = vec![15.0, 20.0];
    let base = SimConfig::new(ch, bpsk(), 0.75, PowerPolicy::uniform()).with_grid(grid.clone(), 400_000, 5);
    let pc = SimConfig::new(ch, bpsk(), 0.75, inversion(&ch)).with_grid(grid.clone(), 400_000, 5);
    let rot = pc.clone().with_rotation(RotationScheme::build(RotationFamily::Cyclotomic, 2, 2).unwrap());
    let model = MiModel::Table(table());
    let uni = estimate_outage(&base, &model).unwrap();
    let pce = estimate_outage(&pc, &model).unwrap();
    let roe = estimate_outage(&rot, &MiModel::for_config(&rot).unwrap()).unwrap();
    for i in 0..grid.len() {
        assert!(uni[i].ci_high >= pce[i].ci_low, "{:?} vs {:?}", uni[i], pce[i]);
        assert!(pce[i].ci_high >= roe[i].ci_low, "{:?} vs {:?}", pce[i], roe[i]);
    }
    // Rotation doubles the diversity here; the gap is clear by 20 dB.
    assert!(roe[1].ci_high < pce[1].ci_low);
}

#[test]
fn identical_configs_give_identical_rows() {
    let ch = ChannelParams::new(2, 1, 0.5);
    let cfg = SimConfig::new(ch, bpsk(), 0.5, inversion(&ch)).with_grid(vec![0.0, 5.0], 20_000, 4);
    let t = sweep(&[("a".into(), cfg.clone()), ("a".into(), cfg)]);
    assert_eq!(t.rows[0], t.rows[1]);
    let csv = t.summary_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[1], lines[2]);
}

#[test]
fn sweep_keeps_going_after_a_bad_config() {
    let ch = ChannelParams::new(2, 1, 0.5);
    let bad = SimConfig::new(ch, bpsk(), 1.5, PowerPolicy::uniform()).with_grid(vec![5.0], 10, 1);
    let good = SimConfig::new(ch, bpsk(), 0.5, PowerPolicy::uniform()).with_grid(vec![0.0, 5.0], 20_000, 1);
    let t = sweep(&[("bad".into(), bad), ("good".into(), good)]);
    assert!(t.rows[0].estimates.is_err());
    assert_eq!(t.rows[1].estimates.as_ref().unwrap().len(), 2);
    assert!(t.summary_csv().lines().nth(1).unwrap().starts_with("bad,,,0,"));
}

#[test]
fn better_csit_gives_a_steeper_fit() {
    let grid = vec![10.0, 12.5, 15.0];
    let cfg = |d_e: f64| {
        let ch = ChannelParams::new(2, 1, d_e);
        SimConfig::new(ch, bpsk(), 0.5, inversion(&ch)).with_grid(grid.clone(), 2_000_000, 8)
    };
    let t = sweep(&[("no".into(), cfg(0.0)), ("noisy".into(), cfg(0.5))]);
    let s0 = t.rows[0].fit.as_ref().unwrap().slope;
    let s1 = t.rows[1].fit.as_ref().unwrap().slope;
    assert!(s1 > s0, "{s0} vs {s1}");
    assert_eq!(t.rows[0].theory.unwrap().value(), 2.0);
    assert_eq!(t.rows[1].theory.unwrap().value(), 4.0);
}

#[test]
fn fits_need_two_qualifying_points() {
    let e = OutageEstimate::from_counts(10.0, 150, 1000);
    assert!(fit_slope(&[e], 100).is_err());
    let f = OutageEstimate::from_counts(20.0, 15, 1000);
    assert!(fit_slope(&[e, f], 100).is_err());
    assert!(fit_slope(&[e, f], 10).is_ok());
}
