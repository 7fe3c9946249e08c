use std::time::Instant;

use num_complex::Complex64;
use outage_lab::constellation::{awgn_mutual_information, Constellation, ConstellationKind};
use outage_lab::rotation::*;

fn c(kind: ConstellationKind, bits: u32) -> Constellation {
    Constellation::build(kind, bits).unwrap()
}

#[test]
fn shipped_rotations_are_unitary_and_full_diversity() {
    let start = Instant::now();
    for n in [2, 3, 4] {
        let u = build_rotation(RotationFamily::Cyclotomic, n).unwrap();
        assert!(u.unitarity_error() < UNITARY_TOL);
        for con in [c(ConstellationKind::Psk, 1), c(ConstellationKind::Psk, 2)] {
            let r = verify_full_diversity(&u, &con).unwrap();
            assert!(r.ok, "N={n} {}", con.label());
            assert!(r.min_product_distance > 1e-3);
            assert!(r.witness.is_none());
        }
    }
    assert!(start.elapsed().as_secs_f64() < 1.0);
}

#[test]
fn real_three_dimensional_rotation_has_known_product_distance() {
    let u = build_rotation(RotationFamily::Cyclotomic, 3).unwrap();
    let r = verify_full_diversity(&u, &c(ConstellationKind::Psk, 1)).unwrap();
    assert!((r.min_product_distance - 8.0 / 7.0).abs() < 1e-9, "{}", r.min_product_distance);
}

#[test]
fn identity_fails_with_a_witness() {
    for n in [2, 4] {
        let r = verify_full_diversity(&Matrix::identity(n), &c(ConstellationKind::Psk, 1)).unwrap();
        assert!(!r.ok);
        assert_eq!(r.min_product_distance, 0.0);
        let w = r.witness.unwrap();
        let rotated = Matrix::identity(n).apply(&w);
        assert!(rotated.iter().any(|z| z.norm() < ZERO_TOL));
        assert!(w.iter().any(|z| z.norm() > ZERO_TOL));
    }
}

#[test]
fn size_one_always_passes() {
    let r = verify_full_diversity(&Matrix::identity(1), &c(ConstellationKind::Qam, 4)).unwrap();
    assert!(r.ok);
}

#[test]
fn non_unitary_matrices_are_rejected() {
    let m = Matrix::from_rows(2, vec![Complex64::new(1.0, 0.0); 4]).unwrap();
    assert!(m.unitarity_error() > 0.5);
    assert!(matches!(
        Matrix::from_json(r#"{"N":2,"entries":[[1,0],[1,0],[1,0],[1,0]]}"#),
        Err(RotationError::NotUnitary(_))
    ));
    assert!(Matrix::from_json(r#"{"N":2,"entries":[[1,0],[0,0],[0,0]]}"#).is_err());
}

#[test]
fn matrix_json_roundtrip() {
    let u = build_rotation(RotationFamily::Cyclotomic, 4).unwrap();
    assert_eq!(Matrix::from_json(&u.to_json()).unwrap(), u);
}

#[test]
fn verification_budget_is_enforced() {
    // 16^6 = 2^24 rotated codewords.
    assert!(matches!(
        verify_full_diversity(&Matrix::identity(6), &c(ConstellationKind::Qam, 4)),
        Err(RotationError::BudgetExceeded { .. })
    ));
}

#[test]
fn equal_gains_leave_mutual_information_unchanged() {
    let bpsk = c(ConstellationKind::Psk, 1);
    let u = build_rotation(RotationFamily::Cyclotomic, 2).unwrap();
    for s in [0.3, 2.0] {
        let rot = rotated_group_mi(&u, &bpsk, &[s, s], 100_000, 1).unwrap();
        let plain = awgn_mutual_information(&bpsk, s, 100_000, 2);
        let sigma = (rot.std_error.powi(2) + plain.std_error.powi(2)).sqrt();
        assert!((rot.value - plain.value).abs() < 4.0 * sigma + 2e-3, "s={s}: {} vs {}", rot.value, plain.value);
    }
}

#[test]
fn one_strong_block_carries_everything_after_rotation() {
    let bpsk = c(ConstellationKind::Psk, 1);
    let u = build_rotation(RotationFamily::Cyclotomic, 2).unwrap();
    let rot = rotated_group_mi(&u, &bpsk, &[1e6, 0.0], 20_000, 3).unwrap();
    let id = rotated_group_mi(&Matrix::identity(2), &bpsk, &[1e6, 0.0], 20_000, 3).unwrap();
    assert!(rot.value > 0.99, "{}", rot.value);
    assert!((id.value - 0.5).abs() < 1e-3, "{}", id.value);
}

#[test]
fn group_table_is_monotone_and_close_to_direct_estimates() {
    let bpsk = c(ConstellationKind::Psk, 1);
    let u = build_rotation(RotationFamily::Cyclotomic, 2).unwrap();
    let t = GroupMiTable::build(&u, &bpsk, 24, 4000, 5).unwrap();
    assert_eq!(t.lookup(&[0.0, 0.0]), 0.0);
    let mut last = 0.0;
    for k in 0..60 {
        let s = 1e-2 * 10f64.powf(k as f64 / 10.0);
        let v = t.lookup(&[s, 0.5]);
        assert!(v >= last - 1e-12);
        last = v;
    }
    for snrs in [[0.5, 3.0], [10.0, 0.1], [40.0, 40.0]] {
        let direct = rotated_group_mi(&u, &bpsk, &snrs, 40_000, 9).unwrap();
        assert!((t.lookup(&snrs) - direct.value).abs() < 0.03, "{snrs:?}: {} vs {}", t.lookup(&snrs), direct.value);
    }
}

#[test]
fn schemes_tile_the_blocks() {
    let s = RotationScheme::build(RotationFamily::Cyclotomic, 2, 4).unwrap();
    assert_eq!((s.n(), s.k()), (2, 2));
    assert!(RotationScheme::build(RotationFamily::Cyclotomic, 3, 4).is_err());
}
