mod support;

use nalgebra::DMatrix;
use ncva_core::linalg::log_det;
use ncva_core::substructure::bordered_log_det;
use ncva_core::{build_system, check_proposition1, decompose, hz_to_rad, log_det_char, transfer_at, tune, Complex64, Family};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::*;

#[test]
fn log_det_matches_cofactor_expansion() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let n = rng.random_range(1..=5);
        let a: CMat = (0..n)
            .map(|_| (0..n).map(|_| c(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0))).collect())
            .collect();
        let m = DMatrix::from_fn(n, n, |i, j| a[i][j]);
        let want = det_cofactor(&a);
        let got = log_det(&m).value();
        assert!((got - want).norm() <= 1e-10 * want.norm(), "{got} vs {want}");
    }
}

#[test]
fn collocated_resonant_block_vanishes_at_design_point() {
    let sys = three_cart();
    let t = tune(&decompose(&sys, 1).unwrap(), hz_to_rad(4.2), Family::Negative, 1).unwrap();
    let rs = decompose(&sys, 1).unwrap().resonant_system();
    let s = c(0.0, t.omega);
    let ld = rs.log_det(t.g, t.tau, s);
    assert!(ld.is_root_hit() || ld.normalized_log_abs() < -12.0);
    let direct = char_matrix(&sys, 1, t.g, t.tau, s)[0][0];
    assert!(direct.norm() <= 1e-10 * 407.0);
}

#[test]
fn non_collocated_roots_sit_on_the_axis() {
    let sys = three_cart();
    let t = tune(&decompose(&sys, 2).unwrap(), hz_to_rad(4.2), Family::Negative, 0).unwrap();
    let rep = check_proposition1(&sys, 2, t.g, t.tau, t.omega, 1e-8).unwrap();
    assert!(rep.passed);
    for target in [c(0.0, t.omega), c(0.0, -t.omega)] {
        assert!(rep.roots.iter().any(|r| (r - target).norm() <= 1e-8), "{:?}", rep.roots);
    }
    let counted = winding_count(
        &|s| det(&char_matrix(&sys, 2, t.g, t.tau, s)),
        rep.rect.re_min,
        rep.rect.re_max,
        rep.rect.im_min,
        rep.rect.im_max,
    );
    assert_eq!(counted as usize * 2, rep.roots.len());
}

#[test]
fn transfer_is_zero_at_located_roots() {
    // direct solve of R(s) x = b_f near each root: the target entry collapses
    let sys = three_cart();
    for n in 1..=3 {
        let t = tune(&decompose(&sys, n).unwrap(), hz_to_rad(4.2), Family::Negative, 0).unwrap();
        let p = transfer_at(&sys, n, t.g, t.tau, t.omega).unwrap();
        let passive = transfer_at(&sys, n, 0.0, 0.0, t.omega).unwrap();
        assert!(p.norm() <= 1e-10 * passive.norm());
        let r = char_matrix(&sys, 4, t.g, t.tau, c(0.0, t.omega));
        let x = solve(&r, &[c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(x[n].norm() <= 1e-10 * passive.norm());
    }
}

#[test]
fn full_log_det_agrees_with_oracle() {
    let sys = three_cart();
    let s = Complex64::new(-0.7, 21.0);
    let got = log_det_char(&sys, -124.14, 0.0165, s).value();
    let want = det(&char_matrix(&sys, 4, -124.14, 0.0165, s));
    assert!((got - want).norm() <= 1e-10 * want.norm());
    let z = bordered_log_det(&sys, 2, -124.14, 0.0165, s).normalized_abs();
    let zo = normalized_bordered(&sys, 2, -124.14, 0.0165, s);
    assert!((z - zo).abs() <= 1e-10 * zo);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn resonant_roots_are_transfer_zeros(seed in any::<u64>(), d in 2usize..=7, hz in 2.0f64..12.0, positive in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (model, n) = random_chain(&mut rng, d);
        let sys = build_system(&model).unwrap();
        let family = if positive { Family::Positive } else { Family::Negative };
        let t = tune(&decompose(&sys, n).unwrap(), hz_to_rad(hz), family, 0);
        prop_assume!(t.is_ok());
        let t = t.unwrap();
        let rep = check_proposition1(&sys, n, t.g, t.tau, t.omega, 1e-8).unwrap();
        prop_assert!(rep.passed);
        prop_assert!(!rep.roots.is_empty());
        for &s in &rep.roots {
            prop_assert!(normalized_char(&sys, n, t.g, t.tau, s) <= 1e-8);
            prop_assert!(normalized_bordered(&sys, n, t.g, t.tau, s) <= 1e-8);
        }
    }
}
