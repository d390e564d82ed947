mod common;

use common::*;
use lcid_core::sysid::{
    bandpass_autocorrelation, build_regressor, coherence_bound, filter_fixed_denominator,
    gram_target_from_spectrum, realize_input_fdm, recover_input, toeplitz, FixedDenominatorFilter,
};
use lcid_core::{mutual_coherence, recovery_bound, Error};
use nalgebra::DMatrix;
use proptest::collection::vec;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn prefilter_round_trip(u in vec(-3.0..3.0f64, 1..60), a1 in -0.9..0.9f64, a2 in -0.05..0.05f64, gain in 0.2..4.0f64) {
        let f = FixedDenominatorFilter::new(vec![a1, a2], gain).unwrap();
        let back = recover_input(&filter_fixed_denominator(&u, &f), &f);
        for (x, y) in u.iter().zip(&back) {
            prop_assert!((x - y).abs() <= 1e-10 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn regressor_entries_are_delayed_inputs(u in vec(-3.0..3.0f64, 12), n_theta in 1usize..5) {
        let n = 10;
        let phi = build_regressor(&u, None, n_theta, n).unwrap();
        for t in 0..n {
            for k in 0..n_theta {
                let want = if t > k { u[t - k - 1] } else { 0.0 };
                prop_assert_eq!(phi.matrix()[(t, k)], want);
            }
        }
    }
}

#[test]
fn coherence_extremes() {
    assert_eq!(mutual_coherence(&DMatrix::identity(5, 5)).unwrap(), 0.0);
    assert!((mutual_coherence(&DMatrix::from_element(4, 3, 1.0)).unwrap() - 1.0).abs() <= 1e-15);
    let mut z = DMatrix::identity(3, 3);
    z.column_mut(2).fill(0.0);
    assert!(matches!(mutual_coherence(&z), Err(Error::ZeroColumn(2))));
    assert!((coherence_bound(2) - 1.0 / 6.0).abs() <= 1e-16);
}

#[test]
fn recovery_bound_reference_value() {
    let p = recovery_bound(40, 10, 1.0).unwrap();
    assert!((p - 0.7461).abs() <= 5e-5, "{p}");
}

#[test]
fn unstable_prefilter_rejected() {
    assert!(FixedDenominatorFilter::new(vec![-1.5, 0.56], 1.0).is_ok());
    assert!(FixedDenominatorFilter::new(vec![2.0], 1.0).is_err());
    assert!(FixedDenominatorFilter::new(vec![0.0, 1.0], 1.0).is_err());
}

#[test]
fn fdm_realization_matches_target_statistics() {
    let r = bandpass_autocorrelation(0.1, 0.3, 1.0, 6)
        .unwrap()
        .with_white_floor(1e-3)
        .unwrap();
    let target = gram_target_from_spectrum(&r, 6, 400).unwrap();
    let mut avg = DMatrix::<f64>::zeros(6, 6);
    let runs = 200;
    for seed in 0..runs {
        let u = realize_input_fdm(&r, 400, 6, seed).unwrap();
        let phi = lcid_core::RegressorMatrix::from_generator(u, 400, 6).unwrap();
        avg += phi.gram() / runs as f64;
    }
    let rel = frob(&(&avg - target.matrix().as_matrix())) / frob(target.matrix().as_matrix());
    assert!(rel <= 0.05, "relative Gram error {rel}");
    let t = toeplitz(r.coefficients(), 6);
    assert!((t[(0, 1)] - r.coefficients()[1]).abs() == 0.0);
}
