use std::path::Path;

use lcid::bench::{aggregate, run_seed, Method, MetricsRecord, RunStatus};
use lcid::csvio::{matrix_to_csv, parse_matrix};
use lcid::metrics::{nrmse, v_app};
use nalgebra::{DMatrix, DVector};
use proptest::collection::vec;
use proptest::prelude::*;

fn record(method: Method, run: usize, nrmse: f64) -> MetricsRecord {
    MetricsRecord {
        method,
        snr: 15.0,
        run,
        nrmse,
        v_app: nrmse * nrmse,
        mu_phi: 0.9,
        mu_h: None,
        fim_fit_error: 0.0,
        wall_time_s: 0.0,
        status: RunStatus::Ok,
    }
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn matrix_csv_round_trip_is_exact(rows in 1usize..6, cols in 1usize..6, data in vec(any::<f64>(), 36)) {
        let data: Vec<f64> = data.into_iter().map(|x| if x.is_nan() { 0.0 } else { x }).collect();
        let m = DMatrix::from_fn(rows, cols, |i, j| data[i * 6 + j]);
        let back = parse_matrix(Path::new("m.csv"), &matrix_to_csv(&m)).unwrap();
        prop_assert_eq!(back, m);
    }

    #[test]
    fn v_app_is_nonnegative(theta in vec(-1.0..1.0f64, 1..8), noise in vec(-0.1..0.1f64, 8)) {
        let theta = {
            let mut t = theta;
            t[0] = 1.0;
            t
        };
        let hat: Vec<f64> = theta.iter().zip(&noise).map(|(a, b)| a + b).collect();
        if let Ok(v) = v_app(&hat, &theta, 0.1, 256) {
            prop_assert!(v >= 0.0);
        }
    }

    #[test]
    fn nrmse_is_scale_invariant(theta in vec(0.1..2.0f64, 1..10), scale in 1e-3..1e3f64) {
        let t = DVector::from_vec(theta.clone());
        let hat = DVector::from_vec(theta.iter().map(|x| x * 0.9).collect());
        let a = nrmse(&hat, &t).unwrap();
        let b = nrmse(&(&hat * scale), &(&t * scale)).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }

    #[test]
    fn aggregate_ignores_record_order(values in vec(0.0..2.0f64, 2..20), rot in 0usize..20) {
        let records: Vec<MetricsRecord> = values.iter().enumerate().map(|(i, &v)| record(Method::Omp, i, v)).collect();
        let mut shuffled = records.clone();
        let k = rot % shuffled.len();
        shuffled.rotate_left(k);
        prop_assert_eq!(aggregate(&records), aggregate(&shuffled));
    }

    #[test]
    fn run_seeds_are_distinct_across_runs(master in any::<u64>(), snr in -10.0..40.0f64) {
        let seeds: Vec<u64> = (0..50).map(|r| run_seed(master, snr, r)).collect();
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        prop_assert_eq!(sorted.len(), seeds.len());
    }
}
