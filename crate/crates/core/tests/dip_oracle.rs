//! The fast dip against the exhaustive linear-programming oracle.

mod common;

use common::brute_force_dip;
use kseek_core::stats::{dip_statistic, SortedSample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn equally_spaced_oracle() {
    for n in [4usize, 5, 8] {
        let v: Vec<f64> = (0..n).map(|i| i as f64).collect();
        assert!((brute_force_dip(&v) - 0.5 / n as f64).abs() < 1e-12);
    }
}

#[test]
fn fast_dip_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for case in 0..1000 {
        let n = rng.random_range(4..=8);
        let bimodal = case % 3 == 0;
        let sample: Vec<f64> = (0..n)
            .map(|i| {
                let u: f64 = rng.random();
                if bimodal && i % 2 == 0 {
                    u + 5.0
                } else {
                    u
                }
            })
            .collect();
        let fast = dip_statistic(&SortedSample::from_unsorted(sample.clone()).unwrap()).unwrap();
        let slow = brute_force_dip(&sample);
        assert!((fast - slow).abs() < 1e-12, "case {case}: {sample:?} fast {fast} brute {slow}");
    }
}

#[test]
fn clumps_oracle() {
    let mut v: Vec<f64> = (0..4).map(|i| i as f64 * 1e-3).collect();
    v.extend((0..4).map(|i| 1.0 + i as f64 * 1e-3));
    let fast = dip_statistic(&SortedSample::from_unsorted(v.clone()).unwrap()).unwrap();
    assert!((fast - brute_force_dip(&v)).abs() < 1e-12);
}

#[test]
fn ties_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..500 {
        let n = rng.random_range(4..=8);
        let sample: Vec<f64> = (0..n).map(|_| rng.random_range(0..5) as f64).collect();
        if sample.iter().all(|&x| x == sample[0]) {
            continue;
        }
        let fast = dip_statistic(&SortedSample::from_unsorted(sample.clone()).unwrap()).unwrap();
        assert!((fast - brute_force_dip(&sample)).abs() < 1e-12, "{sample:?}");
    }
}
