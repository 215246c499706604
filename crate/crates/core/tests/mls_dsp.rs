use earverify::dsp::circular_convolve;
use earverify::mls::{average_shots, deconvolve_direct, deconvolve_fht, MlsSequence, RecordedResponse};
use earverify::SAMPLE_RATE_HZ;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den.max(f64::MIN_POSITIVE)).sqrt()
}

// Periodic autocorrelation straight from the definition, in integers.
fn autocorrelation(s: &[i8]) -> Vec<i64> {
    let n = s.len();
    (0..n)
        .map(|k| (0..n).map(|i| i64::from(s[i]) * i64::from(s[(i + k) % n])).sum())
        .collect()
}

#[test]
fn balance_and_autocorrelation_for_every_order() {
    for k in 2..=14u32 {
        let m = MlsSequence::with_standard_taps(k).unwrap();
        let len = (1usize << k) - 1;
        assert_eq!(m.len(), len);
        let sum: i64 = m.samples().iter().map(|&v| i64::from(v)).sum();
        assert_eq!(sum, 1, "order {k} balance");
        let r = autocorrelation(m.samples());
        assert_eq!(r[0], len as i64);
        assert!(r[1..].iter().all(|&v| v == -1), "order {k} off-peak lags");
    }
}

#[test]
fn generation_is_deterministic() {
    let a = MlsSequence::with_standard_taps(12).unwrap();
    let b = MlsSequence::with_standard_taps(12).unwrap();
    assert_eq!(a, b);
}

#[test]
fn fht_matches_direct_on_random_recordings() {
    let m = MlsSequence::with_standard_taps(10).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..100 {
        let y: Vec<f64> = (0..m.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fast = deconvolve_fht(&y, &m, SAMPLE_RATE_HZ).unwrap();
        let slow = deconvolve_direct(&y, &m, SAMPLE_RATE_HZ).unwrap();
        assert!(rel_l2(&fast.samples, &slow.samples) < 1e-9);
    }
}

#[test]
fn fht_matches_direct_at_order_14() {
    let m = MlsSequence::with_standard_taps(14).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let y: Vec<f64> = (0..m.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let fast = deconvolve_fht(&y, &m, SAMPLE_RATE_HZ).unwrap();
    let slow = deconvolve_direct(&y, &m, SAMPLE_RATE_HZ).unwrap();
    assert!(rel_l2(&fast.samples, &slow.samples) < 1e-9);
}

#[test]
fn round_trip_recovers_random_filters() {
    let m = MlsSequence::with_standard_taps(10).unwrap();
    let x = m.to_real::<f64>();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let g: Vec<f64> = (0..m.len())
            .map(|n| rng.random_range(-1.0..1.0) * (-(n as f64) / 40.0).exp())
            .collect();
        let y = circular_convolve(&x, &g).unwrap();
        let h = deconvolve_fht(&y, &m, SAMPLE_RATE_HZ).unwrap();
        assert!(rel_l2(&h.samples, &g) < 1e-6);
    }
}

#[test]
fn zero_recording_gives_zero_response() {
    let m = MlsSequence::with_standard_taps(8).unwrap();
    let h = deconvolve_fht(&vec![0.0; m.len()], &m, SAMPLE_RATE_HZ).unwrap();
    assert!(h.samples.iter().all(|&v| v == 0.0));
}

#[test]
fn averaging_shots_is_the_mean() {
    let shots = vec![
        RecordedResponse::new(vec![1.0, 2.0, 3.0], 1).unwrap(),
        RecordedResponse::new(vec![3.0, 2.0, -1.0], 2).unwrap(),
    ];
    assert_eq!(average_shots(&shots).unwrap(), vec![2.0, 2.0, 1.0]);
}

#[test]
fn single_precision_round_trip() {
    let m = MlsSequence::with_standard_taps(9).unwrap();
    let mut g = vec![0.0f32; m.len()];
    g[0] = 1.0;
    g[5] = -0.5;
    let y = circular_convolve(&m.to_real::<f32>(), &g).unwrap();
    let h = deconvolve_fht(&y, &m, SAMPLE_RATE_HZ).unwrap();
    assert!((h.samples[0] - 1.0).abs() < 1e-4);
    assert!((h.samples[5] + 0.5).abs() < 1e-4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn deconvolution_is_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let m = MlsSequence::with_standard_taps(9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y1: Vec<f64> = (0..m.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y2: Vec<f64> = (0..m.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mix: Vec<f64> = y1.iter().zip(&y2).map(|(u, v)| a * u + b * v).collect();
        let h = deconvolve_fht(&mix, &m, SAMPLE_RATE_HZ).unwrap().samples;
        let h1 = deconvolve_fht(&y1, &m, SAMPLE_RATE_HZ).unwrap().samples;
        let h2 = deconvolve_fht(&y2, &m, SAMPLE_RATE_HZ).unwrap().samples;
        for k in 0..h.len() {
            prop_assert!((h[k] - (a * h1[k] + b * h2[k])).abs() < 1e-9);
        }
    }

    #[test]
    fn fht_equals_direct(seed in any::<u64>(), order in 2u32..=12) {
        let m = MlsSequence::with_standard_taps(order).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y: Vec<f64> = (0..m.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fast = deconvolve_fht(&y, &m, SAMPLE_RATE_HZ).unwrap();
        let slow = deconvolve_direct(&y, &m, SAMPLE_RATE_HZ).unwrap();
        prop_assert!(rel_l2(&fast.samples, &slow.samples) < 1e-9);
    }
}
