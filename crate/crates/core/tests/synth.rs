use earverify::experiment::{baseline_only, ProtocolConfig, RunOptions};
use earverify::mls::{average_shots, deconvolve_fht, MlsSequence};
use earverify::synth::{
    build_dataset, render_ir, sample_subject, simulate_measurement, subject_rng, EarModel,
    Resonance, SynthConfig,
};
use earverify::SAMPLE_RATE_HZ;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small(n_subjects: usize, seed: u64) -> SynthConfig {
    SynthConfig {
        n_subjects,
        shots_per_measurement: 1,
        rng_seed: seed,
        ..SynthConfig::default()
    }
}

fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

fn model(resonances: &[(f64, f64, f64)], delay: usize) -> EarModel {
    EarModel {
        resonances: resonances
            .iter()
            .map(|&(center_hz, q, gain_db)| Resonance { center_hz, q, gain_db })
            .collect(),
        base_delay: delay,
    }
}

fn argmax_abs(x: &[f64]) -> usize {
    (0..x.len()).max_by(|&i, &j| x[i].abs().total_cmp(&x[j].abs())).unwrap()
}

#[test]
fn subject_sampling_is_deterministic_and_distinct() {
    let models: Vec<EarModel> = (0..52).map(|s| sample_subject(&mut subject_rng(1, s))).collect();
    let again: Vec<EarModel> = (0..52).map(|s| sample_subject(&mut subject_rng(1, s))).collect();
    assert_eq!(models, again);
    for (i, a) in models.iter().enumerate() {
        assert!((2..=4).contains(&a.resonances.len()));
        assert!(a.base_delay <= 32);
        for r in &a.resonances {
            assert!(r.center_hz >= 1_000.0 && r.center_hz <= 12_000.0);
            assert!((2.0..=30.0).contains(&r.q));
        }
        for w in a.resonances.windows(2) {
            assert!(w[1].center_hz - w[0].center_hz >= 300.0);
        }
        for b in &models[i + 1..] {
            assert_ne!(a, b);
        }
    }
}

#[test]
fn plain_delay_renders_an_impulse() {
    let h = render_ir(&model(&[], 0), 512, SAMPLE_RATE_HZ).unwrap();
    assert_eq!(h[0], 1.0);
    assert!(h[1..].iter().all(|&v| v == 0.0));
}

#[test]
fn delay_shifts_the_response() {
    let res = [(2_000.0, 3.0, 6.0), (6_000.0, 4.0, 6.0)];
    let a = render_ir(&model(&res, 0), 2048, SAMPLE_RATE_HZ).unwrap();
    let b = render_ir(&model(&res, 5), 2048, SAMPLE_RATE_HZ).unwrap();
    assert_eq!(argmax_abs(&b), argmax_abs(&a) + 5);
}

#[test]
fn resonance_peak_lands_on_its_center() {
    let n = 16_384;
    let h = render_ir(&model(&[(3_000.0, 10.0, 12.0)], 0), n, SAMPLE_RATE_HZ).unwrap();
    let hz_per_bin = SAMPLE_RATE_HZ / n as f64;
    let (lo, hi) = ((1_500.0 / hz_per_bin) as usize, (6_000.0 / hz_per_bin) as usize);
    let mag = |k: usize| {
        let (mut re, mut im) = (0.0, 0.0);
        for (t, &v) in h.iter().enumerate() {
            let ph = -2.0 * std::f64::consts::PI * ((k * t) % n) as f64 / n as f64;
            re += v * ph.cos();
            im += v * ph.sin();
        }
        re.hypot(im)
    };
    let peak = (lo..hi).max_by(|&a, &b| mag(a).total_cmp(&mag(b))).unwrap();
    let f = peak as f64 * hz_per_bin;
    assert!((f - 3_000.0).abs() / 3_000.0 <= 0.02, "peak at {f} Hz");
}

#[test]
fn unstable_resonance_is_rejected() {
    assert!(render_ir(&model(&[(3_000.0, 10.0, 6.0)], 0), 100, SAMPLE_RATE_HZ).is_err());
    assert!(render_ir(&model(&[(23_990.0, 30.0, 12.0)], 0), 512, SAMPLE_RATE_HZ).is_err());
}

#[test]
fn noiseless_measurement_round_trips() {
    let cfg = SynthConfig {
        snr_db: f64::INFINITY,
        intra_subject_jitter: 0.0,
        ..SynthConfig::default()
    };
    let mls = MlsSequence::with_standard_taps(cfg.mls_order).unwrap();
    let mut rng = subject_rng(9, 0);
    let m = sample_subject(&mut rng);
    let shots = simulate_measurement(&m, &mls, &cfg, &mut rng).unwrap();
    assert_eq!(shots.len(), cfg.shots_per_measurement);
    let h = deconvolve_fht(&average_shots(&shots).unwrap(), &mls, SAMPLE_RATE_HZ).unwrap();
    let truth = render_ir(&m, mls.len(), SAMPLE_RATE_HZ).unwrap();
    assert!(rel_l2(&h.samples, &truth) < 1e-6);

    // Without jitter or noise every measurement is the same.
    let again = simulate_measurement(&m, &mls, &cfg, &mut rng).unwrap();
    assert_eq!(again, shots);
}

#[test]
fn measured_snr_matches_nominal() {
    let cfg = SynthConfig {
        snr_db: 20.0,
        intra_subject_jitter: 0.0,
        shots_per_measurement: 1,
        ..SynthConfig::default()
    };
    let mls = MlsSequence::with_standard_taps(cfg.mls_order).unwrap();
    let len = mls.len() as f64;
    let mut offsets = Vec::new();
    for s in 0..40 {
        let mut rng = subject_rng(3, s);
        let m = sample_subject(&mut rng);
        let shots = simulate_measurement(&m, &mls, &cfg, &mut rng).unwrap();
        let h = deconvolve_fht(&shots[0].samples, &mls, SAMPLE_RATE_HZ).unwrap();
        let truth = render_ir(&m, mls.len(), SAMPLE_RATE_HZ).unwrap();
        let err: Vec<f64> = h.samples.iter().zip(&truth).map(|(a, b)| a - b).collect();
        let signal: f64 = truth.iter().map(|v| v * v).sum();
        let mean = err.iter().sum::<f64>() / len;
        let spread: f64 = err.iter().map(|e| (e - mean).powi(2)).sum();
        let snr = 10.0 * (signal / spread).log10();
        assert!((snr - 20.0).abs() <= 3.0, "subject {s}: {snr} dB");
        // Exact DC recovery adds a common-mode error whose energy matches
        // the per-sample noise energy on average.
        offsets.push(mean * mean * len / spread);
    }
    let avg = offsets.iter().sum::<f64>() / offsets.len() as f64;
    assert!((0.4..2.0).contains(&avg), "common-mode energy ratio {avg}");
}

#[test]
fn datasets_are_reproducible_to_the_byte() {
    let cfg = SynthConfig {
        n_measurements: 4,
        ..small(3, 11)
    };
    let a = build_dataset(&cfg).unwrap();
    let b = build_dataset(&cfg).unwrap();
    assert_eq!(a.n_rows(), 12);
    assert_eq!(a.to_csv(), b.to_csv());

    let (da, db) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    a.write_dir(da.path()).unwrap();
    b.write_dir(db.path()).unwrap();
    for f in ["manifest.json", "features.csv"] {
        assert_eq!(
            std::fs::read(da.path().join(f)).unwrap(),
            std::fs::read(db.path().join(f)).unwrap()
        );
    }
    let c = build_dataset(&SynthConfig { rng_seed: 12, ..cfg }).unwrap();
    assert_ne!(a.digest(), c.digest());
}

#[test]
fn same_subject_measurements_are_more_similar() {
    let cfg = SynthConfig {
        n_measurements: 10,
        intra_subject_jitter: 0.02,
        ..small(20, 5)
    };
    let ds = build_dataset(&cfg).unwrap();
    let subjects = ds.subjects();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let trials = 2000;
    let mut wins = 0;
    for _ in 0..trials {
        let a = rng.random_range(0..subjects.len());
        let b = (a + rng.random_range(1..subjects.len())) % subjects.len();
        let i = rng.random_range(0..10);
        let j = (i + rng.random_range(1..10)) % 10;
        let k = rng.random_range(0..10);
        let anchor = &subjects[a].measurements[i].values;
        if cosine(anchor, &subjects[b].measurements[k].values)
            < cosine(anchor, &subjects[a].measurements[j].values)
        {
            wins += 1;
        }
    }
    assert!(wins as f64 >= 0.95 * trials as f64, "{wins}/{trials}");
}

#[test]
fn subjects_spread_more_than_measurements() {
    let ds = build_dataset(&SynthConfig {
        n_subjects: 12,
        ..SynthConfig::default()
    })
    .unwrap();
    let dim = 256;
    let means: Vec<Vec<f64>> = ds
        .subjects()
        .iter()
        .map(|s| {
            let n = s.measurements.len() as f64;
            (0..dim)
                .map(|d| s.measurements.iter().map(|m| m.values[d]).sum::<f64>() / n)
                .collect()
        })
        .collect();
    let grand: Vec<f64> = (0..dim)
        .map(|d| means.iter().map(|m| m[d]).sum::<f64>() / means.len() as f64)
        .collect();
    let (mut within, mut between) = (0.0, 0.0);
    for (s, mean) in ds.subjects().iter().zip(&means) {
        for m in &s.measurements {
            within += m.values.iter().zip(mean).map(|(x, c)| (x - c).powi(2)).sum::<f64>();
        }
        between += s.measurements.len() as f64
            * mean.iter().zip(&grand).map(|(x, c)| (x - c).powi(2)).sum::<f64>();
    }
    let n = ds.n_rows() as f64;
    let k = ds.subjects().len() as f64;
    let fisher = (between / (k - 1.0)) / (within / (n - k));
    assert!(fisher > 1.0, "fisher ratio {fisher}");
}

// Spearman rank correlation without ties.
fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let rank = |v: &[f64]| {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        for (k, &i) in idx.iter().enumerate() {
            r[i] = k as f64;
        }
        r
    };
    let (rx, ry) = (rank(x), rank(y));
    let n = x.len() as f64;
    let mean = (n - 1.0) / 2.0;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mean) * (b - mean)).sum();
    let var: f64 = rx.iter().map(|a| (a - mean).powi(2)).sum();
    cov / var
}

#[test]
fn more_noise_does_not_help() {
    let levels = [40.0, 10.0, 0.0, -10.0];
    let protocol = ProtocolConfig::default();
    let mut mean_eer = Vec::new();
    for &snr in &levels {
        let mut total = 0.0;
        for seed in 1..=5 {
            let ds = build_dataset(&SynthConfig {
                snr_db: snr,
                ..small(5, seed)
            })
            .unwrap();
            total += baseline_only(&ds, &protocol, &RunOptions::default())
                .unwrap()
                .baseline
                .eer_pct;
        }
        mean_eer.push(total / 5.0);
    }
    let noise: Vec<f64> = levels.iter().map(|s| -s).collect();
    let rho = spearman(&noise, &mean_eer);
    assert!(rho > 0.0, "EER by level {mean_eer:?}");
}
