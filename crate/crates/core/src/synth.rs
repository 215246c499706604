//! Synthetic ear-canal population and simulated MLS measurements.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Subject};
use crate::dsp::circular_convolve;
use crate::error::{Error, Result};
use crate::mls::{average_shots, HadamardPlan, MlsSequence, RecordedResponse};
use crate::preprocess::{FeatureExtractor, BAND_HIGH_HZ, BAND_LOW_HZ};
use crate::SAMPLE_RATE_HZ;

pub const MIN_RESONANCES: usize = 2;
pub const MAX_RESONANCES: usize = 4;
pub const MAX_BASE_DELAY: usize = 32;
pub const Q_LIMITS: (f64, f64) = (2.0, 30.0);
/// Range sampled for new subjects; narrower than [`Q_LIMITS`].
pub const Q_SAMPLE_RANGE: (f64, f64) = (2.0, 10.0);
pub const GAIN_DB_RANGE: (f64, f64) = (3.0, 12.0);
pub const CENTER_RANGE_HZ: (f64, f64) = (1_000.0, 12_000.0);
pub const MIN_CENTER_SPACING_HZ: f64 = 300.0;
pub const MIN_RENDER_LEN: usize = 512;
const DECAY_FLOOR: f64 = 1e-6;
const DECAY_TAIL: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resonance {
    pub center_hz: f64,
    pub q: f64,
    pub gain_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EarModel {
    pub resonances: Vec<Resonance>,
    pub base_delay: usize,
}

impl EarModel {
    pub fn new(resonances: Vec<Resonance>, base_delay: usize) -> Result<Self> {
        for r in &resonances {
            if !(BAND_LOW_HZ < r.center_hz && r.center_hz < BAND_HIGH_HZ) {
                return Err(Error::InvalidArgument(format!(
                    "resonance center {} Hz outside ({BAND_LOW_HZ}, {BAND_HIGH_HZ})",
                    r.center_hz
                )));
            }
            if !(Q_LIMITS.0..=Q_LIMITS.1).contains(&r.q) || !r.gain_db.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "invalid resonance Q={} gain={} dB",
                    r.q, r.gain_db
                )));
            }
        }
        if base_delay > MAX_BASE_DELAY {
            return Err(Error::InvalidArgument(format!(
                "base delay {base_delay} exceeds {MAX_BASE_DELAY}"
            )));
        }
        Ok(Self {
            resonances,
            base_delay,
        })
    }

    /// Copy with each center frequency and gain scaled by `1 + U(-jitter, jitter)`.
    pub fn jittered<R: Rng + ?Sized>(&self, jitter: f64, rng: &mut R) -> Self {
        let resonances = self
            .resonances
            .iter()
            .map(|r| {
                let df = 1.0 + jitter * rng.random_range(-1.0..=1.0);
                let dg = 1.0 + jitter * rng.random_range(-1.0..=1.0);
                Resonance {
                    center_hz: r.center_hz * df,
                    q: r.q,
                    gain_db: r.gain_db * dg,
                }
            })
            .collect();
        Self {
            resonances,
            base_delay: self.base_delay,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_subjects: usize,
    pub n_measurements: usize,
    pub shots_per_measurement: usize,
    /// Per-shot SNR of the recording; `+inf` disables noise.
    pub snr_db: f64,
    pub intra_subject_jitter: f64,
    pub rng_seed: u64,
    pub mls_order: u32,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_subjects: 52,
            n_measurements: 30,
            shots_per_measurement: 5,
            snr_db: 20.0,
            intra_subject_jitter: 0.05,
            rng_seed: 1,
            mls_order: 14,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidArgument(m));
        if self.n_subjects < 3 {
            return fail(format!("need at least 3 subjects, got {}", self.n_subjects));
        }
        if self.n_measurements == 0 || self.shots_per_measurement == 0 {
            return fail("measurement and shot counts must be positive".into());
        }
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return fail(format!("invalid SNR {} dB", self.snr_db));
        }
        if !(0.0..=0.1).contains(&self.intra_subject_jitter) {
            return fail(format!(
                "jitter {} outside [0, 0.1]",
                self.intra_subject_jitter
            ));
        }
        if (1usize << self.mls_order) - 1 < MIN_RENDER_LEN {
            return fail(format!("MLS order {} too short", self.mls_order));
        }
        Ok(())
    }
}

/// Independent generator for subject `index`, derived from the run seed.
pub fn subject_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

pub fn sample_subject<R: Rng + ?Sized>(rng: &mut R) -> EarModel {
    let count = rng.random_range(MIN_RESONANCES..=MAX_RESONANCES);
    let (lo, hi) = (CENTER_RANGE_HZ.0.ln(), CENTER_RANGE_HZ.1.ln());
    let centers = loop {
        let mut c: Vec<f64> = (0..count).map(|_| rng.random_range(lo..hi).exp()).collect();
        c.sort_by(f64::total_cmp);
        if c.windows(2).all(|w| w[1] - w[0] >= MIN_CENTER_SPACING_HZ) {
            break c;
        }
    };
    let resonances = centers
        .into_iter()
        .map(|center_hz| Resonance {
            center_hz,
            q: rng.random_range(Q_SAMPLE_RANGE.0..Q_SAMPLE_RANGE.1),
            gain_db: rng.random_range(GAIN_DB_RANGE.0..GAIN_DB_RANGE.1),
        })
        .collect();
    EarModel {
        resonances,
        base_delay: rng.random_range(0..=MAX_BASE_DELAY),
    }
}

// Peaking-EQ biquad, normalized so a0 = 1: (b0, b1, b2, a1, a2).
fn peaking(r: &Resonance, fs: f64) -> (f64, f64, f64, f64, f64) {
    let a = 10f64.powf(r.gain_db / 40.0);
    let w = 2.0 * std::f64::consts::PI * r.center_hz / fs;
    let alpha = w.sin() / (2.0 * r.q);
    let c = w.cos();
    let a0 = 1.0 + alpha / a;
    (
        (1.0 + alpha * a) / a0,
        -2.0 * c / a0,
        (1.0 - alpha * a) / a0,
        -2.0 * c / a0,
        (1.0 - alpha / a) / a0,
    )
}

/// Impulse response of the resonator cascade, delayed by the model's base delay.
pub fn render_ir(model: &EarModel, length: usize, fs: f64) -> Result<Vec<f64>> {
    if length < MIN_RENDER_LEN {
        return Err(Error::InvalidArgument(format!(
            "render length {length} below {MIN_RENDER_LEN}"
        )));
    }
    if model.base_delay >= length {
        return Err(Error::InvalidArgument("delay exceeds render length".into()));
    }
    let mut x = vec![0.0; length];
    x[model.base_delay] = 1.0;
    for r in &model.resonances {
        let (b0, b1, b2, a1, a2) = peaking(r, fs);
        if !(a2.abs() < 1.0 && a1.abs() < 1.0 + a2) {
            return Err(Error::UnstableFilter(
                format!("resonance at {} Hz has poles outside the unit circle", r.center_hz),
                length,
            ));
        }
        let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
        for v in x.iter_mut() {
            let y = b0 * *v + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
            x2 = x1;
            x1 = *v;
            y2 = y1;
            y1 = y;
            *v = y;
        }
    }
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tail = x[length - DECAY_TAIL..]
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    if !(peak.is_finite() && tail <= DECAY_FLOOR * peak) {
        return Err(Error::UnstableFilter(
            format!("response has not decayed to {DECAY_FLOOR} of peak"),
            length,
        ));
    }
    Ok(x)
}

/// Records `shots_per_measurement` periods of the MLS through a jittered
/// copy of `model`, adding white noise at the configured per-shot SNR.
pub fn simulate_measurement<R: Rng + ?Sized>(
    model: &EarModel,
    mls: &MlsSequence,
    cfg: &SynthConfig,
    rng: &mut R,
) -> Result<Vec<RecordedResponse<f64>>> {
    let ir = render_ir(
        &model.jittered(cfg.intra_subject_jitter, rng),
        mls.len(),
        SAMPLE_RATE_HZ,
    )?;
    let clean = circular_convolve(&mls.to_real::<f64>(), &ir)?;
    let power = clean.iter().map(|v| v * v).sum::<f64>() / clean.len() as f64;
    let sigma = (power / 10f64.powf(cfg.snr_db / 10.0)).sqrt();
    (1..=cfg.shots_per_measurement)
        .map(|shot| {
            let samples = clean
                .iter()
                .map(|&v| {
                    if sigma > 0.0 {
                        v + sigma * rng.sample::<f64, _>(StandardNormal)
                    } else {
                        v
                    }
                })
                .collect();
            RecordedResponse::new(samples, shot)
        })
        .collect()
}

/// Subject identifier for a zero-based index: `S001`, `S002`, ...
pub fn subject_id(index: usize) -> String {
    format!("S{:03}", index + 1)
}

/// Synthesizes, measures and featurizes every subject.
pub fn build_dataset(cfg: &SynthConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mls = MlsSequence::with_standard_taps(cfg.mls_order)?;
    let plan = HadamardPlan::new(&mls);
    let extractor = FeatureExtractor::<f64>::new(SAMPLE_RATE_HZ)?;

    let subjects = (0..cfg.n_subjects)
        .into_par_iter()
        .map(|s| {
            let mut rng = subject_rng(cfg.rng_seed, s);
            let model = sample_subject(&mut rng);
            let id = subject_id(s);
            let measurements = (0..cfg.n_measurements)
                .map(|m| {
                    let shots = simulate_measurement(&model, &mls, cfg, &mut rng)?;
                    let h = plan.deconvolve(&average_shots(&shots)?, SAMPLE_RATE_HZ)?;
                    Ok(extractor.extract(&h)?.with_origin(id.clone(), m as u32 + 1))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Subject { id, measurements })
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(subjects)
}
