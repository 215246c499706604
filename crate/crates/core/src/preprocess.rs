//! Impulse response → 256-sample authentication feature.
//!
//! The chain is, in order: minimum-phase reconstruction, unit-energy
//! normalization, clipping the head, and a zero-delay linear-phase bandpass.

use rustfft::num_complex::Complex;

use crate::dsp::{fft_in_place, to_complex};
use crate::error::{Error, Result};
use crate::mls::ImpulseResponse;
use crate::scalar::{all_finite, sq_norm, Real};

/// Length of the authentication feature.
pub const FEATURE_DIM: usize = 256;
pub const BAND_LOW_HZ: f64 = 100.0;
pub const BAND_HIGH_HZ: f64 = 22_000.0;

/// Magnitude bins below this fraction of the peak are clamped before the log.
pub const SPECTRAL_FLOOR: f64 = 1e-10;

const MAX_FIR_TAPS: usize = 1 << 18;

/// Preprocessed ear-canal feature `f[n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector<T> {
    pub values: Vec<T>,
    pub subject_id: String,
    pub measurement_id: u32,
}

impl<T: Real> FeatureVector<T> {
    pub fn new(values: Vec<T>, subject_id: impl Into<String>, measurement_id: u32) -> Result<Self> {
        if values.len() != FEATURE_DIM {
            return Err(Error::LengthMismatch {
                expected: FEATURE_DIM,
                actual: values.len(),
            });
        }
        if !all_finite(&values) {
            return Err(Error::NonFinite("feature vector"));
        }
        Ok(Self {
            values,
            subject_id: subject_id.into(),
            measurement_id,
        })
    }

    pub fn with_origin(mut self, subject_id: impl Into<String>, measurement_id: u32) -> Self {
        self.subject_id = subject_id.into();
        self.measurement_id = measurement_id;
        self
    }
}

impl<T> AsRef<[T]> for FeatureVector<T> {
    fn as_ref(&self) -> &[T] {
        &self.values
    }
}

/// Minimum-phase counterpart of `h` with the same magnitude spectrum,
/// computed by folding the real cepstrum.
pub fn minimum_phase<T: Real>(h: &ImpulseResponse<T>) -> Result<ImpulseResponse<T>> {
    let n = h.len();
    if h.samples.iter().all(|v| v.is_zero()) {
        return Err(Error::ZeroSignal);
    }
    let nfft = (4 * n).next_power_of_two();
    let inv_n = T::from_count(nfft).recip();

    let mut spec = to_complex(&h.samples, nfft);
    fft_in_place(&mut spec, false);
    let peak = spec.iter().map(|c| c.norm()).fold(T::zero(), T::max);
    let floor = peak * T::lit(SPECTRAL_FLOOR);
    let mut cep: Vec<Complex<T>> = spec
        .iter()
        .map(|c| Complex::new(c.norm().max(floor).ln(), T::zero()))
        .collect();
    fft_in_place(&mut cep, true);

    // Causal folding: keep c[0] and c[N/2], double positive quefrencies,
    // drop negative ones.
    let half = nfft / 2;
    let two = T::lit(2.0);
    for (q, c) in cep.iter_mut().enumerate() {
        let re = c.re * inv_n;
        let w = match q {
            0 => T::one(),
            q if q == half => T::one(),
            q if q < half => two,
            _ => T::zero(),
        };
        *c = Complex::new(re * w, T::zero());
    }
    fft_in_place(&mut cep, false);
    for c in cep.iter_mut() {
        *c = c.exp();
    }
    fft_in_place(&mut cep, true);

    let samples = cep.iter().take(n).map(|c| c.re * inv_n).collect();
    ImpulseResponse::new(samples, h.sample_rate)
}

/// Scales `x` to unit energy.
pub fn normalize_power<T: Real>(x: &[T]) -> Result<Vec<T>> {
    let energy = sq_norm(x);
    if energy.is_zero() {
        return Err(Error::ZeroSignal);
    }
    let inv = energy.sqrt().recip();
    Ok(x.iter().map(|&v| v * inv).collect())
}

/// The first `n` samples of `x`.
pub fn clip_head<T: Real>(x: &[T], n: usize) -> Result<Vec<T>> {
    if x.len() < n {
        return Err(Error::InvalidArgument(format!(
            "cannot clip {n} samples from a signal of length {}",
            x.len()
        )));
    }
    Ok(x[..n].to_vec())
}

/// Linear-phase windowed-sinc (Hamming) bandpass FIR with an odd tap count.
///
/// The length is chosen so the Hamming transition band fits between each
/// cutoff and the stopband edges at `lo / 2` and `hi + (fs / 2 - hi) / 2`.
#[derive(Debug, Clone)]
pub struct BandpassFir<T> {
    taps: Vec<T>,
}

impl<T: Real> BandpassFir<T> {
    pub fn design(lo: f64, hi: f64, fs: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && fs.is_finite() && 0.0 < lo && lo < hi && hi < fs / 2.0)
        {
            return Err(Error::InvalidArgument(format!(
                "band edges must satisfy 0 < lo < hi < fs/2 (lo={lo}, hi={hi}, fs={fs})"
            )));
        }
        let guard = (lo / 2.0).min((fs / 2.0 - hi) / 2.0);
        // Hamming main-lobe transition is ~3.3 fs / N wide.
        let half = (3.3 * fs / (4.0 * guard)).ceil() as usize;
        let len = 2 * half + 1;
        if len > MAX_FIR_TAPS {
            return Err(Error::InvalidArgument(format!(
                "band edges require {len} taps (limit {MAX_FIR_TAPS})"
            )));
        }

        let sinc = |x: f64| {
            if x == 0.0 {
                1.0
            } else {
                (std::f64::consts::PI * x).sin() / (std::f64::consts::PI * x)
            }
        };
        let (bh, bl) = (2.0 * hi / fs, 2.0 * lo / fs);
        let taps = (0..len)
            .map(|i| {
                let k = i.abs_diff(half) as f64;
                let window = 0.54 + 0.46 * (std::f64::consts::PI * k / half as f64).cos();
                T::lit(window * (bh * sinc(bh * k) - bl * sinc(bl * k)))
            })
            .collect();
        Ok(Self { taps })
    }

    pub fn taps(&self) -> &[T] {
        &self.taps
    }

    pub fn group_delay(&self) -> usize {
        self.taps.len() / 2
    }

    /// Filters `x` and returns the delay-compensated, same-length output.
    pub fn apply(&self, x: &[T]) -> Vec<T> {
        let delay = self.group_delay() as isize;
        let ntaps = self.taps.len() as isize;
        let len = x.len() as isize;
        (0..len)
            .map(|n| {
                // y[n] = sum_m x[m] h[n - m + delay], 0 <= n - m + delay < ntaps
                let m_lo = (n + delay - ntaps + 1).max(0);
                let m_hi = (n + delay).min(len - 1);
                (m_lo..=m_hi)
                    .map(|m| x[m as usize] * self.taps[(n - m + delay) as usize])
                    .sum()
            })
            .collect()
    }

    /// Magnitude response at `freq` Hz.
    pub fn gain_at(&self, freq: f64, fs: f64) -> f64 {
        let w = 2.0 * std::f64::consts::PI * freq / fs;
        let d = self.group_delay() as f64;
        let (re, im) = self
            .taps
            .iter()
            .enumerate()
            .fold((0.0, 0.0), |(re, im), (i, t)| {
                let phase = w * (i as f64 - d);
                (re + t.as_f64() * phase.cos(), im - t.as_f64() * phase.sin())
            });
        re.hypot(im)
    }
}

/// Bandpass-filters `x` between `lo` and `hi` Hz with zero net delay.
pub fn bandpass<T: Real>(x: &[T], lo: f64, hi: f64, fs: f64) -> Result<Vec<T>> {
    Ok(BandpassFir::design(lo, hi, fs)?.apply(x))
}

/// Reusable feature chain; holds the designed bandpass.
#[derive(Debug, Clone)]
pub struct FeatureExtractor<T> {
    filter: BandpassFir<T>,
}

impl<T: Real> FeatureExtractor<T> {
    pub fn new(sample_rate: f64) -> Result<Self> {
        Ok(Self {
            filter: BandpassFir::design(BAND_LOW_HZ, BAND_HIGH_HZ, sample_rate)?,
        })
    }

    pub fn extract(&self, h: &ImpulseResponse<T>) -> Result<FeatureVector<T>> {
        if h.len() < FEATURE_DIM {
            return Err(Error::InvalidArgument(format!(
                "impulse response has {} samples, need at least {FEATURE_DIM}",
                h.len()
            )));
        }
        let min_phase = minimum_phase(h)?;
        let unit = normalize_power(&min_phase.samples)?;
        let head = clip_head(&unit, FEATURE_DIM)?;
        FeatureVector::new(self.filter.apply(&head), "", 0)
    }
}

/// minimum_phase → normalize_power → clip_head(256) → bandpass(100 Hz–22 kHz).
pub fn extract_feature<T: Real>(h: &ImpulseResponse<T>) -> Result<FeatureVector<T>> {
    FeatureExtractor::new(h.sample_rate)?.extract(h)
}
