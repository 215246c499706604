use crate::dsp::circular_cross_correlate;
use crate::error::{Error, Result};
use crate::scalar::{all_finite, Real};

use super::fwht::fwht;
use super::sequence::MlsSequence;

/// One shot of the in-ear microphone recording, one MLS period long.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordedResponse<T> {
    pub samples: Vec<T>,
    /// 1-based shot number within a measurement.
    pub shot_index: usize,
}

impl<T: Real> RecordedResponse<T> {
    pub fn new(samples: Vec<T>, shot_index: usize) -> Result<Self> {
        if !all_finite(&samples) {
            return Err(Error::NonFinite("recorded response"));
        }
        if shot_index == 0 {
            return Err(Error::InvalidArgument("shot index is 1-based".into()));
        }
        Ok(Self {
            samples,
            shot_index,
        })
    }
}

/// Recovered acoustic impulse response.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseResponse<T> {
    pub samples: Vec<T>,
    pub sample_rate: f64,
}

impl<T: Real> ImpulseResponse<T> {
    pub fn new(samples: Vec<T>, sample_rate: f64) -> Result<Self> {
        if !all_finite(&samples) {
            return Err(Error::NonFinite("impulse response"));
        }
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sample rate {sample_rate} must be positive"
            )));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Element-wise mean of equally long shots.
pub fn average_shots<T: Real>(shots: &[RecordedResponse<T>]) -> Result<Vec<T>> {
    let first = shots
        .first()
        .ok_or_else(|| Error::InvalidArgument("no shots to average".into()))?;
    let len = first.samples.len();
    let mut acc = vec![T::zero(); len];
    for shot in shots {
        if shot.samples.len() != len {
            return Err(Error::LengthMismatch {
                expected: len,
                actual: shot.samples.len(),
            });
        }
        for (a, &s) in acc.iter_mut().zip(&shot.samples) {
            *a += s;
        }
    }
    let inv = T::from_count(shots.len()).recip();
    acc.iter_mut().for_each(|a| *a *= inv);
    Ok(acc)
}

fn check_len<T>(avg: &[T], mls: &MlsSequence) -> Result<()> {
    if avg.len() != mls.len() {
        return Err(Error::LengthMismatch {
            expected: mls.len(),
            actual: avg.len(),
        });
    }
    Ok(())
}

/// `(1 / (L + 1)) * sum_n avg[n] * mls[(n - m) mod L]`, via the FFT.
///
/// For a noiseless recording of `h` this equals `h[m] - sum(h) / (L + 1)`.
pub fn mls_cross_correlation<T: Real>(avg: &[T], mls: &MlsSequence) -> Result<Vec<T>> {
    check_len(avg, mls)?;
    let excitation: Vec<T> = mls.to_real();
    let mut c = circular_cross_correlate(avg, &excitation)?;
    let scale = T::from_count(mls.len() + 1).recip();
    c.iter_mut().for_each(|v| *v *= scale);
    Ok(c)
}

/// Removes the constant `-sum(h) / (L + 1)` bias left by MLS correlation.
///
/// The bias term sums to `sum(h) / (L + 1)` over the period, so adding the
/// sum of the correlation back recovers the response exactly.
pub fn compensate_dc<T: Real>(correlation: &[T]) -> Vec<T> {
    let offset: T = correlation.iter().copied().sum();
    correlation.iter().map(|&c| c + offset).collect()
}

/// Reference deconvolution: frequency-domain cross-correlation.
pub fn deconvolve_direct<T: Real>(
    avg: &[T],
    mls: &MlsSequence,
    sample_rate: f64,
) -> Result<ImpulseResponse<T>> {
    let c = mls_cross_correlation(avg, mls)?;
    ImpulseResponse::new(compensate_dc(&c), sample_rate)
}

/// Fast deconvolution through the permuted Walsh–Hadamard transform.
pub fn deconvolve_fht<T: Real>(
    avg: &[T],
    mls: &MlsSequence,
    sample_rate: f64,
) -> Result<ImpulseResponse<T>> {
    HadamardPlan::new(mls).deconvolve(avg, sample_rate)
}

/// Permutations mapping MLS correlation onto a size-`L + 1` Hadamard
/// transform.
///
/// With register state `s_n` before symbol `n`, the recording sample `y[n]`
/// is scattered to slot `s_n`. The symbol `mls[n - m]` is a parity of `s_n`
/// against a fixed mask `r_m`, so the correlation at lag `m` is read back
/// from transform slot `r_m`.
#[derive(Debug, Clone)]
pub struct HadamardPlan {
    size: usize,
    scatter: Vec<usize>,
    gather: Vec<usize>,
}

impl HadamardPlan {
    pub fn new(mls: &MlsSequence) -> Self {
        let len = mls.len();
        let order = mls.order();
        let states = mls.register_states();

        // Time at which the register holds the unit vector e_i.
        let mut unit_time = vec![0usize; order as usize];
        for (n, &s) in states.iter().enumerate() {
            if s.is_power_of_two() {
                unit_time[s.trailing_zeros() as usize] = n;
            }
        }
        let bits: Vec<bool> = mls.samples().iter().map(|&s| s > 0).collect();
        let gather = (0..len)
            .map(|m| {
                unit_time.iter().enumerate().fold(0usize, |mask, (i, &t)| {
                    let lagged = (t + len - m) % len;
                    mask | (usize::from(bits[lagged]) << i)
                })
            })
            .collect();

        Self {
            size: len + 1,
            scatter: states.into_iter().map(|s| s as usize).collect(),
            gather,
        }
    }

    /// Same quantity as [`mls_cross_correlation`], in `O(L log L)`.
    pub fn correlate<T: Real>(&self, avg: &[T]) -> Result<Vec<T>> {
        if avg.len() != self.scatter.len() {
            return Err(Error::LengthMismatch {
                expected: self.scatter.len(),
                actual: avg.len(),
            });
        }
        let mut work = vec![T::zero(); self.size];
        for (&slot, &y) in self.scatter.iter().zip(avg) {
            work[slot] = y;
        }
        fwht(&mut work);
        // Bit 1 maps to +1, i.e. mls = -(-1)^bit, hence the sign flip.
        let scale = -T::from_count(self.size).recip();
        Ok(self.gather.iter().map(|&slot| work[slot] * scale).collect())
    }

    pub fn deconvolve<T: Real>(&self, avg: &[T], sample_rate: f64) -> Result<ImpulseResponse<T>> {
        let c = self.correlate(avg)?;
        ImpulseResponse::new(compensate_dc(&c), sample_rate)
    }
}
