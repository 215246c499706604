//! FFT helpers shared by the measurement, preprocessing and synthesis code.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::scalar::Real;

pub(crate) fn to_complex<T: Real>(x: &[T], len: usize) -> Vec<Complex<T>> {
    let mut out = vec![Complex::new(T::zero(), T::zero()); len];
    for (o, &v) in out.iter_mut().zip(x) {
        o.re = v;
    }
    out
}

pub(crate) fn fft_in_place<T: Real>(buf: &mut [Complex<T>], inverse: bool) {
    let mut planner = FftPlanner::new();
    let fft = if inverse {
        planner.plan_fft_inverse(buf.len())
    } else {
        planner.plan_fft_forward(buf.len())
    };
    fft.process(buf);
}

/// Circular convolution of two equal-length real sequences.
pub fn circular_convolve<T: Real>(a: &[T], b: &[T]) -> Result<Vec<T>> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let n = a.len();
    let mut fa = to_complex(a, n);
    let mut fb = to_complex(b, n);
    fft_in_place(&mut fa, false);
    fft_in_place(&mut fb, false);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= *y;
    }
    fft_in_place(&mut fa, true);
    let scale = T::from_count(n).recip();
    Ok(fa.iter().map(|c| c.re * scale).collect())
}

/// Circular cross-correlation `c[m] = sum_n y[n] x[(n - m) mod L]`.
pub fn circular_cross_correlate<T: Real>(y: &[T], x: &[T]) -> Result<Vec<T>> {
    if y.len() != x.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    let n = y.len();
    let mut fy = to_complex(y, n);
    let mut fx = to_complex(x, n);
    fft_in_place(&mut fy, false);
    fft_in_place(&mut fx, false);
    for (a, b) in fy.iter_mut().zip(&fx) {
        *a *= b.conj();
    }
    fft_in_place(&mut fy, true);
    let scale = T::from_count(n).recip();
    Ok(fy.iter().map(|c| c.re * scale).collect())
}
