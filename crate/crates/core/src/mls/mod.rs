//! Maximum-length-sequence excitation and impulse-response recovery.
//!
//! A steady-state MLS measurement records `y = mls ⊛ h` (circular). The
//! impulse response is recovered by cross-correlating `y` with the
//! excitation, either directly in the frequency domain or through a permuted
//! fast Walsh–Hadamard transform of size `L + 1`.

mod deconvolve;
mod fwht;
mod sequence;

pub use deconvolve::{
    average_shots, compensate_dc, deconvolve_direct, deconvolve_fht, mls_cross_correlation,
    HadamardPlan, ImpulseResponse, RecordedResponse,
};
pub use fwht::fwht;
pub use sequence::{generate_mls, standard_taps, MlsSequence, MAX_ORDER, MIN_ORDER};
