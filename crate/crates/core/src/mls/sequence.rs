use crate::error::{Error, Result};
use crate::scalar::Real;

pub const MIN_ORDER: u32 = 2;
pub const MAX_ORDER: u32 = 20;

// Primitive trinomials/pentanomials over GF(2), exponent notation
// (x^k + ... + 1 is listed by its non-constant exponents).
const TAP_TABLE: [&[u32]; 19] = [
    &[2, 1],
    &[3, 2],
    &[4, 3],
    &[5, 3],
    &[6, 5],
    &[7, 6],
    &[8, 6, 5, 4],
    &[9, 5],
    &[10, 7],
    &[11, 9],
    &[12, 11, 10, 4],
    &[13, 12, 11, 8],
    &[14, 13, 12, 2],
    &[15, 14],
    &[16, 15, 13, 4],
    &[17, 14],
    &[18, 11],
    &[19, 18, 17, 14],
    &[20, 17],
];

/// Vetted primitive tap set for `order` in `2..=20`.
pub fn standard_taps(order: u32) -> Option<&'static [u32]> {
    if (MIN_ORDER..=MAX_ORDER).contains(&order) {
        Some(TAP_TABLE[(order - MIN_ORDER) as usize])
    } else {
        None
    }
}

/// ±1 maximal-length sequence produced by a Fibonacci LFSR.
///
/// The register starts in the all-ones state; each step emits the low bit
/// (1 → +1, 0 → −1) and shifts the feedback parity in at the top.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlsSequence {
    order: u32,
    taps: Vec<u32>,
    samples: Vec<i8>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Lfsr {
    order: u32,
    mask: u32,
    pub(crate) state: u32,
}

impl Lfsr {
    pub(crate) fn new(order: u32, taps: &[u32]) -> Self {
        let mask = taps.iter().fold(0u32, |m, &t| m | (1 << (order - t)));
        Self {
            order,
            mask,
            state: (1u32 << order) - 1,
        }
    }

    #[inline]
    pub(crate) fn step(&mut self) -> bool {
        let bit = self.state & 1 == 1;
        let feedback = (self.state & self.mask).count_ones() & 1;
        self.state = (self.state >> 1) | (feedback << (self.order - 1));
        bit
    }
}

/// Generates the MLS of the given order, verifying the taps are maximal.
pub fn generate_mls(order: u32, taps: &[u32]) -> Result<MlsSequence> {
    MlsSequence::generate(order, taps)
}

impl MlsSequence {
    pub fn generate(order: u32, taps: &[u32]) -> Result<Self> {
        if !(MIN_ORDER..=MAX_ORDER).contains(&order) {
            return Err(Error::InvalidArgument(format!(
                "MLS order {order} outside {MIN_ORDER}..={MAX_ORDER}"
            )));
        }
        if taps.is_empty() || taps.iter().any(|&t| t == 0 || t > order) {
            return Err(Error::InvalidArgument(format!(
                "taps {taps:?} must lie in 1..={order}"
            )));
        }
        let mut sorted = taps.to_vec();
        sorted.sort_unstable_by(|a, b| b.cmp(a));
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument(format!("duplicate taps in {taps:?}")));
        }

        let len = (1usize << order) - 1;
        let mut lfsr = Lfsr::new(order, &sorted);
        let start = lfsr.state;
        let mut samples = Vec::with_capacity(len);
        let mut period = 0;
        for n in 0..len {
            samples.push(if lfsr.step() { 1 } else { -1 });
            if lfsr.state == start {
                period = n + 1;
                break;
            }
        }
        if period != len {
            return Err(Error::NonPrimitiveTaps {
                order,
                taps: taps.to_vec(),
                period,
                expected: len,
            });
        }
        Ok(Self {
            order,
            taps: sorted,
            samples,
        })
    }

    pub fn with_standard_taps(order: u32) -> Result<Self> {
        let taps = standard_taps(order).ok_or_else(|| {
            Error::InvalidArgument(format!("no standard taps for order {order}"))
        })?;
        Self::generate(order, taps)
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn taps(&self) -> &[u32] {
        &self.taps
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// The ±1 symbols.
    pub fn samples(&self) -> &[i8] {
        &self.samples
    }

    pub fn to_real<T: Real>(&self) -> Vec<T> {
        self.samples
            .iter()
            .map(|&s| if s > 0 { T::one() } else { -T::one() })
            .collect()
    }

    /// Register contents before each emitted symbol.
    pub(crate) fn register_states(&self) -> Vec<u32> {
        let mut lfsr = Lfsr::new(self.order, &self.taps);
        (0..self.len())
            .map(|_| {
                let s = lfsr.state;
                lfsr.step();
                s
            })
            .collect()
    }
}
