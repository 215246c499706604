use crate::scalar::Real;

/// In-place unnormalized fast Walsh–Hadamard transform.
///
/// Output index `p` holds `sum_q x[q] * (-1)^popcount(p & q)`.
///
/// # Panics
/// Panics if the length is not a power of two.
pub fn fwht<T: Real>(data: &mut [T]) {
    let n = data.len();
    assert!(n.is_power_of_two(), "FWHT length {n} is not a power of two");
    let mut half = 1;
    while half < n {
        for block in data.chunks_exact_mut(2 * half) {
            let (lo, hi) = block.split_at_mut(half);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        half *= 2;
    }
}
