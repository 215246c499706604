//! Sequential minimal optimization for the C-SVC dual
//!
//! ```text
//! min_a  1/2 a^T Q a - e^T a   s.t.  y^T a = 0,  0 <= a_t <= C,
//! ```
//!
//! with `Q_ij = y_i y_j K(x_i, x_j)`. Each step optimizes the
//! maximal-violating pair analytically.

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::kernel::{KernelSpace, RowCache, DEFAULT_CACHE_BYTES};

const TAU: f64 = 1e-12;
const ITERATIONS_PER_ROW: usize = 100_000;

/// Optimal dual variables and the intercept of `f(x) = sum a_i y_i K_i(x) + bias`.
#[derive(Debug, Clone)]
pub struct DualSolution<T> {
    pub alpha: Vec<T>,
    pub bias: T,
    pub objective: T,
    pub iterations: usize,
    /// Final maximal KKT violation `m(a) - M(a)`.
    pub violation: T,
}

pub fn solve_dual<T: Real, S: KernelSpace<T>>(
    space: &S,
    rows: &[S::Row],
    positive: &[bool],
    c: T,
    tol: T,
) -> Result<DualSolution<T>> {
    let n = rows.len();
    assert_eq!(n, positive.len(), "one label per row");
    let npos = positive.iter().filter(|&&p| p).count();
    if npos == 0 || npos == n {
        return Err(Error::SingleClass {
            positives: npos,
            negatives: n - npos,
        });
    }
    if !(c > T::zero() && tol > T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "C ({c}) and tolerance ({tol}) must be positive"
        )));
    }

    let y: Vec<T> = positive
        .iter()
        .map(|&p| if p { T::one() } else { -T::one() })
        .collect();
    let diag: Vec<T> = rows.iter().map(|&r| space.eval(r, r)).collect();
    let mut alpha = vec![T::zero(); n];
    let mut grad = vec![-T::one(); n];
    let mut cache = RowCache::new(n, DEFAULT_CACHE_BYTES);
    let max_iter = ITERATIONS_PER_ROW.saturating_mul(n);
    let tau = T::lit(TAU);

    let in_up = |a: T, pos: bool| if pos { a < c } else { a > T::zero() };
    let in_low = |a: T, pos: bool| if pos { a > T::zero() } else { a < c };

    let mut iterations = 0;
    let violation = loop {
        let mut gmax = T::neg_infinity();
        let mut gmin = T::infinity();
        let (mut i, mut j) = (usize::MAX, usize::MAX);
        for t in 0..n {
            let v = -y[t] * grad[t];
            if in_up(alpha[t], positive[t]) && v > gmax {
                gmax = v;
                i = t;
            }
            if in_low(alpha[t], positive[t]) && v < gmin {
                gmin = v;
                j = t;
            }
        }
        let gap = gmax - gmin;
        if i == usize::MAX || j == usize::MAX || gap < tol {
            break if gap.is_finite() { gap } else { T::zero() };
        }
        if iterations >= max_iter {
            return Err(Error::NotConverged {
                iterations,
                violation: gap.as_f64(),
                tolerance: tol.as_f64(),
            });
        }
        iterations += 1;

        cache.ensure(i, |out| space.eval_row(rows[i], rows, out));
        cache.ensure(j, |out| space.eval_row(rows[j], rows, out));
        let (ki, kj) = (cache.get(i), cache.get(j));

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let mut quad = diag[i] + diag[j] - T::lit(2.0) * ki[j];
        if quad <= T::zero() {
            quad = tau;
        }
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > T::zero() {
                if alpha[j] < T::zero() {
                    alpha[j] = T::zero();
                    alpha[i] = diff;
                }
            } else if alpha[i] < T::zero() {
                alpha[i] = T::zero();
                alpha[j] = -diff;
            }
            if diff > T::zero() {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else {
                if alpha[j] < T::zero() {
                    alpha[j] = T::zero();
                    alpha[i] = sum;
                }
                if alpha[i] < T::zero() {
                    alpha[i] = T::zero();
                    alpha[j] = sum;
                }
            }
        }

        // G_t += Q_ti da_i + Q_tj da_j
        let di = (alpha[i] - old_i) * y[i];
        let dj = (alpha[j] - old_j) * y[j];
        for t in 0..n {
            grad[t] += y[t] * (ki[t] * di + kj[t] * dj);
        }
    };

    let bias = -intercept(&alpha, &grad, &y, c);
    let objective = alpha
        .iter()
        .zip(&grad)
        .map(|(&a, &g)| a * (g - T::one()))
        .sum::<T>()
        / T::lit(2.0);
    Ok(DualSolution {
        alpha,
        bias,
        objective,
        iterations,
        violation,
    })
}

// Average of y_t G_t over free variables, or the midpoint of the feasible
// interval when every variable sits at a bound.
fn intercept<T: Real>(alpha: &[T], grad: &[T], y: &[T], c: T) -> T {
    let mut ub = T::infinity();
    let mut lb = T::neg_infinity();
    let mut free_sum = T::zero();
    let mut free = 0usize;
    for t in 0..alpha.len() {
        let yg = y[t] * grad[t];
        let pos = y[t] > T::zero();
        if alpha[t] >= c {
            if pos {
                lb = lb.max(yg);
            } else {
                ub = ub.min(yg);
            }
        } else if alpha[t] <= T::zero() {
            if pos {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    if free > 0 {
        free_sum / T::from_count(free)
    } else {
        (ub + lb) / T::lit(2.0)
    }
}
