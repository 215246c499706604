use crate::error::{Error, Result};
use crate::scalar::Real;

const MAX_ITER: usize = 100;
const MIN_STEP: f64 = 1e-10;
const HESSIAN_RIDGE: f64 = 1e-12;
const GRAD_TOL: f64 = 1e-10;

/// Sigmoid map `P(authorized | f) = 1 / (1 + exp(a * f + b))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlattParams<T> {
    pub a: T,
    pub b: T,
}

impl<T: Real> PlattParams<T> {
    /// Posterior for a raw decision value. Never NaN for finite input.
    pub fn probability(&self, decision: T) -> T {
        let z = self.a * decision + self.b;
        if z >= T::zero() {
            let e = (-z).exp();
            e / (T::one() + e)
        } else {
            T::one() / (T::one() + z.exp())
        }
    }
}

// -log-likelihood term for one sample, stable for either sign of z.
fn nll_term<T: Real>(z: T, t: T) -> T {
    if z >= T::zero() {
        t * z + (-z).exp().ln_1p()
    } else {
        (t - T::one()) * z + z.exp().ln_1p()
    }
}

/// Fits the sigmoid by Newton's method with backtracking on Platt's
/// smoothed targets.
pub fn fit_platt<T: Real>(decision_values: &[T], labels: &[bool]) -> Result<PlattParams<T>> {
    if decision_values.len() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: decision_values.len(),
            actual: labels.len(),
        });
    }
    if decision_values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("decision values"));
    }
    let npos = labels.iter().filter(|&&l| l).count();
    let nneg = labels.len() - npos;
    if npos == 0 || nneg == 0 {
        return Err(Error::SingleClass {
            positives: npos,
            negatives: nneg,
        });
    }

    let hi = T::from_count(npos + 1) / T::from_count(npos + 2);
    let lo = T::one() / T::from_count(nneg + 2);
    let targets: Vec<T> = labels.iter().map(|&l| if l { hi } else { lo }).collect();

    let first = decision_values[0];
    if decision_values.iter().all(|&f| f == first) {
        // Flat likelihood in `a`; the best constant is the mean target.
        let mean = targets.iter().copied().sum::<T>() / T::from_count(targets.len());
        return Ok(PlattParams {
            a: T::zero(),
            b: ((T::one() - mean) / mean).ln(),
        });
    }

    let objective = |a: T, b: T| -> T {
        decision_values
            .iter()
            .zip(&targets)
            .map(|(&f, &t)| nll_term(a * f + b, t))
            .sum()
    };

    let mut a = T::zero();
    let mut b = (T::from_count(nneg + 1) / T::from_count(npos + 1)).ln();
    let mut fval = objective(a, b);
    for _ in 0..MAX_ITER {
        let mut h11 = T::lit(HESSIAN_RIDGE);
        let mut h22 = T::lit(HESSIAN_RIDGE);
        let (mut h21, mut g1, mut g2) = (T::zero(), T::zero(), T::zero());
        for (&f, &t) in decision_values.iter().zip(&targets) {
            let z = a * f + b;
            // p = P(authorized), q = 1 - p
            let (p, q) = if z >= T::zero() {
                let e = (-z).exp();
                (e / (T::one() + e), T::one() / (T::one() + e))
            } else {
                let e = z.exp();
                (T::one() / (T::one() + e), e / (T::one() + e))
            };
            let d2 = p * q;
            h11 += f * f * d2;
            h22 += d2;
            h21 += f * d2;
            let d1 = t - p;
            g1 += f * d1;
            g2 += d1;
        }
        if g1.abs() < T::lit(GRAD_TOL) && g2.abs() < T::lit(GRAD_TOL) {
            break;
        }

        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let slope = g1 * da + g2 * db;

        let mut step = T::one();
        let mut accepted = false;
        while step >= T::lit(MIN_STEP) {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = objective(na, nb);
            if nf < fval + T::lit(1e-4) * step * slope {
                a = na;
                b = nb;
                fval = nf;
                accepted = true;
                break;
            }
            step /= T::lit(2.0);
        }
        if !accepted {
            break;
        }
    }
    Ok(PlattParams { a, b })
}
