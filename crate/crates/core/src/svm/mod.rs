//! Soft-margin RBF support vector machine with Platt calibration.

mod kernel;
mod platt;
mod smo;

pub use kernel::{KernelSpace, RbfSpace};
pub use platt::{fit_platt, PlattParams};
pub use smo::{solve_dual, DualSolution};

use crate::bc::LabeledDataset;
use crate::error::{Error, Result};
use crate::scalar::{sq_dist, Real};

/// Default SMO stopping tolerance on the maximal KKT violation.
pub const DEFAULT_TOL: f64 = 1e-3;
/// Default soft-margin penalty.
pub const DEFAULT_C: f64 = 1.0;
/// Upper bound on the number of calibration folds.
pub const CALIBRATION_FOLDS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams<T> {
    gamma: T,
    c: T,
}

impl<T: Real> KernelParams<T> {
    pub fn new(gamma: T, c: T) -> Result<Self> {
        if !(gamma > T::zero() && gamma.is_finite() && c > T::zero() && c.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "gamma ({gamma}) and C ({c}) must be positive and finite"
            )));
        }
        Ok(Self { gamma, c })
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    pub fn c(&self) -> T {
        self.c
    }
}

/// `1 / (d * v)` for pooled entry variance `v`, falling back to `1 / d`.
pub(crate) fn gamma_from_variance<T: Real>(variance: T, dim: usize) -> T {
    let d = T::from_count(dim);
    if variance > T::zero() {
        (d * variance).recip()
    } else {
        d.recip()
    }
}

/// RBF width from the pooled variance of every feature entry.
pub fn default_gamma<T: Real>(train: &LabeledDataset<T>) -> Result<T> {
    if train.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "default gamma needs at least 2 rows, got {}",
            train.len()
        )));
    }
    let count = T::from_count(train.len() * train.dim());
    let entries = || train.rows().iter().flat_map(|r| r.values.iter().copied());
    let mean = entries().sum::<T>() / count;
    let var = entries().map(|v| (v - mean) * (v - mean)).sum::<T>() / count;
    Ok(gamma_from_variance(var, train.dim()))
}

/// Kernel expansion `f(x) = sum_i coefs_i K(rows_i, x) + bias` over
/// arbitrary row handles.
#[derive(Debug, Clone)]
pub struct Expansion<T, R> {
    pub rows: Vec<R>,
    pub coefs: Vec<T>,
    pub bias: T,
}

impl<T: Real, R: Copy> Expansion<T, R> {
    fn from_solution(rows: &[R], positive: &[bool], sol: &DualSolution<T>) -> Self {
        let mut out = Self {
            rows: Vec::new(),
            coefs: Vec::new(),
            bias: sol.bias,
        };
        for ((&row, &pos), &a) in rows.iter().zip(positive).zip(&sol.alpha) {
            if a > T::zero() {
                out.rows.push(row);
                out.coefs.push(if pos { a } else { -a });
            }
        }
        out
    }

    pub fn decision<S: KernelSpace<T, Row = R>>(&self, space: &S, x: R) -> T {
        self.rows
            .iter()
            .zip(&self.coefs)
            .map(|(&sv, &c)| c * space.eval(sv, x))
            .sum::<T>()
            + self.bias
    }
}

/// Trains on `rows` and returns the expansion.
pub fn fit_expansion<T: Real, S: KernelSpace<T>>(
    space: &S,
    rows: &[S::Row],
    positive: &[bool],
    c: T,
    tol: T,
) -> Result<Expansion<T, S::Row>> {
    let sol = solve_dual(space, rows, positive, c, tol)?;
    Ok(Expansion::from_solution(rows, positive, &sol))
}

/// Stratified round-robin fold assignment: the k-th row of each class goes
/// to fold `k mod folds`. Returns the fold count and per-row fold index.
pub fn stratified_folds(positive: &[bool], max_folds: usize) -> (usize, Vec<usize>) {
    let npos = positive.iter().filter(|&&p| p).count();
    let nneg = positive.len() - npos;
    let folds = max_folds.min(npos).min(nneg);
    if folds < 2 {
        return (folds, vec![0; positive.len()]);
    }
    let (mut kp, mut kn) = (0, 0);
    let assign = positive
        .iter()
        .map(|&p| {
            let k = if p { &mut kp } else { &mut kn };
            let f = *k % folds;
            *k += 1;
            f
        })
        .collect();
    (folds, assign)
}

/// Fits the SVM on every row and the sigmoid on out-of-fold decision values.
///
/// With fewer than two rows in the minority class the sigmoid is fitted on
/// in-sample decision values instead.
pub fn fit_calibrated<T: Real, S: KernelSpace<T>>(
    space: &S,
    rows: &[S::Row],
    positive: &[bool],
    c: T,
    tol: T,
) -> Result<(Expansion<T, S::Row>, PlattParams<T>)> {
    let full = fit_expansion(space, rows, positive, c, tol)?;
    let (folds, assign) = stratified_folds(positive, CALIBRATION_FOLDS);

    let mut decisions = vec![T::zero(); rows.len()];
    if folds < 2 {
        for (d, &x) in decisions.iter_mut().zip(rows) {
            *d = full.decision(space, x);
        }
    } else {
        for fold in 0..folds {
            let (mut tr_rows, mut tr_pos) = (Vec::new(), Vec::new());
            for (i, &f) in assign.iter().enumerate() {
                if f != fold {
                    tr_rows.push(rows[i]);
                    tr_pos.push(positive[i]);
                }
            }
            let model = fit_expansion(space, &tr_rows, &tr_pos, c, tol)?;
            for (i, &f) in assign.iter().enumerate() {
                if f == fold {
                    decisions[i] = model.decision(space, rows[i]);
                }
            }
        }
    }
    let platt = fit_platt(&decisions, positive)?;
    Ok((full, platt))
}

/// Trained decision function with owned support vectors.
#[derive(Debug, Clone)]
pub struct SvmModel<T> {
    support_vectors: Vec<Vec<T>>,
    dual_coefs: Vec<T>,
    bias: T,
    kernel: KernelParams<T>,
}

impl<T: Real> SvmModel<T> {
    fn from_expansion(e: Expansion<T, &[T]>, kernel: KernelParams<T>) -> Self {
        Self {
            support_vectors: e.rows.iter().map(|r| r.to_vec()).collect(),
            dual_coefs: e.coefs,
            bias: e.bias,
            kernel,
        }
    }

    pub fn support_vectors(&self) -> &[Vec<T>] {
        &self.support_vectors
    }

    /// `alpha_i * y_i` per support vector.
    pub fn dual_coefs(&self) -> &[T] {
        &self.dual_coefs
    }

    pub fn bias(&self) -> T {
        self.bias
    }

    pub fn kernel(&self) -> KernelParams<T> {
        self.kernel
    }

    pub fn decision_value(&self, x: &[T]) -> T {
        let g = self.kernel.gamma;
        self.support_vectors
            .iter()
            .zip(&self.dual_coefs)
            .map(|(sv, &c)| c * (-g * sq_dist(sv, x)).exp())
            .sum::<T>()
            + self.bias
    }
}

fn split_rows<T: Real>(train: &LabeledDataset<T>) -> (Vec<&[T]>, Vec<bool>) {
    train
        .rows()
        .iter()
        .map(|r| (r.values.as_slice(), r.label.is_authorized()))
        .unzip()
}

pub fn train_svm<T: Real>(
    train: &LabeledDataset<T>,
    params: &KernelParams<T>,
    tol: T,
) -> Result<SvmModel<T>> {
    let (rows, positive) = split_rows(train);
    let space = RbfSpace::new(params.gamma);
    let e = fit_expansion(&space, &rows, &positive, params.c, tol)?;
    Ok(SvmModel::from_expansion(e, *params))
}

pub fn decision_value<T: Real>(model: &SvmModel<T>, x: &[T]) -> T {
    model.decision_value(x)
}

pub fn posterior<T: Real>(model: &SvmModel<T>, platt: &PlattParams<T>, x: &[T]) -> T {
    platt.probability(model.decision_value(x))
}

/// An SVM together with its cross-fitted calibration.
#[derive(Debug, Clone)]
pub struct CalibratedSvm<T> {
    pub model: SvmModel<T>,
    pub platt: PlattParams<T>,
}

impl<T: Real> CalibratedSvm<T> {
    pub fn train(train: &LabeledDataset<T>, params: &KernelParams<T>, tol: T) -> Result<Self> {
        let (rows, positive) = split_rows(train);
        let space = RbfSpace::new(params.gamma);
        let (e, platt) = fit_calibrated(&space, &rows, &positive, params.c, tol)?;
        Ok(Self {
            model: SvmModel::from_expansion(e, *params),
            platt,
        })
    }

    /// Posterior probability that `x` belongs to the authorized user.
    pub fn score(&self, x: &[T]) -> T {
        posterior(&self.model, &self.platt, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bc::{Label, Origin};

    fn dataset(rows: &[(&[f64], bool)]) -> LabeledDataset<f64> {
        let mut d = LabeledDataset::new();
        for &(v, pos) in rows {
            let label = if pos {
                Label::Authorized
            } else {
                Label::Unauthorized
            };
            d.push(v.to_vec(), label, Origin::Measured).unwrap();
        }
        d
    }

    #[test]
    fn gamma_from_pooled_variance() {
        let d = dataset(&[(&[0.0, 1.0], true), (&[1.0, 0.0], false)]);
        assert_eq!(default_gamma(&d).unwrap(), 2.0);
        let flat = dataset(&[(&[3.0, 3.0], true), (&[3.0, 3.0], false)]);
        assert_eq!(default_gamma(&flat).unwrap(), 0.5);
        let scaled = dataset(&[(&[0.0, 2.0], true), (&[2.0, 0.0], false)]);
        assert_eq!(default_gamma(&scaled).unwrap(), 0.5);
        assert!(default_gamma(&LabeledDataset::<f64>::new()).is_err());
    }

    #[test]
    fn two_points_split_at_the_midpoint() {
        let d = dataset(&[(&[0.0, 0.0], true), (&[2.0, 1.0], false)]);
        for c in [0.01, 1.0, 100.0] {
            let m = train_svm(&d, &KernelParams::new(0.3, c).unwrap(), 1e-9).unwrap();
            assert!(m.decision_value(&[1.0, 0.5]).abs() < 1e-6);
            assert!(m.decision_value(&[0.0, 0.0]) > 0.0);
        }
    }

    #[test]
    fn far_points_decay_to_bias() {
        let d = dataset(&[(&[0.0], true), (&[1.0], false), (&[0.2], true)]);
        let m = train_svm(&d, &KernelParams::new(1.0, 1.0).unwrap(), 1e-6).unwrap();
        assert!((m.decision_value(&[1e3]) - m.bias()).abs() < 1e-12);
    }

    #[test]
    fn folds_are_stratified() {
        let pos = [true, false, false, true, false, true, false, false];
        let (k, f) = stratified_folds(&pos, 5);
        assert_eq!(k, 3);
        assert_eq!(f, vec![0, 0, 1, 1, 2, 2, 3 % 3, 4 % 3]);
        let (k1, _) = stratified_folds(&[true, false, false], 5);
        assert_eq!(k1, 1);
    }

    #[test]
    fn invalid_params_are_rejected() {
        assert!(KernelParams::new(0.0, 1.0).is_err());
        assert!(KernelParams::new(1.0, -1.0).is_err());
        assert!(KernelParams::new(f64::NAN, 1.0).is_err());
    }
}
