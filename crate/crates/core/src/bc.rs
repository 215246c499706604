//! Between-class (BC) feature generation.
//!
//! A BC feature is the fixed-ratio blend `r * x1 + (1 - r) * x2` of an
//! authorized training sample `x1` and an unauthorized one `x2`. Blends are
//! taken from the most cosine-similar pairs and added to the training set as
//! unauthorized samples, which pulls the SVM boundary toward the authorized
//! class.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::scalar::{dot, sq_norm, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BcConfig<T> {
    r: T,
    n_bc: usize,
}

impl<T: Real> BcConfig<T> {
    pub fn new(r: T, n_bc: usize) -> Result<Self> {
        check_ratio(r)?;
        Ok(Self { r, n_bc })
    }

    pub fn r(&self) -> T {
        self.r
    }

    pub fn n_bc(&self) -> usize {
        self.n_bc
    }
}

fn check_ratio<T: Real>(r: T) -> Result<()> {
    if r > T::zero() && r < T::one() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "mixing ratio {r} must lie strictly inside (0, 1)"
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Authorized,
    Unauthorized,
}

impl Label {
    pub fn is_authorized(self) -> bool {
        self == Label::Authorized
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Origin {
    Measured,
    BcGenerated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRow<T> {
    pub values: Vec<T>,
    pub label: Label,
    pub origin: Origin,
}

/// Training rows for one authorized user.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledDataset<T> {
    rows: Vec<LabeledRow<T>>,
}

impl<T: Real> LabeledDataset<T> {
    pub fn new() -> Self {
        Self { rows: Vec::new() }
    }

    pub fn push(&mut self, values: Vec<T>, label: Label, origin: Origin) -> Result<()> {
        if origin == Origin::BcGenerated && label != Label::Unauthorized {
            return Err(Error::InvalidArgument(
                "between-class rows are always unauthorized".into(),
            ));
        }
        if let Some(first) = self.rows.first() {
            if first.values.len() != values.len() {
                return Err(Error::LengthMismatch {
                    expected: first.values.len(),
                    actual: values.len(),
                });
            }
        }
        self.rows.push(LabeledRow {
            values,
            label,
            origin,
        });
        Ok(())
    }

    pub fn rows(&self) -> &[LabeledRow<T>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.rows.first().map_or(0, |r| r.values.len())
    }

    pub fn count(&self, label: Label) -> usize {
        self.rows.iter().filter(|r| r.label == label).count()
    }
}

/// `r * x1 + (1 - r) * x2`.
pub fn bc_combine<T: Real>(x1: &[T], x2: &[T], r: T) -> Result<Vec<T>> {
    check_ratio(r)?;
    if x1.len() != x2.len() {
        return Err(Error::LengthMismatch {
            expected: x1.len(),
            actual: x2.len(),
        });
    }
    let s = T::one() - r;
    Ok(x1.iter().zip(x2).map(|(&a, &b)| r * a + s * b).collect())
}

pub fn cosine_similarity<T: Real>(x1: &[T], x2: &[T]) -> Result<T> {
    if x1.len() != x2.len() {
        return Err(Error::LengthMismatch {
            expected: x1.len(),
            actual: x2.len(),
        });
    }
    let (n1, n2) = (sq_norm(x1), sq_norm(x2));
    if n1.is_zero() || n2.is_zero() {
        return Err(Error::ZeroSignal);
    }
    let c = dot(x1, x2) / (n1.sqrt() * n2.sqrt());
    Ok(c.max(-T::one()).min(T::one()))
}

/// A selected (authorized, unauthorized) parent pair, indexed into the
/// caller's input lists.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BcPair<T> {
    pub auth: usize,
    pub imp: usize,
    pub cosine: T,
}

fn lexicographic<T: Real>(a: &[T], b: &[T]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.as_f64().total_cmp(&y.as_f64()))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

// Positions of `xs` in value order; ties keep input order (and are equal
// vectors, so they produce identical blends).
fn canonical_order<T: Real, V: AsRef<[T]>>(xs: &[V]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| lexicographic(xs[a].as_ref(), xs[b].as_ref()));
    idx
}

/// Every (authorized, unauthorized) pair ranked by descending cosine
/// similarity, truncated to the first `n_bc`.
///
/// Equal similarities are broken by the parents' positions in value order,
/// so the selection does not depend on the order of the input lists.
pub fn rank_bc_pairs<T: Real, V: AsRef<[T]>>(
    auth: &[V],
    imp: &[V],
    n_bc: usize,
) -> Result<Vec<BcPair<T>>> {
    let available = auth.len() * imp.len();
    if n_bc > available {
        return Err(Error::TooManyBcFeatures {
            requested: n_bc,
            available,
        });
    }
    if n_bc == 0 {
        return Ok(Vec::new());
    }

    let auth_order = canonical_order(auth);
    let imp_order = canonical_order(imp);
    let imp_norms: Vec<T> = imp_order
        .iter()
        .map(|&j| sq_norm(imp[j].as_ref()).sqrt())
        .collect();
    if imp_norms.iter().any(|n| n.is_zero()) {
        return Err(Error::ZeroSignal);
    }

    let mut pairs = Vec::with_capacity(available);
    for &i in &auth_order {
        let a = auth[i].as_ref();
        let na = sq_norm(a).sqrt();
        if na.is_zero() {
            return Err(Error::ZeroSignal);
        }
        for (&j, &nb) in imp_order.iter().zip(&imp_norms) {
            let b = imp[j].as_ref();
            if a.len() != b.len() {
                return Err(Error::LengthMismatch {
                    expected: a.len(),
                    actual: b.len(),
                });
            }
            let cosine = (dot(a, b) / (na * nb)).max(-T::one()).min(T::one());
            pairs.push(BcPair {
                auth: i,
                imp: j,
                cosine,
            });
        }
    }
    // Stable sort: equal cosines keep the canonical (auth, imp) order.
    pairs.sort_by(|p, q| q.cosine.as_f64().total_cmp(&p.cosine.as_f64()));
    pairs.truncate(n_bc);
    Ok(pairs)
}

/// The `n_bc` blends of the most similar (authorized, unauthorized) pairs.
pub fn generate_bc_features<T: Real, V: AsRef<[T]>>(
    auth: &[V],
    imp: &[V],
    cfg: &BcConfig<T>,
) -> Result<Vec<Vec<T>>> {
    rank_bc_pairs(auth, imp, cfg.n_bc())?
        .iter()
        .map(|p| bc_combine(auth[p.auth].as_ref(), imp[p.imp].as_ref(), cfg.r()))
        .collect()
}

/// Authorized rows, measured unauthorized rows, then BC rows.
pub fn build_training_set<T: Real, V: AsRef<[T]>>(
    auth: &[V],
    imp: &[V],
    cfg: Option<&BcConfig<T>>,
) -> Result<LabeledDataset<T>> {
    let mut ds = LabeledDataset::new();
    for x in auth {
        ds.push(x.as_ref().to_vec(), Label::Authorized, Origin::Measured)?;
    }
    for x in imp {
        ds.push(x.as_ref().to_vec(), Label::Unauthorized, Origin::Measured)?;
    }
    if let Some(cfg) = cfg {
        for bc in generate_bc_features(auth, imp, cfg)? {
            ds.push(bc, Label::Unauthorized, Origin::BcGenerated)?;
        }
    }
    Ok(ds)
}
