//! Kernel evaluation through a table of pairwise squared distances.
//!
//! Every training row is `w x_a + (1 - w) x_b` for measured points `a`, `b`.
//! For weights summing to zero, `|sum w_i x_i|^2 = -1/2 sum_ij w_i w_j D_ij`,
//! so distances between blends follow from the table alone.

use crate::scalar::sq_dist;
use crate::svm::{gamma_from_variance, KernelSpace};

/// A measured point (`a == b`, `w == 1`) or a two-point blend.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Blend {
    a: u32,
    b: u32,
    w: f64,
    /// `w (1 - w) D_ab`, the blend's own contribution to any distance.
    inner: f64,
}

impl Blend {
    pub(crate) fn point(p: usize) -> Self {
        Self {
            a: p as u32,
            b: p as u32,
            w: 1.0,
            inner: 0.0,
        }
    }

    pub(crate) fn mix(table: &DistanceTable, a: usize, b: usize, w: f64) -> Self {
        Self {
            a: a as u32,
            b: b as u32,
            w,
            inner: w * (1.0 - w) * table.d2(a, b),
        }
    }

    fn is_point(&self) -> bool {
        self.a == self.b
    }
}

pub(crate) struct DistanceTable {
    n: usize,
    dim: usize,
    d2: Vec<f64>,
    sums: Vec<f64>,
    norms: Vec<f64>,
}

impl DistanceTable {
    pub(crate) fn new(points: &[&[f64]]) -> Self {
        let n = points.len();
        let dim = points.first().map_or(0, |p| p.len());
        let mut d2 = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = sq_dist(points[i], points[j]);
                d2[i * n + j] = v;
                d2[j * n + i] = v;
            }
        }
        Self {
            n,
            dim,
            d2,
            sums: points.iter().map(|p| p.iter().sum()).collect(),
            norms: points.iter().map(|p| p.iter().map(|v| v * v).sum()).collect(),
        }
    }

    #[inline]
    pub(crate) fn d2(&self, a: usize, b: usize) -> f64 {
        self.d2[a * self.n + b]
    }

    fn row(&self, a: u32) -> &[f64] {
        let a = a as usize;
        &self.d2[a * self.n..(a + 1) * self.n]
    }

    /// Sum and squared norm of a row's entries.
    fn moments(&self, u: &Blend) -> (f64, f64) {
        let (a, b, w) = (u.a as usize, u.b as usize, u.w);
        if u.is_point() {
            return (self.sums[a], self.norms[a]);
        }
        let gram = (self.norms[a] + self.norms[b] - self.d2(a, b)) / 2.0;
        let v = 1.0 - w;
        (
            w * self.sums[a] + v * self.sums[b],
            w * w * self.norms[a] + v * v * self.norms[b] + 2.0 * w * v * gram,
        )
    }

    /// Pooled-variance RBF width over the given rows.
    pub(crate) fn default_gamma(&self, rows: &[Blend]) -> f64 {
        let (s, q) = rows.iter().fold((0.0, 0.0), |(s, q), u| {
            let (a, b) = self.moments(u);
            (s + a, q + b)
        });
        let count = (rows.len() * self.dim) as f64;
        let mean = s / count;
        gamma_from_variance((q / count - mean * mean).max(0.0), self.dim)
    }
}

pub(crate) struct TableSpace<'t> {
    table: &'t DistanceTable,
    gamma: f64,
}

impl<'t> TableSpace<'t> {
    pub(crate) fn new(table: &'t DistanceTable, gamma: f64) -> Self {
        Self { table, gamma }
    }

    #[inline]
    fn dist(&self, ua: &[f64], ub: &[f64], u: &Blend, v: &Blend) -> f64 {
        let (va, vb) = (v.a as usize, v.b as usize);
        let cross = if u.is_point() {
            if v.is_point() {
                return ua[va];
            }
            v.w * ua[va] + (1.0 - v.w) * ua[vb]
        } else if v.is_point() {
            u.w * ua[va] + (1.0 - u.w) * ub[va]
        } else {
            let (uw, vw) = (u.w, v.w);
            uw * (vw * ua[va] + (1.0 - vw) * ua[vb])
                + (1.0 - uw) * (vw * ub[va] + (1.0 - vw) * ub[vb])
        };
        (cross - u.inner - v.inner).max(0.0)
    }
}

impl KernelSpace<f64> for TableSpace<'_> {
    type Row = Blend;

    fn eval(&self, u: Blend, v: Blend) -> f64 {
        let (ua, ub) = (self.table.row(u.a), self.table.row(u.b));
        (-self.gamma * self.dist(ua, ub, &u, &v)).exp()
    }

    fn eval_row(&self, u: Blend, rows: &[Blend], out: &mut [f64]) {
        let (ua, ub) = (self.table.row(u.a), self.table.row(u.b));
        for (o, v) in out.iter_mut().zip(rows) {
            *o = (-self.gamma * self.dist(ua, ub, &u, v)).exp();
        }
    }
}
