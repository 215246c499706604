use std::marker::PhantomData;

use crate::scalar::{sq_dist, Real};

/// A kernel over cheap row handles.
///
/// The solver never touches feature data directly; it asks the space for
/// kernel values between handles. Plain feature slices are one kind of
/// handle, precomputed distance tables are another.
pub trait KernelSpace<T: Real>: Sync {
    type Row: Copy + Send + Sync;

    fn eval(&self, a: Self::Row, b: Self::Row) -> T;

    fn eval_row(&self, a: Self::Row, rows: &[Self::Row], out: &mut [T]) {
        for (o, &b) in out.iter_mut().zip(rows) {
            *o = self.eval(a, b);
        }
    }
}

/// Gaussian RBF kernel `exp(-gamma * |x - y|^2)` on feature slices.
#[derive(Debug, Clone, Copy)]
pub struct RbfSpace<'r, T> {
    gamma: T,
    _rows: PhantomData<&'r [T]>,
}

impl<T: Real> RbfSpace<'_, T> {
    pub fn new(gamma: T) -> Self {
        Self {
            gamma,
            _rows: PhantomData,
        }
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }
}

impl<'r, T: Real> KernelSpace<T> for RbfSpace<'r, T> {
    type Row = &'r [T];

    #[inline]
    fn eval(&self, a: &'r [T], b: &'r [T]) -> T {
        (-self.gamma * sq_dist(a, b)).exp()
    }
}

pub(crate) const DEFAULT_CACHE_BYTES: usize = 64 << 20;

/// Least-recently-used cache of full kernel rows.
pub(crate) struct RowCache<T> {
    capacity: usize,
    slots: Vec<Option<Vec<T>>>,
    last_used: Vec<u64>,
    resident: Vec<usize>,
    tick: u64,
}

impl<T: Real> RowCache<T> {
    pub(crate) fn new(n: usize, budget_bytes: usize) -> Self {
        let row_bytes = (n * std::mem::size_of::<T>()).max(1);
        Self {
            capacity: (budget_bytes / row_bytes).clamp(2, n.max(2)),
            slots: (0..n).map(|_| None).collect(),
            last_used: vec![0; n],
            resident: Vec::new(),
            tick: 0,
        }
    }

    /// Makes row `i` resident, computing it with `fill` on a miss.
    pub(crate) fn ensure(&mut self, i: usize, fill: impl FnOnce(&mut [T])) {
        self.tick += 1;
        self.last_used[i] = self.tick;
        if self.slots[i].is_some() {
            return;
        }
        let mut buf = if self.resident.len() >= self.capacity {
            let (pos, _) = self
                .resident
                .iter()
                .enumerate()
                .min_by_key(|(_, &r)| self.last_used[r])
                .expect("cache is non-empty");
            let victim = self.resident.swap_remove(pos);
            self.slots[victim].take().expect("resident row present")
        } else {
            vec![T::zero(); self.slots.len()]
        };
        fill(&mut buf);
        self.slots[i] = Some(buf);
        self.resident.push(i);
    }

    pub(crate) fn get(&self, i: usize) -> &[T] {
        self.slots[i].as_deref().expect("row was ensured")
    }
}
