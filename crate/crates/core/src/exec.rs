//! Data-parallel helpers with a sequential fallback.
//!
//! All reductions go through fixed-size chunks that are folded in index
//! order, so parallel and sequential runs produce bit-identical sums.

use nalgebra::DVector;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Items per reduction chunk. Fixed so the summation tree never depends on
/// the thread count.
const CHUNK: usize = 32;

/// Execution strategy for the inner data-parallel loops.
///
/// Without the `parallel` feature, [`Exec::Parallel`] runs sequentially.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    /// Whether work actually runs on the rayon pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    /// Evaluates `f(0..n)` and collects the results in index order.
    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Deterministic sum of `f(i)` over `0..n`.
    pub fn sum<F>(self, n: usize, f: F) -> f64
    where
        F: Fn(usize) -> f64 + Sync + Send,
    {
        let chunk_sum = |c: usize| {
            let end = ((c + 1) * CHUNK).min(n);
            (c * CHUNK..end).fold(0.0, |acc, i| acc + f(i))
        };
        let partial = self.map(n.div_ceil(CHUNK), chunk_sum);
        partial.into_iter().fold(0.0, |acc, v| acc + v)
    }

    /// Deterministic sum of vectors `f(i)` (each of length `dim`) over `0..n`.
    pub fn sum_vectors<F>(self, n: usize, dim: usize, f: F) -> DVector<f64>
    where
        F: Fn(usize) -> DVector<f64> + Sync + Send,
    {
        let chunk_sum = |c: usize| {
            let end = ((c + 1) * CHUNK).min(n);
            let mut acc = DVector::zeros(dim);
            for i in c * CHUNK..end {
                acc += f(i);
            }
            acc
        };
        let partial = self.map(n.div_ceil(CHUNK), chunk_sum);
        partial.into_iter().fold(DVector::zeros(dim), |acc, v| acc + v)
    }

    /// Deterministic sum of `(scalar, vector)` pairs.
    pub fn sum_pairs<F>(self, n: usize, dim: usize, f: F) -> (f64, DVector<f64>)
    where
        F: Fn(usize) -> (f64, DVector<f64>) + Sync + Send,
    {
        let chunk_sum = |c: usize| {
            let end = ((c + 1) * CHUNK).min(n);
            let mut s = 0.0;
            let mut acc = DVector::zeros(dim);
            for i in c * CHUNK..end {
                let (a, v) = f(i);
                s += a;
                acc += v;
            }
            (s, acc)
        };
        let partial = self.map(n.div_ceil(CHUNK), chunk_sum);
        partial
            .into_iter()
            .fold((0.0, DVector::zeros(dim)), |(s, acc), (a, v)| (s + a, acc + v))
    }

    /// Runs two closures, concurrently when parallel.
    pub fn join<A, B, RA, RB>(self, a: A, b: B) -> (RA, RB)
    where
        A: FnOnce() -> RA + Send,
        B: FnOnce() -> RB + Send,
        RA: Send,
        RB: Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return rayon::join(a, b);
        }
        (a(), b())
    }
}
