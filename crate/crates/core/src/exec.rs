//! Worker pool handle and deterministic reductions.
//!
//! Kernels split their terms into chunks whose boundaries depend only on the
//! problem, never on the number of workers. Chunk results are combined by a
//! fixed pairwise tree, so a result is bit-identical for any worker count.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{GbsError, Result};

/// Execution context handed to kernels and samplers.
#[derive(Clone, Default)]
pub struct Exec {
    pool: Option<Arc<rayon::ThreadPool>>,
    term_limit: Option<u128>,
}

impl std::fmt::Debug for Exec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Exec")
            .field("workers", &self.workers())
            .field("term_limit", &self.term_limit)
            .finish()
    }
}

impl Exec {
    pub fn sequential() -> Self {
        Self::default()
    }

    /// A context backed by a dedicated pool of `workers` threads.
    pub fn with_workers(workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(GbsError::InvalidInput("worker count must be positive".into()));
        }
        if workers == 1 {
            return Ok(Self::sequential());
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| GbsError::InvalidInput(format!("cannot build worker pool: {e}")))?;
        Ok(Self { pool: Some(Arc::new(pool)), term_limit: None })
    }

    /// Refuse kernel calls whose term count exceeds `limit`.
    pub fn with_term_limit(mut self, limit: u128) -> Self {
        self.term_limit = Some(limit);
        self
    }

    pub fn workers(&self) -> usize {
        self.pool.as_ref().map_or(1, |p| p.current_num_threads())
    }

    pub fn term_limit(&self) -> Option<u128> {
        self.term_limit
    }

    pub(crate) fn check_terms(&self, terms: u128) -> Result<()> {
        match self.term_limit {
            Some(limit) if terms > limit => Err(GbsError::TermGuard { terms, limit }),
            _ => Ok(()),
        }
    }

    /// Evaluate `f(i)` for `i in 0..n`, in parallel when a pool is present.
    /// The output order is always `0..n`.
    pub fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match &self.pool {
            Some(pool) if n > 1 => pool.install(|| (0..n).into_par_iter().map(&f).collect()),
            _ => (0..n).map(f).collect(),
        }
    }
}

/// Fixed-shape pairwise sum.
pub fn tree_sum(values: &[C64]) -> C64 {
    match values.len() {
        0 => C64::new(0.0, 0.0),
        1 => values[0],
        n => {
            let mid = n / 2;
            tree_sum(&values[..mid]) + tree_sum(&values[mid..])
        }
    }
}

/// Elementwise pairwise sum of equally shaped vectors.
pub fn tree_sum_vecs(values: &[Vec<C64>]) -> Vec<C64> {
    match values.len() {
        0 => Vec::new(),
        1 => values[0].clone(),
        n => {
            let mid = n / 2;
            let mut a = tree_sum_vecs(&values[..mid]);
            let b = tree_sum_vecs(&values[mid..]);
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
            a
        }
    }
}

/// Split `0..total` into contiguous chunks of `chunk` terms.
pub(crate) fn chunk_ranges(total: u64, chunk: u64) -> Vec<(u64, u64)> {
    let chunk = chunk.max(1);
    let mut out = Vec::with_capacity(total.div_ceil(chunk) as usize);
    let mut start = 0;
    while start < total {
        let end = (start + chunk).min(total);
        out.push((start, end));
        start = end;
    }
    out
}
