//! All batched-mode photon counts `0..=n_cut` in one sweep.
//!
//! The fixed photons are matched as usual. The batched mode contributes a
//! self pair repeated `⌊c/2⌋` times and, for odd `c`, one extra pair with a
//! phantom row. Each inclusion configuration needs one eigenvalue
//! computation; its series is then read off at every order `n(c)`, and for
//! every supplied loop vector.

use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use super::engine::{Compressed, Workspace};
use super::{binomial, chunk_len, decode, increment, matched_reps};
use crate::error::{invalid, Result};
use crate::exec::{chunk_ranges, tree_sum_vecs, Exec};

/// Fixed photons plus one batched index whose count is swept.
#[derive(Clone, Debug)]
pub struct BatchedProblem {
    pub couplings: DMatrix<C64>,
    pub fixed: Vec<usize>,
    pub batched: usize,
    pub n_cut: usize,
}

/// `values[l][c]` is the loop hafnian with `c` photons on the batched index
/// and loop vector `l`.
#[derive(Clone, Debug)]
pub struct BatchedLhafResult {
    pub values: Vec<Vec<C64>>,
    pub terms: u128,
    pub seconds: f64,
}

impl BatchedProblem {
    fn layout(&self) -> (Compressed, Vec<u64>, usize) {
        let matching = matched_reps(&self.fixed);
        let mut firsts: Vec<Option<usize>> = matching.pairs.iter().map(|p| Some(p.0)).collect();
        let mut seconds: Vec<Option<usize>> = matching.pairs.iter().map(|p| Some(p.1)).collect();
        let mut reps = matching.reps.clone();
        if let Some(o) = matching.odd {
            firsts.push(Some(o));
            seconds.push(None);
            reps.push(1);
        }
        let fixed_pairs = reps.len();
        let half = self.n_cut / 2;
        firsts.push(Some(self.batched));
        seconds.push(Some(self.batched));
        reps.push(half);
        firsts.push(Some(self.batched));
        seconds.push(None);
        reps.push(usize::from(self.n_cut >= 1));

        let mut radix: Vec<u64> = reps[..fixed_pairs].iter().map(|&r| r as u64 + 1).collect();
        radix.push(half as u64 + 1);
        radix.push(if self.n_cut >= 1 { 2 } else { 1 });

        let source = firsts.into_iter().chain(seconds).collect();
        let zero_loops = vec![C64::new(0.0, 0.0); self.couplings.nrows()];
        let cp = Compressed::from_rows(&self.couplings, &zero_loops, source, reps);
        (cp, radix, fixed_pairs)
    }

    /// Number of inclusion configurations.
    pub fn term_count(&self) -> u128 {
        self.layout().1.iter().map(|&r| r as u128).product()
    }
}

/// Evaluate every batched count for each loop vector.
pub fn lhaf_batched(
    problem: &BatchedProblem,
    loops: &[Vec<C64>],
    exec: &Exec,
) -> Result<BatchedLhafResult> {
    let m = problem.couplings.nrows();
    if problem.couplings.ncols() != m || problem.fixed.len() != m || problem.batched >= m {
        return invalid("batched lhaf: inconsistent dimensions");
    }
    if problem.fixed[problem.batched] != 0 {
        return invalid("batched lhaf: batched index carries fixed photons");
    }
    if loops.iter().any(|l| l.len() != m) {
        return invalid("batched lhaf: loop vector length mismatch");
    }
    let start = Instant::now();
    let (cp, radix, fixed_pairs) = problem.layout();
    let terms: u128 = radix.iter().map(|&r| r as u128).product();
    exec.check_terms(terms)?;

    let n_cut = problem.n_cut;
    let nf: usize = cp.reps[..fixed_pairs].iter().sum();
    let max_order = nf + n_cut.div_ceil(2);
    let width = n_cut + 1;
    let nl = loops.len();
    let self_pair = fixed_pairs;
    let odd_pair = fixed_pairs + 1;

    let compressed_loops: Vec<Vec<C64>> = loops
        .iter()
        .map(|l| {
            let mut v = Vec::new();
            cp.loops_from(l, &mut v);
            v
        })
        .collect();

    let total: u64 = radix.iter().product();
    let chunks = chunk_ranges(total, chunk_len(2 * cp.pairs));
    let partial = exec.map(chunks.len(), |c| -> Result<Vec<C64>> {
        let (lo, hi) = chunks[c];
        let mut ws = Workspace::default();
        let mut z = vec![0u64; radix.len()];
        decode(lo, &radix, &mut z);
        let mut w = vec![0.0; radix.len()];
        let mut acc = vec![C64::new(0.0, 0.0); nl * width];
        for _ in lo..hi {
            let mut base = 1.0;
            let mut kept = 0usize;
            for (h, &zh) in z.iter().enumerate() {
                w[h] = zh as f64;
                kept += zh as usize;
                if h < fixed_pairs {
                    base *= binomial(cp.reps[h], zh as usize);
                }
            }
            let (zs, zo) = (z[self_pair] as usize, z[odd_pair] as usize);
            let wanted = (0..width).any(|c| zs <= c / 2 && zo <= c % 2);
            if wanted {
                ws.prepare(&cp, &w, max_order)?;
                for (l, v) in compressed_loops.iter().enumerate() {
                    let e = ws.series(v, max_order);
                    for cnt in 0..width {
                        if zs > cnt / 2 || zo > cnt % 2 {
                            continue;
                        }
                        let order = nf + cnt / 2 + cnt % 2;
                        if kept == 0 && order > 0 {
                            continue;
                        }
                        let mut weight = base * binomial(cnt / 2, zs);
                        if (order - kept) % 2 == 1 {
                            weight = -weight;
                        }
                        acc[l * width + cnt] += e[order] * weight;
                    }
                }
            }
            increment(&mut z, &radix);
        }
        Ok(acc)
    });
    let partial: Vec<Vec<C64>> = partial.into_iter().collect::<Result<_>>()?;
    let flat = tree_sum_vecs(&partial);
    let values = (0..nl).map(|l| flat[l * width..(l + 1) * width].to_vec()).collect();
    Ok(BatchedLhafResult { values, terms, seconds: start.elapsed().as_secs_f64() })
}
