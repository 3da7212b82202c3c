//! Loop hafnians of complex symmetric matrices.
//!
//! Every fast kernel works on a *reduced* problem: a coupling matrix over some
//! index set, a loop vector on the same set, and a repetition pattern. The
//! expanded matrix repeats index `i` `pattern[i]` times, copies of `i` and `j`
//! couple through `couplings[i][j]` (including `i == j`), and every copy of
//! `i` carries loop weight `loops[i]` on the diagonal.

mod batched;
mod bruteforce;
mod engine;
mod matching;

use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

pub use batched::{lhaf_batched, BatchedLhafResult, BatchedProblem};
pub use bruteforce::{lhaf_bruteforce, BRUTEFORCE_MAX_DIM};
pub use engine::f_coefficient;
pub use matching::matched_reps;

use crate::error::{invalid, Result};
use crate::exec::{chunk_ranges, tree_sum, Exec};
use engine::{Compressed, Workspace};

/// Complex symmetric matrix; the diagonal holds loop weights.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix(DMatrix<C64>);

impl SymMatrix {
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return invalid(format!("matrix is {}x{}, expected square", m.nrows(), m.ncols()));
        }
        let n = m.nrows();
        for i in 0..n {
            for j in 0..i {
                if (m[(i, j)] - m[(j, i)]).norm() > 1e-12 {
                    return invalid(format!("matrix not symmetric at ({i},{j})"));
                }
            }
        }
        Ok(Self(m))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<C64> {
        self.0
    }
}

/// A fixed single-pair matching with repeated pairs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairMatching {
    pub pairs: Vec<(usize, usize)>,
    pub reps: Vec<usize>,
    pub odd: Option<usize>,
}

impl PairMatching {
    /// Number of photons covered.
    pub fn photons(&self) -> usize {
        2 * self.reps.iter().sum::<usize>() + usize::from(self.odd.is_some())
    }

    /// Inclusion/exclusion terms `Π(η_h + 1)`, doubled for the odd loop's
    /// phantom pair.
    pub fn term_count(&self) -> u128 {
        let base = self
            .reps
            .iter()
            .fold(1u128, |acc, &r| acc.saturating_mul(r as u128 + 1));
        if self.odd.is_some() {
            base.saturating_mul(2)
        } else {
            base
        }
    }

    /// Terms visited by the halved finite-difference sieve.
    pub fn sieve_term_count(&self) -> u128 {
        let mut reps = self.reps.clone();
        if self.odd.is_some() {
            reps.push(1);
        }
        sieve_layout(&reps).0.iter().fold(1u128, |acc, &r| acc.saturating_mul(r as u128))
    }
}

/// Reduced loop-hafnian problem (see module docs).
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedMatrix {
    pub couplings: DMatrix<C64>,
    pub loops: Vec<C64>,
    pub pattern: Vec<usize>,
}

impl ReducedMatrix {
    pub fn new(couplings: DMatrix<C64>, loops: Vec<C64>, pattern: Vec<usize>) -> Result<Self> {
        let m = couplings.nrows();
        if couplings.ncols() != m || loops.len() != m || pattern.len() != m {
            return invalid("reduced matrix: couplings, loops and pattern disagree in size");
        }
        SymMatrix::new(couplings.clone())?;
        Ok(Self { couplings, loops, pattern })
    }

    /// A plain matrix: every index once, loops from the diagonal.
    pub fn from_symmetric(a: &SymMatrix) -> Self {
        let m = a.matrix().clone();
        let loops = m.diagonal().iter().copied().collect();
        let n = m.nrows();
        Self { couplings: m, loops, pattern: vec![1; n] }
    }

    /// Total photon number `N`.
    pub fn photons(&self) -> usize {
        self.pattern.iter().sum()
    }

    /// The explicit `N x N` matrix with repeated rows and columns.
    pub fn expand(&self) -> SymMatrix {
        let idx: Vec<usize> = self
            .pattern
            .iter()
            .enumerate()
            .flat_map(|(i, &n)| std::iter::repeat_n(i, n))
            .collect();
        let n = idx.len();
        let m = DMatrix::from_fn(n, n, |r, s| {
            if r == s {
                self.loops[idx[r]]
            } else {
                self.couplings[(idx[r], idx[s])]
            }
        });
        SymMatrix(m)
    }
}

/// Available loop-hafnian algorithms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Kernel {
    BruteForce,
    /// Plain inclusion/exclusion on the expanded matrix.
    EigenvalueTrace,
    /// Inclusion/exclusion over repeated pairs.
    Repeated,
    /// Finite-difference sieve over repeated pairs.
    Fds,
}

impl std::str::FromStr for Kernel {
    type Err = crate::GbsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bruteforce" => Ok(Self::BruteForce),
            "et" | "eigenvalue-trace" => Ok(Self::EigenvalueTrace),
            "repeated" => Ok(Self::Repeated),
            "fds" => Ok(Self::Fds),
            other => invalid(format!("unknown kernel `{other}`")),
        }
    }
}

impl std::fmt::Display for Kernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::BruteForce => "bruteforce",
            Self::EigenvalueTrace => "et",
            Self::Repeated => "repeated",
            Self::Fds => "fds",
        })
    }
}

/// Value plus bookkeeping from one kernel call.
#[derive(Clone, Debug)]
pub struct LhafOutcome {
    pub value: C64,
    pub terms: u128,
    pub seconds: f64,
}

/// Loop hafnian of the expanded problem with the chosen kernel.
pub fn lhaf(input: &ReducedMatrix, kernel: Kernel, exec: &Exec) -> Result<C64> {
    lhaf_timed(input, kernel, exec).map(|o| o.value)
}

/// Number of terms `kernel` would evaluate on `input`.
pub fn term_count(input: &ReducedMatrix, kernel: Kernel) -> u128 {
    let n = input.photons();
    match kernel {
        Kernel::BruteForce => involutions(n),
        Kernel::EigenvalueTrace => 1u128 << n.div_ceil(2).min(127),
        Kernel::Repeated => matched_reps(&input.pattern).term_count(),
        Kernel::Fds => matched_reps(&input.pattern).sieve_term_count(),
    }
}

/// Like [`lhaf`], also reporting the term count and wall time of the kernel.
pub fn lhaf_timed(input: &ReducedMatrix, kernel: Kernel, exec: &Exec) -> Result<LhafOutcome> {
    let terms = term_count(input, kernel);
    exec.check_terms(terms)?;
    let start = Instant::now();
    let value = match kernel {
        Kernel::BruteForce => lhaf_bruteforce(&input.expand())?,
        Kernel::EigenvalueTrace => lhaf_eigenvalue_trace(&input.expand(), exec)?,
        Kernel::Repeated => {
            let matching = matched_reps(&input.pattern);
            lhaf_repeated(input, &matching, exec)?
        }
        Kernel::Fds => {
            let matching = matched_reps(&input.pattern);
            lhaf_fds(input, &matching, exec)?
        }
    };
    Ok(LhafOutcome { value, terms, seconds: start.elapsed().as_secs_f64() })
}

fn involutions(n: usize) -> u128 {
    let (mut a, mut b) = (1u128, 1u128);
    for k in 1..n {
        let c = b.saturating_add((k as u128).saturating_mul(a));
        a = b;
        b = c;
    }
    if n == 0 {
        1
    } else {
        b
    }
}

/// Inclusion/exclusion with index `i` paired to `i + ⌊N/2⌋`.
pub fn lhaf_eigenvalue_trace(a: &SymMatrix, exec: &Exec) -> Result<C64> {
    let n = a.dim();
    let half = n / 2;
    let matching = PairMatching {
        pairs: (0..half).map(|i| (i, i + half)).collect(),
        reps: vec![1; half],
        odd: (n % 2 == 1).then(|| n - 1),
    };
    let loops: Vec<C64> = a.matrix().diagonal().iter().copied().collect();
    let cp = Compressed::from_matching(a.matrix(), &loops, &matching);
    inclusion_exclusion(&cp, exec)
}

/// Inclusion/exclusion over repetition counts `0..=η_h` of each pair.
pub fn lhaf_repeated(input: &ReducedMatrix, matching: &PairMatching, exec: &Exec) -> Result<C64> {
    check_matching(input, matching)?;
    let cp = Compressed::from_matching(&input.couplings, &input.loops, matching);
    inclusion_exclusion(&cp, exec)
}

/// Finite-difference sieve over repeated pairs.
pub fn lhaf_fds(input: &ReducedMatrix, matching: &PairMatching, exec: &Exec) -> Result<C64> {
    check_matching(input, matching)?;
    let cp = Compressed::from_matching(&input.couplings, &input.loops, matching);
    sieve(&cp, exec)
}

fn check_matching(input: &ReducedMatrix, matching: &PairMatching) -> Result<()> {
    let m = input.pattern.len();
    let mut used = vec![0usize; m];
    if matching.pairs.len() != matching.reps.len() {
        return invalid("matching: pairs and reps differ in length");
    }
    for (&(a, b), &r) in matching.pairs.iter().zip(&matching.reps) {
        if a >= m || b >= m || r == 0 {
            return invalid("matching: pair index out of range or zero repetition");
        }
        used[a] += r;
        used[b] += r;
    }
    if let Some(o) = matching.odd {
        if o >= m {
            return invalid("matching: odd index out of range");
        }
        used[o] += 1;
    }
    if used != input.pattern {
        return invalid("matching does not cover the pattern");
    }
    Ok(())
}

/// Chunk length for a problem of compressed dimension `d`: about 1 ms of work.
fn chunk_len(d: usize) -> u64 {
    let cube = (d.max(2) as u64).pow(3);
    (300_000 / cube).clamp(1, 4096)
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64).round()
}

fn inclusion_exclusion(cp: &Compressed, exec: &Exec) -> Result<C64> {
    let order = cp.order();
    if order == 0 {
        return Ok(C64::new(1.0, 0.0));
    }
    let radix: Vec<u64> = cp.reps.iter().map(|&r| r as u64 + 1).collect();
    let total: u64 = radix.iter().product();
    let chunks = chunk_ranges(total, chunk_len(2 * cp.pairs));
    let partial = exec.map(chunks.len(), |c| -> Result<C64> {
        let (start, end) = chunks[c];
        let mut ws = Workspace::default();
        let mut z = vec![0u64; radix.len()];
        decode(start, &radix, &mut z);
        let mut w = vec![0.0; radix.len()];
        let mut acc = Vec::with_capacity((end - start) as usize);
        for _ in start..end {
            let mut weight = 1.0;
            let mut kept = 0usize;
            for (h, &zh) in z.iter().enumerate() {
                w[h] = zh as f64;
                weight *= binomial(cp.reps[h], zh as usize);
                kept += zh as usize;
            }
            if kept > 0 {
                if (order - kept) % 2 == 1 {
                    weight = -weight;
                }
                ws.prepare(cp, &w, order)?;
                let f = ws.series(&cp.v, order)[order];
                acc.push(f * weight);
            }
            increment(&mut z, &radix);
        }
        Ok(tree_sum(&acc))
    });
    let sums: Vec<C64> = partial.into_iter().collect::<Result<_>>()?;
    Ok(tree_sum(&sums))
}

/// Per-pair radix for the halved sieve: the pair with the largest repetition
/// only runs to `⌊η/2⌋`.
fn sieve_layout(reps: &[usize]) -> (Vec<u64>, Option<usize>) {
    let pivot = reps
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i);
    let radix = reps
        .iter()
        .enumerate()
        .map(|(h, &r)| if Some(h) == pivot { r as u64 / 2 + 1 } else { r as u64 + 1 })
        .collect();
    (radix, pivot)
}

fn sieve(cp: &Compressed, exec: &Exec) -> Result<C64> {
    let order = cp.order();
    if order == 0 {
        return Ok(C64::new(1.0, 0.0));
    }
    let (radix, pivot) = sieve_layout(&cp.reps);
    let pivot = pivot.expect("order > 0 implies at least one pair");
    let total: u64 = radix.iter().product();
    let chunks = chunk_ranges(total, chunk_len(2 * cp.pairs));
    let partial = exec.map(chunks.len(), |c| -> Result<C64> {
        let (start, end) = chunks[c];
        let mut ws = Workspace::default();
        let mut m = vec![0u64; radix.len()];
        decode(start, &radix, &mut m);
        let mut w = vec![0.0; radix.len()];
        let mut acc = Vec::with_capacity((end - start) as usize);
        for _ in start..end {
            let mut weight = 1.0;
            let mut flips = 0usize;
            for (h, &mh) in m.iter().enumerate() {
                let eta = cp.reps[h];
                w[h] = eta as f64 - 2.0 * mh as f64;
                weight *= binomial(eta, mh as usize);
                flips += mh as usize;
            }
            if 2 * (m[pivot] as usize) < cp.reps[pivot] {
                weight *= 2.0;
            }
            if flips % 2 == 1 {
                weight = -weight;
            }
            ws.prepare(cp, &w, order)?;
            let f = ws.series(&cp.v, order)[order];
            acc.push(f * weight);
            increment(&mut m, &radix);
        }
        Ok(tree_sum(&acc))
    });
    let sums: Vec<C64> = partial.into_iter().collect::<Result<_>>()?;
    let scale = 0.5f64.powi(order as i32);
    Ok(tree_sum(&sums) * scale)
}

/// Mixed-radix digits of `index`, lowest position fastest.
fn decode(mut index: u64, radix: &[u64], digits: &mut [u64]) {
    for (d, &r) in digits.iter_mut().zip(radix) {
        *d = index % r;
        index /= r;
    }
}

fn increment(digits: &mut [u64], radix: &[u64]) {
    for (d, &r) in digits.iter_mut().zip(radix) {
        *d += 1;
        if *d < r {
            return;
        }
        *d = 0;
    }
}
