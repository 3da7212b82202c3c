//! The shared inner kernel: one inclusion/exclusion or sieve term.
//!
//! A problem is held in compressed form. Pair `h` owns row `h` (its first
//! index) and row `H + h` (its second index). A term assigns an integer weight
//! `w_h` to every pair; rows of pairs with zero weight are dropped, the rest
//! form `M = C X_w`, and the term value is the `λ^n` coefficient of
//!
//! ```text
//! exp( Σ_k [ Tr(M^k) / 2k + v X_w M^{k-1} vᵀ / 2 ] λ^k )
//! ```

use num_complex::Complex64 as C64;

use super::PairMatching;
use crate::error::Result;
use crate::linalg::eigenvalues_in_place;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// A loop-hafnian problem with its pairs compressed to one row per side.
#[derive(Clone, Debug)]
pub(crate) struct Compressed {
    pub(crate) pairs: usize,
    /// Row-major `2H x 2H` couplings.
    pub(crate) c: Vec<C64>,
    /// Loop weights over the `2H` rows.
    pub(crate) v: Vec<C64>,
    /// Repetitions per pair.
    pub(crate) reps: Vec<usize>,
    /// Source index of each row; `None` marks a phantom row.
    pub(crate) source: Vec<Option<usize>>,
}

impl Compressed {
    /// Build from couplings/loops over an index set and a matching on it.
    /// An odd leftover index is paired with a phantom row of loop weight one.
    pub(crate) fn from_matching(
        couplings: &nalgebra::DMatrix<C64>,
        loops: &[C64],
        matching: &PairMatching,
    ) -> Self {
        let mut firsts: Vec<Option<usize>> = Vec::new();
        let mut seconds: Vec<Option<usize>> = Vec::new();
        let mut reps = Vec::new();
        for (&(a, b), &r) in matching.pairs.iter().zip(&matching.reps) {
            firsts.push(Some(a));
            seconds.push(Some(b));
            reps.push(r);
        }
        if let Some(o) = matching.odd {
            firsts.push(Some(o));
            seconds.push(None);
            reps.push(1);
        }
        let source: Vec<Option<usize>> = firsts.into_iter().chain(seconds).collect();
        Self::from_rows(couplings, loops, source, reps)
    }

    pub(crate) fn from_rows(
        couplings: &nalgebra::DMatrix<C64>,
        loops: &[C64],
        source: Vec<Option<usize>>,
        reps: Vec<usize>,
    ) -> Self {
        let d = source.len();
        debug_assert_eq!(d, 2 * reps.len());
        let mut c = vec![ZERO; d * d];
        let mut v = vec![ZERO; d];
        for (r, sr) in source.iter().enumerate() {
            v[r] = match sr {
                Some(i) => loops[*i],
                None => C64::new(1.0, 0.0),
            };
            for (s, ss) in source.iter().enumerate() {
                if let (Some(i), Some(j)) = (sr, ss) {
                    c[r * d + s] = couplings[(*i, *j)];
                }
            }
        }
        Self { pairs: reps.len(), c, v, reps, source }
    }

    /// Total number of pairs counted with repetition.
    pub(crate) fn order(&self) -> usize {
        self.reps.iter().sum()
    }

    /// Replace loop weights from a vector over the source index set.
    pub(crate) fn loops_from(&self, loops: &[C64], out: &mut Vec<C64>) {
        out.clear();
        out.extend(self.source.iter().map(|s| match s {
            Some(i) => loops[*i],
            None => C64::new(1.0, 0.0),
        }));
    }
}

/// Scratch buffers for one worker.
#[derive(Default)]
pub(crate) struct Workspace {
    kept: Vec<usize>,
    rows: Vec<usize>,
    wk: Vec<f64>,
    m: Vec<C64>,
    scratch: Vec<C64>,
    eig: Vec<C64>,
    pw: Vec<C64>,
    /// Power sums `p_1..p_order` (index 0 unused).
    pub(crate) p: Vec<C64>,
    vk: Vec<C64>,
    u: Vec<C64>,
    u2: Vec<C64>,
    g: Vec<C64>,
    /// Series coefficients `e_0..e_order`.
    pub(crate) e: Vec<C64>,
}

impl Workspace {
    /// Form `M = C X_w` for the kept pairs and compute its power sums.
    pub(crate) fn prepare(&mut self, cp: &Compressed, w: &[f64], order: usize) -> Result<()> {
        let h = cp.pairs;
        let d_full = 2 * h;
        self.kept.clear();
        self.kept.extend((0..h).filter(|&i| w[i] != 0.0));
        let k = self.kept.len();
        let d = 2 * k;
        self.rows.clear();
        self.rows.extend(self.kept.iter().copied());
        self.rows.extend(self.kept.iter().map(|&i| h + i));
        self.wk.clear();
        self.wk.extend(self.kept.iter().map(|&i| w[i]));

        self.m.clear();
        self.m.resize(d * d, ZERO);
        for i in 0..d {
            let src = self.rows[i] * d_full;
            for j in 0..d {
                let pj = if j < k { j + k } else { j - k };
                let wj = self.wk[j % k.max(1)];
                self.m[i * d + j] = cp.c[src + self.rows[pj]] * wj;
            }
        }

        self.p.clear();
        self.p.resize(order + 1, ZERO);
        if d == 0 {
            return Ok(());
        }
        self.scratch.clear();
        self.scratch.extend_from_slice(&self.m);
        eigenvalues_in_place(&mut self.scratch, d, &mut self.eig)?;
        self.pw.clear();
        self.pw.extend_from_slice(&self.eig);
        for j in 1..=order {
            let mut s = ZERO;
            for (pw, &ev) in self.pw.iter_mut().zip(&self.eig) {
                s += *pw;
                *pw *= ev;
            }
            self.p[j] = s;
        }
        Ok(())
    }

    /// Series coefficients for the loop vector `v` over the full compressed
    /// row set. Requires a prior `prepare` with at least this `order`.
    pub(crate) fn series(&mut self, v: &[C64], order: usize) -> &[C64] {
        let k = self.kept.len();
        let d = 2 * k;
        self.vk.clear();
        self.vk.extend(self.rows.iter().map(|&r| v[r]));
        self.u.clear();
        self.u.resize(d, ZERO);
        for j in 0..d {
            let pj = if j < k { j + k } else { j - k };
            self.u[j] = self.vk[pj] * self.wk[j % k.max(1)];
        }
        self.g.clear();
        self.g.resize(order + 1, ZERO);
        self.u2.clear();
        self.u2.resize(d, ZERO);
        for j in 1..=order {
            let l: C64 = self.u.iter().zip(&self.vk).map(|(a, b)| a * b).sum();
            self.g[j] = self.p[j] / (2.0 * j as f64) + l * 0.5;
            if j < order {
                // u <- u M
                for x in self.u2.iter_mut() {
                    *x = ZERO;
                }
                for (r, &ur) in self.u.iter().enumerate() {
                    if ur == ZERO {
                        continue;
                    }
                    let row = &self.m[r * d..(r + 1) * d];
                    for (acc, &mrs) in self.u2.iter_mut().zip(row) {
                        *acc += ur * mrs;
                    }
                }
                std::mem::swap(&mut self.u, &mut self.u2);
            }
        }
        self.e.clear();
        self.e.resize(order + 1, ZERO);
        self.e[0] = C64::new(1.0, 0.0);
        for n in 1..=order {
            let mut s = ZERO;
            for j in 1..=n {
                s += self.g[j] * self.e[n - j] * j as f64;
            }
            self.e[n] = s / n as f64;
        }
        &self.e
    }
}

/// The `λ^order` coefficient for couplings `c` (`2k x 2k`, first `k` rows
/// paired with the last `k`), loop vector `v` and per-pair weights.
pub fn f_coefficient(
    c: &nalgebra::DMatrix<C64>,
    v: &[C64],
    weights: &[i64],
    order: usize,
) -> Result<C64> {
    let d = c.nrows();
    if c.ncols() != d || d % 2 != 0 || v.len() != d || weights.len() != d / 2 {
        return crate::error::invalid("f_coefficient: inconsistent dimensions");
    }
    let source: Vec<Option<usize>> = (0..d).map(Some).collect();
    let cp = Compressed::from_rows(c, v, source, vec![1; d / 2]);
    let w: Vec<f64> = weights.iter().map(|&x| x as f64).collect();
    let mut ws = Workspace::default();
    ws.prepare(&cp, &w, order)?;
    let e = ws.series(&cp.v, order);
    Ok(e[order])
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn two_by_two_closed_form() {
        let a = c(0.3, -1.2);
        let b = c(2.0, 0.5);
        let d = c(-0.7, 0.1);
        let m = DMatrix::from_row_slice(2, 2, &[a, b, b, d]);
        let v = [a, d];
        let f = f_coefficient(&m, &v, &[1], 1).unwrap();
        // ½Tr(CX) + ½ v X vᵀ = b + a d
        assert!((f - (b + a * d)).norm() < 1e-14);
    }

    #[test]
    fn zero_input_gives_zero() {
        let m = DMatrix::from_element(4, 4, ZERO);
        let f = f_coefficient(&m, &[ZERO; 4], &[1, 1], 2).unwrap();
        assert_eq!(f, ZERO);
    }

    #[test]
    fn rejects_bad_shapes() {
        let m = DMatrix::from_element(3, 3, ZERO);
        assert!(f_coefficient(&m, &[ZERO; 3], &[1], 1).is_err());
    }
}
