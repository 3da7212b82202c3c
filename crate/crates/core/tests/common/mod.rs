//! Fock-basis oracle shared by the integration tests.
//!
//! Input modes are described by density-matrix blocks in the photon-number
//! basis (single modes from truncated matrix exponentials, or closed-form
//! lossy two-mode squeezed pairs). The interferometer conserves photon
//! number, so an output probability with `N` photons only needs the `N`
//! photon sector of the input, propagated with permanents.
#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

const TRUNC: usize = 90;
const PAIR_MAX: usize = 10;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn annihilation(d: usize) -> DMatrix<C64> {
    DMatrix::from_fn(d, d, |i, j| if j == i + 1 { c((j as f64).sqrt(), 0.0) } else { c(0.0, 0.0) })
}

/// `D(β) S(r) |0⟩` with `S(r) = exp(r (a² - a†²) / 2)`, optionally followed
/// by a pure-loss channel of transmission `eta`. Returned on `keep` levels.
pub fn single_mode(r: f64, beta: C64, eta: f64, keep: usize) -> DMatrix<C64> {
    let a = annihilation(TRUNC);
    let ad = a.adjoint();
    let gen_s = (&a * &a - &ad * &ad) * c(r / 2.0, 0.0);
    let gen_d = &ad * beta - &a * beta.conj();
    let u = gen_d.exp() * gen_s.exp();
    let psi = u.column(0).into_owned();
    let rho = &psi * psi.adjoint();
    let rho = apply_loss(&rho, eta);
    rho.view((0, 0), (keep, keep)).into_owned()
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Kraus pure loss on one mode.
pub fn apply_loss(rho: &DMatrix<C64>, eta: f64) -> DMatrix<C64> {
    let d = rho.nrows();
    DMatrix::from_fn(d, d, |a, b| {
        let mut s = c(0.0, 0.0);
        for l in 0..d - a.max(b) {
            let w = (binom(a + l, l) * binom(b + l, l)).sqrt() * eta.powf((a + b) as f64 / 2.0) * (1.0 - eta).powi(l as i32);
            s += rho[(a + l, b + l)] * w;
        }
        s
    })
}

/// Thermal state diagonal with mean photon `nbar`.
pub fn thermal(nbar: f64, keep: usize) -> DMatrix<C64> {
    DMatrix::from_fn(keep, keep, |i, j| {
        if i == j {
            c(nbar.powi(i as i32) / (1.0 + nbar).powi(i as i32 + 1), 0.0)
        } else {
            c(0.0, 0.0)
        }
    })
}

/// `⟨a,b| ρ |c,d⟩` of a two-mode squeezed vacuum after loss `1 - eta` on
/// both modes.
pub fn lossy_tmsv(r: f64, eta: f64, a: usize, b: usize, cc: usize, d: usize) -> f64 {
    if a as i64 - b as i64 != cc as i64 - d as i64 {
        return 0.0;
    }
    let t = r.tanh();
    let amp = |n: usize| t.powi(n as i32) / r.cosh();
    let k = |n: usize, m: usize| (binom(n, m) * eta.powi(m as i32) * (1.0 - eta).powi((n - m) as i32)).sqrt();
    let mut s = 0.0;
    let start = a.max(b).max((a + d).saturating_sub(cc));
    for n in start..start + 4000 {
        let m = n + cc - a;
        if m < cc.max(d) {
            continue;
        }
        let term = amp(n) * amp(m) * k(n, a) * k(n, b) * k(m, cc) * k(m, d);
        s += term;
        if n > start + 50 && term < 1e-300 {
            break;
        }
    }
    s
}

/// A factor of the input state covering `modes` consecutive modes.
pub struct Block {
    pub modes: usize,
    pub elem: Box<dyn Fn(&[usize], &[usize]) -> C64>,
}

impl Block {
    pub fn single(rho: DMatrix<C64>) -> Self {
        Self {
            modes: 1,
            elem: Box::new(move |i, j| {
                if i[0] < rho.nrows() && j[0] < rho.nrows() {
                    rho[(i[0], j[0])]
                } else {
                    c(0.0, 0.0)
                }
            }),
        }
    }

    /// Tabulated for up to `PAIR_MAX - 1` photons per mode.
    pub fn tmsv_pair(r: f64, eta: f64) -> Self {
        const K: usize = PAIR_MAX;
        let mut table = vec![0.0; K * K * K * K];
        for a in 0..K {
            for b in 0..K {
                for cc in 0..K {
                    for d in 0..K {
                        table[((a * K + b) * K + cc) * K + d] = lossy_tmsv(r, eta, a, b, cc, d);
                    }
                }
            }
        }
        Self {
            modes: 2,
            elem: Box::new(move |i, j| {
                assert!(i.iter().chain(j).all(|&x| x < K), "pair table too small");
                c(table[((i[0] * K + i[1]) * K + j[0]) * K + j[1]], 0.0)
            }),
        }
    }

    pub fn vacuum() -> Self {
        Self { modes: 1, elem: Box::new(|i, j| c(if i[0] == 0 && j[0] == 0 { 1.0 } else { 0.0 }, 0.0)) }
    }
}

/// Ryser's formula.
pub fn permanent(m: &DMatrix<C64>) -> C64 {
    let n = m.nrows();
    if n == 0 {
        return c(1.0, 0.0);
    }
    let mut total = c(0.0, 0.0);
    for s in 1u32..(1 << n) {
        let mut prod = c(1.0, 0.0);
        for i in 0..n {
            let row: C64 = (0..n).filter(|&j| s >> j & 1 == 1).map(|j| m[(i, j)]).sum();
            prod *= row;
        }
        let sign = if (n as u32 - s.count_ones()) % 2 == 0 { 1.0 } else { -1.0 };
        total += prod * sign;
    }
    total
}

/// All length-`m` patterns with total `n`.
pub fn compositions(m: usize, n: usize) -> Vec<Vec<usize>> {
    if m == 0 {
        return if n == 0 { vec![vec![]] } else { vec![] };
    }
    let mut out = Vec::new();
    for first in 0..=n {
        for mut rest in compositions(m - 1, n - first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// All length-`m` patterns with total at most `n`.
pub fn patterns_up_to(m: usize, n: usize) -> Vec<Vec<usize>> {
    (0..=n).flat_map(|k| compositions(m, k)).collect()
}

fn fact(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn repeat_idx(p: &[usize]) -> Vec<usize> {
    p.iter().enumerate().flat_map(|(i, &k)| std::iter::repeat_n(i, k)).collect()
}

/// `P(n)` for input blocks followed by the interferometer `u` (`a → U a`).
pub fn probability(blocks: &[Block], u: &DMatrix<C64>, n: &[usize]) -> f64 {
    let m = u.nrows();
    assert_eq!(blocks.iter().map(|b| b.modes).sum::<usize>(), m);
    let total: usize = n.iter().sum();
    let rows = repeat_idx(n);
    let nf: f64 = n.iter().map(|&k| fact(k)).product();
    let diag = |i: &[usize]| {
        let mut off = 0;
        blocks.iter().all(|b| {
            let x = (b.elem)(&i[off..off + b.modes], &i[off..off + b.modes]);
            off += b.modes;
            x.norm() > 0.0
        })
    };
    let inputs: Vec<Vec<usize>> = compositions(m, total).into_iter().filter(|i| diag(i)).collect();
    let amps: Vec<C64> = inputs
        .iter()
        .map(|i| {
            let cols = repeat_idx(i);
            let sub = DMatrix::from_fn(total, total, |r, s| u[(rows[r], cols[s])]);
            let inf: f64 = i.iter().map(|&k| fact(k)).product();
            permanent(&sub) / (nf * inf).sqrt()
        })
        .collect();
    let mut p = c(0.0, 0.0);
    for (x, i) in inputs.iter().enumerate() {
        if amps[x].norm() == 0.0 {
            continue;
        }
        for (y, j) in inputs.iter().enumerate() {
            let mut rho = c(1.0, 0.0);
            let mut off = 0;
            for b in blocks {
                rho *= (b.elem)(&i[off..off + b.modes], &j[off..off + b.modes]);
                off += b.modes;
                if rho.norm() == 0.0 {
                    break;
                }
            }
            p += amps[x] * rho * amps[y].conj();
        }
    }
    assert!(p.im.abs() < 1e-10 * (1.0 + p.re.abs()));
    p.re
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
