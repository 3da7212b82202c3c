//! Independent pairs and singles: photons come from independent Poisson
//! processes, singles with mean `|α_j|²`, pairs `(j, k)` with mean `|B_jk|²`
//! (`½|B_jj|²` for a self pair), with no interference between them.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{invalid, GbsError, Result};
use crate::exec::Exec;
use crate::gaussian::factorial_product;
use crate::lhaf::{lhaf, Kernel, ReducedMatrix};

#[derive(Clone, Debug)]
pub struct IpsModel {
    /// `|B_jk|²`.
    pair: DMatrix<f64>,
    /// `|α_j|²`.
    single: Vec<f64>,
}

fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("finite positive mean").sample(rng) as usize
}

impl IpsModel {
    pub fn new(b: &DMatrix<C64>, alpha: &[C64]) -> Result<Self> {
        if b.nrows() != alpha.len() || b.ncols() != alpha.len() {
            return invalid("B and α disagree in size");
        }
        Ok(Self { pair: b.map(|z| z.norm_sqr()), single: alpha.iter().map(|a| a.norm_sqr()).collect() })
    }

    pub fn modes(&self) -> usize {
        self.single.len()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        let m = self.modes();
        let mut n: Vec<usize> = self.single.iter().map(|&mu| poisson(mu, rng)).collect();
        for j in 0..m {
            n[j] += 2 * poisson(0.5 * self.pair[(j, j)], rng);
            for k in j + 1..m {
                let p = poisson(self.pair[(j, k)], rng);
                n[j] += p;
                n[k] += p;
            }
        }
        n
    }

    /// `Σ_j |α_j|² + ½ Σ_{jk} |B_jk|²`.
    pub fn total_rate(&self) -> f64 {
        self.single.iter().sum::<f64>() + 0.5 * self.pair.sum()
    }

    /// `ln Q(n)`.
    pub fn log_probability(&self, pattern: &[usize], kernel: Kernel, exec: &Exec) -> Result<f64> {
        let h = self.log_lhaf(&self.pair, &self.single, pattern, kernel, exec)?;
        Ok(h - self.total_rate() - factorial_product(pattern).ln())
    }

    pub fn probability(&self, pattern: &[usize], kernel: Kernel, exec: &Exec) -> Result<f64> {
        Ok(self.log_probability(pattern, kernel, exec)?.exp())
    }

    /// Matrix `C(x)` after per-mode loss `x` and the total surviving rate.
    pub fn lossy(&self, x: &[f64]) -> Result<(DMatrix<f64>, Vec<f64>, f64)> {
        let m = self.modes();
        if x.len() != m || x.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return invalid("loss vector must have one entry in [0, 1] per mode");
        }
        let c = DMatrix::from_fn(m, m, |j, k| (1.0 - x[j]) * (1.0 - x[k]) * self.pair[(j, k)]);
        let loops: Vec<f64> = (0..m)
            .map(|j| (1.0 - x[j]) * (self.single[j] + (0..m).map(|k| x[k] * self.pair[(j, k)]).sum::<f64>()))
            .collect();
        let mut rate = 0.0;
        for j in 0..m {
            rate += self.single[j] * (1.0 - x[j]) + 0.5 * self.pair[(j, j)] * (1.0 - x[j] * x[j]);
            for k in j + 1..m {
                rate += self.pair[(j, k)] * (1.0 - x[j] * x[k]);
            }
        }
        Ok((c, loops, rate))
    }

    /// `ln Q(n | x)`: the pattern after loss `x`.
    pub fn lossy_log_probability(&self, pattern: &[usize], x: &[f64], kernel: Kernel, exec: &Exec) -> Result<f64> {
        let (c, loops, rate) = self.lossy(x)?;
        let h = self.log_lhaf(&c, &loops, pattern, kernel, exec)?;
        Ok(h - rate - factorial_product(pattern).ln())
    }

    /// `ln lhaf` of a nonnegative problem, evaluated after a diagonal
    /// rescaling `d` under which `n` is the mean pattern. The rescaled value
    /// picks up `Π d_j^{n_j}`, which is divided out again. Without it,
    /// bunched patterns with strong singles can cancel to a negative value.
    fn log_lhaf(&self, c: &DMatrix<f64>, loops: &[f64], pattern: &[usize], kernel: Kernel, exec: &Exec) -> Result<f64> {
        let m = self.modes();
        if pattern.len() != m {
            return invalid("pattern length does not match mode count");
        }
        let d = balance(c, loops, pattern);
        let red = ReducedMatrix::new(
            DMatrix::from_fn(m, m, |j, k| C64::new(c[(j, k)] * d[j] * d[k], 0.0)),
            loops.iter().zip(&d).map(|(&v, &s)| C64::new(v * s, 0.0)).collect(),
            pattern.to_vec(),
        )?;
        let h = lhaf(&red, kernel, exec)?.re;
        if h == 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(GbsError::Numerical(format!("IPS loop hafnian evaluated to {h} for {pattern:?}")));
        }
        let shift: f64 = pattern.iter().zip(&d).map(|(&n, &s)| n as f64 * s.ln()).sum();
        Ok(h.ln() - shift)
    }
}

/// Scales `d` solving `d_j (γ_j + Σ_k C_jk d_k) = n_j` over occupied modes,
/// by damped fixed-point iteration. Any positive `d` is exact; this one
/// only improves conditioning, so a loose tolerance is enough.
fn balance(c: &DMatrix<f64>, loops: &[f64], pattern: &[usize]) -> Vec<f64> {
    let m = pattern.len();
    let occupied: Vec<usize> = (0..m).filter(|&j| pattern[j] > 0).collect();
    let mut d = vec![1.0; m];
    for _ in 0..100 {
        let mut change = 0.0f64;
        for &j in &occupied {
            let rate = loops[j] + occupied.iter().map(|&k| c[(j, k)] * d[k]).sum::<f64>();
            if !(rate > 0.0) {
                continue;
            }
            let next = (d[j] * pattern[j] as f64 / rate).sqrt();
            change = change.max((next / d[j]).ln().abs());
            d[j] = next;
        }
        if change < 1e-6 {
            break;
        }
    }
    d
}
