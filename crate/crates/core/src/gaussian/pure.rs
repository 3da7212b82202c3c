use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::complex::{factorial_product, pure_loops, ComplexStateRep};
use super::state::GaussianState;
use crate::error::{invalid, GbsError, Result};
use crate::exec::Exec;
use crate::lhaf::{lhaf, Kernel, ReducedMatrix};

/// Pure states sharing the covariance `T` and differing only in their mean.
/// `B` and the factorisation of `T + I` are computed once.
#[derive(Clone, Debug)]
pub struct PureFamily {
    t: DMatrix<f64>,
    b: DMatrix<C64>,
    chol: Cholesky<f64, Dyn>,
    log_norm: f64,
}

impl PureFamily {
    pub fn new(t: DMatrix<f64>) -> Result<Self> {
        let d = t.nrows();
        let m = d / 2;
        let state = GaussianState::new_unchecked(DVector::zeros(d), t.clone())?;
        let rep = ComplexStateRep::new(&state)?;
        let b = rep.b.ok_or_else(|| GbsError::InvalidInput("covariance is not pure".into()))?;
        let chol = (&t + DMatrix::<f64>::identity(d, d))
            .cholesky()
            .ok_or_else(|| GbsError::InvalidInput("T + I is not positive definite".into()))?;
        let logdet: f64 = chol.l().diagonal().iter().map(|x| 2.0 * x.ln()).sum();
        Ok(Self { t, b, chol, log_norm: m as f64 * std::f64::consts::LN_2 - 0.5 * logdet })
    }

    pub fn modes(&self) -> usize {
        self.b.nrows()
    }

    pub fn b(&self) -> &DMatrix<C64> {
        &self.b
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.t
    }

    /// `α_j = (q_j + i p_j) / 2`.
    pub fn alpha(&self, r: &DVector<f64>) -> Vec<C64> {
        let m = self.modes();
        (0..m).map(|j| C64::new(r[j], r[m + j]) * 0.5).collect()
    }

    pub fn log_vacuum_prob(&self, r: &DVector<f64>) -> f64 {
        self.log_norm - 0.5 * r.dot(&self.chol.solve(r))
    }

    /// A heterodyne (Husimi Q) outcome for every mode: `(q, p) ~ N(r, T + I)`.
    pub fn husimi_draw<R: Rng + ?Sized>(&self, r: &DVector<f64>, rng: &mut R) -> Vec<C64> {
        let g = DVector::from_fn(r.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
        let x = r + self.chol.l() * g;
        self.alpha(&x)
    }

    /// Loops `(α - β)* - B (α - β)`, with `β` zero where absent.
    pub fn loops(&self, alpha: &[C64], beta: &[C64]) -> Vec<C64> {
        let d: Vec<C64> = alpha.iter().zip(beta).map(|(a, b)| a - b).collect();
        pure_loops(&self.b, &d)
    }

    pub fn reduced(&self, r: &DVector<f64>, pattern: &[usize]) -> Result<ReducedMatrix> {
        if pattern.len() != self.modes() {
            return invalid("pattern length does not match mode count");
        }
        let alpha = self.alpha(r);
        ReducedMatrix::new(self.b.clone(), pure_loops(&self.b, &alpha), pattern.to_vec())
    }

    /// `ln P(n | r) = ln P₀ + ln |lhaf(B_n)|² - ln Π n!`.
    pub fn log_probability(&self, r: &DVector<f64>, pattern: &[usize], kernel: Kernel, exec: &Exec) -> Result<f64> {
        let h = lhaf(&self.reduced(r, pattern)?, kernel, exec)?;
        Ok(self.log_vacuum_prob(r) + h.norm_sqr().ln() - factorial_product(pattern).ln())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{squeeze, tmsv};

    #[test]
    fn agrees_with_full_representation() {
        let s = squeeze(&tmsv(3, 0, 1, 0.6), 2, 0.4).unwrap();
        let fam = PureFamily::new(s.cov().clone()).unwrap();
        let r = DVector::from_vec(vec![0.3, -0.2, 0.5, 0.1, 0.0, -0.4]);
        let rep = ComplexStateRep::new(&s.with_mean(r.clone()).unwrap()).unwrap();
        assert!((fam.log_vacuum_prob(&r).exp() - rep.vacuum_prob).abs() < 1e-14);
        let exec = Exec::sequential();
        for n in [[1, 0, 0], [2, 1, 0], [1, 1, 2]] {
            let want = rep.pure_probability(&n, Kernel::Fds, &exec).unwrap();
            let got = fam.log_probability(&r, &n, Kernel::Fds, &exec).unwrap().exp();
            assert!((got - want).abs() <= 1e-12 * want, "{n:?}");
        }
    }

    #[test]
    fn rejects_mixed_covariance() {
        let s = tmsv(2, 0, 1, 0.6).apply_transmission(0.5).unwrap();
        assert!(PureFamily::new(s.cov().clone()).is_err());
    }
}
