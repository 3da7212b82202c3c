use log::warn;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use super::state::GaussianState;
use crate::error::{invalid, GbsError, Result};
use crate::exec::Exec;
use crate::lhaf::{lhaf, Kernel, ReducedMatrix};

/// Complex (ladder-operator) form of a Gaussian state and the matrices
/// entering photon-number probabilities.
#[derive(Clone, Debug)]
pub struct ComplexStateRep {
    /// Doubled displacement `(α, α*)`.
    pub alpha: Vec<C64>,
    pub sigma: DMatrix<C64>,
    /// Husimi covariance `σ + I/2`.
    pub sigma_q: DMatrix<C64>,
    pub sigma_q_inv: DMatrix<C64>,
    /// `I - σ_Q⁻¹`.
    pub o: DMatrix<C64>,
    /// `X O`, symmetric.
    pub a: DMatrix<C64>,
    /// `α† σ_Q⁻¹` as a vector.
    pub gamma: Vec<C64>,
    /// `M x M` block of `A` when the state is pure.
    pub b: Option<DMatrix<C64>>,
    pub vacuum_prob: f64,
}

fn symmetrize(m: DMatrix<C64>) -> DMatrix<C64> {
    (&m + m.transpose()) * C64::new(0.5, 0.0)
}

/// `L = ½ [[I, iI], [I, -iI]]`, mapping `(q, p)` to `(a, a*)`.
fn ladder(modes: usize) -> DMatrix<C64> {
    let m = modes;
    DMatrix::from_fn(2 * m, 2 * m, |i, j| {
        if i % m != j % m {
            return C64::new(0.0, 0.0);
        }
        match (i < m, j < m) {
            (_, true) => C64::new(0.5, 0.0),
            (true, false) => C64::new(0.0, 0.5),
            (false, false) => C64::new(0.0, -0.5),
        }
    })
}

/// `ln P₀ = M ln 2 - ½ ln det(V + I) - ½ Rᵀ (V + I)⁻¹ R`.
pub fn log_vacuum_prob(state: &GaussianState) -> Result<f64> {
    let m = state.modes();
    let vi = state.cov() + DMatrix::<f64>::identity(2 * m, 2 * m);
    let chol = vi
        .cholesky()
        .ok_or_else(|| GbsError::InvalidInput("V + I is not positive definite".into()))?;
    let logdet: f64 = chol.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
    let x = chol.solve(state.mean());
    let quad = state.mean().dot(&x);
    Ok(m as f64 * std::f64::consts::LN_2 - 0.5 * logdet - 0.5 * quad)
}

impl ComplexStateRep {
    pub fn new(state: &GaussianState) -> Result<Self> {
        let m = state.modes();
        let l = ladder(m);
        let r = state.mean().map(|x| C64::new(x, 0.0));
        let v = state.cov().map(|x| C64::new(x, 0.0));
        let alpha: Vec<C64> = (&l * r).iter().copied().collect();
        let sigma = &l * v * l.adjoint();
        let sigma_q = &sigma + DMatrix::<C64>::identity(2 * m, 2 * m) * C64::new(0.5, 0.0);
        let sigma_q_inv = sigma_q
            .clone()
            .try_inverse()
            .ok_or_else(|| GbsError::InvalidInput("σ_Q is singular; state is unphysical".into()))?;
        if sigma_q_inv.iter().any(|z| !z.is_finite()) {
            return Err(GbsError::Numerical("non-finite σ_Q inverse".into()));
        }
        let o = DMatrix::<C64>::identity(2 * m, 2 * m) - &sigma_q_inv;
        let a = symmetrize(DMatrix::from_fn(2 * m, 2 * m, |i, j| o[((i + m) % (2 * m), j)]));
        let alpha_v = DVector::from_column_slice(&alpha);
        let gamma: Vec<C64> = (sigma_q_inv.transpose() * alpha_v.conjugate()).iter().copied().collect();

        let scale = 1.0 + a.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let off = a.view((0, m), (m, m)).iter().map(|z| z.norm()).fold(0.0, f64::max);
        let b = (off <= 1e-10 * scale).then(|| symmetrize(a.view((0, 0), (m, m)).into_owned()));

        let vacuum_prob = log_vacuum_prob(state)?.exp();
        if !(vacuum_prob > 0.0 && vacuum_prob <= 1.0 + 1e-12) {
            return invalid(format!("vacuum probability {vacuum_prob} outside (0, 1]"));
        }
        Ok(Self { alpha, sigma, sigma_q, sigma_q_inv, o, a, gamma, b, vacuum_prob: vacuum_prob.min(1.0) })
    }

    pub fn modes(&self) -> usize {
        self.alpha.len() / 2
    }

    pub fn is_pure(&self) -> bool {
        self.b.is_some()
    }

    /// Pure-state reduction: couplings `B` with loops
    /// `γ' = (α - β)* - B (α - β)`; `beta` defaults to zero.
    pub fn pure_reduced(&self, pattern: &[usize], beta: Option<&[C64]>) -> Result<ReducedMatrix> {
        let b = self.b.as_ref().ok_or_else(|| GbsError::InvalidInput("state is not pure".into()))?;
        let m = self.modes();
        if pattern.len() != m {
            return invalid("pattern length does not match mode count");
        }
        let d: Vec<C64> = match beta {
            Some(beta) if beta.len() != m => return invalid("beta length does not match mode count"),
            Some(beta) => (0..m).map(|j| self.alpha[j] - beta[j]).collect(),
            None => self.alpha[..m].to_vec(),
        };
        let loops = pure_loops(b, &d);
        ReducedMatrix::new(b.clone(), loops, pattern.to_vec())
    }

    /// Mixed-state reduction over `2M` indices, each mode repeated on both
    /// halves.
    pub fn mixed_reduced(&self, pattern: &[usize]) -> Result<ReducedMatrix> {
        if pattern.len() != self.modes() {
            return invalid("pattern length does not match mode count");
        }
        let doubled = pattern.iter().chain(pattern).copied().collect();
        ReducedMatrix::new(self.a.clone(), self.gamma.clone(), doubled)
    }

    /// Photon-number probability of `pattern`.
    pub fn probability(&self, pattern: &[usize], kernel: Kernel, exec: &Exec) -> Result<f64> {
        let red = self.mixed_reduced(pattern)?;
        let z = lhaf(&red, kernel, exec)? * self.vacuum_prob / factorial_product(pattern);
        real_probability(z)
    }

    /// Pure-state probability from the half-size matrix: `P₀ |lhaf(B_n)|² / Π n!`.
    pub fn pure_probability(&self, pattern: &[usize], kernel: Kernel, exec: &Exec) -> Result<f64> {
        let red = self.pure_reduced(pattern, None)?;
        let h = lhaf(&red, kernel, exec)?;
        Ok(self.vacuum_prob * h.norm_sqr() / factorial_product(pattern))
    }
}

/// `conj(d) - B d`.
pub fn pure_loops(b: &DMatrix<C64>, d: &[C64]) -> Vec<C64> {
    let dv = DVector::from_column_slice(d);
    let bd = b * &dv;
    d.iter().zip(bd.iter()).map(|(x, y)| x.conj() - y).collect()
}

pub fn factorial_product(pattern: &[usize]) -> f64 {
    pattern.iter().flat_map(|&n| 1..=n).map(|k| k as f64).product()
}

/// Accept small imaginary or negative residue, reject anything larger.
pub fn real_probability(z: C64) -> Result<f64> {
    let tol = 1e-10_f64.max(1e-8 * z.norm());
    if z.im.abs() > tol {
        return Err(GbsError::Numerical(format!("probability has imaginary part {:e}", z.im)));
    }
    if z.re < -tol {
        return Err(GbsError::Numerical(format!("negative probability {:e}", z.re)));
    }
    if z.re < 0.0 || z.im.abs() > 1e-14 {
        warn!("clipping probability residue {z}");
    }
    Ok(z.re.max(0.0))
}
