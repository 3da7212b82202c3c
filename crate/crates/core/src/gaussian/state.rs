use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{invalid, GbsError, Result};

/// Fixed convention: ħ = 2, so the vacuum covariance is the identity.
pub const HBAR: f64 = 2.0;

/// M-mode Gaussian state in quadrature form, ordered `(q_1..q_M, p_1..p_M)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianState {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

/// The symplectic form `[[0, I], [-I, 0]]`.
pub fn omega(modes: usize) -> DMatrix<f64> {
    let mut o = DMatrix::zeros(2 * modes, 2 * modes);
    for i in 0..modes {
        o[(i, modes + i)] = 1.0;
        o[(modes + i, i)] = -1.0;
    }
    o
}

impl GaussianState {
    /// Validates symmetry and the uncertainty principle `V + iΩ ≥ 0`.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let state = Self::new_unchecked(mean, cov)?;
        state.check_physical()?;
        Ok(state)
    }

    /// Shape and symmetry checks only.
    pub fn new_unchecked(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 || d % 2 != 0 {
            return invalid(format!("mean length {d} is not 2M"));
        }
        if cov.nrows() != d || cov.ncols() != d {
            return invalid("covariance shape does not match mean");
        }
        let asym = (&cov - cov.transpose()).amax();
        if asym > 1e-12 {
            return invalid(format!("covariance asymmetric by {asym:e}"));
        }
        let cov = (&cov + cov.transpose()) * 0.5;
        Ok(Self { mean, cov })
    }

    pub fn vacuum(modes: usize) -> Self {
        Self { mean: DVector::zeros(2 * modes), cov: DMatrix::identity(2 * modes, 2 * modes) }
    }

    /// Product of thermal states with the given mean photon numbers.
    pub fn thermal(nbar: &[f64]) -> Result<Self> {
        if nbar.iter().any(|&n| !(n >= 0.0)) {
            return invalid("thermal photon numbers must be nonnegative");
        }
        let m = nbar.len();
        let mut cov = DMatrix::identity(2 * m, 2 * m);
        for (i, &n) in nbar.iter().enumerate() {
            cov[(i, i)] = 2.0 * n + 1.0;
            cov[(m + i, m + i)] = 2.0 * n + 1.0;
        }
        Ok(Self { mean: DVector::zeros(2 * m), cov })
    }

    /// Coherent state with complex amplitudes `alpha`.
    pub fn coherent(alpha: &[C64]) -> Self {
        let m = alpha.len();
        let mut s = Self::vacuum(m);
        for (i, a) in alpha.iter().enumerate() {
            s.mean[i] = 2.0 * a.re;
            s.mean[m + i] = 2.0 * a.im;
        }
        s
    }

    pub fn modes(&self) -> usize {
        self.mean.len() / 2
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn with_mean(&self, mean: DVector<f64>) -> Result<Self> {
        if mean.len() != self.mean.len() {
            return invalid("mean length mismatch");
        }
        Ok(Self { mean, cov: self.cov.clone() })
    }

    /// Complex displacement `α_j = (q_j + i p_j) / 2`.
    pub fn alpha(&self) -> Vec<C64> {
        let m = self.modes();
        (0..m).map(|j| C64::new(self.mean[j], self.mean[m + j]) * 0.5).collect()
    }

    /// Smallest eigenvalue of the Hermitian matrix `V + iΩ`.
    pub fn uncertainty_margin(&self) -> f64 {
        let m = self.modes();
        let o = omega(m);
        let h = DMatrix::from_fn(2 * m, 2 * m, |i, j| C64::new(self.cov[(i, j)], o[(i, j)]));
        h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn check_physical(&self) -> Result<()> {
        let margin = self.uncertainty_margin();
        if margin < -1e-9 {
            return Err(GbsError::InvalidInput(format!(
                "state violates the uncertainty principle (min eigenvalue {margin:e})"
            )));
        }
        Ok(())
    }

    /// Mean photon number of each mode.
    pub fn mean_photons(&self) -> Vec<f64> {
        let m = self.modes();
        (0..m)
            .map(|j| {
                let v = self.cov[(j, j)] + self.cov[(m + j, m + j)];
                let r = self.mean[j].powi(2) + self.mean[m + j].powi(2);
                (v + r - 2.0) / 4.0
            })
            .collect()
    }

    /// `S V Sᵀ`, `S R`.
    pub fn transform(&self, s: &DMatrix<f64>) -> Result<Self> {
        let d = self.mean.len();
        if s.nrows() != d || s.ncols() != d {
            return invalid("transform shape mismatch");
        }
        let cov = s * &self.cov * s.transpose();
        let cov = (&cov + cov.transpose()) * 0.5;
        Ok(Self { mean: s * &self.mean, cov })
    }

    /// Pass the modes through the interferometer `U` (`a -> U a`).
    pub fn apply_unitary(&self, u: &DMatrix<C64>) -> Result<Self> {
        let m = self.modes();
        if u.nrows() != m || u.ncols() != m {
            return invalid("unitary size does not match mode count");
        }
        check_unitary(u, 1e-10)?;
        self.transform(&unitary_symplectic(u))
    }

    /// Per-mode pure-loss channel; `loss[m]` is the fraction lost.
    pub fn apply_loss(&self, loss: &[f64]) -> Result<Self> {
        let m = self.modes();
        if loss.len() != m {
            return invalid("loss vector length does not match mode count");
        }
        if loss.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
            return invalid("loss values must lie in [0, 1]");
        }
        let g: Vec<f64> = (0..2 * m).map(|i| (1.0 - loss[i % m]).sqrt()).collect();
        let cov = DMatrix::from_fn(2 * m, 2 * m, |i, j| {
            let base = g[i] * self.cov[(i, j)] * g[j];
            if i == j {
                base + 1.0 - g[i] * g[i]
            } else {
                base
            }
        });
        let mean = DVector::from_fn(2 * m, |i, _| g[i] * self.mean[i]);
        Ok(Self { mean, cov })
    }

    /// Uniform transmission `eta`.
    pub fn apply_transmission(&self, eta: f64) -> Result<Self> {
        self.apply_loss(&vec![1.0 - eta; self.modes()])
    }

    /// Marginal state on `modes` (in the given order).
    pub fn marginal(&self, modes: &[usize]) -> Self {
        let m = self.modes();
        let k = modes.len();
        let idx: Vec<usize> = modes.iter().copied().chain(modes.iter().map(|&j| j + m)).collect();
        let cov = DMatrix::from_fn(2 * k, 2 * k, |i, j| self.cov[(idx[i], idx[j])]);
        let mean = DVector::from_fn(2 * k, |i, _| self.mean[idx[i]]);
        Self { mean, cov }
    }

    /// Tensor product `self ⊗ other` with modes appended.
    pub fn append(&self, other: &Self) -> Self {
        let (a, b) = (self.modes(), other.modes());
        let m = a + b;
        let map = |i: usize, k: usize, off: usize| if i < k { off + i } else { m + off + i - k };
        let mut cov = DMatrix::zeros(2 * m, 2 * m);
        let mut mean = DVector::zeros(2 * m);
        for i in 0..2 * a {
            mean[map(i, a, 0)] = self.mean[i];
            for j in 0..2 * a {
                cov[(map(i, a, 0), map(j, a, 0))] = self.cov[(i, j)];
            }
        }
        for i in 0..2 * b {
            mean[map(i, b, a)] = other.mean[i];
            for j in 0..2 * b {
                cov[(map(i, b, a), map(j, b, a))] = other.cov[(i, j)];
            }
        }
        Self { mean, cov }
    }
}

/// Real symplectic representation `[[Re U, -Im U], [Im U, Re U]]`.
pub fn unitary_symplectic(u: &DMatrix<C64>) -> DMatrix<f64> {
    let m = u.nrows();
    DMatrix::from_fn(2 * m, 2 * m, |i, j| {
        let z = u[(i % m, j % m)];
        match (i < m, j < m) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

pub fn check_unitary(u: &DMatrix<C64>, tol: f64) -> Result<()> {
    if u.nrows() != u.ncols() {
        return invalid("unitary must be square");
    }
    let n = u.nrows();
    let err = (u * u.adjoint() - DMatrix::<C64>::identity(n, n)).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if err > tol {
        return invalid(format!("matrix is not unitary (max deviation {err:e})"));
    }
    Ok(())
}

/// Two-mode squeezed vacuum with squeezing `r` on modes `(i, j)` of an
/// otherwise vacuum `modes`-mode state.
pub fn tmsv(modes: usize, i: usize, j: usize, r: f64) -> GaussianState {
    let mut s = GaussianState::vacuum(modes);
    let (c, sh) = ((2.0 * r).cosh(), (2.0 * r).sinh());
    let m = modes;
    for k in [i, j] {
        s.cov[(k, k)] = c;
        s.cov[(m + k, m + k)] = c;
    }
    s.cov[(i, j)] = sh;
    s.cov[(j, i)] = sh;
    s.cov[(m + i, m + j)] = -sh;
    s.cov[(m + j, m + i)] = -sh;
    s
}

/// Single-mode squeezing of mode `k` (`q` quadrature squeezed for `r > 0`).
pub fn squeeze(state: &GaussianState, k: usize, r: f64) -> Result<GaussianState> {
    let m = state.modes();
    let mut s = DMatrix::identity(2 * m, 2 * m);
    s[(k, k)] = (-r).exp();
    s[(m + k, m + k)] = r.exp();
    state.transform(&s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vacuum_is_physical_and_empty() {
        let v = GaussianState::vacuum(3);
        assert!(v.check_physical().is_ok());
        assert!(v.mean_photons().iter().all(|&n| n.abs() < 1e-15));
    }

    #[test]
    fn tmsv_photon_numbers() {
        let s = tmsv(2, 0, 1, 0.5);
        let n = s.mean_photons();
        assert!((n[0] - 0.5f64.sinh().powi(2)).abs() < 1e-12);
        assert!((n[1] - n[0]).abs() < 1e-12);
        assert!(s.uncertainty_margin() > -1e-9);
    }

    #[test]
    fn unphysical_rejected() {
        let cov = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 0.5]));
        assert!(GaussianState::new(DVector::zeros(2), cov).is_err());
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(GaussianState::new(DVector::zeros(2), bad).is_err());
    }

    #[test]
    fn loss_limits() {
        let s = tmsv(2, 0, 1, 0.8);
        assert_eq!(s.apply_loss(&[0.0, 0.0]).unwrap(), s);
        let gone = s.apply_loss(&[1.0, 1.0]).unwrap();
        assert!((gone.cov() - DMatrix::<f64>::identity(4, 4)).amax() < 1e-15);
        assert!(s.apply_loss(&[1.5, 0.0]).is_err());
    }

    #[test]
    fn thermal_loss_scales_photons() {
        let s = GaussianState::thermal(&[1.7]).unwrap();
        let l = s.apply_loss(&[0.3]).unwrap();
        assert!((l.mean_photons()[0] - 0.7 * 1.7).abs() < 1e-12);
    }

    #[test]
    fn coherent_alpha_roundtrip() {
        let a = [C64::new(0.3, -0.2), C64::new(-1.0, 0.5)];
        let s = GaussianState::coherent(&a);
        assert_eq!(s.alpha(), a.to_vec());
        assert!((s.mean_photons()[1] - a[1].norm_sqr()).abs() < 1e-12);
    }

    #[test]
    fn marginal_and_append_invert() {
        let a = tmsv(2, 0, 1, 0.4);
        let b = GaussianState::thermal(&[0.5]).unwrap();
        let ab = a.append(&b);
        assert_eq!(ab.marginal(&[0, 1]), a);
        assert_eq!(ab.marginal(&[2]), b);
    }
}
