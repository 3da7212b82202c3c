//! Williamson normal form `V = S D Sᵀ` and the split `V = T + W` into a pure
//! covariance `T = S Sᵀ` plus classical noise `W`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::state::{omega, GaussianState};
use crate::error::{GbsError, Result};

/// Eigenvalues of `W` below this are treated as exactly zero.
pub const NOISE_RANK_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct WilliamsonDecomposition {
    pub s: DMatrix<f64>,
    /// Symplectic eigenvalues, one per mode.
    pub d: Vec<f64>,
    pub t: DMatrix<f64>,
    pub w: DMatrix<f64>,
    /// Columns `√λ_k e_k` spanning the retained noise subspace of `W`.
    noise: DMatrix<f64>,
}

fn sym_sqrt(v: &DMatrix<f64>, power: f64) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(v.clone());
    let min = eig.eigenvalues.min();
    if !(min > 0.0) {
        return Err(GbsError::InvalidInput(format!("covariance not positive definite (min eigenvalue {min:e})")));
    }
    let f = eig.eigenvalues.map(|x| x.powf(power));
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&f) * eig.eigenvectors.transpose())
}

/// Decompose the covariance of `state`.
pub fn williamson_decompose(state: &GaussianState) -> Result<WilliamsonDecomposition> {
    let v = state.cov();
    let m = state.modes();
    let half = sym_sqrt(v, 0.5)?;
    let inv_half = sym_sqrt(v, -0.5)?;
    let j = &inv_half * omega(m) * &inv_half;
    // −iJ is Hermitian with eigenvalues ±1/d_k.
    let h = j.map(|x| C64::new(0.0, -x));
    let eig = SymmetricEigen::new(h);
    let mut pos: Vec<usize> = (0..2 * m).filter(|&k| eig.eigenvalues[k] > 0.0).collect();
    if pos.len() != m {
        return Err(GbsError::Numerical("symplectic spectrum is not paired".into()));
    }
    pos.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut k = DMatrix::zeros(2 * m, 2 * m);
    let mut d = Vec::with_capacity(m);
    for (col, &idx) in pos.iter().enumerate() {
        let u = eig.eigenvectors.column(idx) * C64::new(std::f64::consts::SQRT_2, 0.0);
        for r in 0..2 * m {
            k[(r, col)] = u[r].re;
            k[(r, m + col)] = u[r].im;
        }
        d.push(1.0 / eig.eigenvalues[idx]);
    }
    let scale = DVector::from_fn(2 * m, |i, _| d[i % m].powf(-0.5));
    let s = half * k * DMatrix::from_diagonal(&scale);
    let t = &s * s.transpose();
    let t = (&t + t.transpose()) * 0.5;
    let w = v - &t;
    let w = (&w + w.transpose()) * 0.5;

    let we = SymmetricEigen::new(w.clone());
    if we.eigenvalues.min() < -1e-9 * (1.0 + v.amax()) {
        return Err(GbsError::Numerical(format!("noise covariance not PSD ({:e})", we.eigenvalues.min())));
    }
    let keep: Vec<usize> = (0..2 * m).filter(|&i| we.eigenvalues[i] > NOISE_RANK_TOL).collect();
    let noise = DMatrix::from_fn(2 * m, keep.len(), |r, c| {
        we.eigenvectors[(r, keep[c])] * we.eigenvalues[keep[c]].sqrt()
    });
    Ok(WilliamsonDecomposition { s, d, t, w, noise })
}

impl WilliamsonDecomposition {
    /// Rank of the retained noise subspace.
    pub fn noise_rank(&self) -> usize {
        self.noise.ncols()
    }

    /// Draw `R' ~ N(mean, W)`.
    pub fn sample_pure_displacement<R: Rng + ?Sized>(&self, mean: &DVector<f64>, rng: &mut R) -> DVector<f64> {
        let g = DVector::from_fn(self.noise.ncols(), |_, _| rng.sample::<f64, _>(StandardNormal));
        mean + &self.noise * g
    }

    /// Pure state with covariance `T` and the given mean.
    pub fn pure_state(&self, mean: DVector<f64>) -> Result<GaussianState> {
        GaussianState::new_unchecked(mean, self.t.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::state::tmsv;
    use crate::rng;

    fn frob(m: &DMatrix<f64>) -> f64 {
        m.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    #[test]
    fn pure_state_has_no_noise() {
        let s = tmsv(2, 0, 1, 0.7);
        let dec = williamson_decompose(&s).unwrap();
        assert!(frob(&dec.w) < 1e-9);
        assert!(dec.d.iter().all(|&x| (x - 1.0).abs() < 1e-9));
        assert_eq!(dec.noise_rank(), 0);
        let mean = DVector::from_vec(vec![0.1, 0.2, 0.3, 0.4]);
        assert_eq!(dec.sample_pure_displacement(&mean, &mut rng::stream(0, "t", 0)), mean);
    }

    #[test]
    fn thermal_symplectic_eigenvalue() {
        let s = GaussianState::thermal(&[1.0]).unwrap();
        let dec = williamson_decompose(&s).unwrap();
        assert!((dec.d[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn reconstruction_and_symplecticity() {
        let s = tmsv(3, 0, 2, 1.1).apply_loss(&[0.2, 0.5, 0.7]).unwrap();
        let dec = williamson_decompose(&s).unwrap();
        let dd = DMatrix::from_diagonal(&DVector::from_fn(6, |i, _| dec.d[i % 3]));
        let v = s.cov();
        assert!(frob(&(&dec.s * dd * dec.s.transpose() - v)) / frob(v) < 1e-9);
        let o = omega(3);
        assert!(frob(&(&dec.s * &o * dec.s.transpose() - o)) < 1e-9);
        assert!(frob(&(&dec.t + &dec.w - v)) < 1e-9);
        assert!(dec.d.iter().all(|&x| x >= 1.0 - 1e-9));
    }

    #[test]
    fn unit_noise_sampling() {
        // Thermal n̄ = 1 on two modes: V = 3I, T = I, W = 2I.
        let s = GaussianState::thermal(&[1.0, 1.0]).unwrap();
        let dec = williamson_decompose(&s).unwrap();
        let mut rng = rng::stream(11, "w", 0);
        let n = 100_000;
        let zero = DVector::zeros(4);
        let mut acc = DMatrix::<f64>::zeros(4, 4);
        for _ in 0..n {
            let x = dec.sample_pure_displacement(&zero, &mut rng);
            acc += &x * x.transpose();
        }
        acc /= n as f64;
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 2.0 } else { 0.0 };
                assert!((acc[(i, j)] - want).abs() < 0.05 * 2.0, "{i},{j}: {}", acc[(i, j)]);
            }
        }
    }

    #[test]
    fn rejects_indefinite() {
        let bad = GaussianState::new_unchecked(DVector::zeros(2), DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]))).unwrap();
        assert!(williamson_decompose(&bad).is_err());
    }
}
