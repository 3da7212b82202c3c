//! Total photon-number distributions from generating functions.
//!
//! `G(z) = E[z^N]` has a closed form for a Gaussian state (the vacuum
//! probability after transmission `1 - z`) and for the IPS mixture, and both
//! stay analytic on the unit circle. Sampling `G` at the roots of unity and
//! inverting the DFT gives every `P(N)` at once.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;

use crate::error::{GbsError, Result};
use crate::gaussian::GaussianState;
use crate::samplers::Ensemble;

/// Smallest number of DFT nodes; aliasing from `P(N + K)` sits below it.
const MIN_NODES: usize = 1024;

fn nodes(n_max: usize) -> usize {
    (4 * (n_max + 1)).next_power_of_two().max(MIN_NODES)
}

fn invert(g: impl Fn(C64) -> C64, n_max: usize) -> Result<Vec<f64>> {
    let k = nodes(n_max);
    let values: Vec<C64> = (0..k).map(|j| g(C64::from_polar(1.0, 2.0 * PI * j as f64 / k as f64))).collect();
    (0..=n_max)
        .map(|n| {
            let s: C64 = values
                .iter()
                .enumerate()
                .map(|(j, v)| v * C64::from_polar(1.0, -2.0 * PI * ((j * n) % k) as f64 / k as f64))
                .sum::<C64>()
                / k as f64;
            if s.re < -1e-12 || s.im.abs() > 1e-10 {
                return Err(GbsError::Numerical(format!("photon-number distribution P({n}) = {s} is not a probability")));
            }
            Ok(s.re.max(0.0))
        })
        .collect()
}

/// `P(N)` for `N = 0..=n_max` of a Gaussian state.
pub fn photon_number_distribution(state: &GaussianState, n_max: usize) -> Result<Vec<f64>> {
    let d = state.cov().nrows();
    let m = state.modes();
    let eig = SymmetricEigen::new(state.cov() - DMatrix::<f64>::identity(d, d));
    let zeta = eig.eigenvectors.transpose() * state.mean();
    let lam = eig.eigenvalues;
    invert(
        |z| {
            let t = C64::new(1.0, 0.0) - z;
            let mut log_g = C64::new(m as f64 * std::f64::consts::LN_2, 0.0);
            for k in 0..d {
                let f = t * lam[k] + 2.0;
                log_g -= 0.5 * f.ln() + 0.5 * t * zeta[k] * zeta[k] / f;
            }
            log_g.exp()
        },
        n_max,
    )
}

/// `Q(N)` for `N = 0..=n_max` of the IPS mixture: singles with total rate
/// `|R'|²/4`, `R' ~ N(R, W)`, plus independent pairs.
pub fn ips_photon_number_distribution(ensemble: &Ensemble, n_max: usize) -> Result<Vec<f64>> {
    let pair_rate = 0.5 * ensemble.family().b().iter().map(|z| z.norm_sqr()).sum::<f64>();
    let eig = SymmetricEigen::new(ensemble.decomposition().w.clone());
    let xi = eig.eigenvectors.transpose() * ensemble.mean();
    let w = eig.eigenvalues;
    invert(
        |z| {
            let a = (z - 1.0) * 0.5;
            let mut log_g = pair_rate * (z * z - 1.0);
            for k in 0..w.len() {
                let f = C64::new(1.0, 0.0) - a * w[k].max(0.0);
                log_g += -0.5 * f.ln() + 0.5 * a * xi[k] * xi[k] / f;
            }
            log_g.exp()
        },
        n_max,
    )
}
