use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand_distr::{Distribution, StandardNormal};

use super::state::{check_unitary, tmsv, GaussianState};
use crate::error::{invalid, GbsError, Result};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Detector {
    Pnrd,
    Threshold,
}

impl FromStr for Detector {
    type Err = GbsError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pnrd" => Ok(Self::Pnrd),
            "threshold" => Ok(Self::Threshold),
            other => invalid(format!("unknown detector '{other}'")),
        }
    }
}

impl fmt::Display for Detector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Pnrd => "pnrd",
            Self::Threshold => "threshold",
        })
    }
}

/// Where the interferometer comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum UnitarySpec {
    Explicit(DMatrix<C64>),
    Haar { seed: u64 },
}

/// Everything needed to build and sample one experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub modes: usize,
    /// Squeezing parameter of each two-mode source.
    pub squeezing: Vec<f64>,
    /// Overall transmission applied after the interferometer.
    pub transmission: f64,
    pub unitary: UnitarySpec,
    pub detector: Detector,
    pub n_cut: usize,
    pub sub_detectors: usize,
    pub global_cutoff: usize,
    pub rng_seed: u64,
}

impl ExperimentConfig {
    /// `M/4` sources of squeezing `r`, Haar interferometer from `seed`.
    pub fn benchmark(modes: usize, r: f64, transmission: f64, seed: u64) -> Self {
        Self {
            modes,
            squeezing: vec![r; modes / 4],
            transmission,
            unitary: UnitarySpec::Haar { seed },
            detector: Detector::Pnrd,
            n_cut: 12,
            sub_detectors: 1,
            global_cutoff: 4 * modes,
            rng_seed: seed,
        }
    }

    pub fn sources(&self) -> usize {
        self.squeezing.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.modes == 0 {
            return invalid("modes must be positive");
        }
        if 2 * self.sources() > self.modes {
            return invalid(format!("{} sources need more than {} modes", self.sources(), self.modes));
        }
        if !(self.transmission > 0.0 && self.transmission <= 1.0) {
            return invalid("transmission must lie in (0, 1]");
        }
        if self.squeezing.iter().any(|r| !r.is_finite()) {
            return invalid("squeezing must be finite");
        }
        if self.n_cut < 1 {
            return invalid("n_cut must be at least 1");
        }
        if self.sub_detectors < 1 {
            return invalid("sub_detectors must be at least 1");
        }
        if let UnitarySpec::Explicit(u) = &self.unitary {
            if u.nrows() != self.modes || u.ncols() != self.modes {
                return invalid("unitary size does not match mode count");
            }
            check_unitary(u, 1e-10)?;
        }
        Ok(())
    }

    pub fn unitary(&self) -> DMatrix<C64> {
        match &self.unitary {
            UnitarySpec::Explicit(u) => u.clone(),
            UnitarySpec::Haar { seed } => haar_random_unitary(self.modes, *seed),
        }
    }
}

/// Haar-distributed unitary: QR of a complex Gaussian matrix with the phases
/// of `diag(R)` moved into `Q`.
pub fn haar_random_unitary(dim: usize, seed: u64) -> DMatrix<C64> {
    let mut rng = rng::stream(seed, "haar", dim as u64);
    let z = DMatrix::from_fn(dim, dim, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        C64::new(re, im)
    });
    let qr = z.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Sources on mode pairs `(2k, 2k+1)`, then the interferometer, then loss.
pub fn build_experiment_state(cfg: &ExperimentConfig) -> Result<GaussianState> {
    cfg.validate()?;
    let m = cfg.modes;
    let mut state = GaussianState::vacuum(m);
    for (k, &r) in cfg.squeezing.iter().enumerate() {
        let src = tmsv(m, 2 * k, 2 * k + 1, r);
        state = merge_pair(&state, &src, 2 * k, 2 * k + 1);
    }
    state
        .apply_unitary(&cfg.unitary())?
        .apply_transmission(cfg.transmission)
}

/// The same experiment with each source replaced by two thermal modes of
/// equal mean photon number `sinh² r`.
pub fn thermal_adversary_state(cfg: &ExperimentConfig) -> Result<GaussianState> {
    cfg.validate()?;
    let mut nbar = vec![0.0; cfg.modes];
    for (k, &r) in cfg.squeezing.iter().enumerate() {
        nbar[2 * k] = r.sinh().powi(2);
        nbar[2 * k + 1] = r.sinh().powi(2);
    }
    GaussianState::thermal(&nbar)?
        .apply_unitary(&cfg.unitary())?
        .apply_transmission(cfg.transmission)
}

// Copy the `(i, j)` block of `src` into `dst`; both are product states
// across that pair.
fn merge_pair(dst: &GaussianState, src: &GaussianState, i: usize, j: usize) -> GaussianState {
    let m = dst.modes();
    let mut cov = dst.cov().clone();
    let idx = [i, j, m + i, m + j];
    for &a in &idx {
        for &b in &idx {
            cov[(a, b)] = src.cov()[(a, b)];
        }
    }
    GaussianState::new_unchecked(dst.mean().clone(), cov).expect("shape preserved")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn haar_is_unitary_and_seeded() {
        for dim in [1, 4, 8] {
            let u = haar_random_unitary(dim, 3);
            check_unitary(&u, 1e-10).unwrap();
            assert_eq!(u, haar_random_unitary(dim, 3));
        }
        assert!((haar_random_unitary(1, 5)[(0, 0)].norm() - 1.0).abs() < 1e-14);
        assert_ne!(haar_random_unitary(4, 1), haar_random_unitary(4, 2));
    }

    #[test]
    fn zero_squeezing_is_vacuum() {
        let cfg = ExperimentConfig {
            squeezing: vec![0.0],
            unitary: UnitarySpec::Explicit(DMatrix::identity(2, 2)),
            transmission: 1.0,
            ..ExperimentConfig::benchmark(2, 0.0, 1.0, 0)
        };
        let s = build_experiment_state(&cfg).unwrap();
        assert!((s.cov() - DMatrix::<f64>::identity(4, 4)).amax() < 1e-15);
        assert!(s.mean().amax() == 0.0);
    }

    #[test]
    fn config_rejects_bad_values() {
        let mut cfg = ExperimentConfig::benchmark(4, 1.0, 0.5, 0);
        cfg.squeezing = vec![1.0; 3];
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::benchmark(4, 1.0, 0.5, 0);
        cfg.unitary = UnitarySpec::Explicit(DMatrix::from_element(4, 4, C64::new(1.0, 0.0)));
        assert!(cfg.validate().is_err());
        assert!(ExperimentConfig::benchmark(4, 1.0, 0.0, 0).validate().is_err());
        assert!("threshold".parse::<Detector>().is_ok());
        assert!("click".parse::<Detector>().is_err());
    }
}
