//! Chain-rule and Metropolis independence samplers plus the efficiently
//! sampleable IPS and thermal distributions.

mod chain;
mod ips;
mod mis;
mod thermal;

pub use chain::{ChainRuleSampler, SUB_DETECTOR_CUTOFF};
pub use ips::IpsModel;
pub use mis::{MisPnrd, MisStep, MisThreshold, POST_SELECT_CAP};
pub use thermal::ThermalSampler;

use nalgebra::DVector;
use rand::Rng;

use crate::error::{GbsError, Result};
use crate::gaussian::{williamson_decompose, GaussianState, PureFamily, WilliamsonDecomposition};

/// A mixed state written as an ensemble of pure states with covariance `T`
/// and means drawn from `N(R, W)`.
#[derive(Clone, Debug)]
pub struct Ensemble {
    mean: DVector<f64>,
    dec: WilliamsonDecomposition,
    family: PureFamily,
}

impl Ensemble {
    pub fn new(state: &GaussianState) -> Result<Self> {
        let dec = williamson_decompose(state)?;
        let family = PureFamily::new(dec.t.clone())?;
        Ok(Self { mean: state.mean().clone(), dec, family })
    }

    pub fn modes(&self) -> usize {
        self.family.modes()
    }

    /// Mean of the mixed state.
    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn family(&self) -> &PureFamily {
        &self.family
    }

    pub fn decomposition(&self) -> &WilliamsonDecomposition {
        &self.dec
    }

    /// Mean `R'` of one pure member.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        self.dec.sample_pure_displacement(&self.mean, rng)
    }

    /// IPS model of the pure member with mean `r`.
    pub fn ips(&self, r: &DVector<f64>) -> IpsModel {
        IpsModel::new(self.family.b(), &self.family.alpha(r)).expect("consistent sizes")
    }

    /// One IPS sample of the mixed state.
    pub fn ips_sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        let r = self.draw(rng);
        self.ips(&r).sample(rng)
    }
}

/// Index drawn with probability proportional to `weights`.
pub(crate) fn categorical<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Result<usize> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(GbsError::Numerical(format!(
            "conditional distribution cannot be normalised (total weight {total:e}); the cutoff may be too small"
        )));
    }
    let mut u = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if u < w {
            return Ok(i);
        }
        u -= w;
    }
    Ok(weights.iter().rposition(|&w| w > 0.0).unwrap_or(0))
}
