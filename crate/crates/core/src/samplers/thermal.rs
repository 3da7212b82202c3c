use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{GbsError, Result};
use crate::gaussian::{williamson_decompose, GaussianState, WilliamsonDecomposition};

/// Exact sampler for states whose pure part is vacuum: every pure state of
/// the ensemble is coherent, so counts are independent Poisson draws.
#[derive(Clone, Debug)]
pub struct ThermalSampler {
    state: GaussianState,
    dec: WilliamsonDecomposition,
}

impl ThermalSampler {
    pub fn new(state: &GaussianState) -> Result<Self> {
        let dec = williamson_decompose(state)?;
        let d = dec.t.nrows();
        let dev = (&dec.t - DMatrix::<f64>::identity(d, d)).amax();
        if dev > 1e-8 {
            return Err(GbsError::InvalidInput(format!("state carries squeezing (pure part deviates from vacuum by {dev:e})")));
        }
        Ok(Self { state: state.clone(), dec })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        let r = self.dec.sample_pure_displacement(self.state.mean(), rng);
        let m = self.state.modes();
        (0..m)
            .map(|j| {
                let mu = (r[j] * r[j] + r[m + j] * r[m + j]) / 4.0;
                if mu > 0.0 {
                    Poisson::new(mu).expect("positive mean").sample(rng) as usize
                } else {
                    0
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::tmsv;
    use crate::rng;

    #[test]
    fn rejects_squeezed_states() {
        assert!(ThermalSampler::new(&tmsv(2, 0, 1, 0.3)).is_err());
    }

    #[test]
    fn vacuum_only_gives_vacuum() {
        let s = ThermalSampler::new(&GaussianState::thermal(&[0.0, 0.0]).unwrap()).unwrap();
        let mut r = rng::stream(2, "thermal", 0);
        assert!((0..200).all(|_| s.sample(&mut r) == vec![0, 0]));
    }
}
