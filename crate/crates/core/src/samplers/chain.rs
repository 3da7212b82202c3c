//! Chain-rule sampling: unresolved modes are held in the coherent basis
//! (heterodyne outcomes `β`) while modes are resolved one at a time from
//! their conditional distribution, all counts of a mode coming from one
//! batched loop-hafnian call.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{categorical, Ensemble};
use crate::clicks::ClickSample;
use crate::error::{invalid, Result};
use crate::exec::Exec;
use crate::gaussian::{log_vacuum_prob, ExperimentConfig, GaussianState};
use crate::lhaf::{lhaf_batched, BatchedProblem};

/// Photon-number cutoff of a single threshold sub-detector.
pub const SUB_DETECTOR_CUTOFF: usize = 2;

#[derive(Clone, Debug)]
pub struct ChainRuleSampler {
    ensemble: Ensemble,
    photon_order: Vec<usize>,
    click_order: Vec<usize>,
    n_cut: usize,
    global_cutoff: usize,
    sub_detectors: usize,
    exec: Exec,
}

fn ascending(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    idx
}

impl ChainRuleSampler {
    pub fn new(state: &GaussianState, n_cut: usize, global_cutoff: usize, sub_detectors: usize, exec: Exec) -> Result<Self> {
        if n_cut < 1 || sub_detectors < 1 {
            return invalid("n_cut and sub_detectors must be at least 1");
        }
        let m = state.modes();
        let clicks: Vec<f64> = (0..m)
            .map(|j| log_vacuum_prob(&state.marginal(&[j])).map(|l| -l.exp_m1()))
            .collect::<Result<_>>()?;
        Ok(Self {
            ensemble: Ensemble::new(state)?,
            photon_order: ascending(&state.mean_photons()),
            click_order: ascending(&clicks),
            n_cut,
            global_cutoff,
            sub_detectors,
            exec,
        })
    }

    pub fn from_config(state: &GaussianState, cfg: &ExperimentConfig, exec: Exec) -> Result<Self> {
        Self::new(state, cfg.n_cut, cfg.global_cutoff, cfg.sub_detectors, exec)
    }

    pub fn ensemble(&self) -> &Ensemble {
        &self.ensemble
    }

    /// One photon-number sample, or `None` when the running total passed the
    /// global cutoff (the sample is discarded, leaving the distribution below
    /// the cutoff untouched).
    pub fn sample_pnrd<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Option<Vec<usize>>> {
        let fam = self.ensemble.family();
        let m = fam.modes();
        let r = self.ensemble.draw(rng);
        let alpha = fam.alpha(&r);
        let mut beta = fam.husimi_draw(&r, rng);
        let mut pattern = vec![0usize; m];
        let mut total = 0;
        for &j in &self.photon_order {
            beta[j] = C64::new(0.0, 0.0);
            let loops = fam.loops(&alpha, &beta);
            let problem = BatchedProblem { couplings: fam.b().clone(), fixed: pattern.clone(), batched: j, n_cut: self.n_cut };
            let res = lhaf_batched(&problem, &[loops], &self.exec)?;
            let mut fact = 1.0;
            let weights: Vec<f64> = res.values[0]
                .iter()
                .enumerate()
                .map(|(c, v)| {
                    if c > 0 {
                        fact *= c as f64;
                    }
                    v.norm_sqr() / fact
                })
                .collect();
            let c = categorical(&weights, rng)?;
            pattern[j] = c;
            total += c;
            if total > self.global_cutoff {
                return Ok(None);
            }
        }
        Ok(Some(pattern))
    }

    /// One click sample. Each mode fans out into `K` sub-detectors that are
    /// resolved in turn until the first click; the position is `k / K`.
    pub fn sample_threshold<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Option<ClickSample>> {
        let fam = self.ensemble.family();
        let m = fam.modes();
        let kk = self.sub_detectors;
        let sk = (kk as f64).sqrt();
        let r = self.ensemble.draw(rng);
        let alpha = fam.alpha(&r);
        let mode_beta = fam.husimi_draw(&r, rng);

        // Sub-mode outcomes: the mode outcome spread evenly plus vacuum
        // heterodyne noise on the orthogonal complement.
        let beta: Vec<Vec<C64>> = mode_beta
            .iter()
            .map(|&b| {
                let v: Vec<C64> = (0..kk)
                    .map(|_| {
                        let re: f64 = rng.sample(StandardNormal);
                        let im: f64 = rng.sample(StandardNormal);
                        C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
                    })
                    .collect();
                let mean = v.iter().sum::<C64>() / kk as f64;
                v.iter().map(|x| b / sk + x - mean).collect()
            })
            .collect();
        let mut unresolved: Vec<C64> = beta.iter().map(|row| row.iter().sum()).collect();

        let couplings: DMatrix<C64> = fam.b() / C64::new(kk as f64, 0.0);
        let scaled_alpha: Vec<C64> = alpha.iter().map(|a| a * sk).collect();
        let mut pattern = vec![0usize; m];
        let mut clicks = vec![false; m];
        let mut positions = vec![0.0; m];
        let mut count = 0;

        for &j in &self.click_order {
            // Candidate k sees sub-detectors 0..=k of mode j resolved.
            let mut loop_sets = Vec::with_capacity(kk);
            let mut rest: C64 = unresolved[j];
            for k in 0..kk {
                rest -= beta[j][k];
                let mut s = unresolved.clone();
                s[j] = rest;
                let d: Vec<C64> = scaled_alpha.iter().zip(&s).map(|(a, b)| a - b).collect();
                let u = &couplings * nalgebra::DVector::from_vec(d);
                loop_sets.push((0..m).map(|i| alpha[i].conj() / sk - u[i]).collect::<Vec<C64>>());
            }
            let problem = BatchedProblem {
                couplings: couplings.clone(),
                fixed: pattern.clone(),
                batched: j,
                n_cut: SUB_DETECTOR_CUTOFF,
            };
            let res = lhaf_batched(&problem, &loop_sets, &self.exec)?;
            let mut remaining = unresolved[j];
            unresolved[j] = C64::new(0.0, 0.0);
            for (k, vals) in res.values.iter().enumerate() {
                remaining -= beta[j][k];
                let w: Vec<f64> = vals.iter().enumerate().map(|(c, v)| v.norm_sqr() / if c == 2 { 2.0 } else { 1.0 }).collect();
                let c = categorical(&w, rng)?;
                if c > 0 {
                    pattern[j] = c;
                    clicks[j] = true;
                    positions[j] = k as f64 / kk as f64;
                    unresolved[j] = remaining;
                    count += 1;
                    break;
                }
            }
            if count > self.global_cutoff {
                return Ok(None);
            }
        }
        Ok(Some(ClickSample::new(clicks, positions)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::tmsv;
    use crate::rng;

    #[test]
    fn vacuum_state_gives_vacuum() {
        let s = ChainRuleSampler::new(&GaussianState::vacuum(3), 4, 20, 3, Exec::sequential()).unwrap();
        let mut r = rng::stream(0, "chain", 0);
        for _ in 0..20 {
            assert_eq!(s.sample_pnrd(&mut r).unwrap().unwrap(), vec![0, 0, 0]);
            assert_eq!(s.sample_threshold(&mut r).unwrap().unwrap().count(), 0);
        }
    }

    #[test]
    fn lossless_tmsv_counts_are_equal() {
        let s = ChainRuleSampler::new(&tmsv(2, 0, 1, 0.8), 12, 40, 1, Exec::sequential()).unwrap();
        let mut r = rng::stream(3, "chain", 0);
        for _ in 0..200 {
            let n = s.sample_pnrd(&mut r).unwrap().unwrap();
            assert_eq!(n[0], n[1]);
        }
    }

    #[test]
    fn global_cutoff_discards() {
        let s = ChainRuleSampler::new(&tmsv(2, 0, 1, 1.2), 12, 1, 1, Exec::sequential()).unwrap();
        let mut r = rng::stream(3, "chain", 1);
        let results: Vec<_> = (0..200).map(|_| s.sample_pnrd(&mut r).unwrap()).collect();
        assert!(results.iter().any(|x| x.is_none()));
        assert!(results.iter().flatten().all(|n| n.iter().sum::<usize>() <= 1));
    }
}
