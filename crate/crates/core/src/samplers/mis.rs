//! Metropolis independence sampling with IPS proposals. The pure-state mean
//! `R'` is drawn alongside each proposal and shared by target and proposal,
//! so it cancels from the acceptance ratio.

use nalgebra::DVector;
use rand::Rng;

use super::Ensemble;
use crate::clicks::{collapse, sample_position_given_count, ClickSample};
use crate::error::{invalid, GbsError, Result};
use crate::exec::Exec;
use crate::gaussian::{williamson_decompose, GaussianState, PureFamily};
use crate::lhaf::Kernel;

/// Proposal draws allowed while waiting for the post-selected total.
pub const POST_SELECT_CAP: u64 = 10_000_000;

/// One link of a chain. `sample` is the current state after the step.
#[derive(Clone, Debug, PartialEq)]
pub struct MisStep<T> {
    pub sample: T,
    pub accepted: bool,
    pub log_target: f64,
    pub log_proposal: f64,
}

struct Current<T> {
    sample: T,
    lt: f64,
    lq: f64,
}

fn advance<T: Clone, R: Rng + ?Sized>(
    cur: &mut Option<Current<T>>,
    sample: T,
    lt: f64,
    lq: f64,
    rng: &mut R,
) -> Result<MisStep<T>> {
    if !(lq > f64::NEG_INFINITY) || lq.is_nan() {
        return Err(GbsError::Numerical("proposal assigned zero probability to its own draw".into()));
    }
    let accept = match cur {
        None => true,
        Some(c) if c.lt == f64::NEG_INFINITY => true,
        Some(c) => {
            let u: f64 = rng.random();
            u.ln() < (lt - lq) - (c.lt - c.lq)
        }
    };
    if accept {
        *cur = Some(Current { sample, lt, lq });
    }
    let c = cur.as_ref().expect("chain initialised");
    Ok(MisStep { sample: c.sample.clone(), accepted: accept, log_target: c.lt, log_proposal: c.lq })
}

fn post_select<R: Rng + ?Sized>(
    target: Option<usize>,
    rng: &mut R,
    mut draw: impl FnMut(&mut R) -> (DVector<f64>, Vec<usize>),
    count: impl Fn(&[usize]) -> usize,
) -> Result<(DVector<f64>, Vec<usize>)> {
    for _ in 0..POST_SELECT_CAP {
        let (r, n) = draw(rng);
        if target.is_none_or(|t| count(&n) == t) {
            return Ok((r, n));
        }
    }
    Err(GbsError::Numerical(format!("post-selection failed after {POST_SELECT_CAP} proposals")))
}

/// Photon-number chain.
#[derive(Clone, Debug)]
pub struct MisPnrd {
    state: GaussianState,
    ensemble: Ensemble,
    kernel: Kernel,
    exec: Exec,
}

impl MisPnrd {
    pub fn new(state: &GaussianState, kernel: Kernel, exec: Exec) -> Result<Self> {
        Ok(Self { state: state.clone(), ensemble: Ensemble::new(state)?, kernel, exec })
    }

    pub fn state(&self) -> &GaussianState {
        &self.state
    }

    pub fn ensemble(&self) -> &Ensemble {
        &self.ensemble
    }

    /// Run `length` steps, optionally conditioning every proposal on a total
    /// photon number.
    pub fn run<R: Rng + ?Sized>(&self, length: usize, post_select_total: Option<usize>, rng: &mut R) -> Result<Vec<MisStep<Vec<usize>>>> {
        let fam = self.ensemble.family();
        let mut cur = None;
        let mut out = Vec::with_capacity(length);
        for _ in 0..length {
            let (r, n) = post_select(
                post_select_total,
                rng,
                |g| {
                    let r = self.ensemble.draw(g);
                    let n = self.ensemble.ips(&r).sample(g);
                    (r, n)
                },
                |n| n.iter().sum(),
            )?;
            let lq = self.ensemble.ips(&r).log_probability(&n, self.kernel, &self.exec)?;
            let lt = fam.log_probability(&r, &n, self.kernel, &self.exec)?;
            out.push(advance(&mut cur, n, lt, lq, rng)?);
        }
        Ok(out)
    }
}

/// Click chain; proposals carry click positions so that the target is a
/// pure-state probability of single photons.
#[derive(Clone, Debug)]
pub struct MisThreshold {
    state: GaussianState,
    ensemble: Ensemble,
    kernel: Kernel,
    exec: Exec,
}

impl MisThreshold {
    pub fn new(state: &GaussianState, kernel: Kernel, exec: Exec) -> Result<Self> {
        Ok(Self { state: state.clone(), ensemble: Ensemble::new(state)?, kernel, exec })
    }

    pub fn state(&self) -> &GaussianState {
        &self.state
    }

    pub fn ensemble(&self) -> &Ensemble {
        &self.ensemble
    }

    /// Target log density of clicks at the sample positions given the pure
    /// member with mean `r`, up to the position Jacobian which the proposal
    /// shares.
    fn log_target<R: Rng + ?Sized>(&self, r: &DVector<f64>, sample: &ClickSample, rng: &mut R) -> Result<f64> {
        let pure = self.ensemble.decomposition().pure_state(r.clone())?;
        let lossy = pure.apply_loss(&sample.positions)?;
        let dec = williamson_decompose(&lossy)?;
        let fam = PureFamily::new(dec.t.clone())?;
        let r2 = dec.sample_pure_displacement(lossy.mean(), rng);
        fam.log_probability(&r2, &sample.pattern(), self.kernel, &self.exec)
    }

    /// Run `length` steps, optionally conditioning on the click count.
    pub fn run<R: Rng + ?Sized>(&self, length: usize, post_select_clicks: Option<usize>, rng: &mut R) -> Result<Vec<MisStep<ClickSample>>> {
        let m = self.ensemble.modes();
        if post_select_clicks.is_some_and(|k| k > m) {
            return invalid(format!("cannot post-select on more clicks than the {m} modes"));
        }
        let mut cur = None;
        let mut out = Vec::with_capacity(length);
        for _ in 0..length {
            let (r, n) = post_select(
                post_select_clicks,
                rng,
                |g| {
                    let r = self.ensemble.draw(g);
                    let n = self.ensemble.ips(&r).sample(g);
                    (r, n)
                },
                |n| n.iter().filter(|&&v| v > 0).count(),
            )?;
            let positions: Vec<f64> = n
                .iter()
                .map(|&k| if k > 0 { sample_position_given_count(k, rng) } else { Ok(0.0) })
                .collect::<Result<_>>()?;
            // A draw of exactly 1.0 has measure zero but would break the density.
            let positions: Vec<f64> = positions.into_iter().map(|x| x.min(1.0 - f64::EPSILON)).collect();
            let sample = ClickSample::new(collapse(&n), positions)?;
            let lq = self.ensemble.ips(&r).lossy_log_probability(&sample.pattern(), &sample.positions, self.kernel, &self.exec)?;
            let lt = self.log_target(&r, &sample, rng)?;
            out.push(advance(&mut cur, sample, lt, lq, rng)?);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::tmsv;
    use crate::rng;

    #[test]
    fn coherent_state_accepts_everything() {
        // With no squeezing the proposal is the target.
        let s = GaussianState::coherent(&[num_complex::Complex64::new(0.6, -0.2), num_complex::Complex64::new(0.1, 0.9)]);
        let chain = MisPnrd::new(&s, Kernel::Fds, Exec::sequential()).unwrap();
        let mut r = rng::stream(5, "mis", 0);
        let steps = chain.run(200, None, &mut r).unwrap();
        assert!(steps.iter().all(|s| s.accepted));
    }

    #[test]
    fn post_selection_fixes_the_total() {
        let s = tmsv(2, 0, 1, 0.5).apply_transmission(0.6).unwrap();
        let chain = MisPnrd::new(&s, Kernel::Fds, Exec::sequential()).unwrap();
        let mut r = rng::stream(5, "mis", 1);
        let steps = chain.run(50, Some(2), &mut r).unwrap();
        assert!(steps.iter().all(|s| s.sample.iter().sum::<usize>() == 2));
    }

    #[test]
    fn threshold_chain_runs() {
        let s = tmsv(2, 0, 1, 0.5).apply_transmission(0.6).unwrap();
        let chain = MisThreshold::new(&s, Kernel::Fds, Exec::sequential()).unwrap();
        let mut r = rng::stream(5, "mis", 2);
        let steps = chain.run(50, Some(1), &mut r).unwrap();
        assert!(steps.iter().all(|s| s.sample.count() == 1));
    }
}
