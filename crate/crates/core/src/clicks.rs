//! Threshold-detector probabilities.

use rand::Rng;

use crate::error::{invalid, Result};
use crate::exec::{chunk_ranges, Exec};
use crate::gaussian::{log_vacuum_prob, ComplexStateRep, GaussianState};
use crate::lhaf::Kernel;

/// Largest click count accepted by [`click_probability_exact`].
pub const MAX_EXACT_CLICKS: usize = 26;

/// A click pattern with the relative position of each click.
#[derive(Clone, Debug, PartialEq)]
pub struct ClickSample {
    pub clicks: Vec<bool>,
    /// Loss applied before the click, in `[0, 1)`; zero where no click.
    pub positions: Vec<f64>,
}

impl ClickSample {
    pub fn new(clicks: Vec<bool>, positions: Vec<f64>) -> Result<Self> {
        if clicks.len() != positions.len() {
            return invalid("clicks and positions differ in length");
        }
        for (&c, &x) in clicks.iter().zip(&positions) {
            if !(0.0..1.0).contains(&x) || (!c && x != 0.0) {
                return invalid(format!("invalid click position {x}"));
            }
        }
        Ok(Self { clicks, positions })
    }

    /// Clicks without position information.
    pub fn bare(clicks: Vec<bool>) -> Self {
        let positions = vec![0.0; clicks.len()];
        Self { clicks, positions }
    }

    pub fn count(&self) -> usize {
        self.clicks.iter().filter(|&&c| c).count()
    }

    pub fn pattern(&self) -> Vec<usize> {
        self.clicks.iter().map(|&c| usize::from(c)).collect()
    }
}

/// Collapse a photon-number pattern to clicks.
pub fn collapse(pattern: &[usize]) -> Vec<bool> {
    pattern.iter().map(|&n| n > 0).collect()
}

/// Exact click probability by inclusion–exclusion over vacuum probabilities
/// of marginal states:
/// `P(c) = Σ_{Z ⊆ clicked} (-1)^{|Z|} P_vac(unclicked ∪ Z)`.
pub fn click_probability_exact(state: &GaussianState, clicks: &[bool], exec: &Exec) -> Result<f64> {
    let m = state.modes();
    if clicks.len() != m {
        return invalid("click pattern length does not match mode count");
    }
    let on: Vec<usize> = (0..m).filter(|&j| clicks[j]).collect();
    let off: Vec<usize> = (0..m).filter(|&j| !clicks[j]).collect();
    let nc = on.len();
    if nc > MAX_EXACT_CLICKS {
        return invalid(format!("{nc} clicks exceed the exact-probability guard of {MAX_EXACT_CLICKS}"));
    }
    let total = 1u64 << nc;
    let chunks = chunk_ranges(total, 256);
    let partial = exec.map(chunks.len(), |c| -> Result<f64> {
        let (lo, hi) = chunks[c];
        let mut acc = 0.0;
        let mut modes = Vec::with_capacity(m);
        for z in lo..hi {
            modes.clear();
            modes.extend_from_slice(&off);
            modes.extend((0..nc).filter(|&k| z >> k & 1 == 1).map(|k| on[k]));
            let pv = if modes.is_empty() { 1.0 } else { log_vacuum_prob(&state.marginal(&modes))?.exp() };
            acc += if z.count_ones() % 2 == 0 { pv } else { -pv };
        }
        Ok(acc)
    });
    let mut sum = 0.0;
    for p in partial {
        sum += p?;
    }
    if sum < -1e-10 {
        return Err(crate::GbsError::Numerical(format!("negative click probability {sum:e}")));
    }
    Ok(sum.clamp(0.0, 1.0))
}

/// Draw the click position given `n` photons: density `n x^{n-1}` on `[0, 1]`.
pub fn sample_position_given_count<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<f64> {
    if n == 0 {
        return invalid("click position needs at least one photon");
    }
    let u: f64 = rng.random();
    Ok(u.powf(1.0 / n as f64))
}

/// Joint density of clicks at the recorded positions given the pure state
/// obtained after applying the losses `x` and re-purifying: the probability of
/// exactly one photon in each clicked mode, divided by `Π (1 - x_m)`.
pub fn click_position_probability(
    lossy_pure: &ComplexStateRep,
    sample: &ClickSample,
    kernel: Kernel,
    exec: &Exec,
) -> Result<f64> {
    if sample.positions.iter().any(|&x| x >= 1.0) {
        return invalid("click position 1 has zero transmission");
    }
    let p = lossy_pure.pure_probability(&sample.pattern(), kernel, exec)?;
    let jac: f64 = sample.clicks.iter().zip(&sample.positions).filter(|(&c, _)| c).map(|(_, &x)| 1.0 - x).product();
    Ok(p / jac)
}
