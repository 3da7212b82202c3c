//! Chain diagnostics for the independence samplers: repeat probability as a
//! function of thinning, and two burn-in estimates.

use crate::error::{invalid, GbsError, Result};
use crate::exec::Exec;
use crate::rng;
use crate::samplers::MisPnrd;

use super::chog::logistic;
use super::photons::{ips_photon_number_distribution, photon_number_distribution};

/// Shortest raw chain accepted by the thinning analysis.
pub const MIN_THINNING_CHAIN: usize = 10_000;
/// Burn-in values averaged together by the likelihood test.
pub const LIKELIHOOD_WINDOW: usize = 10;
/// Trailing burn-in values defining the likelihood asymptote.
pub const LIKELIHOOD_TAIL: usize = 20;
/// Likelihood a sample set must reach.
pub const LIKELIHOOD_TARGET: f64 = 0.95;
/// Smoothing window of the acceptance-rate curve.
pub const ACCEPTANCE_WINDOW: usize = 10;
/// Trailing points defining the acceptance-rate floor.
pub const ACCEPTANCE_TAIL: usize = 50;
/// Allowed excess over the floor.
pub const ACCEPTANCE_EXCESS: f64 = 0.001;

/// Fraction of consecutive kept samples (one in `thin`) that are the same
/// chain state, i.e. with no acceptance in between.
pub fn repeat_probability(accepted: &[bool], thin: usize) -> Result<f64> {
    if thin == 0 {
        return invalid("thinning interval must be positive");
    }
    let pairs = accepted.len().saturating_sub(1) / thin;
    if pairs == 0 {
        return invalid("chain too short for this thinning interval");
    }
    let repeats = (0..pairs).filter(|&k| !accepted[k * thin + 1..=(k + 1) * thin].iter().any(|&a| a)).count();
    Ok(repeats as f64 / pairs as f64)
}

/// Repeat probability averaged over chains, for each thinning interval.
pub fn repeat_curve(chains: &[Vec<bool>], grid: &[usize]) -> Result<Vec<(usize, f64)>> {
    if chains.is_empty() || chains.iter().any(|c| c.len() < MIN_THINNING_CHAIN) {
        return invalid(format!("thinning analysis needs chains of at least {MIN_THINNING_CHAIN} steps"));
    }
    grid.iter()
        .map(|&t| {
            let mean = chains.iter().map(|c| repeat_probability(c, t)).sum::<Result<f64>>()? / chains.len() as f64;
            Ok((t, mean))
        })
        .collect()
}

/// Smallest interval on the curve whose repeat probability is at most `level`.
pub fn thinning_for(curve: &[(usize, f64)], level: f64) -> Option<usize> {
    curve.iter().find(|(_, p)| *p <= level).map(|(t, _)| *t)
}

#[derive(Clone, Debug, PartialEq)]
pub enum BurnIn {
    /// The curve settles; `burn` is the first burn-in within tolerance.
    Converged { burn: usize },
    /// Target and proposal cannot be told apart at any burn-in.
    Indistinguishable,
    /// The curve had not settled by the largest burn-in tested.
    Unconverged,
}

impl BurnIn {
    /// Estimate, with indistinguishable chains counting as zero burn-in.
    pub fn estimate(&self) -> Option<usize> {
        match self {
            Self::Converged { burn } => Some(*burn),
            Self::Indistinguishable => Some(0),
            Self::Unconverged => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LikelihoodBurnin {
    /// `likelihood[b][s-1]`: mean posterior of the target after `s` samples
    /// taken at burn-in `b`.
    pub likelihood: Vec<Vec<f64>>,
    /// Window-averaged curves, one per burn-in `0..=max_burn`.
    pub smoothed: Vec<Vec<f64>>,
    /// Samples needed to reach the target likelihood, per smoothed burn-in.
    pub sample_size: Vec<Option<usize>>,
    pub result: BurnIn,
}

/// Likelihood-ratio burn-in test for photon-number chains post-selected on
/// `total` photons. Every sample comes from a fresh chain; the sample at
/// burn-in `b` is that chain's state after `b` steps. Curves are averaged
/// over `fixtures`.
pub fn likelihood_burnin(
    fixtures: &[MisPnrd],
    total: usize,
    max_burn: usize,
    sample_size: usize,
    seed: u64,
    exec: &Exec,
) -> Result<LikelihoodBurnin> {
    if fixtures.is_empty() || sample_size == 0 || max_burn < LIKELIHOOD_TAIL {
        return invalid(format!("likelihood burn-in needs fixtures, samples and max_burn ≥ {LIKELIHOOD_TAIL}"));
    }
    let len = max_burn + LIKELIHOOD_WINDOW;
    let mut likelihood = vec![vec![0.0; sample_size]; len];
    for (f, chain) in fixtures.iter().enumerate() {
        let pn = photon_number_distribution(chain.state(), total)?[total];
        let qn = ips_photon_number_distribution(chain.ensemble(), total)?[total];
        if !(pn > 0.0 && qn > 0.0) {
            return Err(GbsError::Numerical(format!("{total} photons have zero probability")));
        }
        let offset = qn.ln() - pn.ln();
        // ratios[s][b]: per-sample log likelihood ratio.
        let ratios = exec.map(sample_size, |s| -> Result<Vec<f64>> {
            let mut g = rng::stream(seed, "burnin-likelihood", (f * sample_size + s) as u64);
            let steps = chain.run(len, Some(total), &mut g)?;
            Ok(steps.iter().map(|st| st.log_target - st.log_proposal + offset).collect())
        });
        let ratios: Vec<Vec<f64>> = ratios.into_iter().collect::<Result<_>>()?;
        for (b, row) in likelihood.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (s, cell) in row.iter_mut().enumerate() {
                acc += ratios[s][b];
                *cell += logistic(acc) / fixtures.len() as f64;
            }
        }
    }

    let smoothed: Vec<Vec<f64>> = (0..=max_burn)
        .map(|b| {
            (0..sample_size)
                .map(|s| likelihood[b..b + LIKELIHOOD_WINDOW].iter().map(|r| r[s]).sum::<f64>() / LIKELIHOOD_WINDOW as f64)
                .collect()
        })
        .collect();
    let needed: Vec<Option<usize>> =
        smoothed.iter().map(|row| row.iter().position(|&l| l >= LIKELIHOOD_TARGET).map(|s| s + 1)).collect();

    let tail = &needed[needed.len() - LIKELIHOOD_TAIL..];
    let result = if needed.iter().all(Option::is_none) {
        let spread = smoothed.iter().flatten().map(|l| (l - 0.5).abs()).fold(0.0, f64::max);
        if spread < 0.05 { BurnIn::Indistinguishable } else { BurnIn::Unconverged }
    } else if tail.iter().any(Option::is_none) {
        BurnIn::Unconverged
    } else {
        let floor = tail.iter().map(|s| s.unwrap() as f64).sum::<f64>() / LIKELIHOOD_TAIL as f64;
        let burn = needed.iter().position(|s| s.is_some_and(|s| s as f64 <= 1.05 * floor)).expect("tail reaches the floor");
        BurnIn::Converged { burn }
    };
    Ok(LikelihoodBurnin { likelihood, smoothed, sample_size: needed, result })
}

#[derive(Clone, Debug)]
pub struct AcceptanceBurnin {
    /// Fraction of chains accepting at steps `1..=max_burn`.
    pub rate: Vec<f64>,
    /// `rate` averaged over windows starting at each burn-in.
    pub smoothed: Vec<f64>,
    pub floor: f64,
    pub result: BurnIn,
}

/// Acceptance-rate burn-in test: run `num_chains` chains per fixture and
/// find where the smoothed acceptance rate comes within a small excess of
/// its final level.
pub fn acceptance_burnin(
    fixtures: &[MisPnrd],
    total: Option<usize>,
    max_burn: usize,
    num_chains: usize,
    seed: u64,
    exec: &Exec,
) -> Result<AcceptanceBurnin> {
    if fixtures.is_empty() || num_chains == 0 || max_burn < ACCEPTANCE_WINDOW + ACCEPTANCE_TAIL {
        return invalid(format!(
            "acceptance burn-in needs fixtures, chains and max_burn ≥ {}",
            ACCEPTANCE_WINDOW + ACCEPTANCE_TAIL
        ));
    }
    let mut accepted = vec![0usize; max_burn];
    for (f, chain) in fixtures.iter().enumerate() {
        let runs = exec.map(num_chains, |c| -> Result<Vec<bool>> {
            let mut g = rng::stream(seed, "burnin-acceptance", (f * num_chains + c) as u64);
            Ok(chain.run(max_burn + 1, total, &mut g)?.iter().skip(1).map(|s| s.accepted).collect())
        });
        for run in runs {
            for (n, a) in accepted.iter_mut().zip(run?) {
                *n += usize::from(a);
            }
        }
    }
    let runs = (fixtures.len() * num_chains) as f64;
    let rate: Vec<f64> = accepted.into_iter().map(|n| n as f64 / runs).collect();
    let smoothed: Vec<f64> = (0..=max_burn - ACCEPTANCE_WINDOW)
        .map(|b| rate[b..b + ACCEPTANCE_WINDOW].iter().sum::<f64>() / ACCEPTANCE_WINDOW as f64)
        .collect();
    let floor = smoothed[smoothed.len() - ACCEPTANCE_TAIL..].iter().sum::<f64>() / ACCEPTANCE_TAIL as f64;
    let burn = smoothed.iter().position(|&r| r <= floor + ACCEPTANCE_EXCESS).expect("the tail averages to the floor");
    let result = if burn >= smoothed.len() - ACCEPTANCE_TAIL { BurnIn::Unconverged } else { BurnIn::Converged { burn } };
    Ok(AcceptanceBurnin { rate, smoothed, floor, result })
}
