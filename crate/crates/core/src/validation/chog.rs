//! Running Bayesian comparison of two sample streams against the ideal
//! distribution: `r = (1 + Π P(adv_j) / P(trial_j))⁻¹`, accumulated in log
//! space.

use std::collections::HashMap;
use std::fmt::Debug;
use std::hash::Hash;

use crate::clicks::click_probability_exact;
use crate::error::{invalid, GbsError, Result};
use crate::exec::Exec;
use crate::gaussian::GaussianState;

/// `1 / (1 + e^{-x})`, evaluated from the side that never overflows so that
/// `logistic(-x)` and `1 - logistic(x)` agree to the last bit or one ulp.
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChogTrace {
    /// `ln P(adv_j) - ln P(trial_j)`.
    pub log_ratios: Vec<f64>,
    /// Ratio after each pair.
    pub running: Vec<f64>,
}

impl ChogTrace {
    pub fn from_log_ratios(log_ratios: Vec<f64>) -> Self {
        let running = cumulative(&log_ratios).into_iter().map(|s| logistic(-s)).collect();
        Self { log_ratios, running }
    }

    /// `ln P(trial) - ln P(adv)` summed over the first `j + 1` pairs.
    pub fn log_odds(&self) -> Vec<f64> {
        cumulative(&self.log_ratios).into_iter().map(|s| -s).collect()
    }

    pub fn last(&self) -> Option<f64> {
        self.running.last().copied()
    }

    /// Largest deviation between the stored trace and a recomputation.
    pub fn consistency_error(&self) -> f64 {
        let again = Self::from_log_ratios(self.log_ratios.clone());
        self.running.iter().zip(&again.running).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

fn cumulative(v: &[f64]) -> Vec<f64> {
    v.iter()
        .scan(0.0, |s, &x| {
            *s += x;
            Some(*s)
        })
        .collect()
}

/// Trace for two equally long streams under an ideal log-probability.
pub fn chog_ratio<S: Debug>(
    trial: &[S],
    adversary: &[S],
    mut log_ideal: impl FnMut(&S) -> Result<f64>,
) -> Result<ChogTrace> {
    if trial.len() != adversary.len() {
        return invalid(format!("streams differ in length ({} vs {})", trial.len(), adversary.len()));
    }
    let mut checked = |s: &S| -> Result<f64> {
        let lp = log_ideal(s)?;
        if lp == f64::NEG_INFINITY || lp.is_nan() {
            return Err(GbsError::Numerical(format!("ideal probability of sample {s:?} is zero")));
        }
        Ok(lp)
    };
    let mut ratios = Vec::with_capacity(trial.len());
    for (t, a) in trial.iter().zip(adversary) {
        ratios.push(checked(a)? - checked(t)?);
    }
    Ok(ChogTrace::from_log_ratios(ratios))
}

/// Trace for click streams of one fixed click number, with ideal
/// probabilities from the exact click formula (cached per pattern).
pub fn chog_clicks(trial: &[Vec<bool>], adversary: &[Vec<bool>], ideal: &GaussianState, exec: &Exec) -> Result<ChogTrace> {
    let count = |c: &Vec<bool>| c.iter().filter(|&&v| v).count();
    if let Some(first) = trial.first().or(adversary.first()) {
        let k = count(first);
        if trial.iter().chain(adversary).any(|c| count(c) != k) {
            return invalid("CHOG streams must share one click number");
        }
    }
    let mut cache: HashMap<Vec<bool>, f64> = HashMap::new();
    chog_ratio(trial, adversary, |c| cached(&mut cache, c, |c| Ok(click_probability_exact(ideal, c, exec)?.ln())))
}

fn cached<K: Clone + Hash + Eq>(cache: &mut HashMap<K, f64>, key: &K, f: impl Fn(&K) -> Result<f64>) -> Result<f64> {
    if let Some(v) = cache.get(key) {
        return Ok(*v);
    }
    let v = f(key)?;
    cache.insert(key.clone(), v);
    Ok(v)
}
