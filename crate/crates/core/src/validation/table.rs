use std::collections::HashMap;
use std::hash::Hash;

use crate::clicks::click_probability_exact;
use crate::error::{invalid, GbsError, Result};
use crate::exec::Exec;
use crate::gaussian::{ComplexStateRep, Detector, GaussianState};
use crate::lhaf::Kernel;

/// Largest outcome space [`exact_distribution`] will enumerate.
pub const MAX_OUTCOMES: u128 = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TableKind {
    PnrdExact,
    ClickExact,
    Empirical,
}

/// A finite distribution over detection patterns. Click patterns are stored
/// as 0/1 counts.
#[derive(Clone, Debug, PartialEq)]
pub struct DistributionTable {
    outcomes: Vec<Vec<usize>>,
    probs: Vec<f64>,
    kind: TableKind,
}

impl DistributionTable {
    pub fn new(outcomes: Vec<Vec<usize>>, probs: Vec<f64>, kind: TableKind) -> Result<Self> {
        if outcomes.len() != probs.len() {
            return invalid("outcomes and probabilities differ in length");
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return invalid("probabilities must be finite and nonnegative");
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return invalid(format!("probabilities sum to {total}"));
        }
        let mut seen = std::collections::HashSet::with_capacity(outcomes.len());
        if !outcomes.iter().all(|o| seen.insert(o)) {
            return invalid("duplicate outcome");
        }
        Ok(Self { outcomes, probs, kind })
    }

    /// Normalise nonnegative weights over distinct outcomes.
    pub fn normalised(outcomes: Vec<Vec<usize>>, weights: Vec<f64>, kind: TableKind) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(GbsError::Numerical("constrained outcome set carries no probability".into()));
        }
        Self::new(outcomes, weights.into_iter().map(|w| w / total).collect(), kind)
    }

    /// Relative frequencies of the samples, in order of first appearance.
    pub fn empirical<'a>(samples: impl IntoIterator<Item = &'a [usize]>) -> Result<Self> {
        let mut index: HashMap<&[usize], usize> = HashMap::new();
        let mut outcomes = Vec::new();
        let mut counts: Vec<f64> = Vec::new();
        for s in samples {
            let i = *index.entry(s).or_insert_with(|| {
                outcomes.push(s.to_vec());
                counts.push(0.0);
                outcomes.len() - 1
            });
            counts[i] += 1.0;
        }
        if outcomes.is_empty() {
            return invalid("no samples");
        }
        Self::normalised(outcomes, counts, TableKind::Empirical)
    }

    pub fn kind(&self) -> TableKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn outcomes(&self) -> &[Vec<usize>] {
        &self.outcomes
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[usize], f64)> {
        self.outcomes.iter().map(Vec::as_slice).zip(self.probs.iter().copied())
    }

    /// Probability of `outcome`, zero if absent.
    pub fn prob(&self, outcome: &[usize]) -> f64 {
        self.iter().find(|(o, _)| *o == outcome).map_or(0.0, |(_, p)| p)
    }
}

/// `½ Σ |p - q|` over the union of both outcome sets.
pub fn tvd(p: &DistributionTable, q: &DistributionTable) -> f64 {
    tvd_maps(&to_map(p), &to_map(q))
}

fn to_map(t: &DistributionTable) -> HashMap<&[usize], f64> {
    t.iter().collect()
}

pub(crate) fn tvd_maps<K: Hash + Eq>(p: &HashMap<K, f64>, q: &HashMap<K, f64>) -> f64 {
    let mut sum: f64 = p.iter().map(|(k, a)| (a - q.get(k).copied().unwrap_or(0.0)).abs()).sum();
    sum += q.iter().filter(|(k, _)| !p.contains_key(*k)).map(|(_, b)| b.abs()).sum::<f64>();
    (0.5 * sum).clamp(0.0, 1.0)
}

fn binomial(n: u128, k: u128) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * (n - i) / (i + 1))
}

/// All ways to place `n` photons in `m` modes, in lexicographic order.
pub fn compositions(m: usize, n: usize) -> Vec<Vec<usize>> {
    fn rec(pos: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if pos + 1 == cur.len() {
            cur[pos] = left;
            out.push(cur.clone());
            return;
        }
        for k in (0..=left).rev() {
            cur[pos] = k;
            rec(pos + 1, left - k, cur, out);
        }
    }
    let mut out = Vec::new();
    if m > 0 {
        rec(0, n, &mut vec![0; m], &mut out);
    }
    out
}

/// All click patterns with exactly `k` clicks over `m` modes.
pub fn click_subsets(m: usize, k: usize) -> Vec<Vec<usize>> {
    compositions(m, k).into_iter().filter(|c| c.iter().all(|&v| v <= 1)).collect()
}

/// Exact distribution conditioned on `total` photons (PNRD) or clicks
/// (threshold), renormalised over the constrained set.
pub fn exact_distribution(
    state: &GaussianState,
    detector: Detector,
    total: usize,
    kernel: Kernel,
    exec: &Exec,
) -> Result<DistributionTable> {
    let m = state.modes();
    let count = match detector {
        Detector::Pnrd => binomial((total + m).saturating_sub(1) as u128, total as u128),
        Detector::Threshold if total > m => return invalid(format!("{total} clicks exceed {m} modes")),
        Detector::Threshold => binomial(m as u128, total as u128),
    };
    if count > MAX_OUTCOMES {
        return invalid(format!("{count} outcomes exceed the enumeration guard of {MAX_OUTCOMES}"));
    }
    let (outcomes, kind) = match detector {
        Detector::Pnrd => (compositions(m, total), TableKind::PnrdExact),
        Detector::Threshold => (click_subsets(m, total), TableKind::ClickExact),
    };
    let rep = match detector {
        Detector::Pnrd => Some(ComplexStateRep::new(state)?),
        Detector::Threshold => None,
    };
    let inner = Exec::sequential();
    let weights = exec.map(outcomes.len(), |i| match &rep {
        Some(rep) => rep.probability(&outcomes[i], kernel, &inner),
        None => {
            let clicks: Vec<bool> = outcomes[i].iter().map(|&v| v > 0).collect();
            click_probability_exact(state, &clicks, &inner)
        }
    });
    let weights: Vec<f64> = weights.into_iter().collect::<Result<_>>()?;
    DistributionTable::normalised(outcomes, weights, kind)
}
