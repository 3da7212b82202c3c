mod common;

use std::collections::HashMap;

use common::{c, patterns_up_to};
use gbs_core::clicks::{click_probability_exact, collapse};
use gbs_core::gaussian::{haar_random_unitary, squeeze, tmsv, ComplexStateRep, GaussianState};
use gbs_core::lhaf::Kernel;
use gbs_core::samplers::{ChainRuleSampler, Ensemble, MisPnrd, MisThreshold, ThermalSampler};
use gbs_core::{rng, Exec};
use nalgebra::DVector;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Three squeezed, displaced modes through a Haar unitary with loss.
fn fixture(eta: f64) -> GaussianState {
    let mut s = GaussianState::vacuum(3);
    for (k, r) in [0.45, 0.3, 0.2].into_iter().enumerate() {
        s = squeeze(&s, k, r).unwrap();
    }
    let s = s.with_mean(DVector::from_vec(vec![0.4, -0.2, 0.0, 0.1, 0.3, -0.3])).unwrap();
    s.apply_unitary(&haar_random_unitary(3, 11)).unwrap().apply_transmission(eta).unwrap()
}

fn histogram<K: std::hash::Hash + Eq>(samples: impl IntoIterator<Item = K>) -> HashMap<K, usize> {
    let mut h = HashMap::new();
    for s in samples {
        *h.entry(s).or_insert(0) += 1;
    }
    h
}

/// Pearson p-value of observed counts against expected probabilities, with
/// cells of small expectation and everything outside `cells` pooled.
fn chi_square<K: std::hash::Hash + Eq>(counts: &HashMap<K, usize>, cells: &[(K, f64)]) -> f64 {
    let total: usize = counts.values().sum();
    let n = total as f64;
    let (mut stat, mut dof) = (0.0, 0usize);
    let (mut pool_o, mut pool_e) = (total as f64, n);
    for (k, p) in cells {
        let e = p * n;
        let o = *counts.get(k).unwrap_or(&0) as f64;
        if e >= 5.0 {
            stat += (o - e).powi(2) / e;
            dof += 1;
            pool_o -= o;
            pool_e -= e;
        }
    }
    if pool_e >= 5.0 {
        stat += (pool_o - pool_e).powi(2) / pool_e;
        dof += 1;
    }
    ChiSquared::new((dof - 1) as f64).unwrap().sf(stat)
}

fn tvd<K: std::hash::Hash + Eq>(counts: &HashMap<K, usize>, cells: &[(K, f64)]) -> f64 {
    let n: usize = counts.values().sum();
    let inside: f64 = cells.iter().map(|(k, p)| (*counts.get(k).unwrap_or(&0) as f64 / n as f64 - p).abs()).sum();
    let seen: usize = cells.iter().map(|(k, _)| *counts.get(k).unwrap_or(&0)).sum();
    let rest = 1.0 - cells.iter().map(|(_, p)| p).sum::<f64>();
    0.5 * (inside + ((n - seen) as f64 / n as f64 - rest).abs())
}

fn exact_pnrd(state: &GaussianState, max_n: usize) -> Vec<(Vec<usize>, f64)> {
    let rep = ComplexStateRep::new(state).unwrap();
    let exec = Exec::sequential();
    patterns_up_to(state.modes(), max_n).into_iter().map(|n| {
        let p = rep.probability(&n, Kernel::Fds, &exec).unwrap();
        (n, p)
    }).collect()
}

fn all_clicks(m: usize) -> Vec<Vec<bool>> {
    (0..1u32 << m).map(|z| (0..m).map(|j| z >> j & 1 == 1).collect()).collect()
}

#[test]
fn chain_rule_pnrd_matches_exact_distribution() {
    let s = fixture(0.7);
    let sampler = ChainRuleSampler::new(&s, 14, 40, 1, Exec::sequential()).unwrap();
    let mut g = rng::stream(21, "chain-pnrd", 0);
    let h = histogram((0..40_000).map(|_| sampler.sample_pnrd(&mut g).unwrap().unwrap()));
    let exact = exact_pnrd(&s, 8);
    let p = chi_square(&h, &exact);
    assert!(p > 1e-3, "chi-square p = {p}");
    assert!(tvd(&h, &exact) < 0.02);
}

#[test]
fn chain_rule_threshold_matches_exact_clicks() {
    let s = fixture(0.7);
    let exec = Exec::sequential();
    let cells: Vec<(Vec<bool>, f64)> =
        all_clicks(3).into_iter().map(|c| (c.clone(), click_probability_exact(&s, &c, &exec).unwrap())).collect();
    for k in [1, 6] {
        let sampler = ChainRuleSampler::new(&s, 14, 40, k, Exec::sequential()).unwrap();
        let mut g = rng::stream(22, "chain-thr", k as u64);
        let h = histogram((0..40_000).map(|_| sampler.sample_threshold(&mut g).unwrap().unwrap().clicks));
        let t = tvd(&h, &cells);
        assert!(t < 0.01, "K = {k}: TVD {t}");
    }
}

#[test]
fn collapsed_pnrd_agrees_with_threshold_pipeline() {
    let s = fixture(0.5);
    let sampler = ChainRuleSampler::new(&s, 14, 40, 4, Exec::sequential()).unwrap();
    let mut g = rng::stream(23, "collapse", 0);
    let a = histogram((0..20_000).map(|_| collapse(&sampler.sample_pnrd(&mut g).unwrap().unwrap())));
    let b = histogram((0..20_000).map(|_| sampler.sample_threshold(&mut g).unwrap().unwrap().clicks));
    let d: f64 = all_clicks(3).iter().map(|c| {
        (*a.get(c).unwrap_or(&0) as f64 - *b.get(c).unwrap_or(&0) as f64).abs() / 20_000.0
    }).sum::<f64>() * 0.5;
    assert!(d < 0.02, "{d}");
}

#[test]
fn lossless_tmsv_chain_gives_equal_counts() {
    let s = tmsv(4, 1, 3, 0.9);
    let sampler = ChainRuleSampler::new(&s, 16, 60, 1, Exec::sequential()).unwrap();
    let mut g = rng::stream(24, "tmsv", 0);
    for _ in 0..500 {
        let n = sampler.sample_pnrd(&mut g).unwrap().unwrap();
        assert_eq!(n[1], n[3]);
        assert_eq!(n[0] + n[2], 0);
    }
}

#[test]
fn global_cutoff_leaves_kept_distribution_unchanged() {
    let s = fixture(0.9);
    let sampler = ChainRuleSampler::new(&s, 14, 2, 1, Exec::sequential()).unwrap();
    let mut g = rng::stream(25, "cutoff", 0);
    let kept: Vec<Vec<usize>> = (0..30_000).filter_map(|_| sampler.sample_pnrd(&mut g).unwrap()).collect();
    assert!(kept.len() < 30_000);
    let exact = exact_pnrd(&s, 2);
    let z: f64 = exact.iter().map(|(_, p)| p).sum();
    let cond: Vec<_> = exact.into_iter().map(|(n, p)| (n, p / z)).collect();
    let p = chi_square(&histogram(kept), &cond);
    assert!(p > 1e-3, "{p}");
}

#[test]
fn ips_samples_follow_their_probabilities() {
    let s = fixture(0.6);
    let ens = Ensemble::new(&s).unwrap();
    let r = ens.draw(&mut rng::stream(26, "ips-r", 0));
    let ips = ens.ips(&r);
    let exec = Exec::sequential();
    let cells: Vec<_> = patterns_up_to(3, 7)
        .into_iter()
        .map(|n| {
            let p = ips.probability(&n, Kernel::Repeated, &exec).unwrap();
            (n, p)
        })
        .collect();
    let mut g = rng::stream(26, "ips", 0);
    let h = histogram((0..50_000).map(|_| ips.sample(&mut g)));
    let p = chi_square(&h, &cells);
    assert!(p > 1e-3, "{p}");
}

#[test]
fn thermal_sampler_is_geometric() {
    let nbar = 0.8;
    let s = GaussianState::thermal(&[nbar, 0.0]).unwrap();
    let sampler = ThermalSampler::new(&s).unwrap();
    let mut g = rng::stream(27, "thermal", 0);
    let h = histogram((0..50_000).map(|_| sampler.sample(&mut g)[0]));
    let cells: Vec<_> = (0..30).map(|n| (n, nbar.powi(n as i32) / (1.0 + nbar).powi(n as i32 + 1))).collect();
    assert!(chi_square(&h, &cells) > 1e-3);
}

#[test]
fn mis_pnrd_stationary_distribution() {
    let s = fixture(0.6);
    let chain = MisPnrd::new(&s, Kernel::Fds, Exec::sequential()).unwrap();
    let steps = chain.run(60_000, Some(2), &mut rng::stream(28, "mis", 0)).unwrap();
    let exact: Vec<_> = exact_pnrd(&s, 2).into_iter().filter(|(n, _)| n.iter().sum::<usize>() == 2).collect();
    let z: f64 = exact.iter().map(|(_, p)| p).sum();
    let cells: Vec<_> = exact.into_iter().map(|(n, p)| (n, p / z)).collect();
    let h = histogram(steps.into_iter().skip(100).map(|s| s.sample));
    let t = tvd(&h, &cells);
    assert!(t < 0.02, "{t}");
}

#[test]
fn mis_threshold_stationary_distribution() {
    let s = fixture(0.6);
    let exec = Exec::sequential();
    let chain = MisThreshold::new(&s, Kernel::Fds, Exec::sequential()).unwrap();
    let steps = chain.run(40_000, Some(2), &mut rng::stream(29, "mis", 1)).unwrap();
    let two: Vec<_> = all_clicks(3).into_iter().filter(|c| c.iter().filter(|&&v| v).count() == 2).collect();
    let probs: Vec<f64> = two.iter().map(|c| click_probability_exact(&s, c, &exec).unwrap()).collect();
    let z: f64 = probs.iter().sum();
    let cells: Vec<_> = two.into_iter().zip(probs).map(|(c, p)| (c, p / z)).collect();
    let h = histogram(steps.into_iter().skip(100).map(|s| s.sample.clicks));
    let t = tvd(&h, &cells);
    assert!(t < 0.02, "{t}");
}

#[test]
fn mis_with_exact_proposal_always_accepts() {
    let s = GaussianState::coherent(&[c(0.5, 0.2), c(-0.3, 0.7), c(0.0, 0.0)]).apply_transmission(0.7).unwrap();
    let pn = MisPnrd::new(&s, Kernel::Fds, Exec::sequential()).unwrap();
    assert!(pn.run(500, None, &mut rng::stream(30, "null", 0)).unwrap().iter().all(|s| s.accepted));
    let th = MisThreshold::new(&s, Kernel::Fds, Exec::sequential()).unwrap();
    let steps = th.run(500, Some(1), &mut rng::stream(30, "null", 1)).unwrap();
    assert!(steps.iter().all(|s| s.accepted));
}

#[test]
fn samplers_are_deterministic() {
    let s = fixture(0.6);
    let sampler = ChainRuleSampler::new(&s, 12, 40, 3, Exec::sequential()).unwrap();
    let draw = |seed| {
        let mut g = rng::stream(seed, "det", 0);
        (0..50).map(|_| (sampler.sample_pnrd(&mut g).unwrap(), sampler.sample_threshold(&mut g).unwrap())).collect::<Vec<_>>()
    };
    assert_eq!(draw(1), draw(1));
    assert_ne!(draw(1), draw(2));
    let chain = MisPnrd::new(&s, Kernel::Fds, Exec::sequential()).unwrap();
    let a = chain.run(100, None, &mut rng::stream(3, "det", 1)).unwrap();
    let b = chain.run(100, None, &mut rng::stream(3, "det", 1)).unwrap();
    assert_eq!(a, b);
}
