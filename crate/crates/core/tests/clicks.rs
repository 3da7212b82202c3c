mod common;

use common::{c, rel_err};
use gbs_core::clicks::{click_position_probability, click_probability_exact, sample_position_given_count, ClickSample};
use gbs_core::gaussian::{haar_random_unitary, squeeze, tmsv, williamson_decompose, ComplexStateRep, GaussianState};
use gbs_core::lhaf::Kernel;
use gbs_core::validation::ks_two_sample;
use gbs_core::{rng, Exec};
use nalgebra::DVector;
use proptest::prelude::*;
use rand::Rng;

fn mixed_fixture(m: usize, eta: f64) -> GaussianState {
    let mut s = GaussianState::vacuum(m);
    for k in 0..m {
        s = squeeze(&s, k, 0.15 + 0.1 * k as f64).unwrap();
    }
    let mean = DVector::from_fn(2 * m, |i, _| 0.2 * ((i * 7 % 5) as f64 - 2.0));
    s.with_mean(mean).unwrap().apply_unitary(&haar_random_unitary(m, 5)).unwrap().apply_transmission(eta).unwrap()
}

fn all_clicks(m: usize) -> Vec<Vec<bool>> {
    (0..1u32 << m).map(|z| (0..m).map(|j| z >> j & 1 == 1).collect()).collect()
}

#[test]
fn click_probabilities_sum_to_one() {
    let exec = Exec::sequential();
    for m in 1..=4 {
        let s = mixed_fixture(m, 0.6);
        let total: f64 = all_clicks(m).iter().map(|c| click_probability_exact(&s, c, &exec).unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-10, "M = {m}: {total}");
    }
}

#[test]
fn tmsv_coincidence_matches_fock() {
    let (r, eta) = (0.5, 0.6);
    let s = tmsv(2, 0, 1, r).apply_transmission(eta).unwrap();
    let fock: f64 = (1..=20).flat_map(|a| (1..=20).map(move |b| (a, b))).map(|(a, b)| common::lossy_tmsv(r, eta, a, b, a, b)).sum();
    let got = click_probability_exact(&s, &[true, true], &Exec::sequential()).unwrap();
    assert!(rel_err(got, fock) < 1e-8, "{got} vs {fock}");
}

#[test]
fn clicks_are_collapsed_photon_numbers() {
    let exec = Exec::sequential();
    let s = mixed_fixture(3, 0.7);
    let rep = ComplexStateRep::new(&s).unwrap();
    let mut by_support = [0.0; 8];
    for a in 0..=10 {
        for b in 0..=10 {
            for d in 0..=10 {
                let p = rep.probability(&[a, b, d], Kernel::Repeated, &exec).unwrap();
                by_support[usize::from(a > 0) | usize::from(b > 0) << 1 | usize::from(d > 0) << 2] += p;
            }
        }
    }
    for (z, clicks) in all_clicks(3).iter().enumerate() {
        let got = click_probability_exact(&s, clicks, &exec).unwrap();
        assert!(rel_err(got, by_support[z]) < 1e-6, "{clicks:?}: {got} vs {}", by_support[z]);
    }
}

#[test]
fn single_photon_after_loss_identity() {
    // Π_L(x) = (1 - x) Σ_n P(n) n x^{n-1} with P(n) from the Fock oracle.
    let (r, beta) = (0.6, c(0.4, -0.3));
    let rho = common::single_mode(r, beta, 1.0, 31);
    let mean = DVector::from_vec(vec![2.0 * beta.re, 2.0 * beta.im]);
    let pure = squeeze(&GaussianState::vacuum(1), 0, r).unwrap().with_mean(mean).unwrap();
    let exec = Exec::sequential();
    for x in [0.0, 0.2, 0.5, 0.9] {
        let density: f64 = (1..=30).map(|n| rho[(n, n)].re * n as f64 * f64::powi(x, n as i32 - 1)).sum();
        let lossy = ComplexStateRep::new(&pure.apply_loss(&[x]).unwrap()).unwrap();
        let one = lossy.probability(&[1], Kernel::Fds, &exec).unwrap();
        assert!(rel_err(one, (1.0 - x) * density) < 1e-8, "x = {x}");
    }
}

#[test]
fn position_density_marginalises_to_click_probability() {
    // Draw x uniformly and re-purify the lossy pure member; the average of
    // the joint density is the click probability.
    let s = tmsv(2, 0, 1, 0.7).apply_transmission(0.5).unwrap();
    let exec = Exec::sequential();
    let want = click_probability_exact(&s, &[true, false], &exec).unwrap();
    let dec = williamson_decompose(&s).unwrap();
    let mut g = rng::stream(40, "marginal", 0);
    let n = 100_000;
    let mut acc = 0.0;
    for _ in 0..n {
        let r1 = dec.sample_pure_displacement(s.mean(), &mut g);
        let x: f64 = g.random();
        let lossy = dec.pure_state(r1).unwrap().apply_loss(&[x, 0.0]).unwrap();
        let d2 = williamson_decompose(&lossy).unwrap();
        let r2 = d2.sample_pure_displacement(lossy.mean(), &mut g);
        let rep = ComplexStateRep::new(&d2.pure_state(r2).unwrap()).unwrap();
        let sample = ClickSample::new(vec![true, false], vec![x, 0.0]).unwrap();
        acc += click_position_probability(&rep, &sample, Kernel::Fds, &exec).unwrap();
    }
    let got = acc / n as f64;
    assert!(rel_err(got, want) < 0.01, "{got} vs {want}");
}

#[test]
fn no_clicks_gives_vacuum_probability() {
    let s = squeeze(&GaussianState::coherent(&[c(0.3, 0.1), c(0.0, -0.4)]), 1, 0.5).unwrap();
    let rep = ComplexStateRep::new(&s).unwrap();
    let p = click_position_probability(&rep, &ClickSample::bare(vec![false, false]), Kernel::Fds, &Exec::sequential()).unwrap();
    assert!(rel_err(p, rep.vacuum_prob) < 1e-12);
}

#[test]
fn unit_position_is_rejected() {
    assert!(ClickSample::new(vec![true], vec![1.0]).is_err());
    assert!(ClickSample::new(vec![false], vec![0.3]).is_err());
}

#[test]
fn single_photon_positions_are_uniform() {
    let mut g = rng::stream(41, "x", 0);
    let xs: Vec<f64> = (0..100_000).map(|_| sample_position_given_count(1, &mut g).unwrap()).collect();
    let mut h = rng::stream(41, "reference", 0);
    let us: Vec<f64> = (0..100_000).map(|_| h.random()).collect();
    assert!(ks_two_sample(&xs, &us).unwrap().p_value > 1e-3);
    assert!(sample_position_given_count(0, &mut g).is_err());
    let a = sample_position_given_count(4, &mut rng::stream(3, "x", 1)).unwrap();
    let b = sample_position_given_count(4, &mut rng::stream(3, "x", 1)).unwrap();
    assert_eq!(a, b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn loss_never_raises_thermal_clicks(nbar in 0.01f64..5.0, x1 in 0.0f64..1.0, dx in 0.0f64..1.0) {
        let x2 = x1 + (1.0 - x1) * dx;
        let exec = Exec::sequential();
        let th = GaussianState::thermal(&[nbar]).unwrap();
        let p1 = click_probability_exact(&th.apply_loss(&[x1]).unwrap(), &[true], &exec).unwrap();
        let p2 = click_probability_exact(&th.apply_loss(&[x2]).unwrap(), &[true], &exec).unwrap();
        prop_assert!(p2 <= p1 + 1e-14);
        let closed = nbar * (1.0 - x1) / (1.0 + nbar * (1.0 - x1));
        prop_assert!((p1 - closed).abs() < 1e-12);
    }
}
