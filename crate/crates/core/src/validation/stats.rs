//! Goodness-of-fit statistics used by the acceptance checks.

use std::collections::HashMap;
use std::hash::Hash;

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Kolmogorov survival function `Q(λ) = 2 Σ (-1)^{k-1} e^{-2k²λ²}`.
fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-300 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov–Smirnov test with the small-sample corrected
/// asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.is_empty() || b.is_empty() || a.iter().chain(b).any(|x| x.is_nan()) {
        return invalid("KS test needs two nonempty samples without NaN");
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = (na * nb / (na + nb)).sqrt();
    Ok(TestResult { statistic: d, p_value: kolmogorov_sf((ne + 0.12 + 0.11 / ne) * d) })
}

/// Pearson test of observed counts against expected probabilities. Cells
/// expecting fewer than five counts, and everything absent from `expected`,
/// are pooled into one remainder cell.
pub fn chi_square_gof<K: Hash + Eq>(counts: &HashMap<K, usize>, expected: &[(K, f64)]) -> Result<TestResult> {
    let total: usize = counts.values().sum();
    if total == 0 {
        return invalid("no observations");
    }
    let n = total as f64;
    let (mut stat, mut cells) = (0.0, 0usize);
    let (mut rest_o, mut rest_e) = (n, n);
    for (k, p) in expected {
        let e = p * n;
        if e >= 5.0 {
            let o = counts.get(k).copied().unwrap_or(0) as f64;
            stat += (o - e).powi(2) / e;
            cells += 1;
            rest_o -= o;
            rest_e -= e;
        }
    }
    if rest_e >= 5.0 {
        stat += (rest_o - rest_e).powi(2) / rest_e;
        cells += 1;
    } else if rest_o > 0.0 && rest_e <= 0.0 {
        return Ok(TestResult { statistic: f64::INFINITY, p_value: 0.0 });
    }
    if cells < 2 {
        return invalid("too few populated cells for a chi-square test");
    }
    let dist = ChiSquared::new((cells - 1) as f64).expect("positive degrees of freedom");
    Ok(TestResult { statistic: stat, p_value: dist.sf(stat) })
}

/// Least-squares line `y = slope · x + intercept`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return invalid("linear fit needs at least two paired points");
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return invalid("linear fit needs distinct abscissae");
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_identical_and_disjoint() {
        let a: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let r = ks_two_sample(&a, &a).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        let b: Vec<f64> = (100..150).map(|i| i as f64).collect();
        let r = ks_two_sample(&a, &b).unwrap();
        assert_eq!(r.statistic, 1.0);
        assert!(r.p_value < 1e-15);
    }

    #[test]
    fn kolmogorov_reference_values() {
        // Q(1.0) and Q(1.36) from standard tables.
        assert!((kolmogorov_sf(1.0) - 0.26999967).abs() < 1e-7);
        assert!((kolmogorov_sf(1.36) - 0.0494).abs() < 1e-3);
    }

    #[test]
    fn chi_square_perfect_fit() {
        let counts: HashMap<u8, usize> = [(0, 50), (1, 30), (2, 20)].into_iter().collect();
        let r = chi_square_gof(&counts, &[(0, 0.5), (1, 0.3), (2, 0.2)]).unwrap();
        assert!(r.statistic.abs() < 1e-12);
        assert!((r.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fit_recovers_line() {
        let x = [8.0, 12.0, 16.0];
        let y: Vec<f64> = x.iter().map(|v| 6.81 * v - 65.3).collect();
        let (s, i) = linear_fit(&x, &y).unwrap();
        assert!((s - 6.81).abs() < 1e-12 && (i + 65.3).abs() < 1e-12);
    }
}
