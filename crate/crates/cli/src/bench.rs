//! Kernel timing: the collision-free scaling curve and the speedup from
//! repeated photons on IPS-drawn patterns.

use gbs_core::lhaf::{lhaf_timed, Kernel, ReducedMatrix, SymMatrix};
use gbs_core::rng;
use gbs_core::samplers::{Ensemble, POST_SELECT_CAP};
use gbs_core::validation::linear_fit;
use gbs_core::Exec;
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::config::hex_digest;
use crate::error::{CliError, CliResult, Context};

/// Default upper end of a benchmark range.
pub const MAX_BENCH_PHOTONS: usize = 36;

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub n: usize,
    pub pattern_hash: String,
    pub kernel: Kernel,
    pub terms: u128,
    pub seconds: f64,
}

pub fn pattern_hash(pattern: &[usize]) -> String {
    let text: Vec<String> = pattern.iter().map(usize::to_string).collect();
    hex_digest(text.join(" ").as_bytes())[..16].to_string()
}

fn random_symmetric(n: usize, seed: u64) -> SymMatrix {
    let mut g = rng::stream(seed, "bench-matrix", n as u64);
    let mut m = DMatrix::from_element(n, n, C64::new(0.0, 0.0));
    for i in 0..n {
        for j in i..n {
            let z = C64::new(g.sample(StandardNormal), g.sample(StandardNormal));
            m[(i, j)] = z;
            m[(j, i)] = z;
        }
    }
    SymMatrix::new(m).expect("symmetric by construction")
}

/// Time `kernel` on collision-free `N × N` problems, `reps` calls per `N`.
pub fn no_collision(ns: &[usize], reps: usize, kernel: Kernel, seed: u64, exec: &Exec) -> CliResult<Vec<BenchRow>> {
    let mut rows = Vec::with_capacity(ns.len() * reps);
    for &n in ns {
        let input = ReducedMatrix::from_symmetric(&random_symmetric(n, seed));
        let hash = pattern_hash(&input.pattern);
        for _ in 0..reps {
            let out = lhaf_timed(&input, kernel, exec).during("timing a kernel")?;
            rows.push(BenchRow { n, pattern_hash: hash.clone(), kernel, terms: out.terms, seconds: out.seconds });
        }
    }
    Ok(rows)
}

/// Refuse photon numbers above [`MAX_BENCH_PHOTONS`] unless forced.
pub fn check_range(ns: &[usize], force: bool) -> CliResult<()> {
    match ns.iter().max() {
        Some(&n) if n > MAX_BENCH_PHOTONS && !force => {
            Err(CliError::Guard(format!("N = {n} exceeds the benchmark limit of {MAX_BENCH_PHOTONS}; pass --force")))
        }
        _ => Ok(()),
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Slope `b` of `ln(t / N³) = a + b N` over per-`N` median times: the
/// per-photon exponent of an `N³ 2^{N/2}` cost.
pub fn fitted_exponent(rows: &[BenchRow]) -> CliResult<f64> {
    let mut ns: Vec<usize> = rows.iter().map(|r| r.n).collect();
    ns.dedup();
    let (x, y): (Vec<f64>, Vec<f64>) = ns
        .iter()
        .map(|&n| {
            let t = median(rows.iter().filter(|r| r.n == n).map(|r| r.seconds).collect());
            (n as f64, (t / (n as f64).powi(3)).ln())
        })
        .unzip();
    linear_fit(&x, &y).map(|(slope, _)| slope).during("fitting the scaling curve")
}

/// One pattern timed with and without collision awareness.
#[derive(Clone, Debug, PartialEq)]
pub struct CollisionRow {
    pub pattern: Vec<usize>,
    pub plain_terms: u128,
    pub plain_seconds: f64,
    pub aware_terms: u128,
    pub aware_seconds: f64,
}

impl CollisionRow {
    pub fn speedup(&self) -> f64 {
        self.plain_seconds / self.aware_seconds
    }

    pub fn has_collision(&self) -> bool {
        self.pattern.iter().any(|&c| c > 1)
    }
}

/// Draw `samples` IPS patterns with `n` photons and time `kernel` on each,
/// once on the expanded matrix (every photon its own row) and once on the
/// reduced matrix with repeats.
pub fn collisions(
    ensemble: &Ensemble,
    n: usize,
    samples: usize,
    kernel: Kernel,
    seed: u64,
    exec: &Exec,
) -> CliResult<Vec<CollisionRow>> {
    let mut g = rng::stream(seed, "bench-ips", n as u64);
    let mut rows = Vec::with_capacity(samples);
    let mut attempts = 0u64;
    while rows.len() < samples {
        attempts += 1;
        if attempts > POST_SELECT_CAP {
            return Err(CliError::Guard(format!("IPS rarely yields {n} photons; found {} patterns", rows.len())));
        }
        let pattern = ensemble.ips_sample(&mut g);
        if pattern.iter().sum::<usize>() != n {
            continue;
        }
        let r = ensemble.draw(&mut g);
        let input = ensemble.family().reduced(&r, &pattern).during("building a reduced matrix")?;
        let expanded = ReducedMatrix::from_symmetric(&input.expand());
        let plain = lhaf_timed(&expanded, kernel, exec).during("timing the expanded problem")?;
        let fast = lhaf_timed(&input, kernel, exec).during("timing the collision-aware kernel")?;
        rows.push(CollisionRow {
            pattern,
            plain_terms: plain.terms,
            plain_seconds: plain.seconds,
            aware_terms: fast.terms,
            aware_seconds: fast.seconds,
        });
    }
    Ok(rows)
}

pub fn median_speedup(rows: &[CollisionRow]) -> f64 {
    median(rows.iter().map(CollisionRow::speedup).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use gbs_core::gaussian::{build_experiment_state, ExperimentConfig};

    #[test]
    fn rows_and_fit() {
        let rows = no_collision(&[4, 6, 8], 3, Kernel::Fds, 1, &Exec::sequential()).unwrap();
        assert_eq!(rows.len(), 9);
        assert_eq!(rows[0].terms, 2);
        assert_eq!(rows[8].terms, 8);
        assert!(fitted_exponent(&rows).unwrap().is_finite());
        assert!(check_range(&[8, 40], false).is_err());
        assert!(check_range(&[8, 40], true).is_ok());
    }

    #[test]
    fn exponent_of_a_synthetic_curve() {
        let rows: Vec<BenchRow> = (10..=20)
            .step_by(2)
            .map(|n| BenchRow {
                n,
                pattern_hash: String::new(),
                kernel: Kernel::Fds,
                terms: 0,
                seconds: 1e-7 * (n as f64).powi(3) * 2f64.powf(n as f64 / 2.0),
            })
            .collect();
        assert!((fitted_exponent(&rows).unwrap() - std::f64::consts::LN_2 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn collision_rows() {
        let state = build_experiment_state(&ExperimentConfig::benchmark(8, 1.0, 0.5, 2)).unwrap();
        let ens = Ensemble::new(&state).unwrap();
        let rows = collisions(&ens, 6, 5, Kernel::Fds, 3, &Exec::sequential()).unwrap();
        assert_eq!(rows.len(), 5);
        for r in &rows {
            assert_eq!(r.pattern.iter().sum::<usize>(), 6);
            assert_eq!(r.plain_terms, 4);
            assert!(r.aware_terms <= r.plain_terms);
        }
    }
}
