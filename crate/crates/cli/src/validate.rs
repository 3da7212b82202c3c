//! The `validate` tests. Each returns a CSV table plus the headline
//! statistic it is judged on.

use gbs_core::gaussian::{Detector, GaussianState};
use gbs_core::lhaf::Kernel;
use gbs_core::rng;
use gbs_core::samplers::{MisPnrd, MisThreshold};
use gbs_core::validation::{
    acceptance_burnin, chog_clicks, correlators_empirical, correlators_exact, exact_distribution, ks_two_sample,
    likelihood_burnin, off_diagonal, repeat_curve, thinning_for, tvd, BurnIn, DistributionTable,
};
use gbs_core::Exec;

use crate::error::{CliError, CliResult, Context};
use crate::files::{Csv, Header, SampleFile};

/// Repeat probability that defines the thinning interval.
pub const REPEAT_LEVEL: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Test {
    Tvd,
    Chog,
    Tpc,
    BurninLikelihood,
    BurninAccept,
    Thin,
}

impl std::str::FromStr for Test {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "tvd" => Ok(Self::Tvd),
            "chog" => Ok(Self::Chog),
            "tpc" => Ok(Self::Tpc),
            "burnin-likelihood" => Ok(Self::BurninLikelihood),
            "burnin-accept" => Ok(Self::BurninAccept),
            "thin" => Ok(Self::Thin),
            other => Err(CliError::Config(format!("unknown test `{other}`"))),
        }
    }
}

/// Outcome of one test.
#[derive(Clone, Debug)]
pub struct Report {
    pub csv: Csv,
    /// TVD, final CHOG ratio, KS p-value against the ideal, burn-in or
    /// thinning interval.
    pub statistic: Option<f64>,
    pub summary: String,
}

fn fmt_pattern(p: &[usize]) -> String {
    let s: Vec<String> = p.iter().map(usize::to_string).collect();
    s.join(" ")
}

fn need<'a, T>(v: Option<&'a T>, what: &str) -> CliResult<&'a T> {
    v.ok_or_else(|| CliError::Config(format!("this test needs {what}")))
}

/// Total shared by every sample, if there is one.
fn common_total(samples: &[Vec<usize>]) -> Option<usize> {
    let mut totals = samples.iter().map(|s| s.iter().sum::<usize>());
    let first = totals.next()?;
    totals.all(|t| t == first).then_some(first)
}

/// Empirical distribution of post-selected samples against the exact one.
pub fn tvd_test(trial: &SampleFile, state: &GaussianState, kernel: Kernel, exec: &Exec, header: Header) -> CliResult<Report> {
    let total = common_total(&trial.samples)
        .ok_or_else(|| CliError::Config("TVD needs samples post-selected on one photon or click number".into()))?;
    let detector = trial.detector()?;
    let exact = exact_distribution(state, detector, total, kernel, exec).during("enumerating the exact distribution")?;
    let emp = DistributionTable::empirical(trial.samples.iter().map(Vec::as_slice)).during("tabulating samples")?;
    let d = tvd(&exact, &emp);
    let mut csv = Csv::new(header.with("detector", detector).with("total", total), &["outcome", "exact", "empirical"]);
    for (o, p) in exact.iter() {
        csv.row(&[&fmt_pattern(o), &p, &emp.prob(o)]);
    }
    for (o, p) in emp.iter().filter(|(o, _)| exact.prob(o) == 0.0) {
        csv.row(&[&fmt_pattern(o), &0.0, &p]);
    }
    csv.note("samples", trial.samples.len());
    csv.note("tvd", d);
    Ok(Report { csv, statistic: Some(d), summary: format!("tvd {d:.6} over {} samples", trial.samples.len()) })
}

/// Running CHOG ratio of a trial stream against an adversary.
pub fn chog_test(trial: &SampleFile, adversary: &SampleFile, state: &GaussianState, exec: &Exec, header: Header) -> CliResult<Report> {
    let n = trial.samples.len().min(adversary.samples.len());
    let trace = chog_clicks(&trial.clicks()[..n], &adversary.clicks()[..n], state, exec).during("evaluating the CHOG ratio")?;
    let mut csv = Csv::new(header, &["step", "log_odds", "ratio"]);
    for (j, (lo, r)) in trace.log_odds().iter().zip(&trace.running).enumerate() {
        csv.row(&[&(j + 1), lo, r]);
    }
    let last = trace.last();
    Ok(Report {
        csv,
        statistic: last,
        summary: format!("chog ratio {} after {n} pairs", last.map_or("n/a".into(), |r| format!("{r:.6}"))),
    })
}

/// Histograms of off-diagonal click correlators, with KS tests against the
/// exact values.
pub fn tpc_test(
    trial: &SampleFile,
    adversary: Option<&SampleFile>,
    state: &GaussianState,
    bins: usize,
    header: Header,
) -> CliResult<Report> {
    let ideal = off_diagonal(&correlators_exact(state).during("computing exact correlators")?);
    let mut series = vec![("ideal", ideal.clone())];
    let trial_c = off_diagonal(&correlators_empirical(&trial.clicks()).during("estimating correlators")?);
    series.push(("trial", trial_c.clone()));
    if let Some(adv) = adversary {
        series.push(("adversary", off_diagonal(&correlators_empirical(&adv.clicks()).during("estimating correlators")?)));
    }
    let all = series.iter().flat_map(|(_, v)| v.iter().copied());
    let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    let bins = bins.max(1);
    let width = ((hi - lo) / bins as f64).max(f64::MIN_POSITIVE);
    let mut csv = Csv::new(header, &["bin", "count", "series"]);
    for (name, values) in &series {
        let mut counts = vec![0usize; bins];
        for v in values {
            counts[(((v - lo) / width) as usize).min(bins - 1)] += 1;
        }
        for (b, c) in counts.iter().enumerate() {
            csv.row(&[&(lo + (b as f64 + 0.5) * width), c, name]);
        }
    }
    let p_trial = ks_two_sample(&trial_c, &ideal).during("KS test")?.p_value;
    csv.note("ks_p_trial", p_trial);
    let mut summary = format!("KS p trial vs ideal {p_trial:.3e}");
    if series.len() == 3 {
        let p_adv = ks_two_sample(&series[2].1, &ideal).during("KS test")?.p_value;
        csv.note("ks_p_adversary", p_adv);
        summary.push_str(&format!(", adversary vs ideal {p_adv:.3e}"));
    }
    Ok(Report { csv, statistic: Some(p_trial), summary })
}

/// The chains a diagnostic runs: target state, kernel, seed and an
/// optional post-selected total.
#[derive(Clone, Copy, Debug)]
pub struct ChainSpec<'a> {
    pub state: &'a GaussianState,
    pub kernel: Kernel,
    pub seed: u64,
    pub total: Option<usize>,
}

impl ChainSpec<'_> {
    fn pnrd(&self) -> CliResult<MisPnrd> {
        MisPnrd::new(self.state, self.kernel, Exec::sequential()).during("preparing the MIS chain")
    }
}

fn burn_summary(kind: &str, result: &BurnIn) -> (Option<f64>, String) {
    match result {
        BurnIn::Converged { burn } => (Some(*burn as f64), format!("{kind} burn-in {burn}")),
        BurnIn::Indistinguishable => (Some(0.0), format!("{kind}: target and proposal indistinguishable, burn-in 0")),
        BurnIn::Unconverged => (None, format!("{kind}: not converged by the largest burn-in tested")),
    }
}

pub fn burnin_likelihood_test(
    spec: &ChainSpec,
    max_burn: usize,
    sample_size: usize,
    exec: &Exec,
    header: Header,
) -> CliResult<Report> {
    let total = *need(spec.total.as_ref(), "a post-selected photon number")?;
    let chain = spec.pnrd()?;
    let out = likelihood_burnin(std::slice::from_ref(&chain), total, max_burn, sample_size, spec.seed, exec)
        .during("likelihood burn-in")?;
    let mut csv = Csv::new(header.with("total", total), &["step", "likelihood", "samples_needed"]);
    for (b, (row, need)) in out.smoothed.iter().zip(&out.sample_size).enumerate() {
        let needed = need.map_or(String::from("NA"), |s| s.to_string());
        csv.row(&[&b, row.last().expect("nonempty curve"), &needed]);
    }
    let (statistic, summary) = burn_summary("likelihood", &out.result);
    csv.note("result", &summary);
    Ok(Report { csv, statistic, summary })
}

pub fn burnin_accept_test(spec: &ChainSpec, max_burn: usize, chains: usize, exec: &Exec, header: Header) -> CliResult<Report> {
    let chain = spec.pnrd()?;
    let out = acceptance_burnin(std::slice::from_ref(&chain), spec.total, max_burn, chains, spec.seed, exec)
        .during("acceptance burn-in")?;
    let mut csv = Csv::new(header, &["step", "rate", "smoothed"]);
    for (b, r) in out.rate.iter().enumerate() {
        let smooth = out.smoothed.get(b).map_or(String::from("NA"), |s| s.to_string());
        csv.row(&[&b, r, &smooth]);
    }
    let (statistic, summary) = burn_summary("acceptance", &out.result);
    csv.note("floor", out.floor);
    csv.note("result", &summary);
    Ok(Report { csv, statistic, summary })
}

/// Acceptance flags of `chains` independent chains of `length` steps.
pub fn acceptance_flags(
    spec: &ChainSpec,
    detector: Detector,
    chains: usize,
    length: usize,
    exec: &Exec,
) -> CliResult<Vec<Vec<bool>>> {
    let (total, seed) = (spec.total, spec.seed);
    let runs = match detector {
        Detector::Pnrd => {
            let chain = spec.pnrd()?;
            exec.map(chains, |c| {
                let steps = chain.run(length, total, &mut rng::stream(seed, "thin", c as u64))?;
                Ok(steps.iter().map(|s| s.accepted).collect())
            })
        }
        Detector::Threshold => {
            let chain = MisThreshold::new(spec.state, spec.kernel, Exec::sequential()).during("preparing the MIS chain")?;
            exec.map(chains, |c| {
                let steps = chain.run(length, total, &mut rng::stream(seed, "thin", c as u64))?;
                Ok(steps.iter().map(|s| s.accepted).collect())
            })
        }
    };
    runs.into_iter().collect::<gbs_core::Result<_>>().during("running MIS chains")
}

pub fn thin_test(flags: &[Vec<bool>], grid: &[usize], header: Header) -> CliResult<Report> {
    let curve = repeat_curve(flags, grid).during("repeat-probability curve")?;
    let mut csv = Csv::new(header, &["thin", "repeat_probability"]);
    for (t, p) in &curve {
        csv.row(&[t, p]);
    }
    let tau = thinning_for(&curve, REPEAT_LEVEL);
    let summary = match tau {
        Some(t) => format!("thinning interval {t} reaches repeat probability {REPEAT_LEVEL}"),
        None => format!("no interval on the grid reaches repeat probability {REPEAT_LEVEL}"),
    };
    csv.note("tau_thin", tau.map_or(String::from("NA"), |t| t.to_string()));
    Ok(Report { csv, statistic: tau.map(|t| t as f64), summary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use gbs_core::gaussian::tmsv;

    fn file(samples: Vec<Vec<usize>>, detector: &str) -> SampleFile {
        SampleFile { header: Header::new("samples", "x").with("detector", detector), samples }
    }

    #[test]
    fn tvd_of_the_only_outcome_is_zero() {
        let s = tmsv(2, 0, 1, 0.6);
        let f = file(vec![vec![1, 1]; 10], "pnrd");
        let r = tvd_test(&f, &s, Kernel::Fds, &Exec::sequential(), Header::new("tvd", "x")).unwrap();
        assert!(r.statistic.unwrap() < 1e-12);
        assert!(tvd_test(&file(vec![vec![1, 1], vec![2, 1]], "pnrd"), &s, Kernel::Fds, &Exec::sequential(), Header::default()).is_err());
    }

    #[test]
    fn chog_swap_is_complementary() {
        let s = tmsv(2, 0, 1, 0.6).apply_transmission(0.5).unwrap();
        let a = file(vec![vec![1, 0], vec![0, 1], vec![1, 0]], "threshold");
        let b = file(vec![vec![0, 1], vec![0, 1], vec![1, 0]], "threshold");
        let f = chog_test(&a, &b, &s, &Exec::sequential(), Header::default()).unwrap();
        let g = chog_test(&b, &a, &s, &Exec::sequential(), Header::default()).unwrap();
        assert!((f.statistic.unwrap() + g.statistic.unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn tpc_histograms_count_every_value() {
        let s = tmsv(3, 0, 1, 0.6).apply_transmission(0.5).unwrap();
        let t = file(vec![vec![1, 0, 0], vec![1, 1, 0], vec![0, 1, 1], vec![0, 0, 0]], "threshold");
        let r = tpc_test(&t, Some(&t), &s, 4, Header::default()).unwrap();
        let text = r.csv.render();
        let total: usize = text.lines().skip(1).filter(|l| !l.starts_with('#')).map(|l| l.split(',').nth(1).unwrap().parse::<usize>().unwrap()).sum();
        assert_eq!(total, 9);
    }

    #[test]
    fn names_parse() {
        for n in ["tvd", "chog", "tpc", "burnin-likelihood", "burnin-accept", "thin"] {
            assert!(n.parse::<Test>().is_ok());
        }
        assert!("ks".parse::<Test>().is_err());
    }
}
