//! Sampling drivers behind `gbs sample`.
//!
//! Independent samplers give attempt `i` its own stream
//! `(seed, tag, i)` and keep accepted attempts in index order, so the output
//! does not depend on how attempts are spread over workers.

use gbs_core::clicks::collapse;
use gbs_core::gaussian::{build_experiment_state, thermal_adversary_state, Detector, ExperimentConfig, GaussianState};
use gbs_core::lhaf::Kernel;
use gbs_core::rng::{self, GbsRng};
use gbs_core::samplers::{ChainRuleSampler, Ensemble, MisPnrd, MisStep, MisThreshold, ThermalSampler, POST_SELECT_CAP};
use gbs_core::{Exec, Result};

use crate::config::SamplerKind;
use crate::error::{CliError, CliResult, Context};

/// Largest kernel term count any subcommand runs without `--force`.
pub const TERM_GUARD: u128 = 1 << 30;

/// Attempts evaluated per parallel round.
const ROUND: usize = 512;

#[derive(Clone, Debug)]
pub struct SampleRequest {
    pub kind: SamplerKind,
    pub detector: Detector,
    pub num_samples: usize,
    pub chain_length: Option<usize>,
    pub burn_in: usize,
    pub thin: usize,
    pub post_select: Option<usize>,
    pub kernel: Kernel,
    pub seed: u64,
}

/// Per-step record of an independence chain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub accepted: bool,
    pub log_target: f64,
    pub log_proposal: f64,
}

#[derive(Clone, Debug)]
pub struct SampleRun {
    pub samples: Vec<Vec<usize>>,
    /// Attempts drawn by an independent sampler, or steps of a chain.
    pub draws: u64,
    pub steps: Option<Vec<StepRecord>>,
}

/// The kernel context for a run: the pool plus the term guard.
pub fn guarded(exec: Exec, force: bool) -> Exec {
    if force {
        exec
    } else {
        exec.with_term_limit(TERM_GUARD)
    }
}

pub fn run(cfg: &ExperimentConfig, req: &SampleRequest, exec: &Exec) -> CliResult<SampleRun> {
    if req.thin == 0 {
        return Err(CliError::Config("thin must be positive".into()));
    }
    let state = match req.kind {
        SamplerKind::Thermal => thermal_adversary_state(cfg),
        _ => build_experiment_state(cfg),
    }
    .during("building the experiment state")?;
    match req.kind {
        SamplerKind::Mis => mis(&state, req, exec),
        SamplerKind::Chain => {
            let inner = inner_exec(exec);
            let sampler = ChainRuleSampler::from_config(&state, cfg, inner).during("preparing the chain-rule sampler")?;
            match req.detector {
                Detector::Pnrd => independent(req, "chain-pnrd", exec, |g| sampler.sample_pnrd(g)),
                Detector::Threshold => {
                    independent(req, "chain-threshold", exec, |g| Ok(sampler.sample_threshold(g)?.map(|c| c.pattern())))
                }
            }
        }
        SamplerKind::Ips => {
            let ens = Ensemble::new(&state).during("decomposing the state")?;
            independent(req, "ips", exec, |g| Ok(Some(detect(ens.ips_sample(g), req.detector))))
        }
        SamplerKind::Thermal => {
            let th = ThermalSampler::new(&state).during("preparing the thermal sampler")?;
            independent(req, "thermal", exec, |g| Ok(Some(detect(th.sample(g), req.detector))))
        }
    }
}

fn inner_exec(exec: &Exec) -> Exec {
    // Parallelism goes across samples; kernels inside one sample run serially
    // but keep the caller's guard.
    match exec.term_limit() {
        Some(limit) => Exec::sequential().with_term_limit(limit),
        None => Exec::sequential(),
    }
}

fn detect(counts: Vec<usize>, detector: Detector) -> Vec<usize> {
    match detector {
        Detector::Pnrd => counts,
        Detector::Threshold => collapse(&counts).into_iter().map(usize::from).collect(),
    }
}

fn independent<F>(req: &SampleRequest, tag: &str, exec: &Exec, draw: F) -> CliResult<SampleRun>
where
    F: Fn(&mut GbsRng) -> Result<Option<Vec<usize>>> + Sync + Send,
{
    independent_capped(req, tag, exec, POST_SELECT_CAP, draw)
}

fn independent_capped<F>(req: &SampleRequest, tag: &str, exec: &Exec, cap: u64, draw: F) -> CliResult<SampleRun>
where
    F: Fn(&mut GbsRng) -> Result<Option<Vec<usize>>> + Sync + Send,
{
    let mut samples = Vec::with_capacity(req.num_samples);
    let mut next = 0u64;
    while samples.len() < req.num_samples {
        if next >= cap {
            return Err(CliError::Guard(format!(
                "{} of {} samples after {next} attempts; the post-selection is too rare",
                samples.len(),
                req.num_samples
            )));
        }
        let round = exec.map(ROUND, |k| draw(&mut rng::stream(req.seed, tag, next + k as u64)));
        for (k, out) in round.into_iter().enumerate() {
            let kept = out.during("drawing a sample")?.filter(|s| req.post_select.is_none_or(|t| s.iter().sum::<usize>() == t));
            if let Some(s) = kept {
                samples.push(s);
                if samples.len() == req.num_samples {
                    next += k as u64 + 1;
                    return Ok(SampleRun { samples, draws: next, steps: None });
                }
            }
        }
        next += ROUND as u64;
    }
    Ok(SampleRun { samples, draws: next, steps: None })
}

fn mis(state: &GaussianState, req: &SampleRequest, exec: &Exec) -> CliResult<SampleRun> {
    let length = req.chain_length.unwrap_or(req.burn_in + req.num_samples.saturating_sub(1) * req.thin + 1);
    let mut g = rng::stream(req.seed, "mis", 0);
    let (patterns, steps): (Vec<Vec<usize>>, Vec<StepRecord>) = match req.detector {
        Detector::Pnrd => {
            let chain = MisPnrd::new(state, req.kernel, exec.clone()).during("preparing the MIS chain")?;
            split(chain.run(length, req.post_select, &mut g).during("running the MIS chain")?, |s| s)
        }
        Detector::Threshold => {
            let chain = MisThreshold::new(state, req.kernel, exec.clone()).during("preparing the MIS chain")?;
            split(chain.run(length, req.post_select, &mut g).during("running the MIS chain")?, |s| s.pattern())
        }
    };
    let samples = patterns.into_iter().skip(req.burn_in).step_by(req.thin).take(req.num_samples).collect();
    Ok(SampleRun { samples, draws: length as u64, steps: Some(steps) })
}

fn split<T>(steps: Vec<MisStep<T>>, pattern: impl Fn(T) -> Vec<usize>) -> (Vec<Vec<usize>>, Vec<StepRecord>) {
    steps
        .into_iter()
        .map(|s| {
            let rec = StepRecord { accepted: s.accepted, log_target: s.log_target, log_proposal: s.log_proposal };
            (pattern(s.sample), rec)
        })
        .unzip()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn request(kind: SamplerKind, detector: Detector) -> SampleRequest {
        SampleRequest {
            kind,
            detector,
            num_samples: 50,
            chain_length: None,
            burn_in: 5,
            thin: 2,
            post_select: Some(2),
            kernel: Kernel::Fds,
            seed: 3,
        }
    }

    #[test]
    fn every_sampler_honours_post_selection() {
        let cfg = ExperimentConfig::benchmark(4, 0.8, 0.6, 1);
        for kind in [SamplerKind::Chain, SamplerKind::Mis, SamplerKind::Ips, SamplerKind::Thermal] {
            for detector in [Detector::Pnrd, Detector::Threshold] {
                let run = run(&cfg, &request(kind, detector), &Exec::sequential()).unwrap();
                assert_eq!(run.samples.len(), 50, "{kind} {detector}");
                assert!(run.samples.iter().all(|s| s.len() == 4 && s.iter().sum::<usize>() == 2));
                if detector == Detector::Threshold {
                    assert!(run.samples.iter().flatten().all(|&v| v <= 1));
                }
            }
        }
    }

    #[test]
    fn worker_count_does_not_change_samples() {
        let cfg = ExperimentConfig::benchmark(4, 0.8, 0.6, 1);
        let req = request(SamplerKind::Chain, Detector::Pnrd);
        let a = run(&cfg, &req, &Exec::sequential()).unwrap();
        let b = run(&cfg, &req, &Exec::with_workers(3).unwrap()).unwrap();
        assert_eq!(a.samples, b.samples);
        assert_eq!(a.draws, b.draws);
    }

    #[test]
    fn mis_thins_after_burn_in() {
        let cfg = ExperimentConfig::benchmark(4, 0.8, 0.6, 1);
        let req = SampleRequest { post_select: None, ..request(SamplerKind::Mis, Detector::Pnrd) };
        let run = run(&cfg, &req, &Exec::sequential()).unwrap();
        assert_eq!(run.steps.as_ref().unwrap().len(), 5 + 49 * 2 + 1);
        assert_eq!(run.samples.len(), 50);
    }

    #[test]
    fn impossible_post_selection_trips_the_guard() {
        let req = SampleRequest { num_samples: 1, ..request(SamplerKind::Ips, Detector::Pnrd) };
        let out = independent_capped(&req, "t", &Exec::sequential(), 2000, |_| Ok(Some(vec![0, 0])));
        assert!(matches!(out, Err(CliError::Guard(_))));
    }
}
