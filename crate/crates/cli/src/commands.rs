//! Argument parsing and the subcommand bodies.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use gbs_core::clicks::click_probability_exact;
use gbs_core::gaussian::{build_experiment_state, thermal_adversary_state, GaussianState};
use gbs_core::lhaf::{lhaf_timed, Kernel, ReducedMatrix};
use gbs_core::samplers::Ensemble;
use gbs_core::Exec;
use serde::Serialize;

use crate::bench;
use crate::config::{hex_digest, RunConfig};
use crate::error::{CliError, CliResult, Context};
use crate::files::{load_matrix, parse_pattern, Csv, Header, SampleFile, StateFixture};
use crate::sample::{self, guarded, SampleRequest};
use crate::validate::{self, ChainSpec, Test};

#[derive(Debug, Parser)]
#[command(name = "gbs", version, about = "Classical simulation of Gaussian boson sampling")]
pub struct Cli {
    /// Worker threads; defaults to the number of logical cores.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Master seed; overrides `rng_seed` from the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Allow kernel calls above 2^30 terms and benchmark sizes above the limit.
    #[arg(long, global = true)]
    pub force: bool,
    /// Write a run manifest (digest, seed, parameters, timing) here.
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the experiment state and write it as a fixture.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Write the thermal adversary of the experiment instead.
        #[arg(long)]
        thermal: bool,
    },
    /// Draw detection patterns.
    Sample(SampleArgs),
    /// Evaluate one loop hafnian.
    Lhaf {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long, default_value = "fds")]
        kernel: String,
        /// Repetition of each index, e.g. `2,1,0,3`; all ones by default.
        #[arg(long)]
        pattern: Option<String>,
    },
    /// Exact probability of a click pattern.
    Clickprob {
        #[arg(long, conflicts_with = "config", required_unless_present = "config")]
        state: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Click pattern, e.g. `1,0,1,1`.
        #[arg(long)]
        clicks: String,
    },
    /// Compare samples or chains with exact references.
    Validate(ValidateArgs),
    /// Time the kernels.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// chain, mis, ips or thermal.
    #[arg(long)]
    pub sampler: Option<String>,
    /// pnrd or threshold.
    #[arg(long)]
    pub detector: Option<String>,
    #[arg(long)]
    pub num_samples: Option<usize>,
    #[arg(long)]
    pub chain_length: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    #[arg(long)]
    pub post_select: Option<usize>,
    /// Sample file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-step chain records (MIS only).
    #[arg(long)]
    pub diagnostics: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// tvd, chog, tpc, burnin-likelihood, burnin-accept or thin.
    #[arg(long)]
    pub test: Option<String>,
    /// Config for the chain diagnostics, or for building the reference state.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub trial: Option<PathBuf>,
    #[arg(long)]
    pub adversary: Option<PathBuf>,
    /// Reference state fixture; built from the config when absent.
    #[arg(long)]
    pub state: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Fail if the statistic is on the wrong side of this value.
    #[arg(long)]
    pub bound: Option<f64>,
    #[arg(long)]
    pub post_select: Option<usize>,
    #[arg(long)]
    pub max_burn: Option<usize>,
    #[arg(long)]
    pub chains: Option<usize>,
    #[arg(long)]
    pub sample_size: Option<usize>,
    /// Steps per chain for the thinning analysis.
    #[arg(long, default_value_t = gbs_core::validation::MIN_THINNING_CHAIN)]
    pub length: usize,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value = "fds")]
    pub kernel: String,
    /// Photon range `lo..hi`, inclusive.
    #[arg(long, default_value = "8..24")]
    pub n: String,
    #[arg(long, default_value_t = 4)]
    pub step: usize,
    /// Timed calls per N.
    #[arg(long, default_value_t = 3)]
    pub reps: usize,
    /// Time IPS patterns with this many photons from the configured state
    /// instead of the collision-free curve.
    #[arg(long, requires = "config")]
    pub collisions: Option<usize>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// IPS patterns timed in collision mode.
    #[arg(long, default_value_t = 39)]
    pub samples: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Record of one invocation.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub digest: String,
    pub seed: u64,
    pub version: String,
    pub workers: usize,
    pub params: Vec<(String, String)>,
    pub seconds: f64,
}

struct Ctx {
    exec: Exec,
    seed: Option<u64>,
    force: bool,
}

impl Ctx {
    fn load(&self, path: &Path) -> CliResult<RunConfig> {
        let mut cfg = RunConfig::load(path)?;
        if let Some(seed) = self.seed {
            cfg.experiment.rng_seed = seed;
        }
        Ok(cfg)
    }
}

/// Run a parsed command line, returning the manifest of the run.
pub fn run(cli: Cli) -> CliResult<RunManifest> {
    let workers = match cli.workers {
        Some(w) => w,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let exec = guarded(Exec::with_workers(workers).map_err(|e| CliError::Config(e.to_string()))?, cli.force);
    let ctx = Ctx { exec, seed: cli.seed, force: cli.force };
    let start = Instant::now();
    let (command, digest, seed, params) = match cli.command {
        Command::Simulate { config, out, thermal } => simulate(&ctx, &config, &out, thermal)?,
        Command::Sample(args) => sample(&ctx, args)?,
        Command::Lhaf { matrix, kernel, pattern } => lhaf(&ctx, &matrix, &kernel, pattern.as_deref())?,
        Command::Clickprob { state, config, clicks } => clickprob(&ctx, state.as_deref(), config.as_deref(), &clicks)?,
        Command::Validate(args) => validate(&ctx, args)?,
        Command::Bench(args) => bench(&ctx, args)?,
    };
    let manifest = RunManifest {
        command: command.into(),
        digest,
        seed,
        version: env!("CARGO_PKG_VERSION").into(),
        workers,
        params,
        seconds: start.elapsed().as_secs_f64(),
    };
    if let Some(path) = &cli.manifest {
        let text = toml::to_string(&manifest).expect("manifest serialises");
        std::fs::write(path, text).map_err(CliError::io(path))?;
    }
    Ok(manifest)
}

type Outcome = (&'static str, String, u64, Vec<(String, String)>);

fn param(k: &str, v: impl ToString) -> (String, String) {
    (k.into(), v.to_string())
}

fn simulate(ctx: &Ctx, config: &Path, out: &Path, thermal: bool) -> CliResult<Outcome> {
    let cfg = ctx.load(config)?;
    let digest = cfg.digest();
    let exp = cfg.experiment()?;
    let state = if thermal { thermal_adversary_state(&exp) } else { build_experiment_state(&exp) }
        .during("building the experiment state")?;
    StateFixture::from_state(&state, &digest).save(out)?;
    let photons: f64 = state.mean_photons().iter().sum();
    println!("modes {} mean photons {photons:.6}", state.modes());
    Ok(("simulate", digest, cfg.experiment.rng_seed, vec![param("thermal", thermal)]))
}

fn sample(ctx: &Ctx, args: SampleArgs) -> CliResult<Outcome> {
    let mut cfg = ctx.load(&args.config)?;
    let s = &mut cfg.sampler;
    if let Some(v) = args.sampler {
        s.kind = v;
    }
    if let Some(v) = args.num_samples {
        s.num_samples = v;
    }
    if args.chain_length.is_some() {
        s.chain_length = args.chain_length;
    }
    if let Some(v) = args.burn_in {
        s.burn_in = v;
    }
    if let Some(v) = args.thin {
        s.thin = v;
    }
    if args.post_select.is_some() {
        s.post_select = args.post_select;
    }
    if let Some(v) = args.detector {
        cfg.experiment.detector = v;
    }
    let cfg = cfg.resolve()?;
    let digest = cfg.digest();
    let seed = cfg.experiment.rng_seed;
    let req = SampleRequest {
        kind: cfg.sampler_kind()?,
        detector: cfg.detector()?,
        num_samples: cfg.sampler.num_samples,
        chain_length: cfg.sampler.chain_length,
        burn_in: cfg.sampler.burn_in,
        thin: cfg.sampler.thin,
        post_select: cfg.sampler.post_select,
        kernel: cfg.kernel()?,
        seed,
    };
    let run = sample::run(&cfg.experiment()?, &req, &ctx.exec)?;
    let header = Header::new("samples", &digest)
        .with("seed", seed)
        .with("sampler", req.kind)
        .with("detector", req.detector)
        .with("modes", cfg.experiment.modes)
        .with("post_select", req.post_select.map_or("none".into(), |t| t.to_string()));
    let file = SampleFile { header: header.clone(), samples: run.samples };
    match &args.out {
        Some(path) => file.save(path)?,
        None => print!("{}", file.render()),
    }
    if let (Some(path), Some(steps)) = (&args.diagnostics, &run.steps) {
        let mut csv = Csv::new(header.with("gbs", "chain"), &["step", "accepted", "log_target", "log_proposal"]);
        for (i, s) in steps.iter().enumerate() {
            csv.row(&[&i, &u8::from(s.accepted), &s.log_target, &s.log_proposal]);
        }
        csv.save(path)?;
    }
    let params = vec![
        param("sampler", req.kind),
        param("detector", req.detector),
        param("num_samples", file.samples.len()),
        param("draws", run.draws),
    ];
    Ok(("sample", digest, seed, params))
}

fn parse_kernel(name: &str) -> CliResult<Kernel> {
    name.parse().map_err(|e: gbs_core::GbsError| CliError::Config(e.to_string()))
}

fn lhaf(ctx: &Ctx, matrix: &Path, kernel: &str, pattern: Option<&str>) -> CliResult<Outcome> {
    let kernel = parse_kernel(kernel)?;
    let m = load_matrix(matrix)?;
    let n = m.nrows();
    let pattern = match pattern {
        Some(p) => parse_pattern(p)?,
        None => vec![1; n],
    };
    let loops: Vec<_> = m.diagonal().iter().copied().collect();
    let input = ReducedMatrix::new(m.clone(), loops, pattern.clone()).map_err(|e| CliError::Config(e.to_string()))?;
    let out = lhaf_timed(&input, kernel, &ctx.exec).during("loop hafnian")?;
    println!("value {:e} {:e}", out.value.re, out.value.im);
    println!("terms {}", out.terms);
    println!("seconds {:.6}", out.seconds);
    let digest = hex_digest(format!("{}|{kernel}|{pattern:?}", crate::files::render_matrix(&m)).as_bytes());
    Ok(("lhaf", digest, 0, vec![param("kernel", kernel), param("terms", out.terms), param("kernel_seconds", out.seconds)]))
}

fn reference_state(ctx: &Ctx, state: Option<&Path>, config: Option<&Path>) -> CliResult<(GaussianState, String, u64)> {
    match (state, config) {
        (Some(path), _) => {
            let f = StateFixture::load(path)?;
            Ok((f.state()?, f.digest, ctx.seed.unwrap_or(0)))
        }
        (None, Some(path)) => {
            let cfg = ctx.load(path)?;
            let s = build_experiment_state(&cfg.experiment()?).during("building the experiment state")?;
            Ok((s, cfg.digest(), cfg.experiment.rng_seed))
        }
        (None, None) => Err(CliError::Config("give --state or --config".into())),
    }
}

fn clickprob(ctx: &Ctx, state: Option<&Path>, config: Option<&Path>, clicks: &str) -> CliResult<Outcome> {
    let (state, digest, seed) = reference_state(ctx, state, config)?;
    let pattern = parse_pattern(clicks)?;
    if pattern.len() != state.modes() || pattern.iter().any(|&c| c > 1) {
        return Err(CliError::Config(format!("click pattern must be {} zeros and ones", state.modes())));
    }
    let c: Vec<bool> = pattern.iter().map(|&v| v == 1).collect();
    let p = click_probability_exact(&state, &c, &ctx.exec).during("click probability")?;
    println!("{p:e}");
    Ok(("clickprob", digest, seed, vec![param("clicks", clicks)]))
}

fn validate(ctx: &Ctx, args: ValidateArgs) -> CliResult<Outcome> {
    let cfg = args.config.as_deref().map(|p| ctx.load(p)).transpose()?;
    let defaults = cfg.as_ref().map(|c| c.validate.clone()).unwrap_or_default();
    let test: Test = args
        .test
        .or(defaults.test.clone())
        .ok_or_else(|| CliError::Config("give --test or [validate] test".into()))?
        .parse()?;
    let (state, digest, seed) = reference_state(ctx, args.state.as_deref(), args.config.as_deref())?;
    let kernel = cfg.as_ref().map_or(Ok(Kernel::Fds), RunConfig::kernel)?;
    let total = args.post_select.or(cfg.as_ref().and_then(|c| c.sampler.post_select));
    let bound = args.bound.or(defaults.bound);
    let header = Header::new(test_name(test), &digest).with("seed", seed);
    let load = |p: &Option<PathBuf>, what: &str| -> CliResult<SampleFile> {
        SampleFile::load(p.as_deref().ok_or_else(|| CliError::Config(format!("this test needs --{what}")))?)
    };
    let spec = ChainSpec { state: &state, kernel, seed, total };
    let max_burn = args.max_burn.unwrap_or(defaults.max_burn);
    let report = match test {
        Test::Tvd => validate::tvd_test(&load(&args.trial, "trial")?, &state, kernel, &ctx.exec, header)?,
        Test::Chog => validate::chog_test(&load(&args.trial, "trial")?, &load(&args.adversary, "adversary")?, &state, &ctx.exec, header)?,
        Test::Tpc => {
            let adv = args.adversary.as_ref().map(|p| SampleFile::load(p)).transpose()?;
            validate::tpc_test(&load(&args.trial, "trial")?, adv.as_ref(), &state, defaults.bins, header)?
        }
        Test::BurninLikelihood => {
            validate::burnin_likelihood_test(&spec, max_burn, args.sample_size.unwrap_or(defaults.sample_size), &ctx.exec, header)?
        }
        Test::BurninAccept => validate::burnin_accept_test(&spec, max_burn, args.chains.unwrap_or(defaults.chains), &ctx.exec, header)?,
        Test::Thin => {
            let detector = cfg.as_ref().map_or(Ok(gbs_core::gaussian::Detector::Pnrd), RunConfig::detector)?;
            let chains = args.chains.unwrap_or(4);
            let flags = validate::acceptance_flags(&spec, detector, chains, args.length, &ctx.exec)?;
            validate::thin_test(&flags, &defaults.thin_grid, header)?
        }
    };
    match &args.out {
        Some(path) => report.csv.save(path)?,
        None => print!("{}", report.csv.render()),
    }
    eprintln!("{}", report.summary);
    if let Some(b) = bound {
        check_bound(test, report.statistic, b)?;
    }
    Ok(("validate", digest, seed, vec![param("test", test_name(test)), param("summary", &report.summary)]))
}

fn test_name(t: Test) -> &'static str {
    match t {
        Test::Tvd => "tvd",
        Test::Chog => "chog",
        Test::Tpc => "tpc",
        Test::BurninLikelihood => "burnin-likelihood",
        Test::BurninAccept => "burnin-accept",
        Test::Thin => "thin",
    }
}

/// TVD, burn-in and thinning must stay at or below the bound; CHOG ratio
/// and KS p-value must reach it.
fn check_bound(test: Test, statistic: Option<f64>, bound: f64) -> CliResult<()> {
    let Some(s) = statistic else {
        return Err(CliError::Check(format!("{} produced no statistic to compare with {bound}", test_name(test))));
    };
    let ok = match test {
        Test::Tvd | Test::BurninLikelihood | Test::BurninAccept | Test::Thin => s <= bound,
        Test::Chog | Test::Tpc => s >= bound,
    };
    if ok {
        Ok(())
    } else {
        Err(CliError::Check(format!("{} statistic {s} violates bound {bound}", test_name(test))))
    }
}

fn parse_range(text: &str, step: usize) -> CliResult<Vec<usize>> {
    let bad = || CliError::Config(format!("photon range `{text}` is not `lo..hi`"));
    let (lo, hi) = text.split_once("..").ok_or_else(bad)?;
    let lo: usize = lo.trim().parse().map_err(|_| bad())?;
    let hi: usize = hi.trim_start_matches('=').trim().parse().map_err(|_| bad())?;
    if step == 0 || lo > hi {
        return Err(bad());
    }
    Ok((lo..=hi).step_by(step).collect())
}

fn bench(ctx: &Ctx, args: BenchArgs) -> CliResult<Outcome> {
    let kernel = parse_kernel(&args.kernel)?;
    let seed = ctx.seed.unwrap_or(0);
    let (digest, csv, params) = match args.collisions {
        None => {
            let ns = parse_range(&args.n, args.step)?;
            bench::check_range(&ns, ctx.force)?;
            let digest = hex_digest(format!("bench|{kernel}|{ns:?}|{}|{seed}", args.reps).as_bytes());
            let rows = bench::no_collision(&ns, args.reps, kernel, seed, &ctx.exec)?;
            let exponent = bench::fitted_exponent(&rows)?;
            let mut csv = Csv::new(Header::new("bench", &digest).with("seed", seed), &["N", "pattern_hash", "kernel", "term_count", "seconds"]);
            for r in &rows {
                csv.row(&[&r.n, &r.pattern_hash, &r.kernel, &r.terms, &r.seconds]);
            }
            csv.note("fitted_exponent", exponent);
            eprintln!("fitted exponent {exponent:.4} per photon (ln 2 / 2 = {:.4})", std::f64::consts::LN_2 / 2.0);
            (digest, csv, vec![param("kernel", kernel), param("fitted_exponent", exponent)])
        }
        Some(n) => {
            bench::check_range(&[n], ctx.force)?;
            let cfg = ctx.load(args.config.as_deref().expect("clap requires --config"))?;
            let digest = cfg.digest();
            let state = build_experiment_state(&cfg.experiment()?).during("building the experiment state")?;
            let ens = Ensemble::new(&state).during("decomposing the state")?;
            let rows = bench::collisions(&ens, n, args.samples, kernel, cfg.experiment.rng_seed, &ctx.exec)?;
            let median = bench::median_speedup(&rows);
            let mut csv = Csv::new(
                Header::new("bench-collisions", &digest).with("seed", cfg.experiment.rng_seed),
                &["N", "pattern_hash", "plain_terms", "plain_seconds", "aware_terms", "aware_seconds", "speedup"],
            );
            for r in &rows {
                csv.row(&[
                    &n,
                    &bench::pattern_hash(&r.pattern),
                    &r.plain_terms,
                    &r.plain_seconds,
                    &r.aware_terms,
                    &r.aware_seconds,
                    &r.speedup(),
                ]);
            }
            csv.note("median_speedup", median);
            eprintln!("median speedup {median:.3} over {} patterns with {n} photons", rows.len());
            (digest, csv, vec![param("kernel", kernel), param("median_speedup", median)])
        }
    };
    match &args.out {
        Some(path) => csv.save(path)?,
        None => print!("{}", csv.render()),
    }
    Ok(("bench", digest, seed, params))
}
