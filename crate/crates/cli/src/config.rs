//! Run configuration: a TOML file with `[experiment]`, `[sampler]`,
//! `[kernel]` and `[validate]` sections. Unknown keys are rejected.
//!
//! Defaults are filled in by [`RunConfig::resolve`], and the digest is taken
//! over the resolved form, so two files that differ only in spelled-out
//! defaults share a digest.

use std::path::Path;

use gbs_core::gaussian::{Detector, ExperimentConfig, UnitarySpec};
use gbs_core::lhaf::Kernel;
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub sampler: SamplerSection,
    #[serde(default)]
    pub kernel: KernelSection,
    #[serde(default)]
    pub validate: ValidateSection,
}

/// One squeezing value for every source, or one per source.
#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(untagged)]
pub enum Squeezing {
    Uniform(f64),
    PerSource(Vec<f64>),
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub modes: usize,
    pub squeezing: Squeezing,
    /// Two-mode sources; defaults to `modes / 4`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sources: Option<usize>,
    pub transmission: f64,
    /// Seed of a Haar interferometer; defaults to `rng_seed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unitary_seed: Option<u64>,
    /// Explicit interferometer as rows of `[re, im]` pairs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unitary: Option<Vec<Vec<[f64; 2]>>>,
    #[serde(default = "default_detector")]
    pub detector: String,
    #[serde(default = "default_n_cut")]
    pub n_cut: usize,
    #[serde(default = "default_sub_detectors")]
    pub sub_detectors: usize,
    /// Defaults to `4 * modes`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub global_cutoff: Option<usize>,
    #[serde(default)]
    pub rng_seed: u64,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSection {
    #[serde(default = "default_sampler")]
    pub kind: String,
    #[serde(default = "default_num_samples")]
    pub num_samples: usize,
    /// MIS steps; defaults to `burn_in + num_samples * thin`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain_length: Option<usize>,
    #[serde(default)]
    pub burn_in: usize,
    #[serde(default = "one")]
    pub thin: usize,
    /// Keep only samples with this many photons (PNRD) or clicks (threshold).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub post_select: Option<usize>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    #[serde(default = "default_kernel")]
    pub name: String,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<String>,
    /// Fail the run if the statistic lands on the wrong side of this value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    #[serde(default = "default_max_burn")]
    pub max_burn: usize,
    #[serde(default = "default_chains")]
    pub chains: usize,
    #[serde(default = "default_sample_size")]
    pub sample_size: usize,
    #[serde(default = "default_thin_grid")]
    pub thin_grid: Vec<usize>,
    #[serde(default = "default_bins")]
    pub bins: usize,
}

fn default_detector() -> String {
    "pnrd".into()
}
fn default_n_cut() -> usize {
    12
}
fn default_sub_detectors() -> usize {
    12
}
fn default_sampler() -> String {
    "chain".into()
}
fn default_num_samples() -> usize {
    1000
}
fn one() -> usize {
    1
}
fn default_kernel() -> String {
    "fds".into()
}
fn default_max_burn() -> usize {
    100
}
fn default_chains() -> usize {
    1000
}
fn default_sample_size() -> usize {
    200
}
fn default_thin_grid() -> Vec<usize> {
    (1..=10).chain((15..=100).step_by(5)).collect()
}
fn default_bins() -> usize {
    20
}

impl Default for SamplerSection {
    fn default() -> Self {
        toml::from_str("").expect("all sampler keys have defaults")
    }
}

impl Default for KernelSection {
    fn default() -> Self {
        toml::from_str("").expect("all kernel keys have defaults")
    }
}

impl Default for ValidateSection {
    fn default() -> Self {
        toml::from_str("").expect("all validate keys have defaults")
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.resolve()
    }

    /// Fill every defaulted field and check the result.
    pub fn resolve(mut self) -> CliResult<Self> {
        let e = &mut self.experiment;
        let sources = match (&e.squeezing, e.sources) {
            (Squeezing::PerSource(v), Some(s)) if v.len() != s => {
                return Err(CliError::Config(format!("{} squeezing values for {s} sources", v.len())));
            }
            (Squeezing::PerSource(v), _) => v.len(),
            (Squeezing::Uniform(_), s) => s.unwrap_or(e.modes / 4),
        };
        e.sources = Some(sources);
        e.global_cutoff.get_or_insert(4 * e.modes);
        if e.unitary.is_some() && e.unitary_seed.is_some() {
            return Err(CliError::Config("give either `unitary` or `unitary_seed`, not both".into()));
        }
        if e.unitary.is_none() {
            e.unitary_seed.get_or_insert(e.rng_seed);
        }
        self.experiment.detector = self.detector()?.to_string();
        self.kernel.name = self.kernel()?.to_string();
        self.sampler_kind()?;
        if self.sampler.thin == 0 {
            return Err(CliError::Config("thin must be positive".into()));
        }
        self.experiment()?.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(self)
    }

    pub fn detector(&self) -> CliResult<Detector> {
        self.experiment.detector.parse().map_err(|e: gbs_core::GbsError| CliError::Config(e.to_string()))
    }

    pub fn kernel(&self) -> CliResult<Kernel> {
        self.kernel.name.parse().map_err(|e: gbs_core::GbsError| CliError::Config(e.to_string()))
    }

    pub fn sampler_kind(&self) -> CliResult<SamplerKind> {
        self.sampler.kind.parse()
    }

    pub fn experiment(&self) -> CliResult<ExperimentConfig> {
        let e = &self.experiment;
        let sources = e.sources.unwrap_or(e.modes / 4);
        let squeezing = match &e.squeezing {
            Squeezing::Uniform(r) => vec![*r; sources],
            Squeezing::PerSource(v) => v.clone(),
        };
        let unitary = match &e.unitary {
            Some(rows) => UnitarySpec::Explicit(parse_unitary(rows, e.modes)?),
            None => UnitarySpec::Haar { seed: e.unitary_seed.unwrap_or(e.rng_seed) },
        };
        Ok(ExperimentConfig {
            modes: e.modes,
            squeezing,
            transmission: e.transmission,
            unitary,
            detector: self.detector()?,
            n_cut: e.n_cut,
            sub_detectors: e.sub_detectors,
            global_cutoff: e.global_cutoff.unwrap_or(4 * e.modes),
            rng_seed: e.rng_seed,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// SHA-256 of the resolved config, hex encoded.
    pub fn digest(&self) -> String {
        hex_digest(self.to_toml().as_bytes())
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn parse_unitary(rows: &[Vec<[f64; 2]>], modes: usize) -> CliResult<DMatrix<C64>> {
    if rows.len() != modes || rows.iter().any(|r| r.len() != modes) {
        return Err(CliError::Config(format!("unitary must be {modes}×{modes}")));
    }
    Ok(DMatrix::from_fn(modes, modes, |i, j| C64::new(rows[i][j][0], rows[i][j][1])))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SamplerKind {
    /// Exact mode-by-mode sampling.
    Chain,
    /// Independence chain with the IPS proposal.
    Mis,
    /// The IPS proposal on its own.
    Ips,
    /// The thermal adversary of the experiment.
    Thermal,
}

impl std::str::FromStr for SamplerKind {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "chain" => Ok(Self::Chain),
            "mis" => Ok(Self::Mis),
            "ips" => Ok(Self::Ips),
            "thermal" => Ok(Self::Thermal),
            other => Err(CliError::Config(format!("unknown sampler `{other}`"))),
        }
    }
}

impl std::fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Chain => "chain",
            Self::Mis => "mis",
            Self::Ips => "ips",
            Self::Thermal => "thermal",
        })
    }
}
