//! On-disk formats.
//!
//! Sample files hold one pattern per line as space-separated integers, after
//! `#`-prefixed `key: value` header lines. CSV files use the same comment
//! header followed by a column line. State fixtures are TOML. Matrix files
//! are whitespace-separated: the dimension, then row-major `re im` pairs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use gbs_core::gaussian::{Detector, GaussianState};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult, Context};

/// Ordered `key: value` header lines.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Header(pub Vec<(String, String)>);

impl Header {
    pub fn new(kind: &str, digest: &str) -> Self {
        Self(vec![("gbs".into(), kind.into()), ("digest".into(), digest.into())])
    }

    /// Set `key`, replacing an earlier value in place.
    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        let value = value.to_string();
        match self.0.iter_mut().find(|(k, _)| k == key) {
            Some(slot) => slot.1 = value,
            None => self.0.push((key.into(), value)),
        }
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn render(&self, out: &mut String) {
        for (k, v) in &self.0 {
            writeln!(out, "# {k}: {v}").unwrap();
        }
    }

    fn parse_line(&mut self, line: &str) {
        if let Some((k, v)) = line.trim_start_matches('#').trim().split_once(": ") {
            self.0.push((k.trim().into(), v.trim().into()));
        }
    }
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(CliError::io(path))
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(CliError::io(path))
}

/// Detection patterns plus the header they were written with.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleFile {
    pub header: Header,
    pub samples: Vec<Vec<usize>>,
}

impl SampleFile {
    pub fn render(&self) -> String {
        let mut out = String::new();
        self.header.render(&mut out);
        for s in &self.samples {
            let line: Vec<String> = s.iter().map(usize::to_string).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        write(path, &self.render())
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let mut header = Header::default();
        let mut samples: Vec<Vec<usize>> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.starts_with('#') {
                header.parse_line(line);
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let row = line
                .split_whitespace()
                .map(str::parse)
                .collect::<Result<Vec<usize>, _>>()
                .map_err(|e| CliError::Config(format!("sample line {}: {e}", i + 1)))?;
            if samples.first().is_some_and(|f| f.len() != row.len()) {
                return Err(CliError::Config(format!("sample line {} has {} modes", i + 1, row.len())));
            }
            samples.push(row);
        }
        Ok(Self { header, samples })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        Self::parse(&read(path)?)
    }

    /// Detector named in the header, PNRD if absent.
    pub fn detector(&self) -> CliResult<Detector> {
        self.header
            .get("detector")
            .unwrap_or("pnrd")
            .parse()
            .map_err(|e: gbs_core::GbsError| CliError::Config(e.to_string()))
    }

    pub fn clicks(&self) -> Vec<Vec<bool>> {
        self.samples.iter().map(|s| s.iter().map(|&n| n > 0).collect()).collect()
    }
}

/// A CSV table with a comment header.
#[derive(Clone, Debug)]
pub struct Csv {
    header: Header,
    columns: Vec<String>,
    rows: Vec<String>,
    footer: Vec<String>,
}

impl Csv {
    pub fn new(header: Header, columns: &[&str]) -> Self {
        Self { header, columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new(), footer: Vec::new() }
    }

    pub fn row(&mut self, cells: &[&dyn std::fmt::Display]) {
        debug_assert_eq!(cells.len(), self.columns.len());
        let cells: Vec<String> = cells.iter().map(|c| c.to_string()).collect();
        self.rows.push(cells.join(","));
    }

    /// A trailing `# key: value` line.
    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.footer.push(format!("# {key}: {}", value.to_string()));
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        self.header.render(&mut out);
        writeln!(out, "{}", self.columns.join(",")).unwrap();
        for r in self.rows.iter().chain(&self.footer) {
            writeln!(out, "{r}").unwrap();
        }
        out
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        write(path, &self.render())
    }
}

/// A Gaussian state as written by `simulate`.
#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct StateFixture {
    pub digest: String,
    pub modes: usize,
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
}

impl StateFixture {
    pub fn from_state(state: &GaussianState, digest: &str) -> Self {
        let cov = state.cov();
        Self {
            digest: digest.into(),
            modes: state.modes(),
            mean: state.mean().iter().copied().collect(),
            cov: cov.row_iter().map(|r| r.iter().copied().collect()).collect(),
        }
    }

    pub fn state(&self) -> CliResult<GaussianState> {
        let d = 2 * self.modes;
        if self.mean.len() != d || self.cov.len() != d || self.cov.iter().any(|r| r.len() != d) {
            return Err(CliError::Config(format!("state fixture shapes do not match {} modes", self.modes)));
        }
        let mean = DVector::from_vec(self.mean.clone());
        let cov = DMatrix::from_fn(d, d, |i, j| self.cov[i][j]);
        GaussianState::new(mean, cov).during("loading state fixture")
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        let body = toml::to_string(self).expect("fixture serialises");
        write(path, &format!("# gbs: state\n# digest: {}\n{body}", self.digest))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        toml::from_str(&read(path)?).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

/// Parse a matrix file: `N` followed by `N²` row-major `re im` pairs.
pub fn parse_matrix(text: &str) -> CliResult<DMatrix<C64>> {
    let tokens: Vec<&str> =
        text.lines().filter(|l| !l.trim_start().starts_with('#')).flat_map(str::split_whitespace).collect();
    let bad = |msg: String| CliError::Config(format!("matrix file: {msg}"));
    let (first, rest) = tokens.split_first().ok_or_else(|| bad("empty".into()))?;
    let n: usize = first.parse().map_err(|e| bad(format!("dimension: {e}")))?;
    if rest.len() != 2 * n * n {
        return Err(bad(format!("expected {} numbers after N = {n}, found {}", 2 * n * n, rest.len())));
    }
    let vals = rest.iter().map(|t| t.parse::<f64>()).collect::<Result<Vec<_>, _>>().map_err(|e| bad(e.to_string()))?;
    Ok(DMatrix::from_fn(n, n, |i, j| {
        let k = 2 * (i * n + j);
        C64::new(vals[k], vals[k + 1])
    }))
}

pub fn load_matrix(path: &Path) -> CliResult<DMatrix<C64>> {
    parse_matrix(&read(path)?)
}

pub fn render_matrix(m: &DMatrix<C64>) -> String {
    let mut out = format!("{}\n", m.nrows());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:e} {:e}", m[(i, j)].re, m[(i, j)].im)).collect();
        writeln!(out, "{}", row.join(" ")).unwrap();
    }
    out
}

/// Parse `2,1,0,3` or `2 1 0 3`.
pub fn parse_pattern(s: &str) -> CliResult<Vec<usize>> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|e| CliError::Config(format!("pattern entry `{t}`: {e}"))))
        .collect()
}
