// SPDX-License-Identifier: MIT OR Apache-2.0

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::SyntacticRole;
use crate::error::{Error, Result};
use crate::patterns::DEFAULT_MAX_GAP;
use crate::projection::ProjectionMethod;
use crate::util::sha256_hex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    /// Pretrained BERT weights from `weights_dir`.
    Reference,
    /// Deterministic hashed stand-in, needs no weights.
    Synthetic,
}

impl FromStr for BackendKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "reference" | "bert" => Ok(Self::Reference),
            "synthetic" => Ok(Self::Synthetic),
            other => Err(Error::Config(format!(
                "unknown backend `{other}` (expected reference or synthetic)"
            ))),
        }
    }
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Reference => "reference",
            Self::Synthetic => "synthetic",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            Self::Csv => "csv",
            Self::Json => "json",
        }
    }
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(Error::Config(format!("unknown format `{other}` (expected csv or json)"))),
        }
    }
}

/// Everything that determines a run. Serialized into every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Dataset file; `None` uses the bundled 40-sentence sample.
    pub dataset: Option<PathBuf>,
    /// Extraction cache; reused when it holds a manifest, created otherwise.
    pub cache_dir: Option<PathBuf>,
    pub backend: BackendKind,
    pub weights_dir: Option<PathBuf>,
    pub roles: Vec<SyntacticRole>,
    /// Embedding layers to analyze; `None` means every layer. Attention
    /// analyses use the subset that is at least 1.
    pub layers: Option<Vec<usize>>,
    pub folds: usize,
    pub seed: u64,
    pub perplexity: f64,
    pub tsne_iterations: usize,
    pub projections: Vec<ProjectionMethod>,
    pub max_gap: usize,
    pub out_dir: PathBuf,
    pub formats: Vec<OutputFormat>,
}

impl Default for RunConfig {
    fn default() -> Self {
        use SyntacticRole::*;
        Self {
            dataset: None,
            cache_dir: None,
            backend: BackendKind::Synthetic,
            weights_dir: None,
            roles: vec![Cls, Subj, Verb, Obj, Det],
            layers: None,
            folds: 5,
            seed: 42,
            perplexity: 30.0,
            tsne_iterations: 1000,
            projections: vec![ProjectionMethod::Mds, ProjectionMethod::Tsne],
            max_gap: DEFAULT_MAX_GAP,
            out_dir: PathBuf::from("ascprobe-out"),
            formats: vec![OutputFormat::Csv],
        }
    }
}

fn parse_list<T: FromStr<Err = E>, E: fmt::Display>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| Error::Config(format!("{key}: {e}"))))
        .collect()
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("{key}: `{value}` is not a valid number")))
}

fn opt_path(value: &str) -> Option<PathBuf> {
    let v = value.trim();
    (!v.is_empty() && v != "none").then(|| PathBuf::from(v))
}

/// Parse a layer list: `all`, `3`, `0-12`, `1,2,7-9`.
pub fn parse_layers(value: &str) -> Result<Option<Vec<usize>>> {
    let v = value.trim();
    if v.eq_ignore_ascii_case("all") || v.is_empty() {
        return Ok(None);
    }
    let mut out = Vec::new();
    for part in v.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (usize, usize) = (parse_num("layers", a)?, parse_num("layers", b)?);
                if a > b {
                    return Err(Error::Config(format!("layers: empty range `{part}`")));
                }
                out.extend(a..=b);
            }
            None => out.push(parse_num("layers", part)?),
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(Some(out))
}

impl RunConfig {
    /// Set one key from its text form, as found in a config file or on the
    /// command line.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key.trim().replace('-', "_").as_str() {
            "dataset" => self.dataset = opt_path(value),
            "cache_dir" => self.cache_dir = opt_path(value),
            "backend" => self.backend = value.parse()?,
            "weights_dir" => self.weights_dir = opt_path(value),
            "roles" => self.roles = parse_list(key, value)?,
            "layers" => self.layers = parse_layers(value)?,
            "folds" => self.folds = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "perplexity" => self.perplexity = parse_num(key, value)?,
            "tsne_iterations" => self.tsne_iterations = parse_num(key, value)?,
            "projections" => {
                self.projections = if value.trim() == "none" {
                    Vec::new()
                } else {
                    parse_list(key, value)?
                }
            }
            "max_gap" => self.max_gap = parse_num(key, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value.trim()),
            "format" | "formats" => self.formats = parse_list(key, value)?,
            other => return Err(Error::Config(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Apply a flat `key = value` file (`#` starts a comment) on top of
    /// `self`.
    pub fn apply_str(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!("line {}: expected `key = value`", i + 1)));
            };
            self.set(key, value)
                .map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::default();
        config.apply_str(&text)?;
        Ok(config)
    }

    /// The config in the same `key = value` form [`RunConfig::apply_str`]
    /// reads.
    pub fn to_kv_string(&self) -> String {
        fn join<T: fmt::Display>(xs: &[T]) -> String {
            xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
        }
        let path = |p: &Option<PathBuf>| p.as_ref().map_or("none".to_string(), |p| p.display().to_string());
        let layers = self.layers.as_ref().map_or("all".to_string(), |l| join(l));
        let formats: Vec<&str> = self.formats.iter().map(|f| f.extension()).collect();
        let projections = if self.projections.is_empty() {
            "none".to_string()
        } else {
            join(&self.projections)
        };
        format!(
            "dataset = {}\ncache_dir = {}\nbackend = {}\nweights_dir = {}\nroles = {}\nlayers = {layers}\n\
             folds = {}\nseed = {}\nperplexity = {}\ntsne_iterations = {}\nprojections = {projections}\n\
             max_gap = {}\nout_dir = {}\nformats = {}\n",
            path(&self.dataset),
            path(&self.cache_dir),
            self.backend,
            path(&self.weights_dir),
            join(&self.roles),
            self.folds,
            self.seed,
            self.perplexity,
            self.tsne_iterations,
            self.max_gap,
            self.out_dir.display(),
            formats.join(","),
        )
    }

    /// SHA-256 of the canonical JSON form, leaving out where outputs and
    /// caches live since those do not affect any value.
    pub fn digest(&self) -> String {
        let mut canonical = self.clone();
        canonical.out_dir = PathBuf::new();
        canonical.cache_dir = None;
        canonical.formats.clear();
        sha256_hex(&serde_json::to_vec(&canonical).expect("config serializes"))
    }

    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::Config(format!("folds must be at least 2, got {}", self.folds)));
        }
        if !(self.perplexity > 0.0) {
            return Err(Error::Config("perplexity must be positive".into()));
        }
        if self.roles.is_empty() {
            return Err(Error::Config("no roles to analyze".into()));
        }
        if self.formats.is_empty() {
            return Err(Error::Config("no output format selected".into()));
        }
        if self.backend == BackendKind::Reference && self.weights_dir.is_none() {
            return Err(Error::Config("the reference backend needs weights_dir".into()));
        }
        Ok(())
    }
}
