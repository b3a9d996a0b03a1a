//! Experiment configuration: one JSON document.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::copula::TransformKind;
use crate::data::{load_csv, CountMatrix, SelectRule};
use crate::error::{Error, Result};
use crate::metrics::MmdMode;
use crate::pgm::EdgeRule;

use super::synth::{synth_generate, SynthSpec};

pub const REGISTRY: [&str; 9] = [
    "ind_poisson",
    "copula_poisson",
    "mixture_poiss",
    "log_normal",
    "pgm",
    "tpgm",
    "flpgm_poisson",
    "poisson_sqr",
    "lpgm",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DatasetSource {
    Path { path: PathBuf },
    Synth { synth: SynthSpec, n: usize, seed: u64 },
}

impl DatasetSource {
    pub fn load(&self) -> Result<CountMatrix> {
        match self {
            DatasetSource::Path { path } => load_csv(path),
            DatasetSource::Synth { synth, n, seed } => synth_generate(synth, *n, *seed),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub rule: SelectRule,
    pub d: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TuningMetric {
    #[default]
    Mmd,
    SpearmanDiff,
}

/// One registry entry plus optional grid overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub name: String,
    /// Mixture component counts; default `10, 20, …, 100`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<Vec<usize>>,
    /// Penalties; default is the data-driven regularisation path.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<f64>>,
    /// TPGM truncation; default is the 99th percentile of the training non-zeros.
    #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
    pub r: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<TransformKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_exponent: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<EdgeRule>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelEntry {
    Name(String),
    Spec(ModelSpec),
}

impl ModelEntry {
    pub fn spec(&self) -> ModelSpec {
        match self {
            ModelEntry::Name(n) => ModelSpec {
                name: n.clone(),
                ..ModelSpec::default()
            },
            ModelEntry::Spec(s) => s.clone(),
        }
    }
}

fn default_folds() -> usize {
    3
}
fn default_samples() -> usize {
    1000
}
fn default_gibbs() -> usize {
    crate::pgm::DEFAULT_GIBBS_ITERS
}
fn default_fraction() -> f64 {
    0.75
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub select: Option<Selection>,
    pub models: Vec<ModelEntry>,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default = "default_gibbs")]
    pub gibbs_iters: usize,
    #[serde(default)]
    pub tuning_metric: TuningMetric,
    #[serde(default = "default_fraction")]
    pub tuning_fraction: f64,
    #[serde(default)]
    pub mmd_mode: MmdMode,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    /// Reads a config file; relative dataset and output paths resolve against
    /// the file's directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut c = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let DatasetSource::Path { path: p } = &mut c.dataset {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(o) = &mut c.output {
            if o.is_relative() {
                *o = base.join(&*o);
            }
        }
        Ok(c)
    }

    pub fn specs(&self) -> Vec<ModelSpec> {
        self.models.iter().map(ModelEntry::spec).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if self.models.is_empty() {
            return cfg("no models listed".into());
        }
        let specs = self.specs();
        for (i, s) in specs.iter().enumerate() {
            if !REGISTRY.contains(&s.name.as_str()) {
                return Err(Error::UnknownModel(s.name.clone()));
            }
            if specs[..i].iter().any(|t| t.name == s.name) {
                return cfg(format!("model `{}` listed twice", s.name));
            }
            if let Some(k) = &s.k {
                if k.is_empty() || k.contains(&0) {
                    return cfg(format!("`{}`: k grid must be non-empty and positive", s.name));
                }
            }
            if let Some(l) = &s.lambda {
                if l.is_empty() || l.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                    return cfg(format!("`{}`: lambda grid must be non-empty, finite and non-negative", s.name));
                }
            }
            if s.r == Some(0) {
                return cfg(format!("`{}`: R must be at least 1", s.name));
            }
        }
        if self.folds < 2 {
            return cfg(format!("folds must be at least 2, got {}", self.folds));
        }
        if self.samples < 100 {
            return cfg(format!("samples must be at least 100, got {}", self.samples));
        }
        if self.gibbs_iters == 0 {
            return cfg("gibbs_iters must be positive".into());
        }
        if !(self.tuning_fraction > 0.0 && self.tuning_fraction < 1.0) {
            return cfg(format!("tuning_fraction must lie in (0, 1), got {}", self.tuning_fraction));
        }
        if let Some(s) = &self.select {
            if s.d == 0 {
                return cfg("select.d must be positive".into());
            }
        }
        Ok(())
    }
}
