use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::backend::BackendSpec;
use crate::corpus::{PreprocessConfig, SplitRatios};
use crate::labeler::LabelConfig;
use crate::metrics::MetricOptions;
use crate::retrieval::Bm25Params;
use crate::router::{RouterConfig, RouterKind};

/// Invalid run configuration, with the dotted key path at fault.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("config key {key}: {message}")]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(key: impl Into<String>, message: impl Into<String>) -> Self {
        Self { key: key.into(), message: message.into() }
    }
}

/// Environment variables that override backend settings.
pub const ENV_GENERATOR_CMD: &str = "HYBRIDSUM_GENERATOR_CMD";
pub const ENV_CLASSIFIER_CMD: &str = "HYBRIDSUM_CLASSIFIER_CMD";
pub const ENV_BACKEND_TIMEOUT: &str = "HYBRIDSUM_BACKEND_TIMEOUT";

/// Full configuration of an experiment run, read from TOML.
///
/// ```toml
/// seed = 7
///
/// [corpus]
/// path = "corpus.jsonl"
/// ratios = [0.9, 0.05, 0.05]
///
/// [bm25]
/// k1 = 1.2
/// b = 0.75
///
/// [router]
/// kind = "lexical"     # lexical | external | oracle | always_ir | always_nmt
/// threshold = 0.4
///
/// [generator]
/// transport = "subprocess"
/// command = ["python", "serve.py", "--generator", "model.pt"]
/// timeout_secs = 60
/// max_in_flight = 16
///
/// [experiment]
/// systems = ["ir", "nmt", "combined", "oracle"]
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub corpus: CorpusSection,
    #[serde(default)]
    pub bm25: Bm25Params,
    #[serde(default)]
    pub router: RouterConfig,
    pub generator: BackendSpec,
    #[serde(default)]
    pub classifier: Option<BackendSpec>,
    #[serde(default)]
    pub metrics: MetricOptions,
    #[serde(default)]
    pub labeling: LabelConfig,
    #[serde(default)]
    pub experiment: ExperimentSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSection {
    pub path: PathBuf,
    #[serde(default)]
    pub ratios: SplitRatios,
    /// Use the `split` field stored in the corpus file instead of splitting.
    #[serde(default)]
    pub presplit: bool,
    #[serde(default = "yes")]
    pub filter_auto_generated: bool,
    #[serde(default)]
    pub preprocess: PreprocessConfig,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum System {
    Ir,
    Nmt,
    Combined,
    Oracle,
}

impl System {
    pub const ALL: [System; 4] = [System::Ir, System::Nmt, System::Combined, System::Oracle];

    pub fn name(self) -> &'static str {
        match self {
            System::Ir => "IR",
            System::Nmt => "NMT",
            System::Combined => "Combined",
            System::Oracle => "Oracle",
        }
    }

    pub fn file_stem(self) -> &'static str {
        match self {
            System::Ir => "ir",
            System::Nmt => "nmt",
            System::Combined => "combined",
            System::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub systems: Vec<System>,
    /// Requests per backend batch.
    pub batch_size: usize,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self { systems: System::ALL.to_vec(), batch_size: 64 }
    }
}

impl RunConfig {
    /// Parses TOML, reporting the key path of the first bad field.
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let de = toml::Deserializer::parse(text).map_err(|e| ConfigError::new("<root>", e.to_string()))?;
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ConfigError::new(if path == "." { "<root>".to_string() } else { path }, e.into_inner().message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file. Relative paths inside it resolve against the
    /// file's directory. Environment overrides are applied.
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("<file>", format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(dir) = path.parent() {
            cfg.resolve_relative_to(dir);
        }
        cfg.apply_env(|k| std::env::var(k).ok())?;
        Ok(cfg)
    }

    pub fn resolve_relative_to(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        fix(&mut self.corpus.path);
        for spec in std::iter::once(&mut self.generator).chain(self.classifier.as_mut()) {
            if let BackendSpec::BatchFile { requests_path, responses_path, .. } = spec {
                fix(requests_path);
                fix(responses_path);
            }
        }
    }

    /// Applies `HYBRIDSUM_GENERATOR_CMD`, `HYBRIDSUM_CLASSIFIER_CMD`
    /// (whitespace-separated command lines) and `HYBRIDSUM_BACKEND_TIMEOUT`
    /// (seconds) to subprocess backends.
    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        let timeout = match get(ENV_BACKEND_TIMEOUT) {
            Some(v) => Some(v.trim().parse::<f64>().map_err(|e| ConfigError::new(ENV_BACKEND_TIMEOUT, e.to_string()))?),
            None => None,
        };
        let apply = |spec: &mut BackendSpec, cmd: Option<String>| {
            if let Some(cmd) = cmd {
                let parts: Vec<String> = cmd.split_whitespace().map(str::to_string).collect();
                match spec {
                    BackendSpec::Subprocess { command, .. } => *command = parts,
                    BackendSpec::BatchFile { command, .. } => *command = Some(parts),
                }
            }
            if let Some(t) = timeout {
                match spec {
                    BackendSpec::Subprocess { timeout_secs, .. } | BackendSpec::BatchFile { timeout_secs, .. } => {
                        *timeout_secs = t
                    }
                }
            }
        };
        apply(&mut self.generator, get(ENV_GENERATOR_CMD));
        if let Some(c) = self.classifier.as_mut() {
            apply(c, get(ENV_CLASSIFIER_CMD));
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.corpus.ratios.validate().map_err(|e| ConfigError::new("corpus.ratios", e.to_string()))?;
        let Bm25Params { k1, b } = self.bm25;
        if !(k1.is_finite() && k1 >= 0.0) {
            return Err(ConfigError::new("bm25.k1", format!("must be non-negative, got {k1}")));
        }
        if !(0.0..=1.0).contains(&b) {
            return Err(ConfigError::new("bm25.b", format!("must lie in [0,1], got {b}")));
        }
        if !(0.0..=1.0).contains(&self.router.threshold) {
            return Err(ConfigError::new("router.threshold", format!("must lie in [0,1], got {}", self.router.threshold)));
        }
        self.generator.validate().map_err(|(k, m)| ConfigError::new(format!("generator.{k}"), m))?;
        match (&self.classifier, self.router.kind) {
            (None, RouterKind::External) => {
                return Err(ConfigError::new("classifier", "required when router.kind = \"external\""))
            }
            (Some(c), _) => c.validate().map_err(|(k, m)| ConfigError::new(format!("classifier.{k}"), m))?,
            _ => {}
        }
        self.metrics.bleu.validate().map_err(|e| ConfigError::new("metrics.bleu", e.to_string()))?;
        self.labeling.bleu.validate().map_err(|e| ConfigError::new("labeling.bleu", e.to_string()))?;
        if self.experiment.systems.is_empty() {
            return Err(ConfigError::new("experiment.systems", "must list at least one system"));
        }
        if self.experiment.batch_size == 0 {
            return Err(ConfigError::new("experiment.batch_size", "must be at least 1"));
        }
        Ok(())
    }
}
