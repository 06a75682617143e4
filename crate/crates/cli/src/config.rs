//! Run configuration: TOML file values overlaid by command-line flags.

use std::path::{Path, PathBuf};

use bicluster::{FitControls, InitOptions, ModelSpec, PartitionStrategy, SearchControls};
use serde::Deserialize;

use crate::CliError;

/// `models = "all"` or `models = ["CCCC", "UUUU"]`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum ModelList {
    Keyword(String),
    Codes(Vec<String>),
}

impl Default for ModelList {
    fn default() -> Self {
        ModelList::Keyword("all".into())
    }
}

impl ModelList {
    /// Parses a command-line value: `all` or a comma-separated list.
    pub fn from_flag(s: &str) -> Self {
        if s.trim().eq_ignore_ascii_case("all") {
            ModelList::Keyword("all".into())
        } else {
            ModelList::Codes(s.split(',').map(|c| c.trim().to_string()).filter(|c| !c.is_empty()).collect())
        }
    }

    pub fn resolve(&self, legacy: bool) -> Result<Vec<ModelSpec>, CliError> {
        let codes = match self {
            ModelList::Keyword(k) if k.eq_ignore_ascii_case("all") => {
                return Ok(if legacy { ModelSpec::legacy_all() } else { ModelSpec::all() });
            }
            ModelList::Keyword(k) => vec![k.clone()],
            ModelList::Codes(c) => c.clone(),
        };
        if codes.is_empty() {
            return Err(CliError::Usage("the model list is empty".into()));
        }
        codes
            .iter()
            .map(|c| {
                let parsed = if legacy { ModelSpec::parse_legacy(c) } else { c.parse() };
                parsed.map_err(|e| CliError::Usage(format!("model {c:?}: {e}")))
            })
            .collect()
    }
}

/// Every key of the `--config` file; all are optional.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub standardize: Option<bool>,
    pub legacy: Option<bool>,
    pub models: Option<ModelList>,
    pub k_min: Option<usize>,
    pub k_max: Option<usize>,
    pub q_min: Option<usize>,
    pub q_max: Option<usize>,
    pub cap: Option<usize>,
    pub epsilon: Option<f64>,
    pub max_iter: Option<usize>,
    pub restarts: Option<usize>,
    pub init: Option<PartitionStrategy>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Io(format!("config {}: {e}", path.display())))
    }

    /// Keeps `self` where set, otherwise takes `base`.
    pub fn over(self, base: ConfigFile) -> ConfigFile {
        ConfigFile {
            input: self.input.or(base.input),
            output: self.output.or(base.output),
            standardize: self.standardize.or(base.standardize),
            legacy: self.legacy.or(base.legacy),
            models: self.models.or(base.models),
            k_min: self.k_min.or(base.k_min),
            k_max: self.k_max.or(base.k_max),
            q_min: self.q_min.or(base.q_min),
            q_max: self.q_max.or(base.q_max),
            cap: self.cap.or(base.cap),
            epsilon: self.epsilon.or(base.epsilon),
            max_iter: self.max_iter.or(base.max_iter),
            restarts: self.restarts.or(base.restarts),
            init: self.init.or(base.init),
            seed: self.seed.or(base.seed),
            workers: self.workers.or(base.workers),
        }
    }
}

/// A fully resolved `fit` run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: PathBuf,
    pub output: PathBuf,
    pub standardize: bool,
    pub legacy: bool,
    pub models: Vec<ModelSpec>,
    pub k_range: (usize, usize),
    pub q_range: (usize, usize),
    pub cap: Option<usize>,
    pub controls: SearchControls,
    pub seed: u64,
}

impl RunConfig {
    pub fn resolve(cfg: ConfigFile) -> Result<Self, CliError> {
        let input = cfg.input.ok_or_else(|| CliError::Usage("an input CSV is required (--input)".into()))?;
        let legacy = cfg.legacy.unwrap_or(false);
        let models = cfg.models.unwrap_or_default().resolve(legacy)?;
        let k_range = (cfg.k_min.unwrap_or(1), cfg.k_max.unwrap_or(4));
        let q_range = (cfg.q_min.unwrap_or(1), cfg.q_max.unwrap_or(4));
        for (name, (lo, hi)) in [("K", k_range), ("q", q_range)] {
            if lo == 0 || lo > hi {
                return Err(CliError::Usage(format!("{name} range {lo}..{hi} is empty or starts at 0")));
            }
        }
        if cfg.cap == Some(0) {
            return Err(CliError::Usage("cap must be at least 1".into()));
        }
        let defaults = FitControls::default();
        let fit = FitControls {
            epsilon: cfg.epsilon.unwrap_or(defaults.epsilon),
            max_iter: cfg.max_iter.unwrap_or(defaults.max_iter),
            ..defaults
        };
        fit.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        let init = InitOptions {
            strategy: cfg.init.unwrap_or(PartitionStrategy::Kmeans),
            restarts: cfg.restarts.unwrap_or(InitOptions::default().restarts),
        };
        if init.restarts == 0 {
            return Err(CliError::Usage("restarts must be at least 1".into()));
        }
        Ok(RunConfig {
            input,
            output: cfg.output.unwrap_or_else(|| PathBuf::from(".")),
            standardize: cfg.standardize.unwrap_or(false),
            legacy,
            models,
            k_range,
            q_range,
            cap: cfg.cap,
            controls: SearchControls {
                fit,
                init,
                workers: cfg.workers.unwrap_or(1),
            },
            seed: cfg.seed.unwrap_or(0),
        })
    }
}
