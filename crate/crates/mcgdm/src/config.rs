//! Experiment configuration.
//!
//! Files are strict JSON: unknown keys are errors and reported with their key
//! path. `--override a.b=VALUE` edits the document before it is interpreted;
//! `VALUE` is read as JSON and falls back to a plain string.

use std::fs;
use std::path::{Path, PathBuf};

use mcgdm_core::data::AugmentationSpec;
use mcgdm_core::federation::HyperParams;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::{AppError, AppResult};

/// Shown by `--help`.
pub const CONFIG_HELP: &str = "\
Config file (JSON). Required keys: mode, data, held_out, arch.
  name            experiment label                       default \"experiment\"
  mode            \"dg\" | \"da\"
  data            {\"kind\": \"rotated_moons\", \"angles\": [deg...],
                   \"n_per_domain\": 625, \"noise_sigma\": 0.1, \"classes\": 2}
                | {\"kind\": \"textured\", \"n_domains\": N, \"side\": 8,
                   \"n_per_domain\": 625, \"classes\": 4}
  held_out        unseen domain (dg) or unlabeled target (da)
  sources         source domains                         default: all others
  arch            layer widths, input width first
  augmentation    {\"kind\": \"identity\"}                   (default)
                | {\"kind\": \"gaussian_noise\", \"sigma\": S}
                | {\"kind\": \"input_rotation\", \"max_degrees\": D}
                | {\"kind\": \"amplitude_mix\", \"eta_max\": E, \"side\": N}
  train_frac      per-domain train share                 default 0.8
  seeds           list of root seeds                     default [0]
  out_dir         output directory                       default \"out\"
  hp.lambda           0.5      hp.rounds         30
  hp.local_epochs     1        hp.batch          16
  hp.lr0              1e-3     hp.lr1            1e-4
  hp.momentum         0.9      hp.weight_decay   5e-4
  hp.inter_normalize  false    hp.gradient_matching true
  hp.tau              0.9      hp.min_votes      2 with >= 3 sources, else 1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Dg,
    Da,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataConfig {
    RotatedMoons {
        angles: Vec<f64>,
        #[serde(default = "default_n")]
        n_per_domain: usize,
        #[serde(default = "default_moons_noise")]
        noise_sigma: f64,
        #[serde(default = "default_moons_classes")]
        classes: usize,
    },
    Textured {
        n_domains: usize,
        #[serde(default = "default_side")]
        side: usize,
        #[serde(default = "default_n")]
        n_per_domain: usize,
        #[serde(default = "default_textured_classes")]
        classes: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AugmentationConfig {
    #[default]
    Identity,
    GaussianNoise {
        sigma: f64,
    },
    InputRotation {
        max_degrees: f64,
    },
    AmplitudeMix {
        eta_max: f64,
        side: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HpConfig {
    pub lambda: f64,
    pub rounds: usize,
    pub local_epochs: usize,
    pub batch: usize,
    pub lr0: f64,
    pub lr1: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub inter_normalize: bool,
    pub gradient_matching: bool,
    pub tau: f64,
    pub min_votes: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default = "default_name")]
    pub name: String,
    pub mode: Mode,
    pub data: DataConfig,
    pub held_out: usize,
    #[serde(default)]
    pub sources: Option<Vec<usize>>,
    pub arch: Vec<usize>,
    #[serde(default)]
    pub augmentation: AugmentationConfig,
    #[serde(default = "default_train_frac")]
    pub train_frac: f64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub hp: HpConfig,
}

fn default_name() -> String {
    "experiment".into()
}
fn default_n() -> usize {
    625
}
fn default_moons_noise() -> f64 {
    0.1
}
fn default_moons_classes() -> usize {
    2
}
fn default_side() -> usize {
    8
}
fn default_textured_classes() -> usize {
    4
}
fn default_train_frac() -> f64 {
    0.8
}
fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn default_out_dir() -> PathBuf {
    "out".into()
}

impl Default for HpConfig {
    fn default() -> Self {
        let hp = HyperParams::default();
        HpConfig {
            lambda: hp.lambda,
            rounds: hp.rounds,
            local_epochs: hp.local_epochs,
            batch: hp.batch,
            lr0: hp.lr0,
            lr1: hp.lr1,
            momentum: hp.momentum,
            weight_decay: hp.weight_decay,
            inter_normalize: hp.inter_normalize,
            gradient_matching: hp.gradient_matching,
            tau: hp.tau,
            min_votes: hp.min_votes,
        }
    }
}

impl HpConfig {
    pub fn to_hyper_params(&self, seed: u64) -> HyperParams {
        HyperParams {
            lambda: self.lambda,
            rounds: self.rounds,
            local_epochs: self.local_epochs,
            batch: self.batch,
            lr0: self.lr0,
            lr1: self.lr1,
            momentum: self.momentum,
            weight_decay: self.weight_decay,
            seed,
            inter_normalize: self.inter_normalize,
            gradient_matching: self.gradient_matching,
            tau: self.tau,
            min_votes: self.min_votes,
        }
    }
}

impl From<AugmentationConfig> for AugmentationSpec {
    fn from(a: AugmentationConfig) -> Self {
        match a {
            AugmentationConfig::Identity => AugmentationSpec::Identity,
            AugmentationConfig::GaussianNoise { sigma } => AugmentationSpec::GaussianNoise { sigma },
            AugmentationConfig::InputRotation { max_degrees } => AugmentationSpec::InputRotation { max_degrees },
            AugmentationConfig::AmplitudeMix { eta_max, side } => AugmentationSpec::AmplitudeMix { eta_max, side },
        }
    }
}

impl DataConfig {
    pub fn n_domains(&self) -> usize {
        match self {
            DataConfig::RotatedMoons { angles, .. } => angles.len(),
            DataConfig::Textured { n_domains, .. } => *n_domains,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            DataConfig::RotatedMoons { .. } => 2,
            DataConfig::Textured { side, .. } => side * side,
        }
    }
}

impl Config {
    /// Source domains: the configured list, or every domain except `held_out`.
    pub fn source_domains(&self) -> Vec<usize> {
        match &self.sources {
            Some(s) => s.clone(),
            None => (0..self.data.n_domains()).filter(|&d| d != self.held_out).collect(),
        }
    }

    pub fn validate(&self) -> AppResult<()> {
        let n = self.data.n_domains();
        if n < 2 {
            return Err(AppError::Config(format!("data: need at least 2 domains, got {n}")));
        }
        if self.held_out >= n {
            return Err(AppError::Config(format!("held_out: domain {} is out of range (0..{n})", self.held_out)));
        }
        let sources = self.source_domains();
        if sources.is_empty() {
            return Err(AppError::Config("sources: at least one source domain is required".into()));
        }
        for (i, &s) in sources.iter().enumerate() {
            if s >= n {
                return Err(AppError::Config(format!("sources: domain {s} is out of range (0..{n})")));
            }
            if s == self.held_out {
                return Err(AppError::Config(format!("sources: domain {s} is the held_out domain")));
            }
            if sources[..i].contains(&s) {
                return Err(AppError::Config(format!("sources: domain {s} is listed twice")));
            }
        }
        if self.seeds.is_empty() {
            return Err(AppError::Config("seeds: at least one seed is required".into()));
        }
        if !(self.train_frac > 0.0 && self.train_frac < 1.0) {
            return Err(AppError::Config(format!("train_frac: must lie in (0, 1), got {}", self.train_frac)));
        }
        let dim = self.data.input_dim();
        match self.arch.first() {
            None => return Err(AppError::Config("arch: must list at least the input width".into())),
            Some(&d) if d != dim => {
                return Err(AppError::Config(format!("arch: input width {d} does not match data dimension {dim}")))
            }
            _ => {}
        }
        if self.arch.contains(&0) {
            return Err(AppError::Config(format!("arch: widths must be >= 1, got {:?}", self.arch)));
        }
        AugmentationSpec::from(self.augmentation)
            .validate(dim)
            .map_err(|e| AppError::Config(format!("augmentation: {e}")))?;
        self.hp
            .to_hyper_params(0)
            .validate()
            .map_err(|e| AppError::Config(format!("hp: {e}")))?;
        Ok(())
    }

    /// Hex SHA-256 of the resolved configuration, ignoring `out_dir`.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        v.as_object_mut().expect("object").remove("out_dir");
        hex::encode(Sha256::digest(v.to_string().as_bytes()))
    }
}

/// Applies one `key.path=VALUE` override to a JSON document.
pub fn apply_override(doc: &mut Value, spec: &str) -> AppResult<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| AppError::Config(format!("override `{spec}` is not KEY=VALUE")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(AppError::Config(format!("override key `{key}` has an empty segment")));
    }
    let mut cur = doc;
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        cur = match cur {
            Value::Object(map) => {
                if last {
                    map.insert(part.to_string(), value);
                    return Ok(());
                }
                map.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()))
            }
            Value::Array(items) => {
                let idx: usize = part
                    .parse()
                    .map_err(|_| AppError::Config(format!("override key `{key}`: `{part}` is not an index")))?;
                let len = items.len();
                let slot = items
                    .get_mut(idx)
                    .ok_or_else(|| AppError::Config(format!("override key `{key}`: index {idx} out of range ({len})")))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => {
                return Err(AppError::Config(format!(
                    "override key `{key}`: `{}` is not an object",
                    parts[..i].join(".")
                )))
            }
        };
    }
    unreachable!("loop returns on the last segment")
}

/// Parses and validates a configuration document after applying overrides.
pub fn parse_config_str(text: &str, overrides: &[String]) -> AppResult<Config> {
    let mut doc: Value = serde_json::from_str(text).map_err(|e| AppError::Parse(format!("config is not valid JSON: {e}")))?;
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    let cfg: Config = serde_path_to_error::deserialize(doc).map_err(|e| {
        let path = e.path().to_string();
        AppError::Parse(format!("config key `{path}`: {}", e.inner()))
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path, overrides: &[String]) -> AppResult<Config> {
    let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    parse_config_str(&text, overrides)
}
