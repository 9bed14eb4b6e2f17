//! `key = value` run configuration files.
//!
//! Blank lines and `#` comments are ignored, unknown keys are rejected, and
//! every key has a default. Paths are taken relative to the working
//! directory.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use thiserror::Error;

use crate::cascade::CascadeConfig;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: invalid value {value:?} for {key}")]
    InvalidValue { line: usize, key: String, value: String },
    #[error("line {line}: duplicate key {key:?}")]
    DuplicateKey { line: usize, key: String },
}

/// Training-set size, either explicit or a share of the corpus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrainCount {
    Frames(usize),
    /// Rounded share of the corpus.
    Fraction(f64),
}

impl TrainCount {
    pub fn resolve(self, total: usize) -> usize {
        match self {
            TrainCount::Frames(n) => n,
            TrainCount::Fraction(f) => (f * total as f64).round() as usize,
        }
    }
}

impl fmt::Display for TrainCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrainCount::Frames(n) => write!(f, "{n}"),
            TrainCount::Fraction(x) => write!(f, "{x:?}"),
        }
    }
}

impl FromStr for TrainCount {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        if s.contains('.') {
            let f: f64 = s.parse().map_err(|_| ())?;
            if (0.0..=1.0).contains(&f) {
                return Ok(TrainCount::Fraction(f));
            }
            return Err(());
        }
        s.parse().map(TrainCount::Frames).map_err(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub cascade: CascadeConfig,
    pub n_train: TrainCount,
    pub split_seed: u64,
    /// Random ROIs per class drawn from each held-out frame.
    pub eval_samples_per_class: usize,
    pub eval_seed: u64,
    pub data: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub roc: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            cascade: CascadeConfig::default(),
            n_train: TrainCount::Fraction(0.6),
            split_seed: 0,
            eval_samples_per_class: 140,
            eval_seed: 1,
            data: None,
            model: None,
            report: None,
            roc: None,
        }
    }
}

/// Keys shared by run configs and the config echo in model files.
pub const CASCADE_KEYS: [&str; 10] = [
    "roi_size",
    "samples_per_class",
    "target_cascade_fpr",
    "max_stages",
    "max_trees",
    "target_stage_dr",
    "max_stage_fpr",
    "eps_min",
    "mining_stride",
    "seed",
];

pub const RUN_KEYS: [&str; 8] = [
    "n_train",
    "split_seed",
    "eval_samples_per_class",
    "eval_seed",
    "data",
    "model",
    "report",
    "roc",
];

/// Cascade settings as `(key, value)` pairs. Floats use the shortest text
/// that parses back to the same bits.
pub fn cascade_entries(c: &CascadeConfig) -> Vec<(&'static str, String)> {
    vec![
        ("roi_size", c.roi_size.to_string()),
        ("samples_per_class", c.samples_per_class.to_string()),
        ("target_cascade_fpr", format!("{:?}", c.target_cascade_fpr)),
        ("max_stages", c.max_stages.to_string()),
        ("max_trees", c.stage.max_trees.to_string()),
        ("target_stage_dr", format!("{:?}", c.stage.target_stage_dr)),
        ("max_stage_fpr", format!("{:?}", c.stage.max_stage_fpr)),
        ("eps_min", format!("{:?}", c.stage.eps_min)),
        ("mining_stride", c.mining_stride.to_string()),
        ("seed", c.seed.to_string()),
    ]
}

/// Sets one cascade key. `Ok(false)` if the key is not a cascade key,
/// `Err(())` if the value does not parse.
pub fn set_cascade_key(c: &mut CascadeConfig, key: &str, value: &str) -> Result<bool, ()> {
    fn p<T: FromStr>(v: &str) -> Result<T, ()> {
        v.parse().map_err(|_| ())
    }
    match key {
        "roi_size" => c.roi_size = p(value)?,
        "samples_per_class" => c.samples_per_class = p(value)?,
        "target_cascade_fpr" => c.target_cascade_fpr = p(value)?,
        "max_stages" => c.max_stages = p(value)?,
        "max_trees" => c.stage.max_trees = p(value)?,
        "target_stage_dr" => c.stage.target_stage_dr = p(value)?,
        "max_stage_fpr" => c.stage.max_stage_fpr = p(value)?,
        "eps_min" => c.stage.eps_min = p(value)?,
        "mining_stride" => c.mining_stride = p(value)?,
        "seed" => c.seed = p(value)?,
        _ => return Ok(false),
    }
    Ok(true)
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut seen: Vec<String> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or(ConfigError::Syntax { line: line_no })?;
            if key.is_empty() {
                return Err(ConfigError::Syntax { line: line_no });
            }
            if seen.iter().any(|k| k == key) {
                return Err(ConfigError::DuplicateKey {
                    line: line_no,
                    key: key.into(),
                });
            }
            seen.push(key.to_string());
            cfg.set(key, value).map_err(|unknown| {
                if unknown {
                    ConfigError::UnknownKey {
                        line: line_no,
                        key: key.into(),
                    }
                } else {
                    ConfigError::InvalidValue {
                        line: line_no,
                        key: key.into(),
                        value: value.into(),
                    }
                }
            })?;
        }
        Ok(cfg)
    }

    /// `Err(true)` for an unknown key, `Err(false)` for a bad value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), bool> {
        fn p<T: FromStr>(v: &str) -> Result<T, bool> {
            v.parse().map_err(|_| false)
        }
        match set_cascade_key(&mut self.cascade, key, value) {
            Ok(true) => return Ok(()),
            Ok(false) => {}
            Err(()) => return Err(false),
        }
        match key {
            "n_train" => self.n_train = p(value)?,
            "split_seed" => self.split_seed = p(value)?,
            "eval_samples_per_class" => self.eval_samples_per_class = p(value)?,
            "eval_seed" => self.eval_seed = p(value)?,
            "data" => self.data = Some(PathBuf::from(value)),
            "model" => self.model = Some(PathBuf::from(value)),
            "report" => self.report = Some(PathBuf::from(value)),
            "roc" => self.roc = Some(PathBuf::from(value)),
            _ => return Err(true),
        }
        Ok(())
    }

    /// Renders every key, paths included when set.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in cascade_entries(&self.cascade) {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out.push_str(&format!("n_train = {}\n", self.n_train));
        out.push_str(&format!("split_seed = {}\n", self.split_seed));
        out.push_str(&format!("eval_samples_per_class = {}\n", self.eval_samples_per_class));
        out.push_str(&format!("eval_seed = {}\n", self.eval_seed));
        for (k, v) in [("data", &self.data), ("model", &self.model), ("report", &self.report), ("roc", &self.roc)] {
            if let Some(p) = v {
                out.push_str(&format!("{k} = {}\n", p.display()));
            }
        }
        out
    }
}
