//! Run configuration: flags and config-file lines share one `key=value`
//! vocabulary, so the file is a plain mirror of the command line.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::eda::{DEFAULT_MANUAL_DROPS, DEFAULT_THRESHOLD};
use crate::error::{CrlError, Result};
use crate::eval::RocMode;
use crate::models::{FeaturesPerSplit, Hyperparams, KernelChoice, ModelKind};

pub const SEED_ENV: &str = "CRL_SEED";
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.75;
pub const DEFAULT_OUT_DIR: &str = "crl-out";

/// Every key accepted on the command line and in config files.
pub const KNOWN_KEYS: &[&str] = &[
    "input",
    "out",
    "seed",
    "train-frac",
    "threshold",
    "drop",
    "model",
    "models",
    "model-file",
    "roc",
    "json",
    "threads",
    "max-depth",
    "min-samples-split",
    "min-gini-decrease",
    "n-trees",
    "max-features",
    "bootstrap",
    "svm-c",
    "svm-kernel",
    "svm-gamma",
    "svm-tol",
    "svm-max-iter",
    "svm-cache-mb",
    "lr-rate",
    "lr-lambda",
    "lr-epochs",
    "lr-tol",
];

/// Raw `key=value` settings before validation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings(pub BTreeMap<String, String>);

fn normalize_key(key: &str) -> String {
    key.trim()
        .trim_start_matches("--")
        .to_ascii_lowercase()
        .replace('_', "-")
}

impl Settings {
    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        let key = normalize_key(key);
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(CrlError::Config(format!("unknown setting `{key}`")));
        }
        self.0.insert(key, value.into());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    /// Parses config-file text. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut s = Settings::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CrlError::Config(format!("config line {}: expected key=value", i + 1))
            })?;
            s.set(k, v.trim())?;
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CrlError::io(path, e))?;
        Self::parse(&text)
    }

    /// Entries of `other` replace entries of `self`.
    pub fn overlay(mut self, other: &Settings) -> Self {
        for (k, v) in &other.0 {
            self.0.insert(k.clone(), v.clone());
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    pub train_fraction: f64,
    pub threshold: f64,
    pub drops: Vec<String>,
    pub model: ModelKind,
    pub models: Vec<ModelKind>,
    pub model_file: Option<PathBuf>,
    pub roc: RocMode,
    pub json: bool,
    pub threads: Option<usize>,
    pub hyperparams: Hyperparams,
}

impl Default for RunConfig {
    fn default() -> Self {
        let mut hyperparams = Hyperparams::default();
        hyperparams.forest.seed = DEFAULT_SEED;
        hyperparams.svm.seed = DEFAULT_SEED;
        Self {
            input: None,
            out: PathBuf::from(DEFAULT_OUT_DIR),
            seed: DEFAULT_SEED,
            train_fraction: DEFAULT_TRAIN_FRACTION,
            threshold: DEFAULT_THRESHOLD,
            drops: DEFAULT_MANUAL_DROPS.iter().map(|s| s.to_string()).collect(),
            model: ModelKind::Rf,
            models: ModelKind::ALL.to_vec(),
            model_file: None,
            roc: RocMode::Scores,
            json: false,
            threads: None,
            hyperparams,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| CrlError::Config(format!("`{key}`: cannot parse {v:?}")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim().to_ascii_lowercase().as_str() {
        "" | "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(CrlError::Config(format!(
            "`{key}`: expected a boolean, got {v:?}"
        ))),
    }
}

fn parse_list(v: &str) -> Vec<String> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

impl RunConfig {
    /// Validates settings. `env_seed` is used only when no `seed` is set.
    pub fn from_settings(s: &Settings, env_seed: Option<&str>) -> Result<Self> {
        let mut c = RunConfig::default();
        if let Some(v) = s.get("input") {
            c.input = Some(PathBuf::from(v));
        }
        if let Some(v) = s.get("out") {
            c.out = PathBuf::from(v);
        }
        match (s.get("seed"), env_seed) {
            (Some(v), _) => c.seed = parse_num("seed", v)?,
            (None, Some(v)) => c.seed = parse_num(SEED_ENV, v)?,
            _ => {}
        }
        if let Some(v) = s.get("train-frac") {
            c.train_fraction = parse_num("train-frac", v)?;
        }
        if !(c.train_fraction > 0.0 && c.train_fraction < 1.0) {
            return Err(CrlError::Config(format!(
                "train-frac must lie in (0, 1), got {}",
                c.train_fraction
            )));
        }
        if let Some(v) = s.get("threshold") {
            c.threshold = parse_num("threshold", v)?;
        }
        if c.threshold.is_nan() || c.threshold <= 0.0 {
            return Err(CrlError::Config(format!(
                "threshold must be positive, got {}",
                c.threshold
            )));
        }
        if let Some(v) = s.get("drop") {
            c.drops = parse_list(v);
        }
        if let Some(v) = s.get("model") {
            c.model = v.parse()?;
        }
        if let Some(v) = s.get("models") {
            let mut models = Vec::new();
            for m in parse_list(v) {
                let k: ModelKind = m.parse()?;
                if !models.contains(&k) {
                    models.push(k);
                }
            }
            if models.is_empty() {
                return Err(CrlError::Config("`models` is empty".into()));
            }
            c.models = models;
        }
        if let Some(v) = s.get("model-file") {
            c.model_file = Some(PathBuf::from(v));
        }
        if let Some(v) = s.get("roc") {
            c.roc = match v.trim() {
                "scores" => RocMode::Scores,
                "hard-labels" => RocMode::HardLabels,
                other => {
                    return Err(CrlError::Config(format!(
                        "`roc` must be scores or hard-labels, got {other:?}"
                    )))
                }
            };
        }
        if let Some(v) = s.get("json") {
            c.json = parse_bool("json", v)?;
        }
        if let Some(v) = s.get("threads") {
            let n: usize = parse_num("threads", v)?;
            if n == 0 {
                return Err(CrlError::Config("`threads` must be at least 1".into()));
            }
            c.threads = Some(n);
        }
        c.apply_hyperparams(s)?;
        Ok(c)
    }

    fn apply_hyperparams(&mut self, s: &Settings) -> Result<()> {
        let hp = &mut self.hyperparams;
        hp.forest.seed = self.seed;
        hp.svm.seed = self.seed;
        if let Some(v) = s.get("max-depth") {
            let depth = match v.trim() {
                "none" | "" => None,
                v => Some(parse_num::<usize>("max-depth", v)?),
            };
            hp.tree.max_depth = depth;
            hp.forest.tree.max_depth = depth;
        }
        if let Some(v) = s.get("min-samples-split") {
            let n: usize = parse_num("min-samples-split", v)?;
            hp.tree.min_samples_split = n.max(2);
            hp.forest.tree.min_samples_split = n.max(2);
        }
        if let Some(v) = s.get("min-gini-decrease") {
            let g: f64 = parse_num("min-gini-decrease", v)?;
            hp.tree.min_gini_decrease = g;
            hp.forest.tree.min_gini_decrease = g;
        }
        if let Some(v) = s.get("n-trees") {
            hp.forest.n_trees = parse_num("n-trees", v)?;
        }
        if let Some(v) = s.get("max-features") {
            hp.forest.features_per_split = match v.trim() {
                "sqrt" => FeaturesPerSplit::Sqrt,
                "all" => FeaturesPerSplit::All,
                n => FeaturesPerSplit::Count(parse_num("max-features", n)?),
            };
        }
        if let Some(v) = s.get("bootstrap") {
            hp.forest.bootstrap = parse_bool("bootstrap", v)?;
        }
        if let Some(v) = s.get("svm-c") {
            hp.svm.c = parse_num("svm-c", v)?;
        }
        if let Some(v) = s.get("svm-kernel") {
            hp.svm.kernel = match v.trim() {
                "rbf" => KernelChoice::Rbf,
                "linear" => KernelChoice::Linear,
                other => {
                    return Err(CrlError::Config(format!(
                        "`svm-kernel` must be rbf or linear, got {other:?}"
                    )))
                }
            };
        }
        if let Some(v) = s.get("svm-gamma") {
            hp.svm.gamma = Some(parse_num("svm-gamma", v)?);
        }
        if let Some(v) = s.get("svm-tol") {
            hp.svm.tolerance = parse_num("svm-tol", v)?;
        }
        if let Some(v) = s.get("svm-max-iter") {
            hp.svm.max_iterations = parse_num("svm-max-iter", v)?;
        }
        if let Some(v) = s.get("svm-cache-mb") {
            hp.svm.cache_mb = parse_num("svm-cache-mb", v)?;
        }
        if let Some(v) = s.get("lr-rate") {
            hp.logistic.learning_rate = parse_num("lr-rate", v)?;
        }
        if let Some(v) = s.get("lr-lambda") {
            hp.logistic.l2_lambda = parse_num("lr-lambda", v)?;
        }
        if let Some(v) = s.get("lr-epochs") {
            hp.logistic.max_epochs = parse_num("lr-epochs", v)?;
        }
        if let Some(v) = s.get("lr-tol") {
            hp.logistic.tolerance = parse_num("lr-tol", v)?;
        }
        Ok(())
    }

    pub fn input_path(&self) -> Result<&Path> {
        self.input
            .as_deref()
            .ok_or_else(|| CrlError::Config("no input file given (use --input)".into()))
    }

    /// Where `train` writes, and `evaluate` reads by default, the model.
    pub fn model_path(&self) -> PathBuf {
        self.model_file
            .clone()
            .unwrap_or_else(|| self.out.join(format!("{}.crl.json", self.model)))
    }
}
