use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{parse_value, Direction, JointLossWeights, ModelConfig};

/// Every training and architecture hyperparameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub max_epochs: usize,
    pub patience: usize,
    /// Videos per optimizer step.
    pub batch_size: usize,
    pub seed: u64,
    pub weights: JointLossWeights,
    /// Number of seeds for the ablation runner.
    pub ablation_seeds: usize,
    /// Train/valid/test ratios used when the data needs splitting.
    pub split: [f64; 3],
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            model: ModelConfig::default(),
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            max_epochs: 500,
            patience: 20,
            batch_size: 8,
            seed: 0,
            weights: JointLossWeights::default(),
            ablation_seeds: 5,
            split: [0.7, 0.1, 0.2],
        }
    }
}

const TRAIN_KEYS: [&str; 11] = [
    "lr",
    "beta1",
    "beta2",
    "adam_eps",
    "max_epochs",
    "patience",
    "batch_size",
    "seed",
    "w_cls",
    "ablation_seeds",
    "split",
];

impl TrainConfig {
    /// All accepted keys. Translation weights use `w_<from><to>`, e.g. `w_tv`.
    pub fn valid_keys() -> Vec<String> {
        let mut keys: Vec<String> = TRAIN_KEYS.iter().map(|k| k.to_string()).collect();
        keys.extend(ModelConfig::KEYS.iter().map(|k| k.to_string()));
        keys.extend(["w_tv", "w_vt", "w_ta", "w_at", "w_va", "w_av"].map(String::from));
        keys
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim();
        match key {
            "lr" => self.learning_rate = parse_value(key, value)?,
            "beta1" => self.beta1 = parse_value(key, value)?,
            "beta2" => self.beta2 = parse_value(key, value)?,
            "adam_eps" => self.adam_eps = parse_value(key, value)?,
            "max_epochs" => self.max_epochs = parse_value(key, value)?,
            "patience" => self.patience = parse_value(key, value)?,
            "batch_size" => self.batch_size = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "w_cls" => self.weights.w_cls = parse_value(key, value)?,
            "ablation_seeds" => self.ablation_seeds = parse_value(key, value)?,
            "split" => {
                let parts: Vec<f64> = value.split(',').map(|p| parse_value(key, p)).collect::<Result<_>>()?;
                self.split = parts
                    .try_into()
                    .map_err(|_| Error::Config(format!("`split` needs three ratios, got `{value}`")))?;
            }
            _ => {
                if let Some(dir) = key.strip_prefix("w_") {
                    if let Ok(dir) = Direction::parse_key(dir) {
                        self.weights.w_trans.insert(dir, parse_value(key, value)?);
                        return Ok(());
                    }
                }
                if !self.model.set(key, value)? {
                    return Err(Error::Config(format!(
                        "unknown config key `{key}`; valid keys: {}",
                        Self::valid_keys().join(", ")
                    )));
                }
            }
        }
        Ok(())
    }

    /// Applies `key=value` pairs.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, pairs: &[S]) -> Result<()> {
        for pair in pairs {
            let pair = pair.as_ref();
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{pair}` is not of the form key=value")))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = TrainConfig::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("config line {}: expected key = value", i + 1)))?;
            cfg.set(k, v).map_err(|e| match e {
                Error::Config(msg) => Error::Config(format!("config line {}: {msg}", i + 1)),
                other => other,
            })?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading config {}", path.display()), e))?;
        Self::parse(&text)
    }

    /// The config in the same `key = value` form [`TrainConfig::parse`] reads.
    pub fn to_text(&self) -> String {
        let m = &self.model;
        let mods: Vec<&str> = m.modalities.iter().map(|x| x.key()).collect();
        let mut lines = vec![
            format!("lr = {}", self.learning_rate),
            format!("beta1 = {}", self.beta1),
            format!("beta2 = {}", self.beta2),
            format!("adam_eps = {}", self.adam_eps),
            format!("max_epochs = {}", self.max_epochs),
            format!("patience = {}", self.patience),
            format!("batch_size = {}", self.batch_size),
            format!("seed = {}", self.seed),
            format!("w_cls = {}", self.weights.w_cls),
            format!("ablation_seeds = {}", self.ablation_seeds),
            format!("split = {},{},{}", self.split[0], self.split[1], self.split[2]),
            format!("modalities = {}", mods.join(",")),
            format!("d_model = {}", m.d_model),
            format!("heads = {}", m.heads),
            format!("layers = {}", m.layers),
            format!("d_ff = {}", m.d_ff),
            format!("gru_hidden = {}", m.gru_hidden),
            format!("dropout = {}", m.dropout),
            format!("positional = {}", m.positional),
            format!("backward = {}", m.backward),
        ];
        for (dir, w) in &self.weights.w_trans {
            lines.push(format!("w_{} = {w}", dir.key()));
        }
        lines.join("\n") + "\n"
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.weights.validate()?;
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::Config(format!("lr {} must be nonnegative", self.learning_rate)));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Config(format!("{name} {b} must lie in [0, 1)")));
            }
        }
        if !(self.adam_eps > 0.0) {
            return Err(Error::Config(format!("adam_eps {} must be positive", self.adam_eps)));
        }
        if self.max_epochs == 0 || self.batch_size == 0 || self.patience == 0 || self.ablation_seeds == 0 {
            return Err(Error::Config("max_epochs, patience, batch_size and ablation_seeds must be positive".into()));
        }
        if self.patience > self.max_epochs {
            return Err(Error::Config(format!(
                "patience {} exceeds max_epochs {}",
                self.patience, self.max_epochs
            )));
        }
        Ok(())
    }
}
