use serde::{Deserialize, Serialize};

use crate::data::Modality;
use crate::error::{Error, Result};

/// Architecture hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// `t,v,a` builds the tri-modal model; any two build the bi-modal one
    /// with the first as the source of forward translation.
    pub modalities: Vec<Modality>,
    pub d_model: usize,
    pub heads: usize,
    pub layers: usize,
    pub d_ff: usize,
    /// Hidden size of each GRU direction.
    pub gru_hidden: usize,
    pub dropout: f64,
    pub positional: bool,
    pub backward: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            modalities: Modality::ALL.to_vec(),
            d_model: 64,
            heads: 4,
            layers: 1,
            d_ff: 128,
            gru_hidden: 32,
            dropout: 0.1,
            positional: true,
            backward: true,
        }
    }
}

pub(crate) fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

pub(crate) fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean `{value}` for `{key}`"))),
    }
}

impl ModelConfig {
    pub const KEYS: [&'static str; 9] =
        ["modalities", "d_model", "heads", "layers", "d_ff", "gru_hidden", "dropout", "positional", "backward"];

    /// Sets one field from its text form. Returns `Ok(false)` for keys this
    /// struct does not own.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        match key {
            "modalities" => self.modalities = Modality::parse_list(value).map_err(as_config)?,
            "d_model" => self.d_model = parse_value(key, value)?,
            "heads" => self.heads = parse_value(key, value)?,
            "layers" => self.layers = parse_value(key, value)?,
            "d_ff" => self.d_ff = parse_value(key, value)?,
            "gru_hidden" => self.gru_hidden = parse_value(key, value)?,
            "dropout" => self.dropout = parse_value(key, value)?,
            "positional" => self.positional = parse_bool(key, value)?,
            "backward" => self.backward = parse_bool(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("d_model", self.d_model),
            ("heads", self.heads),
            ("layers", self.layers),
            ("d_ff", self.d_ff),
            ("gru_hidden", self.gru_hidden),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("`{name}` must be positive")));
            }
        }
        if self.d_model % self.heads != 0 {
            return Err(Error::Config(format!("d_model {} is not divisible by {} heads", self.d_model, self.heads)));
        }
        if self.positional && self.d_model % 2 != 0 {
            return Err(Error::Config(format!("positional encoding needs an even d_model, got {}", self.d_model)));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} must lie in [0, 1)", self.dropout)));
        }
        match self.modalities.len() {
            2 if self.modalities[0] != self.modalities[1] => Ok(()),
            3 if Modality::ALL.iter().all(|m| self.modalities.contains(m)) => Ok(()),
            _ => Err(Error::Config(format!(
                "modalities must be two distinct keys or all of t,v,a; got {:?}",
                self.modalities.iter().map(|m| m.key()).collect::<Vec<_>>()
            ))),
        }
    }

    pub fn is_trimodal(&self) -> bool {
        self.modalities.len() == 3
    }
}

fn as_config(e: Error) -> Error {
    match e {
        Error::Schema(msg) => Error::Config(msg),
        other => other,
    }
}
