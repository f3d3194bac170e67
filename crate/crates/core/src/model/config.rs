use serde::{Deserialize, Serialize};

use crate::dataprep::{DataSpec, OutputKind, WindowSpec};
use crate::error::{Error, Result};

/// Architecture, data layout and training hyperparameters of one model.
///
/// Every field has a default so a JSON document may name only what it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeepAutoConfig {
    pub step_seconds: i64,
    /// Channel topics; the first is the prediction target for scalar heads.
    pub channels: Vec<String>,
    pub window: WindowSpec,
    /// Spatial neighbours appended to each cell's inputs.
    pub neighbors: usize,
    /// Channels × (1 + neighbors). Zero in a document means "derive".
    pub input_dim: usize,
    pub hidden_r: usize,
    pub hidden_p: usize,
    pub hidden_s: usize,
    pub ext_embed_dim: usize,
    pub use_external: bool,
    pub output: OutputKind,
    pub alpha: f64,
    /// Initial Adam step size.
    pub lr: f64,
    /// Epochs without validation improvement before the step size is
    /// multiplied by `lr_decay`; 0 keeps it constant.
    pub lr_patience: usize,
    pub lr_decay: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub anchor_floor: usize,
}

impl Default for DeepAutoConfig {
    fn default() -> Self {
        Self {
            step_seconds: 60,
            channels: vec!["load".into(), "ue".into()],
            window: WindowSpec::for_step(60, 20, 2, 0),
            neighbors: 0,
            input_dim: 0,
            hidden_r: 32,
            hidden_p: 32,
            hidden_s: 32,
            ext_embed_dim: 16,
            use_external: true,
            output: OutputKind::ScalarHorizons(vec![1, 15, 60]),
            alpha: 4.0,
            lr: 0.005,
            lr_patience: 4,
            lr_decay: 0.5,
            batch_size: 1024,
            max_epochs: 100,
            patience: 5,
            seed: 0,
            anchor_floor: 0,
        }
    }
}

impl DeepAutoConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str::<Self>(text)?.resolved()
    }

    /// Canonical JSON: fixed field order, no whitespace.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn data_spec(&self) -> DataSpec {
        DataSpec {
            step_seconds: self.step_seconds,
            channels: self.channels.clone(),
            window: self.window.clone(),
            output: self.output.clone(),
            neighbors: self.neighbors,
            anchor_floor: self.anchor_floor,
        }
    }

    pub fn periodic_enabled(&self) -> bool {
        self.window.n_p > 0
    }

    pub fn seasonal_enabled(&self) -> bool {
        self.window.n_s > 0
    }

    pub fn external_enabled(&self) -> bool {
        self.use_external && self.ext_embed_dim > 0
    }

    /// Width of the concatenated branch outputs.
    pub fn fusion_dim(&self) -> usize {
        self.hidden_r
            + if self.periodic_enabled() { self.hidden_p } else { 0 }
            + if self.seasonal_enabled() { self.hidden_s } else { 0 }
            + if self.external_enabled() { self.ext_embed_dim } else { 0 }
    }

    pub fn output_dim(&self) -> usize {
        match &self.output {
            OutputKind::ScalarHorizons(h) => h.len(),
            OutputKind::Pdf(bins) => *bins,
        }
    }

    /// Fills `input_dim` and checks every constraint.
    pub fn resolved(mut self) -> Result<Self> {
        let derived = self.data_spec().input_dim()?;
        if self.input_dim == 0 {
            self.input_dim = derived;
        } else if self.input_dim != derived {
            return Err(Error::Config(format!(
                "input_dim {} does not match channels × (1 + neighbors) = {derived}",
                self.input_dim
            )));
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.data_spec().validate()?;
        if self.input_dim != self.data_spec().input_dim()? {
            return Err(Error::Config("input_dim is inconsistent with channels".into()));
        }
        if self.hidden_r == 0
            || (self.periodic_enabled() && self.hidden_p == 0)
            || (self.seasonal_enabled() && self.hidden_s == 0)
        {
            return Err(Error::Config("enabled branches need a hidden size > 0".into()));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be > 0, got {}", self.lr)));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::Config(format!("lr_decay must lie in (0, 1], got {}", self.lr_decay)));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::Config("batch_size and max_epochs must be > 0".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_published_hyperparameters() {
        let c = DeepAutoConfig::default().resolved().unwrap();
        assert_eq!((c.batch_size, c.alpha, c.lr), (1024, 4.0, 0.005));
        assert_eq!(c.input_dim, 2);
        assert_eq!(c.fusion_dim(), 32 + 32 + 16);
    }

    #[test]
    fn partial_json_and_round_trip() {
        let c = DeepAutoConfig::from_json(r#"{"hidden_r": 8, "seed": 3, "output": {"pdf": 35}, "channels": ["rsrq"]}"#)
            .unwrap();
        assert_eq!((c.hidden_r, c.seed, c.input_dim), (8, 3, 35));
        let back = DeepAutoConfig::from_json(&c.to_canonical_json()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(DeepAutoConfig::from_json(r#"{"alpha": -1}"#).is_err());
        assert!(DeepAutoConfig::from_json(r#"{"lr": 0}"#).is_err());
        assert!(DeepAutoConfig::from_json(r#"{"input_dim": 5}"#).is_err());
        assert!(DeepAutoConfig::from_json(r#"{"bogus": 1}"#).is_err());
    }
}
