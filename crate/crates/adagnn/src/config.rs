//! Run configuration: one flat JSON object, every field optional.

use std::path::{Path, PathBuf};

use adagnn_core::featurize::AngleAggregation;
use adagnn_core::nn::AdamConfig;
use adagnn_core::{BasisConfig, CutoffConfig, ModelConfig, OptimConfig};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub edge_cutoff: f64,
    /// Defaults to `√edge_cutoff`.
    pub angle_cutoff: Option<f64>,
    /// Require `angle_cutoff² = edge_cutoff`.
    pub paper_mode: bool,
    pub max_neighbors: Option<usize>,
    pub n_rbf: usize,
    pub n_sbf: usize,
    pub aggregation: AngleAggregation,

    pub hidden_dim: usize,
    pub num_blocks: usize,
    pub use_angles: bool,
    pub seed: u64,

    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub peak_factor: f64,
    pub warmup_fraction: f64,
    pub final_factor: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub valid_fraction: f64,

    pub data: Option<PathBuf>,
    pub valid: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let model = ModelConfig::default();
        let optim = OptimConfig::default();
        Self {
            edge_cutoff: model.cutoffs.edge_cutoff,
            angle_cutoff: None,
            paper_mode: false,
            max_neighbors: None,
            n_rbf: model.basis.n_rbf,
            n_sbf: model.basis.n_sbf,
            aggregation: model.basis.aggregation,
            hidden_dim: model.hidden_dim,
            num_blocks: model.num_blocks,
            use_angles: model.use_angles,
            seed: model.seed,
            learning_rate: optim.learning_rate,
            batch_size: optim.batch_size,
            epochs: optim.epochs,
            peak_factor: optim.peak_factor,
            warmup_fraction: optim.warmup_fraction,
            final_factor: optim.final_factor,
            beta1: optim.adam.beta1,
            beta2: optim.adam.beta2,
            adam_eps: optim.adam.eps,
            valid_fraction: optim.valid_fraction,
            data: None,
            valid: None,
            test: None,
            out: None,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        Self::default().merge_file(path)
    }

    /// Fields present in the JSON file at `path` replace those of `self`.
    pub fn merge_file(self, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let usage = |e: serde_json::Error| Error::Usage(format!("{}: {e}", path.display()));
        let overrides: serde_json::Value = serde_json::from_str(&text).map_err(usage)?;
        let serde_json::Value::Object(overrides) = overrides else {
            return Err(Error::Usage(format!("{}: expected a JSON object", path.display())));
        };
        let mut merged = serde_json::to_value(&self)?;
        let fields = merged.as_object_mut().expect("struct serializes to an object");
        for (k, v) in overrides {
            fields.insert(k, v);
        }
        serde_json::from_value(merged).map_err(usage)
    }

    /// Config reproducing a stored model and optimizer setup.
    pub fn from_parts(model: &ModelConfig, optim: &OptimConfig) -> Self {
        Self {
            edge_cutoff: model.cutoffs.edge_cutoff,
            angle_cutoff: Some(model.cutoffs.angle_cutoff),
            max_neighbors: model.cutoffs.max_neighbors,
            n_rbf: model.basis.n_rbf,
            n_sbf: model.basis.n_sbf,
            aggregation: model.basis.aggregation,
            hidden_dim: model.hidden_dim,
            num_blocks: model.num_blocks,
            use_angles: model.use_angles,
            seed: model.seed,
            learning_rate: optim.learning_rate,
            batch_size: optim.batch_size,
            epochs: optim.epochs,
            peak_factor: optim.peak_factor,
            warmup_fraction: optim.warmup_fraction,
            final_factor: optim.final_factor,
            beta1: optim.adam.beta1,
            beta2: optim.adam.beta2,
            adam_eps: optim.adam.eps,
            valid_fraction: optim.valid_fraction,
            ..Self::default()
        }
    }

    pub fn cutoffs(&self) -> Result<CutoffConfig> {
        let angle = self.angle_cutoff.unwrap_or_else(|| self.edge_cutoff.sqrt());
        let cutoffs = CutoffConfig::new(self.edge_cutoff, angle)?.with_max_neighbors(self.max_neighbors);
        if self.paper_mode && !cutoffs.satisfies_square_relation() {
            return Err(Error::Usage(format!(
                "paper mode requires angle_cutoff = √edge_cutoff = {}, got {angle}",
                self.edge_cutoff.sqrt()
            )));
        }
        Ok(cutoffs)
    }

    pub fn basis(&self) -> BasisConfig {
        BasisConfig {
            n_rbf: self.n_rbf,
            n_sbf: self.n_sbf,
            edge_cutoff: self.edge_cutoff,
            aggregation: self.aggregation,
        }
    }

    pub fn model(&self) -> Result<ModelConfig> {
        let config = ModelConfig {
            hidden_dim: self.hidden_dim,
            num_blocks: self.num_blocks,
            basis: self.basis(),
            cutoffs: self.cutoffs()?,
            use_angles: self.use_angles,
            seed: self.seed,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn optim(&self) -> Result<OptimConfig> {
        let config = OptimConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            epochs: self.epochs,
            peak_factor: self.peak_factor,
            warmup_fraction: self.warmup_fraction,
            final_factor: self.final_factor,
            adam: AdamConfig { beta1: self.beta1, beta2: self.beta2, eps: self.adam_eps },
            seed: self.seed,
            valid_fraction: self.valid_fraction,
        };
        config.validate()?;
        Ok(config)
    }

    /// Every cross-field check, before any data is read.
    pub fn validate(&self) -> Result<()> {
        self.model()?;
        self.optim()?;
        Ok(())
    }
}
