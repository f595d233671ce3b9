use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::eval::CandidatePolicy;
use crate::model::{AblationConfig, ModelConfig};

/// Hyperparameters of one training run. Defaults are the tuned Goodreads
/// settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Latent dimensionality `d`.
    pub dim: usize,
    /// Predictive factors `D`.
    pub hidden: usize,
    /// Profile length `N`.
    pub max_lists: usize,
    /// List length `M`.
    pub max_items: usize,
    /// Negatives per positive `ρ`.
    pub rho: usize,
    /// Dropout rate `γ`, shared by every drop site.
    pub dropout: f64,
    /// L2 strength `λ` on the attention weight matrices.
    pub l2: f64,
    pub max_epochs: u64,
    pub patience: u64,
    pub seed: u64,
    /// Rescale gradients to this joint norm when set.
    pub clip_norm: Option<f64>,
    /// Candidates ranked during validation.
    pub candidates: CandidatePolicy,
    pub ablation: AblationConfig,
}

/// Threshold used when gradient clipping is switched on without a value.
pub const DEFAULT_CLIP_NORM: f64 = 5.0;

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            learning_rate: 0.001,
            dim: 96,
            hidden: 100,
            max_lists: 15,
            max_items: 32,
            rho: 3,
            dropout: 0.3,
            l2: 0.01,
            max_epochs: 100,
            patience: 10,
            seed: 1,
            clip_norm: None,
            candidates: CandidatePolicy::ExcludeSeen,
            ablation: AblationConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn model(&self) -> ModelConfig {
        ModelConfig {
            dim: self.dim,
            hidden: self.hidden,
            max_lists: self.max_lists,
            max_items: self.max_items,
            ablation: self.ablation,
        }
    }

    /// Rejects out-of-range values, naming the offending field.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("batch_size", self.batch_size),
            ("dim", self.dim),
            ("hidden", self.hidden),
            ("max_lists", self.max_lists),
            ("max_items", self.max_items),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive and finite".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config("dropout must be in [0, 1)".into()));
        }
        if !(self.l2.is_finite() && self.l2 >= 0.0) {
            return Err(Error::Config("l2 must be non-negative".into()));
        }
        if self.patience == 0 {
            return Err(Error::Config("patience must be positive".into()));
        }
        if let Some(c) = self.clip_norm {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::Config("clip_norm must be positive".into()));
            }
        }
        Ok(())
    }

    /// Hash of everything that shapes the optimisation trajectory. The
    /// epoch budget and patience are left out so a run can be extended.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.max_epochs = 0;
        c.patience = 0;
        let json = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}
