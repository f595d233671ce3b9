use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Architecture switches. The default is the full model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AblationConfig {
    /// Learned attention pooling; otherwise mean pooling.
    pub use_vanilla_attention: bool,
    pub use_self_attention: bool,
    pub use_residual: bool,
    pub use_position: bool,
    pub use_id_embeddings: bool,
    /// Q/K/V projections inside self-attention.
    pub use_linear_projections: bool,
    /// Exclude padding from both attention softmaxes.
    pub mask_padding: bool,
    /// Pool refined rather than raw list vectors into the user vector.
    pub aggregate_refined_at_list_level: bool,
}

impl Default for AblationConfig {
    fn default() -> Self {
        AblationConfig {
            use_vanilla_attention: true,
            use_self_attention: true,
            use_residual: true,
            use_position: true,
            use_id_embeddings: true,
            use_linear_projections: false,
            mask_padding: true,
            aggregate_refined_at_list_level: false,
        }
    }
}

/// Named architecture variants used in ablation sweeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AblationVariant {
    Full,
    NoVanillaAttention,
    NoSelfAttention,
    NoAttentionMechanism,
    NoResidualConnections,
    NoPositionInformation,
    NoIdEmbedding,
    PlusLinearProjections,
}

impl AblationVariant {
    pub const ALL: [AblationVariant; 8] = [
        AblationVariant::Full,
        AblationVariant::NoVanillaAttention,
        AblationVariant::NoSelfAttention,
        AblationVariant::NoAttentionMechanism,
        AblationVariant::NoResidualConnections,
        AblationVariant::NoPositionInformation,
        AblationVariant::NoIdEmbedding,
        AblationVariant::PlusLinearProjections,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AblationVariant::Full => "AttList",
            AblationVariant::NoVanillaAttention => "-VanillaAttention",
            AblationVariant::NoSelfAttention => "-SelfAttention",
            AblationVariant::NoAttentionMechanism => "-AttentionMechanism",
            AblationVariant::NoResidualConnections => "-ResidualConnections",
            AblationVariant::NoPositionInformation => "-PositionInformation",
            AblationVariant::NoIdEmbedding => "-IDEmbedding",
            AblationVariant::PlusLinearProjections => "+LinearProjections",
        }
    }

    pub fn apply(self, base: AblationConfig) -> AblationConfig {
        let mut c = base;
        match self {
            AblationVariant::Full => {}
            AblationVariant::NoVanillaAttention => c.use_vanilla_attention = false,
            AblationVariant::NoSelfAttention => c.use_self_attention = false,
            AblationVariant::NoAttentionMechanism => {
                c.use_vanilla_attention = false;
                c.use_self_attention = false;
            }
            AblationVariant::NoResidualConnections => c.use_residual = false,
            AblationVariant::NoPositionInformation => c.use_position = false,
            AblationVariant::NoIdEmbedding => c.use_id_embeddings = false,
            AblationVariant::PlusLinearProjections => c.use_linear_projections = true,
        }
        c
    }
}

impl fmt::Display for AblationVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AblationVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| !c.is_whitespace() && *c != '_')
            .collect::<String>()
            .to_ascii_lowercase();
        let key = key.replace("identification", "id");
        AblationVariant::ALL
            .into_iter()
            .find(|v| {
                let n = v.name().to_ascii_lowercase();
                n == key || (n == "attlist" && (key == "full" || key == "attlist"))
            })
            .ok_or_else(|| {
                let names: Vec<&str> = AblationVariant::ALL.iter().map(|v| v.name()).collect();
                Error::Config(format!("unknown variant `{s}`; valid names: {}", names.join(", ")))
            })
    }
}

/// Sizes that fix every parameter shape.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Latent dimensionality `d`.
    pub dim: usize,
    /// Hidden width `D` of the prediction network.
    pub hidden: usize,
    /// Maximum lists per profile `N`.
    pub max_lists: usize,
    /// Maximum items per list `M`.
    pub max_items: usize,
    pub ablation: AblationConfig,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("d", self.dim),
            ("D", self.hidden),
            ("N", self.max_lists),
            ("M", self.max_items),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}
