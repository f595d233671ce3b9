//! The hierarchical attention model.
//!
//! Items of a list are embedded (plus positions), refined by self-attention
//! and pooled by a learned attention into a list vector `y`. A user's
//! profile lists go through the same two steps to give `x`. The prediction
//! network scores `[p ⊙ q; q; p]` with `p = x + e_u` and `q = y + e_l`.

mod config;
mod export;
mod forward;
mod layers;
mod params;

pub use config::{AblationConfig, AblationVariant, ModelConfig};
pub use export::export_attention;
pub use forward::{
    encode_list, encode_user, example_on_tape, forward, forward_batch, head_on_tape, head_score, list_on_tape,
    predict, user_on_tape, BatchVars, ExampleVars, ForwardTrace, ListTrace, ListVars, UserVars,
};
pub use layers::{positional_item_repr, self_attention, vanilla_aggregate, Dropout, Level};
pub use params::{Cardinalities, ParamIds, ParameterSet, Projections};
