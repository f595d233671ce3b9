//! Datasets: loading, splitting, padding, negative sampling and synthesis.

mod dataset;
pub mod io;
mod profiles;
mod sampler;
mod split;
pub mod synthetic;

pub use dataset::{DatasetSummary, Interaction, InteractionDataset, Split};
pub use io::{load_dataset, load_prepared, save_prepared, LoadOptions, Manifest, PrepareSettings};
pub use profiles::{pad_list, PaddedProfileBatch, ProfileBuilder, ProfileExample, PADDING_ITEM};
pub use sampler::{sample_negatives, NegativeSampler};
pub use split::split_dataset;
pub use synthetic::{generate_synthetic, generate_synthetic_with_topics, SyntheticData, SyntheticSpec};

#[cfg(test)]
pub(crate) use dataset::fixtures;
