use rand::seq::SliceRandom;
use rand::Rng;

use super::dataset::{InteractionDataset, Split};
use crate::error::{Error, Result};
use crate::numeric::rng::{stream_rng, streams};

/// Assigns every interaction to train / validation / test.
///
/// Each user's interactions are shuffled and tagged by systematic sampling
/// with a random offset: every interaction lands in each split with exactly
/// the requested probability, and every user's split counts are within one
/// of `fraction · count`. A user with a single interaction therefore lands
/// in test with probability `fractions[2]`, and may have an empty test set.
pub fn split_dataset(ds: &InteractionDataset, fractions: [f64; 3], seed: u64) -> Result<InteractionDataset> {
    if fractions.iter().any(|&f| !(0.0..=1.0).contains(&f)) || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("split fractions {fractions:?} must be in [0,1] and sum to 1")));
    }
    let cut1 = fractions[0];
    let cut2 = fractions[0] + fractions[1];
    let tag = |x: f64| {
        if x < cut1 {
            Split::Train
        } else if x < cut2 {
            Split::Validation
        } else {
            Split::Test
        }
    };

    let mut splits = vec![Split::Train; ds.interaction_count()];
    let mut by_user: Vec<Vec<usize>> = vec![Vec::new(); ds.n_users()];
    for (k, it) in ds.interactions().iter().enumerate() {
        by_user[it.user].push(k);
    }
    for (user, mut ks) in by_user.into_iter().enumerate() {
        if ks.is_empty() {
            continue;
        }
        let mut rng = stream_rng(seed, &[streams::SPLIT, user as u64]);
        ks.shuffle(&mut rng);
        let offset: f64 = rng.gen();
        let n = ks.len() as f64;
        for (j, k) in ks.into_iter().enumerate() {
            splits[k] = tag((j as f64 + offset) / n);
        }
    }
    Ok(ds.with_splits(&splits))
}
