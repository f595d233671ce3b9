use std::collections::HashSet;

use rand::seq::index;
use rand::Rng;

use super::dataset::{InteractionDataset, Split};
use crate::numeric::rng::{stream_rng, streams};

/// Uniform negative sampling over lists a user never interacted with, in
/// any split.
#[derive(Clone, Debug)]
pub struct NegativeSampler {
    n_lists: usize,
    positives: Vec<Vec<usize>>,
    train_counts: Vec<usize>,
}

impl NegativeSampler {
    pub fn new(ds: &InteractionDataset) -> Self {
        let mut positives: Vec<Vec<usize>> = vec![Vec::new(); ds.n_users()];
        let mut train_counts = vec![0; ds.n_users()];
        for it in ds.interactions() {
            positives[it.user].push(it.list);
            if it.split == Split::Train {
                train_counts[it.user] += 1;
            }
        }
        positives.iter_mut().for_each(|p| p.sort_unstable());
        NegativeSampler {
            n_lists: ds.n_lists(),
            positives,
            train_counts,
        }
    }

    pub fn is_positive(&self, user: usize, list: usize) -> bool {
        self.positives[user].binary_search(&list).is_ok()
    }

    pub fn available(&self, user: usize) -> usize {
        self.n_lists - self.positives[user].len()
    }

    /// `min(ρ · |train positives|, available)` distinct negatives for `user`,
    /// drawn from the stream `(seed, epoch, user)`. Sorted ascending.
    pub fn sample(&self, user: usize, rho: usize, seed: u64, epoch: u64) -> Vec<usize> {
        let mut rng = stream_rng(seed, &[streams::NEGATIVES, epoch, user as u64]);
        let want = rho * self.train_counts[user];
        self.sample_n(user, want, &mut rng)
    }

    /// Up to `want` distinct negatives for `user` from `rng`, sorted.
    pub fn sample_n<R: Rng + ?Sized>(&self, user: usize, want: usize, rng: &mut R) -> Vec<usize> {
        let avail = self.available(user);
        let k = want.min(avail);
        if k == 0 {
            if want > 0 {
                log::debug!("user {user} has no negative candidates");
            }
            return Vec::new();
        }
        let mut out: Vec<usize> = if 2 * k > avail {
            let pool: Vec<usize> = (0..self.n_lists).filter(|&l| !self.is_positive(user, l)).collect();
            index::sample(rng, pool.len(), k).into_iter().map(|i| pool[i]).collect()
        } else {
            let mut chosen = HashSet::with_capacity(k);
            while chosen.len() < k {
                let l = rng.gen_range(0..self.n_lists);
                if !self.is_positive(user, l) {
                    chosen.insert(l);
                }
            }
            chosen.into_iter().collect()
        };
        out.sort_unstable();
        out
    }

    /// A single negative, or `None` if the user interacted with every list.
    pub fn sample_one<R: Rng + ?Sized>(&self, user: usize, rng: &mut R) -> Option<usize> {
        if self.available(user) == 0 {
            return None;
        }
        loop {
            let l = rng.gen_range(0..self.n_lists);
            if !self.is_positive(user, l) {
                return Some(l);
            }
        }
    }
}

/// Negatives for one user and epoch. See [`NegativeSampler::sample`].
pub fn sample_negatives(ds: &InteractionDataset, user: usize, rho: usize, seed: u64, epoch: u64) -> Vec<usize> {
    NegativeSampler::new(ds).sample(user, rho, seed, epoch)
}
