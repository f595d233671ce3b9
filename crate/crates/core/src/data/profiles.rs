//! Fixed-size padded inputs for the model.
//!
//! Item IDs here are embedding rows: row 0 is the padding item and real
//! item `i` maps to row `i + 1`.

use super::dataset::{InteractionDataset, Split};

pub const PADDING_ITEM: usize = 0;

/// One (user, candidate list) example with its padded inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct ProfileExample {
    pub user: usize,
    pub list: usize,
    pub label: f64,
    /// Dataset list index occupying each profile slot; `None` for padding.
    pub profile_lists: Vec<Option<usize>>,
    /// `N × M` row-major item rows.
    pub profile_items: Vec<usize>,
    /// `N` slot mask.
    pub profile_mask: Vec<bool>,
    /// `N × M` item mask.
    pub profile_item_mask: Vec<bool>,
    /// `M` candidate item rows.
    pub list_items: Vec<usize>,
    /// `M` candidate item mask.
    pub list_mask: Vec<bool>,
}

impl ProfileExample {
    pub fn max_lists(&self) -> usize {
        self.profile_mask.len()
    }

    pub fn max_items(&self) -> usize {
        self.list_items.len()
    }

    pub fn profile_slot(&self, slot: usize) -> (&[usize], &[bool]) {
        let m = self.max_items();
        (
            &self.profile_items[slot * m..(slot + 1) * m],
            &self.profile_item_mask[slot * m..(slot + 1) * m],
        )
    }

    /// Position indices `0..M`.
    pub fn positions(&self) -> std::ops::Range<usize> {
        0..self.max_items()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PaddedProfileBatch {
    pub examples: Vec<ProfileExample>,
}

/// Builds padded list vectors and user profiles from the train split.
///
/// Profiles hold at most `N` train lists. When a user has more, the `N`
/// most recent (by interaction order) are kept, in their original order.
#[derive(Clone, Debug)]
pub struct ProfileBuilder {
    n: usize,
    m: usize,
    list_vectors: Vec<Vec<usize>>,
    train_lists: Vec<Vec<usize>>,
}

impl ProfileBuilder {
    pub fn new(ds: &InteractionDataset, n: usize, m: usize) -> Self {
        assert!(n >= 1 && m >= 1, "profile sizes must be positive");
        let list_vectors = (0..ds.n_lists()).map(|l| pad_list(ds.list_items(l), m)).collect();
        let train_lists = (0..ds.n_users()).map(|u| ds.user_lists(u, Split::Train)).collect();
        ProfileBuilder {
            n,
            m,
            list_vectors,
            train_lists,
        }
    }

    pub fn max_lists(&self) -> usize {
        self.n
    }

    pub fn max_items(&self) -> usize {
        self.m
    }

    /// Padded embedding rows of `list`.
    pub fn list_vector(&self, list: usize) -> &[usize] {
        &self.list_vectors[list]
    }

    pub fn list_mask(&self, list: usize) -> Vec<bool> {
        self.list_vectors[list].iter().map(|&i| i != PADDING_ITEM).collect()
    }

    /// Profile lists of `user`, never including `exclude`.
    pub fn profile_lists(&self, user: usize, exclude: Option<usize>) -> Vec<usize> {
        let all: Vec<usize> = self.train_lists[user]
            .iter()
            .copied()
            .filter(|&l| Some(l) != exclude)
            .collect();
        let start = all.len().saturating_sub(self.n);
        all[start..].to_vec()
    }

    /// Builds one example. The candidate is always kept out of the profile,
    /// so a positive label never leaks through the user side.
    pub fn example(&self, user: usize, list: usize, label: f64) -> ProfileExample {
        self.example_excluding(user, list, label, Some(list))
    }

    /// Like [`ProfileBuilder::example`] with explicit control over which
    /// list, if any, is held out of the profile.
    pub fn example_excluding(&self, user: usize, list: usize, label: f64, exclude: Option<usize>) -> ProfileExample {
        let (n, m) = (self.n, self.m);
        let lists = self.profile_lists(user, exclude);
        let mut profile_lists = vec![None; n];
        let mut profile_items = vec![PADDING_ITEM; n * m];
        for (slot, &l) in lists.iter().enumerate() {
            profile_lists[slot] = Some(l);
            profile_items[slot * m..(slot + 1) * m].copy_from_slice(&self.list_vectors[l]);
        }
        let profile_mask = profile_lists.iter().map(Option::is_some).collect();
        let profile_item_mask = profile_items.iter().map(|&i| i != PADDING_ITEM).collect();
        ProfileExample {
            user,
            list,
            label,
            profile_lists,
            profile_items,
            profile_mask,
            profile_item_mask,
            list_items: self.list_vectors[list].clone(),
            list_mask: self.list_mask(list),
        }
    }

    pub fn batch(&self, pairs: &[(usize, usize, f64)]) -> PaddedProfileBatch {
        PaddedProfileBatch {
            examples: pairs.iter().map(|&(u, l, r)| self.example(u, l, r)).collect(),
        }
    }
}

/// Earliest `m` items, shifted to embedding rows, padded with [`PADDING_ITEM`].
pub fn pad_list(items: &[usize], m: usize) -> Vec<usize> {
    let mut v: Vec<usize> = items.iter().take(m).map(|&i| i + 1).collect();
    v.resize(m, PADDING_ITEM);
    v
}
