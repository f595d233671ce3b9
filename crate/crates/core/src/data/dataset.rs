use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Split> {
        match s {
            "train" => Some(Split::Train),
            "validation" => Some(Split::Validation),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

/// One user–list interaction. Position in [`InteractionDataset::interactions`]
/// is the interaction's order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interaction {
    pub user: usize,
    pub list: usize,
    pub split: Split,
}

/// Users, lists, items, list contents and binary user–list interactions,
/// all on dense 0-based indices.
#[derive(Clone, Debug, PartialEq)]
pub struct InteractionDataset {
    user_ids: Vec<String>,
    list_ids: Vec<String>,
    item_ids: Vec<String>,
    lists: Vec<Vec<usize>>,
    interactions: Vec<Interaction>,
    by_user: Vec<Vec<usize>>,
}

impl InteractionDataset {
    /// Validates index ranges and uniqueness of (user, list) pairs.
    pub fn new(
        user_ids: Vec<String>,
        list_ids: Vec<String>,
        item_ids: Vec<String>,
        lists: Vec<Vec<usize>>,
        interactions: Vec<Interaction>,
    ) -> Result<Self> {
        if lists.len() != list_ids.len() {
            return Err(Error::Validation(format!(
                "{} list contents for {} list ids",
                lists.len(),
                list_ids.len()
            )));
        }
        for (l, items) in lists.iter().enumerate() {
            if let Some(&bad) = items.iter().find(|&&i| i >= item_ids.len()) {
                return Err(Error::Validation(format!(
                    "list {l} contains item {bad} but only {} items exist",
                    item_ids.len()
                )));
            }
        }
        let mut seen = HashSet::with_capacity(interactions.len());
        let mut by_user = vec![Vec::new(); user_ids.len()];
        for (k, it) in interactions.iter().enumerate() {
            if it.user >= user_ids.len() || it.list >= list_ids.len() {
                return Err(Error::Validation(format!(
                    "interaction ({}, {}) out of range",
                    it.user, it.list
                )));
            }
            if !seen.insert((it.user, it.list)) {
                return Err(Error::Validation(format!(
                    "duplicate interaction ({}, {})",
                    it.user, it.list
                )));
            }
            by_user[it.user].push(k);
        }
        Ok(InteractionDataset {
            user_ids,
            list_ids,
            item_ids,
            lists,
            interactions,
            by_user,
        })
    }

    pub fn n_users(&self) -> usize {
        self.user_ids.len()
    }

    pub fn n_lists(&self) -> usize {
        self.list_ids.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_ids.len()
    }

    pub fn user_ids(&self) -> &[String] {
        &self.user_ids
    }

    pub fn list_ids(&self) -> &[String] {
        &self.list_ids
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }

    pub fn user_index(&self, id: &str) -> Option<usize> {
        self.user_ids.iter().position(|u| u == id)
    }

    pub fn list_index(&self, id: &str) -> Option<usize> {
        self.list_ids.iter().position(|l| l == id)
    }

    /// Items of `list` in curation order.
    pub fn list_items(&self, list: usize) -> &[usize] {
        &self.lists[list]
    }

    pub fn lists(&self) -> &[Vec<usize>] {
        &self.lists
    }

    pub fn interactions(&self) -> &[Interaction] {
        &self.interactions
    }

    pub fn interaction_count(&self) -> usize {
        self.interactions.len()
    }

    /// `|R| / (|U|·|L|)`
    pub fn density(&self) -> f64 {
        let cells = self.n_users() as f64 * self.n_lists() as f64;
        if cells == 0.0 {
            0.0
        } else {
            self.interactions.len() as f64 / cells
        }
    }

    pub fn unique_items_in_lists(&self) -> usize {
        let mut seen = vec![false; self.n_items()];
        self.lists.iter().flatten().for_each(|&i| seen[i] = true);
        seen.iter().filter(|&&s| s).count()
    }

    /// The user's interactions in order.
    pub fn user_interactions(&self, user: usize) -> impl Iterator<Item = &Interaction> + '_ {
        self.by_user[user].iter().map(move |&k| &self.interactions[k])
    }

    /// Lists the user interacted with in `split`, in interaction order.
    pub fn user_lists(&self, user: usize, split: Split) -> Vec<usize> {
        self.user_interactions(user)
            .filter(|it| it.split == split)
            .map(|it| it.list)
            .collect()
    }

    pub fn split_count(&self, split: Split) -> usize {
        self.interactions.iter().filter(|it| it.split == split).count()
    }

    pub(crate) fn with_splits(&self, splits: &[Split]) -> InteractionDataset {
        let mut out = self.clone();
        for (it, &s) in out.interactions.iter_mut().zip(splits) {
            it.split = s;
        }
        out
    }

    /// SHA-256 over every dense structure, including split tags.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(format!("{} {} {}\n", self.n_users(), self.n_lists(), self.n_items()));
        for (l, items) in self.lists.iter().enumerate() {
            h.update(format!("L{l}:"));
            for i in items {
                h.update(format!("{i},"));
            }
            h.update("\n");
        }
        for it in &self.interactions {
            h.update(format!("{} {} {}\n", it.user, it.list, it.split.as_str()));
        }
        hex::encode(h.finalize())
    }

    pub fn summary(&self) -> DatasetSummary {
        DatasetSummary {
            users: self.n_users(),
            lists: self.n_lists(),
            interactions: self.interaction_count(),
            density: self.density(),
            unique_items: self.unique_items_in_lists(),
            train: self.split_count(Split::Train),
            validation: self.split_count(Split::Validation),
            test: self.split_count(Split::Test),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub users: usize,
    pub lists: usize,
    pub interactions: usize,
    pub density: f64,
    pub unique_items: usize,
    pub train: usize,
    pub validation: usize,
    pub test: usize,
}

impl std::fmt::Display for DatasetSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "{:>10} {:>10} {:>14} {:>9} {:>14}",
            "#Users", "#Lists", "#Interactions", "Density", "#Unique Items"
        )?;
        write!(
            f,
            "{:>10} {:>10} {:>14} {:>8.3}% {:>14}",
            self.users,
            self.lists,
            self.interactions,
            self.density * 100.0,
            self.unique_items
        )
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// 3 users, 4 lists, 6 items.
    pub fn tiny() -> InteractionDataset {
        let ids = |p: &str, n: usize| (0..n).map(|i| format!("{p}{i}")).collect::<Vec<_>>();
        let lists = vec![vec![0, 1, 2], vec![2, 3], vec![4, 5, 0, 1], vec![]];
        let it = |user, list| Interaction {
            user,
            list,
            split: Split::Train,
        };
        InteractionDataset::new(
            ids("u", 3),
            ids("l", 4),
            ids("i", 6),
            lists,
            vec![it(0, 0), it(0, 1), it(1, 1), it(1, 2), it(2, 3), it(0, 2)],
        )
        .unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_duplicates_and_out_of_range() {
        let ids = |n: usize| (0..n).map(|i| i.to_string()).collect::<Vec<_>>();
        let it = |user, list| Interaction {
            user,
            list,
            split: Split::Train,
        };
        let dup = InteractionDataset::new(ids(1), ids(1), ids(1), vec![vec![0]], vec![it(0, 0), it(0, 0)]);
        assert!(dup.is_err());
        let oob = InteractionDataset::new(ids(1), ids(1), ids(1), vec![vec![0]], vec![it(0, 1)]);
        assert!(oob.is_err());
        let bad_item = InteractionDataset::new(ids(1), ids(1), ids(1), vec![vec![1]], vec![it(0, 0)]);
        assert!(bad_item.is_err());
    }

    #[test]
    fn density_and_user_views() {
        let ds = fixtures::tiny();
        assert!((ds.density() - 6.0 / 12.0).abs() < 1e-15);
        assert_eq!(ds.user_lists(0, Split::Train), vec![0, 1, 2]);
        assert_eq!(ds.unique_items_in_lists(), 6);
    }

    #[test]
    fn fingerprint_tracks_splits() {
        let ds = fixtures::tiny();
        let mut splits = vec![Split::Train; 6];
        assert_eq!(ds.with_splits(&splits).fingerprint(), ds.fingerprint());
        splits[0] = Split::Test;
        assert_ne!(ds.with_splits(&splits).fingerprint(), ds.fingerprint());
    }
}
