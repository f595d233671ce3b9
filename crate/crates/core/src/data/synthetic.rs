//! Planted-topic datasets with power-law user activity and list length.
//!
//! Items and lists carry a latent topic. Lists are filled mostly with items
//! of their own topic; each user prefers one or two topics and interacts
//! with lists of those topics, except that a `noise` fraction of list slots
//! and of interactions ignore topic affinity altogether.

use std::collections::HashSet;

use rand::distributions::WeightedIndex;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use super::dataset::{Interaction, InteractionDataset, Split};
use crate::error::{Error, Result};
use crate::numeric::rng::{stream_rng, streams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub users: usize,
    pub lists: usize,
    pub items: usize,
    pub topics: usize,
    /// Exponent `s` of `P(k) ∝ k^-s` for interactions per user.
    pub activity_exponent: f64,
    pub min_activity: usize,
    pub max_activity: usize,
    /// Exponent of the list length distribution.
    pub length_exponent: f64,
    pub min_list_length: usize,
    pub max_list_length: usize,
    /// Zipf exponent of list popularity within a topic; 0 means uniform.
    pub popularity_exponent: f64,
    /// Zipf exponent of item popularity within a topic; 0 means uniform.
    pub item_popularity_exponent: f64,
    /// Probability that a list slot or an interaction ignores topics.
    pub noise: f64,
    pub seed: u64,
}

/// The default activity curve gives about ten interactions per list, close to the Goodreads corpus.
impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            users: 500,
            lists: 300,
            items: 2000,
            topics: 5,
            activity_exponent: 2.0,
            min_activity: 2,
            max_activity: 60,
            length_exponent: 1.5,
            min_list_length: 5,
            max_list_length: 40,
            popularity_exponent: 0.0,
            item_popularity_exponent: 1.0,
            noise: 0.1,
            seed: 1,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.users == 0 || self.lists == 0 || self.items == 0 || self.topics == 0 {
            return bad("user, list, item and topic counts must be positive");
        }
        if self.topics > self.lists {
            return bad("more topics than lists");
        }
        if self.topics > self.items {
            return bad("more topics than items");
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return bad("noise rate must be in [0, 1]");
        }
        if self.min_activity == 0 || self.min_activity > self.max_activity {
            return bad("activity range must satisfy 1 <= min <= max");
        }
        if self.min_list_length == 0 || self.min_list_length > self.max_list_length {
            return bad("list length range must satisfy 1 <= min <= max");
        }
        if self.activity_exponent <= 0.0 || self.length_exponent <= 0.0 || self.popularity_exponent < 0.0
            || self.item_popularity_exponent < 0.0
        {
            return bad("exponents must be positive");
        }
        Ok(())
    }
}

/// Generated dataset together with the planted topics.
#[derive(Clone, Debug)]
pub struct SyntheticData {
    pub dataset: InteractionDataset,
    pub item_topics: Vec<usize>,
    pub list_topics: Vec<usize>,
    pub user_topics: Vec<Vec<usize>>,
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<InteractionDataset> {
    Ok(generate_synthetic_with_topics(spec)?.dataset)
}

/// `P(k) ∝ k^-s` on `[lo, hi]`.
struct PowerLaw {
    lo: usize,
    dist: WeightedIndex<f64>,
}

impl PowerLaw {
    fn new(lo: usize, hi: usize, s: f64) -> Self {
        let w = (lo..=hi).map(|k| (k as f64).powf(-s));
        PowerLaw {
            lo,
            dist: WeightedIndex::new(w).expect("validated range"),
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        self.lo + self.dist.sample(rng)
    }
}

/// Rank-`r` weight `r^-s` per group member, ranks shuffled within a group.
fn zipf_pickers<R: Rng>(groups: &[Vec<usize>], s: f64, rng: &mut R) -> Vec<WeightedIndex<f64>> {
    groups
        .iter()
        .map(|g| {
            let mut w: Vec<f64> = (1..=g.len()).map(|r| (r as f64).powf(-s)).collect();
            w.shuffle(rng);
            WeightedIndex::new(w).expect("every topic has a member")
        })
        .collect()
}

pub fn generate_synthetic_with_topics(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = stream_rng(spec.seed, &[streams::SYNTHETIC]);
    let t = spec.topics;

    let mut item_topics: Vec<usize> = (0..spec.items)
        .map(|i| if i < t { i } else { rng.gen_range(0..t) })
        .collect();
    item_topics.shuffle(&mut rng);
    let mut items_by_topic = vec![Vec::new(); t];
    for (i, &k) in item_topics.iter().enumerate() {
        items_by_topic[k].push(i);
    }

    let mut list_topics: Vec<usize> = (0..spec.lists)
        .map(|l| if l < t { l } else { rng.gen_range(0..t) })
        .collect();
    list_topics.shuffle(&mut rng);
    let mut lists_by_topic = vec![Vec::new(); t];
    for (l, &k) in list_topics.iter().enumerate() {
        lists_by_topic[k].push(l);
    }

    let item_pickers = zipf_pickers(&items_by_topic, spec.item_popularity_exponent, &mut rng);
    let lengths = PowerLaw::new(spec.min_list_length, spec.max_list_length, spec.length_exponent);
    let mut lists = Vec::with_capacity(spec.lists);
    for &topic in &list_topics {
        let len = lengths.sample(&mut rng);
        let pool = &items_by_topic[topic];
        let mut seen = HashSet::new();
        let mut items = Vec::with_capacity(len);
        let mut tries = 0;
        while items.len() < len && tries < 50 * len {
            tries += 1;
            let item = if rng.gen::<f64>() < spec.noise {
                rng.gen_range(0..spec.items)
            } else {
                pool[item_pickers[topic].sample(&mut rng)]
            };
            if seen.insert(item) {
                items.push(item);
            }
        }
        lists.push(items);
    }

    let pickers = zipf_pickers(&lists_by_topic, spec.popularity_exponent, &mut rng);

    let activity = PowerLaw::new(spec.min_activity, spec.max_activity, spec.activity_exponent);
    let mut user_topics = Vec::with_capacity(spec.users);
    let mut interactions = Vec::new();
    for user in 0..spec.users {
        let mut prefs = vec![rng.gen_range(0..t)];
        if t > 1 && rng.gen_bool(0.5) {
            let mut second = rng.gen_range(0..t - 1);
            if second >= prefs[0] {
                second += 1;
            }
            prefs.push(second);
        }
        let target = activity.sample(&mut rng);
        let mut chosen = HashSet::new();
        let mut tries = 0;
        while chosen.len() < target && tries < 50 * target {
            tries += 1;
            let list = if rng.gen::<f64>() < spec.noise {
                rng.gen_range(0..spec.lists)
            } else {
                let k = prefs[rng.gen_range(0..prefs.len())];
                lists_by_topic[k][pickers[k].sample(&mut rng)]
            };
            if chosen.insert(list) {
                interactions.push(Interaction {
                    user,
                    list,
                    split: Split::Train,
                });
            }
        }
        user_topics.push(prefs);
    }

    let dataset = InteractionDataset::new(
        (0..spec.users).map(|i| format!("u{i}")).collect(),
        (0..spec.lists).map(|i| format!("l{i}")).collect(),
        (0..spec.items).map(|i| format!("i{i}")).collect(),
        lists,
        interactions,
    )?;
    Ok(SyntheticData {
        dataset,
        item_topics,
        list_topics,
        user_topics,
    })
}
