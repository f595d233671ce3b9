//! Structural checks shared by the property tests and the acceptance run.
//! Each returns the largest deviation observed.

use attlist::data::ProfileExample;
use attlist::model::{forward, AblationConfig, Dropout, ModelConfig, ParameterSet};
use attlist::numeric::AdamState;
use attlist::training::{train_step, TrainConfig};
use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{random_example, random_params, tiny_config};

pub fn no_positions() -> AblationConfig {
    AblationConfig {
        use_position: false,
        ..AblationConfig::default()
    }
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn sum_where(v: &[f64], keep: impl Fn(usize) -> bool) -> f64 {
    v.iter().enumerate().filter(|(i, _)| keep(*i)).map(|(_, x)| x).sum()
}

/// Distance of α (candidate and every live profile list) and β from
/// summing to one over live slots and zero over padding.
pub fn normalization(seed: u64) -> f64 {
    let cfg = tiny_config(AblationConfig::default());
    let p = random_params(cfg, seed);
    let ex = random_example(&cfg, &mut ChaCha8Rng::seed_from_u64(seed));
    let t = forward(&p, &ex, false, 0.0, 0).unwrap();
    let mut worst: f64 = 0.0;
    let mut check = |w: &[f64], live: &[bool]| {
        if live.iter().any(|&b| b) {
            worst = worst.max((sum_where(w, |i| live[i]) - 1.0).abs());
            worst = worst.max(sum_where(w, |i| !live[i]).abs());
        }
    };
    check(&t.candidate.alpha, &ex.list_mask);
    check(&t.beta, &ex.profile_mask);
    for (s, slot) in t.profile.iter().enumerate() {
        if ex.profile_mask[s] {
            check(&slot.alpha, ex.profile_slot(s).1);
        }
    }
    worst
}

/// Change in the candidate's list vector when its slots are shuffled,
/// positions off.
pub fn item_permutation(seed: u64) -> f64 {
    let cfg = tiny_config(no_positions());
    let p = random_params(cfg, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ex = random_example(&cfg, &mut rng);
    let mut perm: Vec<usize> = (0..cfg.max_items).collect();
    perm.shuffle(&mut rng);
    let mut shuffled = ex.clone();
    shuffled.list_items = perm.iter().map(|&i| ex.list_items[i]).collect();
    shuffled.list_mask = perm.iter().map(|&i| ex.list_mask[i]).collect();
    let a = forward(&p, &ex, false, 0.0, 0).unwrap().candidate.y;
    let b = forward(&p, &shuffled, false, 0.0, 0).unwrap().candidate.y;
    max_diff(&a, &b)
}

/// Change in the user vector when profile slots are shuffled.
pub fn profile_permutation(seed: u64) -> f64 {
    let cfg = tiny_config(AblationConfig::default());
    let p = random_params(cfg, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ex = random_example(&cfg, &mut rng);
    let (n, m) = (cfg.max_lists, cfg.max_items);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let mut shuffled = ex.clone();
    for (dst, &src) in perm.iter().enumerate() {
        shuffled.profile_lists[dst] = ex.profile_lists[src];
        shuffled.profile_mask[dst] = ex.profile_mask[src];
        shuffled.profile_items[dst * m..(dst + 1) * m].copy_from_slice(&ex.profile_items[src * m..(src + 1) * m]);
        shuffled.profile_item_mask[dst * m..(dst + 1) * m].copy_from_slice(&ex.profile_item_mask[src * m..(src + 1) * m]);
    }
    let a = forward(&p, &ex, false, 0.0, 0).unwrap().x;
    let b = forward(&p, &shuffled, false, 0.0, 0).unwrap().x;
    max_diff(&a, &b)
}

/// Re-lays an example out at larger `n`, `m` by appending padding.
pub fn extend(ex: &ProfileExample, n: usize, m: usize) -> ProfileExample {
    let (n0, m0) = (ex.max_lists(), ex.max_items());
    let mut list_items = ex.list_items.clone();
    list_items.resize(m, 0);
    let mut profile_items = vec![0; n * m];
    for s in 0..n0 {
        profile_items[s * m..s * m + m0].copy_from_slice(&ex.profile_items[s * m0..(s + 1) * m0]);
    }
    let mut profile_lists = ex.profile_lists.clone();
    profile_lists.resize(n, None);
    ProfileExample {
        list_mask: list_items.iter().map(|&i| i != 0).collect(),
        list_items,
        profile_item_mask: profile_items.iter().map(|&i| i != 0).collect(),
        profile_items,
        profile_mask: profile_lists.iter().map(Option::is_some).collect(),
        profile_lists,
        ..ex.clone()
    }
}

/// The same parameters at a larger layout: only the position table grows,
/// and its new rows are random.
pub fn widen(p: &ParameterSet, n: usize, m: usize, seed: u64) -> ParameterSet {
    let cfg = ModelConfig {
        max_lists: n,
        max_items: m,
        ..p.config
    };
    let mut big = random_params(cfg, seed);
    for (id, name, t) in p.store.iter() {
        let dst = big.store.get_mut(big.store.find(name).unwrap());
        if id == p.ids.pos_emb {
            dst.data_mut()[..t.len()].copy_from_slice(t.data());
        } else {
            dst.data_mut().copy_from_slice(t.data());
        }
    }
    big
}

/// Change in score, x and y after padding the example to a larger N and M.
pub fn padding_extension(seed: u64, extra_n: usize, extra_m: usize) -> f64 {
    let cfg = tiny_config(AblationConfig::default());
    let p = random_params(cfg, seed);
    let ex = random_example(&cfg, &mut ChaCha8Rng::seed_from_u64(seed));
    let (n, m) = (cfg.max_lists + extra_n, cfg.max_items + extra_m);
    let big = widen(&p, n, m, seed);
    let a = forward(&p, &ex, false, 0.0, 0).unwrap();
    let b = forward(&big, &extend(&ex, n, m), false, 0.0, 0).unwrap();
    (a.score - b.score)
        .abs()
        .max(max_diff(&a.x, &b.x))
        .max(max_diff(&a.candidate.y, &b.candidate.y))
}

/// Largest absolute entry of the padding embedding row over `steps`
/// optimiser steps with dropout on.
pub fn padding_row_drift(steps: u64, seed: u64) -> f64 {
    let cfg = tiny_config(AblationConfig::default());
    let train = TrainConfig {
        dropout: 0.3,
        learning_rate: 0.01,
        ..TrainConfig::default()
    };
    let mut p = random_params(cfg, seed);
    let mut adam = AdamState::new(&p.store, train.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for step in 0..steps {
        let batch: Vec<_> = (0..4).map(|_| random_example(&cfg, &mut rng)).collect();
        let mut drop = Dropout::training(train.dropout, seed, &[step]).unwrap();
        train_step(&mut p, &mut adam, &batch, &train, &mut drop).unwrap();
        worst = p.padding_row().iter().fold(worst, |w, v| w.max(v.abs()));
    }
    worst
}
