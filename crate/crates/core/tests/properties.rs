mod common;

use attlist::model::{forward, AblationConfig, AblationVariant, Dropout};
use attlist::numeric::AdamState;
use attlist::training::{batch_loss, train_step, TrainConfig};
use common::invariants::{self, no_positions};
use common::{random_example, random_params, tiny_config, SIZES};
use proptest::prelude::*;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weights_are_normalized(seed in any::<u64>()) {
        prop_assert!(invariants::normalization(seed) <= 1e-9);
    }

    #[test]
    fn scores_are_probabilities(seed in any::<u64>()) {
        let cfg = tiny_config(AblationConfig::default());
        let p = random_params(cfg, seed);
        let ex = random_example(&cfg, &mut ChaCha8Rng::seed_from_u64(seed));
        let score = forward(&p, &ex, false, 0.0, 0).unwrap().score;
        prop_assert!(score > 0.0 && score < 1.0);
    }

    #[test]
    fn list_vector_ignores_item_order_without_positions(seed in any::<u64>()) {
        prop_assert!(invariants::item_permutation(seed) <= 1e-9);
    }

    #[test]
    fn user_vector_ignores_profile_order(seed in any::<u64>()) {
        prop_assert!(invariants::profile_permutation(seed) <= 1e-9);
    }

    #[test]
    fn extra_padding_changes_nothing(seed in any::<u64>(), extra_n in 1usize..3, extra_m in 1usize..4) {
        prop_assert!(invariants::padding_extension(seed, extra_n, extra_m) <= 1e-12);
    }

    #[test]
    fn duplicate_items_share_attention_rows(seed in any::<u64>(), item in 1usize..=SIZES.items) {
        let cfg = tiny_config(no_positions());
        let p = random_params(cfg, seed);
        let mut ex = random_example(&cfg, &mut ChaCha8Rng::seed_from_u64(seed));
        ex.list_items = vec![item, item, 1 + item % SIZES.items];
        ex.list_mask = vec![true; 3];
        let f = forward(&p, &ex, false, 0.0, 0).unwrap().candidate.f;
        prop_assert_eq!(&f[0..3], &f[3..6]);
    }
}

#[test]
fn padding_row_stays_zero_through_training() {
    assert_eq!(invariants::padding_row_drift(100, 3), 0.0);
}

#[test]
fn small_step_decreases_single_example_loss() {
    let cfg = tiny_config(AblationConfig::default());
    let train = TrainConfig {
        dropout: 0.0,
        learning_rate: 1e-4,
        ..TrainConfig::default()
    };
    for seed in 0..20 {
        let mut p = random_params(cfg, seed);
        let ex = vec![random_example(&cfg, &mut ChaCha8Rng::seed_from_u64(seed))];
        let before = batch_loss(&p, &ex, train.l2, &mut Dropout::inference()).unwrap();
        let mut adam = AdamState::new(&p.store, train.learning_rate);
        train_step(&mut p, &mut adam, &ex, &train, &mut Dropout::inference()).unwrap();
        let after = batch_loss(&p, &ex, train.l2, &mut Dropout::inference()).unwrap();
        assert!(after < before, "seed {seed}: {before} -> {after}");
    }
}

#[test]
fn every_ablation_switch_is_live() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let full_cfg = tiny_config(AblationConfig::default());
    let examples: Vec<_> = (0..20)
        .map(|_| {
            let mut ex = random_example(&full_cfg, &mut rng);
            // every switch needs a non-trivial list and profile to act on
            ex.list_items = vec![1, 2, 3];
            ex.list_mask = vec![true; 3];
            ex.profile_items[..3].copy_from_slice(&[4, 5, 6]);
            ex.profile_item_mask[..3].copy_from_slice(&[true; 3]);
            ex.profile_items[3..].copy_from_slice(&[7, 8, 0]);
            ex.profile_item_mask[3..].copy_from_slice(&[true, true, false]);
            ex.profile_lists = vec![Some(1), Some(2)];
            ex.profile_mask = vec![true, true];
            ex
        })
        .collect();
    let base = random_params(full_cfg, 5);
    let literal = AblationConfig {
        mask_padding: false,
        ..AblationConfig::default()
    };
    let refined = AblationConfig {
        aggregate_refined_at_list_level: true,
        ..AblationConfig::default()
    };
    let variants = AblationVariant::ALL
        .iter()
        .skip(1)
        .map(|v| (v.name().to_string(), v.apply(AblationConfig::default())))
        .chain([("literal".to_string(), literal), ("refined".to_string(), refined)]);
    for (name, ab) in variants {
        let p = random_params(tiny_config(ab), 5);
        assert_eq!(p.store.get(p.ids.item_emb), base.store.get(base.ids.item_emb));
        let differs = examples.iter().any(|ex| {
            let a = forward(&base, ex, false, 0.0, 0).unwrap().score;
            let b = forward(&p, ex, false, 0.0, 0).unwrap().score;
            (a - b).abs() > 1e-9
        });
        assert!(differs, "{name} has no effect");
    }
}
