mod common;

use std::collections::HashSet;

use attlist::data::{Interaction, InteractionDataset, Split};
use attlist::eval::{evaluate, ndcg_at_k, precision_recall_at_k, CandidatePolicy, RandomScorer};
use common::metric_oracle;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn metrics_match_brute_force_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..1000 {
        let n = rng.gen_range(1..60);
        let mut ranked: Vec<usize> = (0..n).collect();
        ranked.shuffle(&mut rng);
        let t = rng.gen_range(0..=n.min(12));
        let truth: Vec<usize> = rand::seq::index::sample(&mut rng, n, t).into_vec();
        let set: HashSet<usize> = truth.iter().copied().collect();
        for k in [1, 5, 10] {
            let (nd, p, r) = metric_oracle(&ranked, &truth, k);
            let (p2, r2) = precision_recall_at_k(&ranked, &set, k);
            assert!((ndcg_at_k(&ranked, &set, k) - nd).abs() <= 1e-12);
            assert!((p2 - p).abs() <= 1e-12 && (r2 - r).abs() <= 1e-12);
        }
    }
}

proptest! {
    #[test]
    fn hit_counts_are_integral(seed in any::<u64>(), k in 1usize..15) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(1..40);
        let mut ranked: Vec<usize> = (0..n).collect();
        ranked.shuffle(&mut rng);
        let truth: HashSet<usize> = (0..n).filter(|_| rng.gen_bool(0.2)).collect();
        let (p, r) = precision_recall_at_k(&ranked, &truth, k);
        let ph = p * k as f64;
        prop_assert!((ph - ph.round()).abs() < 1e-9);
        let rh = r * truth.len() as f64;
        prop_assert!((rh - rh.round()).abs() < 1e-9);
        let nd = ndcg_at_k(&ranked, &truth, k);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&nd));
    }

    #[test]
    fn ndcg_is_one_iff_hits_fill_the_top(seed in any::<u64>(), k in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(2..20);
        let mut ranked: Vec<usize> = (0..n).collect();
        ranked.shuffle(&mut rng);
        let truth: HashSet<usize> = (0..n).filter(|_| rng.gen_bool(0.3)).collect();
        prop_assume!(!truth.is_empty());
        let ideal = ranked.iter().take(k.min(truth.len())).all(|l| truth.contains(l));
        prop_assert_eq!((ndcg_at_k(&ranked, &truth, k) - 1.0).abs() < 1e-12, ideal);
    }

    #[test]
    fn swapping_a_hit_down_never_helps(seed in any::<u64>(), k in 1usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(2..25);
        let mut ranked: Vec<usize> = (0..n).collect();
        ranked.shuffle(&mut rng);
        let truth: HashSet<usize> = (0..n).filter(|_| rng.gen_bool(0.3)).collect();
        let i = rng.gen_range(0..n - 1);
        prop_assume!(truth.contains(&ranked[i]) && !truth.contains(&ranked[i + 1]));
        let before = ndcg_at_k(&ranked, &truth, k);
        ranked.swap(i, i + 1);
        prop_assert!(ndcg_at_k(&ranked, &truth, k) <= before + 1e-15);
    }
}

#[test]
fn random_scorer_is_near_zero_on_large_universe() {
    // 1,000 lists, 200 users with one or two test lists each
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut its = Vec::new();
    for user in 0..200 {
        let count = rng.gen_range(1..=2);
        for list in rand::seq::index::sample(&mut rng, 1000, count) {
            its.push(Interaction {
                user,
                list,
                split: Split::Test,
            });
        }
    }
    let ids = |p: &str, n: usize| (0..n).map(|i| format!("{p}{i}")).collect::<Vec<_>>();
    let ds = InteractionDataset::new(ids("u", 200), ids("l", 1000), ids("i", 1), vec![vec![0]; 1000], its).unwrap();
    let mut total = 0.0;
    for seed in 0..100 {
        let rep = evaluate(&RandomScorer { seed }, &ds, Split::Test, CandidatePolicy::All, "random").unwrap();
        total += rep.ndcg_at_10;
    }
    let mean = total / 100.0;
    assert!(mean < 1.0, "mean random NDCG@10 {mean}%");
}
