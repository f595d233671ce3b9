use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{ndcg_at_k, precision_recall_at_k};
use crate::data::{InteractionDataset, ProfileBuilder, Split};
use crate::error::{Error, Result};
use crate::model::{encode_list, encode_user, head_score, ParameterSet};
use crate::numeric::rng::stream_rng;

/// Anything that can score every list for a user.
pub trait Scorer: Sync {
    /// Fills `out` (one slot per list) with the user's scores.
    fn score_lists(&self, user: usize, out: &mut [f64]) -> Result<()>;
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CandidatePolicy {
    All,
    /// Drop lists the user interacted with in splits preceding the one
    /// being evaluated.
    #[default]
    ExcludeSeen,
}

/// One user's candidates in rank order.
#[derive(Clone, Debug, PartialEq)]
pub struct RankedCandidates {
    pub user: usize,
    pub lists: Vec<usize>,
    pub scores: Vec<f64>,
    pub truth: HashSet<usize>,
}

/// Descending score, ties by ascending list index.
fn order(scores: &[f64], a: usize, b: usize) -> Ordering {
    scores[b].total_cmp(&scores[a]).then(a.cmp(&b))
}

/// Sorts `candidates` into rank order. With `top` set only that many
/// leading entries are guaranteed sorted and the rest are dropped.
pub fn rank_candidates(scores: &[f64], mut candidates: Vec<usize>, top: Option<usize>) -> Vec<usize> {
    if let Some(k) = top {
        if k < candidates.len() {
            if k == 0 {
                return Vec::new();
            }
            candidates.select_nth_unstable_by(k - 1, |&a, &b| order(scores, a, b));
            candidates.truncate(k);
        }
    }
    candidates.sort_unstable_by(|&a, &b| order(scores, a, b));
    candidates
}

/// Splits whose positives are hidden from the ranking of `target`.
fn seen_splits(target: Split) -> &'static [Split] {
    match target {
        Split::Train => &[],
        Split::Validation => &[Split::Train],
        Split::Test => &[Split::Train, Split::Validation],
    }
}

pub fn candidates_for(ds: &InteractionDataset, user: usize, target: Split, policy: CandidatePolicy) -> Vec<usize> {
    match policy {
        CandidatePolicy::All => (0..ds.n_lists()).collect(),
        CandidatePolicy::ExcludeSeen => {
            let seen: HashSet<usize> = ds
                .user_interactions(user)
                .filter(|it| seen_splits(target).contains(&it.split))
                .map(|it| it.list)
                .collect();
            (0..ds.n_lists()).filter(|l| !seen.contains(l)).collect()
        }
    }
}

pub fn truth_for(ds: &InteractionDataset, user: usize, target: Split) -> HashSet<usize> {
    ds.user_lists(user, target).into_iter().collect()
}

/// Scores and fully ranks the user's candidates.
pub fn rank_for_user<S: Scorer + ?Sized>(
    scorer: &S,
    ds: &InteractionDataset,
    user: usize,
    target: Split,
    policy: CandidatePolicy,
) -> Result<RankedCandidates> {
    let mut scores = vec![0.0; ds.n_lists()];
    scorer.score_lists(user, &mut scores)?;
    let lists = rank_candidates(&scores, candidates_for(ds, user, target, policy), None);
    Ok(RankedCandidates {
        user,
        scores: lists.iter().map(|&l| scores[l]).collect(),
        lists,
        truth: truth_for(ds, user, target),
    })
}

/// Mean metrics over all users, in percent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub model: String,
    pub split: Split,
    pub users: usize,
    pub users_with_truth: usize,
    pub precision_at_5: f64,
    pub recall_at_5: f64,
    pub ndcg_at_5: f64,
    pub precision_at_10: f64,
    pub recall_at_10: f64,
    pub ndcg_at_10: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

impl MetricsReport {
    pub const HEADER: [&'static str; 6] = ["P@5", "R@5", "N@5", "P@10", "R@10", "N@10"];

    pub fn values(&self) -> [f64; 6] {
        [
            self.precision_at_5,
            self.recall_at_5,
            self.ndcg_at_5,
            self.precision_at_10,
            self.recall_at_10,
            self.ndcg_at_10,
        ]
    }

    /// Aligned text table over several reports, values in percent.
    pub fn table(reports: &[MetricsReport]) -> String {
        let width = reports.iter().map(|r| r.model.len()).max().unwrap_or(0).max(5);
        let mut s = format!("{:<width$}", "Model");
        for h in Self::HEADER {
            s += &format!(" {h:>8}");
        }
        s.push('\n');
        for r in reports {
            s += &format!("{:<width$}", r.model);
            for v in r.values() {
                s += &format!(" {v:>8.3}");
            }
            s.push('\n');
        }
        s
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&MetricsReport::table(std::slice::from_ref(self)))
    }
}

/// Ranks every user against `target` and averages P/R/NDCG at 5 and 10.
/// Users without truth lists count as zeros.
pub fn evaluate<S: Scorer + ?Sized>(
    scorer: &S,
    ds: &InteractionDataset,
    target: Split,
    policy: CandidatePolicy,
    model: &str,
) -> Result<MetricsReport> {
    if ds.n_users() == 0 {
        return Err(Error::Validation("no users to evaluate".into()));
    }
    let per_user: Vec<Option<[f64; 6]>> = (0..ds.n_users())
        .into_par_iter()
        .map(|user| {
            let truth = truth_for(ds, user, target);
            if truth.is_empty() {
                return Ok(None);
            }
            let mut scores = vec![0.0; ds.n_lists()];
            scorer.score_lists(user, &mut scores)?;
            let ranked = rank_candidates(&scores, candidates_for(ds, user, target, policy), Some(10));
            let (p5, r5) = precision_recall_at_k(&ranked, &truth, 5);
            let (p10, r10) = precision_recall_at_k(&ranked, &truth, 10);
            Ok(Some([
                p5,
                r5,
                ndcg_at_k(&ranked, &truth, 5),
                p10,
                r10,
                ndcg_at_k(&ranked, &truth, 10),
            ]))
        })
        .collect::<Result<_>>()?;
    let mut sums = [0.0; 6];
    for m in per_user.iter().flatten() {
        for (s, v) in sums.iter_mut().zip(m) {
            *s += v;
        }
    }
    let n = ds.n_users() as f64;
    let pct = |i: usize| 100.0 * sums[i] / n;
    Ok(MetricsReport {
        model: model.to_string(),
        split: target,
        users: ds.n_users(),
        users_with_truth: per_user.iter().flatten().count(),
        precision_at_5: pct(0),
        recall_at_5: pct(1),
        ndcg_at_5: pct(2),
        precision_at_10: pct(3),
        recall_at_10: pct(4),
        ndcg_at_10: pct(5),
        config_hash: None,
    })
}

/// The trained model with list vectors cached.
pub struct AttListScorer<'a> {
    params: &'a ParameterSet,
    builder: ProfileBuilder,
    lists: Vec<Vec<f64>>,
}

impl<'a> AttListScorer<'a> {
    pub fn new(params: &'a ParameterSet, ds: &InteractionDataset) -> Result<Self> {
        let builder = ProfileBuilder::new(ds, params.config.max_lists, params.config.max_items);
        let lists = (0..ds.n_lists())
            .into_par_iter()
            .map(|l| encode_list(params, &builder, l))
            .collect::<Result<_>>()?;
        Ok(AttListScorer { params, builder, lists })
    }
}

impl Scorer for AttListScorer<'_> {
    fn score_lists(&self, user: usize, out: &mut [f64]) -> Result<()> {
        let p = encode_user(self.params, &self.builder, user)?;
        for (o, q) in out.iter_mut().zip(&self.lists) {
            *o = head_score(self.params, &p, q);
        }
        Ok(())
    }
}

/// Scores a user's truth lists 1 and everything else 0.
pub struct OracleScorer {
    truth: Vec<HashSet<usize>>,
}

impl OracleScorer {
    pub fn new(ds: &InteractionDataset, target: Split) -> Self {
        OracleScorer {
            truth: (0..ds.n_users()).map(|u| truth_for(ds, u, target)).collect(),
        }
    }
}

impl Scorer for OracleScorer {
    fn score_lists(&self, user: usize, out: &mut [f64]) -> Result<()> {
        for (l, o) in out.iter_mut().enumerate() {
            *o = if self.truth[user].contains(&l) { 1.0 } else { 0.0 };
        }
        Ok(())
    }
}

/// Independent uniform scores per (seed, user).
pub struct RandomScorer {
    pub seed: u64,
}

impl Scorer for RandomScorer {
    fn score_lists(&self, user: usize, out: &mut [f64]) -> Result<()> {
        let mut rng = stream_rng(self.seed, &[user as u64]);
        out.iter_mut().for_each(|o| *o = rng.gen());
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{fixtures, split_dataset, Interaction};

    struct Fixed(Vec<f64>);

    impl Scorer for Fixed {
        fn score_lists(&self, _: usize, out: &mut [f64]) -> Result<()> {
            out.copy_from_slice(&self.0);
            Ok(())
        }
    }

    #[test]
    fn higher_score_first_and_ties_by_index() {
        assert_eq!(rank_candidates(&[0.9, 0.1], vec![0, 1], None), vec![0, 1]);
        assert_eq!(rank_candidates(&[0.1, 0.9], vec![0, 1], None), vec![1, 0]);
        assert_eq!(rank_candidates(&[0.5; 4], vec![3, 1, 2, 0], None), vec![0, 1, 2, 3]);
        let scores = [0.3, 0.7, 0.7, 0.1, 0.9];
        assert_eq!(rank_candidates(&scores, (0..5).collect(), Some(3)), vec![4, 1, 2]);
    }

    #[test]
    fn exclude_seen_drops_earlier_splits() {
        let its: Vec<Interaction> = [(0, Split::Train), (4, Split::Train), (7, Split::Validation), (9, Split::Test)]
            .iter()
            .map(|&(list, split)| Interaction { user: 0, list, split })
            .collect();
        let ds = InteractionDataset::new(
            vec!["u".into()],
            (0..10).map(|i| i.to_string()).collect(),
            vec!["i".into()],
            vec![vec![0]; 10],
            its,
        )
        .unwrap();
        assert_eq!(candidates_for(&ds, 0, Split::Test, CandidatePolicy::ExcludeSeen).len(), 7);
        assert_eq!(candidates_for(&ds, 0, Split::Validation, CandidatePolicy::ExcludeSeen).len(), 8);
        assert_eq!(candidates_for(&ds, 0, Split::Test, CandidatePolicy::All).len(), 10);
        let r = rank_for_user(&Fixed(vec![0.0; 10]), &ds, 0, Split::Test, CandidatePolicy::ExcludeSeen).unwrap();
        assert_eq!(r.lists, vec![1, 2, 3, 5, 6, 8, 9]);
        assert_eq!(r.truth, [9].into_iter().collect());
    }

    #[test]
    fn oracle_reaches_precision_bound() {
        let ds = split_dataset(&fixtures::tiny(), [0.0, 0.0, 1.0], 1).unwrap();
        let rep = evaluate(&OracleScorer::new(&ds, Split::Test), &ds, Split::Test, CandidatePolicy::All, "oracle").unwrap();
        let bound: f64 = (0..ds.n_users())
            .map(|u| truth_for(&ds, u, Split::Test).len().min(5) as f64 / 5.0)
            .sum::<f64>()
            / ds.n_users() as f64;
        assert!((rep.precision_at_5 - 100.0 * bound).abs() < 1e-12);
        assert_eq!(rep.ndcg_at_10, 100.0);
    }

    #[test]
    fn zero_truth_users_count_as_zero() {
        // only user 0 has test interactions; two others contribute zeros
        let ds = fixtures::tiny();
        let tags: Vec<Split> = ds
            .interactions()
            .iter()
            .map(|it| if it.user == 0 { Split::Test } else { Split::Train })
            .collect();
        let ds = ds.with_splits(&tags);
        let rep = evaluate(&OracleScorer::new(&ds, Split::Test), &ds, Split::Test, CandidatePolicy::All, "o").unwrap();
        assert_eq!(rep.users_with_truth, 1);
        assert!((rep.ndcg_at_10 - 100.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn table_is_ordered_and_fixed_precision() {
        let ds = split_dataset(&fixtures::tiny(), [0.0, 0.0, 1.0], 1).unwrap();
        let rep = evaluate(&RandomScorer { seed: 3 }, &ds, Split::Test, CandidatePolicy::All, "random").unwrap();
        let t = rep.to_string();
        let header: Vec<&str> = t.lines().next().unwrap().split_whitespace().collect();
        assert_eq!(header, ["Model", "P@5", "R@5", "N@5", "P@10", "R@10", "N@10"]);
        let row = t.lines().nth(1).unwrap();
        assert!(row.split_whitespace().skip(1).all(|v| v.split('.').nth(1).unwrap().len() == 3));
        assert_eq!(rep, evaluate(&RandomScorer { seed: 3 }, &ds, Split::Test, CandidatePolicy::All, "random").unwrap());
    }
}
