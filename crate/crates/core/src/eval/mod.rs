//! Top-k ranking evaluation.

mod metrics;
mod ranking;

pub use metrics::{hits_at_k, ndcg_at_k, precision_recall_at_k};
pub use ranking::{
    candidates_for, evaluate, rank_candidates, rank_for_user, truth_for, AttListScorer, CandidatePolicy,
    MetricsReport, OracleScorer, RandomScorer, RankedCandidates, Scorer,
};
