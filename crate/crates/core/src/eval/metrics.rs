use std::collections::HashSet;

/// Binary-relevance NDCG over the first `k` entries of `ranked`, with a
/// `log2(i + 1)` discount. Zero when `truth` is empty.
pub fn ndcg_at_k(ranked: &[usize], truth: &HashSet<usize>, k: usize) -> f64 {
    assert!(k >= 1, "cutoff must be positive");
    if truth.is_empty() {
        return 0.0;
    }
    let dcg: f64 = ranked
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, l)| truth.contains(l))
        .map(|(i, _)| discount(i))
        .sum();
    let ideal: f64 = (0..truth.len().min(k)).map(discount).sum();
    dcg / ideal
}

/// `1 / log2(i + 2)` for the 0-based rank `i`.
fn discount(i: usize) -> f64 {
    1.0 / ((i + 2) as f64).log2()
}

pub fn hits_at_k(ranked: &[usize], truth: &HashSet<usize>, k: usize) -> usize {
    ranked.iter().take(k).filter(|l| truth.contains(l)).count()
}

/// `(P@k, R@k)`; recall is zero for an empty truth set.
pub fn precision_recall_at_k(ranked: &[usize], truth: &HashSet<usize>, k: usize) -> (f64, f64) {
    assert!(k >= 1, "cutoff must be positive");
    let hits = hits_at_k(ranked, truth, k) as f64;
    let recall = if truth.is_empty() { 0.0 } else { hits / truth.len() as f64 };
    (hits / k as f64, recall)
}
