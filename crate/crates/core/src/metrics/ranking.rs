use std::collections::HashSet;

/// Hit ratio and NDCG at `k` for a ranking with exactly one relevant item.
///
/// With a single positive at 1-based rank `r`, IDCG is 1 and
/// NDCG@k = 1 / log2(r + 1) when `r <= k`, else 0.
pub fn hr_ndcg_at_k(ranked: &[String], positive: &str, k: usize) -> (f64, f64) {
    match ranked.iter().take(k).position(|id| id == positive) {
        Some(idx) => (1.0, 1.0 / ((idx + 2) as f64).log2()),
        None => (0.0, 0.0),
    }
}

/// Binary-relevance NDCG@k for any number of relevant items.
pub fn ndcg_at_k(ranked: &[String], relevant: &HashSet<String>, k: usize) -> f64 {
    let dcg: f64 = ranked
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, id)| relevant.contains(*id))
        .map(|(i, _)| 1.0 / ((i + 2) as f64).log2())
        .sum();
    let ideal: f64 = (0..relevant.len().min(k)).map(|i| 1.0 / ((i + 2) as f64).log2()).sum();
    if ideal == 0.0 {
        0.0
    } else {
        dcg / ideal
    }
}
