//! BLEU and ROUGE.
//!
//! Tokenization: lower-case, then maximal runs of alphanumeric characters.
//! Punctuation and whitespace only separate tokens.
//!
//! BLEU-n: uniform weights over orders 1..=n, clipped n-gram precision and
//! the usual brevity penalty. Unigram precision is never smoothed; a
//! higher order with zero clipped matches uses add-one precision
//! `1 / (total + 1)`.
//!
//! ROUGE-N and ROUGE-L report the F-measure with `beta = 1.2`.

use std::collections::HashMap;

use super::MetricError;

pub const ROUGE_BETA: f64 = 1.2;

pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if n > 0 && tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Returns (clipped matches, candidate n-gram total, reference n-gram total).
fn overlap(cand: &[String], refr: &[String], n: usize) -> (usize, usize, usize) {
    let c = ngram_counts(cand, n);
    let r = ngram_counts(refr, n);
    let matches = c
        .iter()
        .map(|(g, &count)| count.min(r.get(g).copied().unwrap_or(0)))
        .sum();
    (matches, cand.len().saturating_sub(n - 1), refr.len().saturating_sub(n - 1))
}

pub fn bleu_n(candidate: &str, reference: &str, n: usize) -> Result<f64, MetricError> {
    if !(1..=4).contains(&n) {
        return Err(MetricError::BadOrder(n));
    }
    let refr = tokenize(reference);
    if refr.is_empty() {
        return Err(MetricError::EmptyReference);
    }
    let cand = tokenize(candidate);
    if cand.is_empty() {
        return Ok(0.0);
    }
    let mut log_sum = 0.0;
    for order in 1..=n {
        let (matches, total, _) = overlap(&cand, &refr, order);
        let precision = if matches > 0 {
            matches as f64 / total as f64
        } else if order == 1 {
            return Ok(0.0);
        } else {
            1.0 / (total as f64 + 1.0)
        };
        log_sum += precision.ln();
    }
    let (c, r) = (cand.len() as f64, refr.len() as f64);
    let bp = if c > r { 1.0 } else { (1.0 - r / c).exp() };
    Ok(bp * (log_sum / n as f64).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RougeVariant {
    R1,
    R2,
    RL,
}

fn f_measure(precision: f64, recall: f64, beta: f64) -> f64 {
    if precision == 0.0 || recall == 0.0 {
        return 0.0;
    }
    let b2 = beta * beta;
    (1.0 + b2) * precision * recall / (recall + b2 * precision)
}

pub fn rouge(candidate: &str, reference: &str, variant: RougeVariant) -> Result<f64, MetricError> {
    rouge_with_beta(candidate, reference, variant, ROUGE_BETA)
}

pub fn rouge_with_beta(
    candidate: &str,
    reference: &str,
    variant: RougeVariant,
    beta: f64,
) -> Result<f64, MetricError> {
    let refr = tokenize(reference);
    if refr.is_empty() {
        return Err(MetricError::EmptyReference);
    }
    let cand = tokenize(candidate);
    if cand.is_empty() {
        return Ok(0.0);
    }
    let (hits, cand_total, ref_total) = match variant {
        RougeVariant::R1 => overlap(&cand, &refr, 1),
        RougeVariant::R2 => overlap(&cand, &refr, 2),
        RougeVariant::RL => {
            let l = lcs_len(&cand, &refr);
            (l, cand.len(), refr.len())
        }
    };
    if cand_total == 0 && ref_total == 0 {
        // Both texts too short to contain a bigram.
        return Ok(if cand == refr { 1.0 } else { 0.0 });
    }
    if cand_total == 0 || ref_total == 0 {
        return Ok(0.0);
    }
    Ok(f_measure(
        hits as f64 / cand_total as f64,
        hits as f64 / ref_total as f64,
        beta,
    ))
}

/// Longest common subsequence length, O(n*m) time and O(m) space.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenization_is_case_and_punctuation_insensitive() {
        assert_eq!(tokenize("Great, product!  Durable."), vec!["great", "product", "durable"]);
        assert!(tokenize(" ... ").is_empty());
    }

    #[test]
    fn bleu_identity_and_disjoint() {
        for n in 1..=4 {
            assert!((bleu_n("the miswak is great", "the miswak is great", n).unwrap() - 1.0).abs() < 1e-12);
            assert!((bleu_n("fresh", "fresh", n).unwrap() - 1.0).abs() < 1e-12);
        }
        let disjoint = bleu_n("alpha beta gamma delta", "one two three four", 4).unwrap();
        assert_eq!(disjoint, 0.0);
        assert!(disjoint < 0.1);
    }

    #[test]
    fn bleu2_brevity_penalty_hand_value() {
        // p1 = 2/2, p2 = 1/1, BP = exp(1 - 3/2)
        let v = bleu_n("good product", "good product indeed", 2).unwrap();
        assert!((v - (-0.5f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn bleu_add_one_on_missing_higher_order() {
        // "a c b" vs "a b c": p1 = 3/3; candidate bigrams {a c, c b} have
        // no match, so p2 = 1/(2+1). Equal lengths, BP = 1.
        let v = bleu_n("a c b", "a b c", 2).unwrap();
        assert!((v - (1.0f64 * (1.0 / 3.0)).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn bleu_errors() {
        assert_eq!(bleu_n("x", "", 2), Err(MetricError::EmptyReference));
        assert_eq!(bleu_n("x", "x", 5), Err(MetricError::BadOrder(5)));
        assert_eq!(bleu_n("", "x", 2), Ok(0.0));
    }

    #[test]
    fn rouge_spot_values() {
        for v in [RougeVariant::R1, RougeVariant::R2, RougeVariant::RL] {
            assert_eq!(rouge("durable good price", "durable good price", v).unwrap(), 1.0);
            assert_eq!(rouge("alpha beta", "gamma delta", v).unwrap(), 0.0);
            assert_eq!(rouge("single", "single", v).unwrap(), 1.0);
        }
        // LCS = 2, P = 2/3, R = 1, F_1.2 = 2.44 * (2/3) / (1 + 1.44 * 2/3) = 122/147
        let rl = rouge("a b c", "a c", RougeVariant::RL).unwrap();
        assert!((rl - 122.0 / 147.0).abs() < 1e-12);
        let rl_f1 = rouge_with_beta("a b c", "a c", RougeVariant::RL, 1.0).unwrap();
        assert!((rl_f1 - 0.8).abs() < 1e-12);
        assert_eq!(rouge("x", "  ", RougeVariant::R1), Err(MetricError::EmptyReference));
    }

    #[test]
    fn lcs_basics() {
        assert_eq!(lcs_len(&[1, 2, 3, 4], &[2, 4]), 2);
        assert_eq!(lcs_len::<u8>(&[], &[1]), 0);
        assert_eq!(lcs_len(&['a', 'b', 'c', 'b', 'd', 'a', 'b'], &['b', 'd', 'c', 'a', 'b', 'a']), 4);
    }
}
