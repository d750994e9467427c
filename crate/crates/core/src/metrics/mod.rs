//! Evaluation metrics: RMSE/MAE for ratings, HR@k and NDCG@k for
//! single-positive rankings, BLEU-n and ROUGE-1/2/L for generated text.
//!
//! All metrics are pure functions. Text metrics return values in [0, 1];
//! reports scale them by 100.

mod ranking;
mod rating;
mod text;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ranking::{hr_ndcg_at_k, ndcg_at_k};
pub use rating::rmse_mae;
pub use text::{bleu_n, lcs_len, rouge, rouge_with_beta, tokenize, RougeVariant, ROUGE_BETA};

use crate::harness::TaskKind;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("metric needs at least one input")]
    EmptyInput,
    #[error("reference text has no tokens")]
    EmptyReference,
    #[error("unsupported BLEU order {0}; expected 1..=4")]
    BadOrder(usize),
}

/// Aggregate scores for one task run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub task: TaskKind,
    /// Keys look like `RMSE`, `NDCG@10`, `BLEU2`, `ROUGE-L`.
    pub metric_values: BTreeMap<String, f64>,
    pub n_evaluated: usize,
    pub n_failed: usize,
}

impl MetricReport {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.metric_values.get(name).copied()
    }
}

/// Per-instance outcome fed to [`aggregate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InstanceScore {
    Rating { predicted: f64, truth: f64 },
    Ranking { ranked: Vec<String>, positive: String },
    Text { candidate: String, reference: String },
    Failed,
}

pub const RANK_CUTOFFS: [usize; 2] = [5, 10];

/// Folds per-instance outcomes into a report.
///
/// Failed ranking instances count as misses. Failed rating instances are
/// excluded from RMSE/MAE but reported in `n_failed`. Failed text
/// instances score zero on every text metric.
pub fn aggregate(task: TaskKind, scores: &[InstanceScore]) -> MetricReport {
    let n_failed = scores.iter().filter(|s| matches!(s, InstanceScore::Failed)).count();
    let mut values = BTreeMap::new();
    match task {
        TaskKind::RatingPrediction => {
            let pairs: Vec<(f64, f64)> = scores
                .iter()
                .filter_map(|s| match s {
                    InstanceScore::Rating { predicted, truth } => Some((*predicted, *truth)),
                    _ => None,
                })
                .collect();
            if let Ok((rmse, mae)) = rmse_mae(&pairs) {
                values.insert("RMSE".to_string(), rmse);
                values.insert("MAE".to_string(), mae);
            }
        }
        TaskKind::DirectRec | TaskKind::SequentialRec => {
            if !scores.is_empty() {
                for k in RANK_CUTOFFS {
                    let (mut hr, mut ndcg) = (0.0, 0.0);
                    for s in scores {
                        if let InstanceScore::Ranking { ranked, positive } = s {
                            let (h, n) = hr_ndcg_at_k(ranked, positive, k);
                            hr += h;
                            ndcg += n;
                        }
                    }
                    let n = scores.len() as f64;
                    values.insert(format!("HR@{k}"), hr / n);
                    values.insert(format!("NDCG@{k}"), ndcg / n);
                }
            }
        }
        TaskKind::ExplanationGen | TaskKind::ReviewSummarization => {
            if !scores.is_empty() {
                let mut sums = [0.0f64; 4];
                for s in scores {
                    if let InstanceScore::Text { candidate, reference } = s {
                        sums[0] += bleu_n(candidate, reference, 2).unwrap_or(0.0);
                        sums[1] += rouge(candidate, reference, RougeVariant::R1).unwrap_or(0.0);
                        sums[2] += rouge(candidate, reference, RougeVariant::R2).unwrap_or(0.0);
                        sums[3] += rouge(candidate, reference, RougeVariant::RL).unwrap_or(0.0);
                    }
                }
                let n = scores.len() as f64;
                for (name, sum) in ["BLEU2", "ROUGE-1", "ROUGE-2", "ROUGE-L"].iter().zip(sums) {
                    values.insert(name.to_string(), sum / n);
                }
            }
        }
    }
    MetricReport {
        task,
        metric_values: values,
        n_evaluated: scores.len() - n_failed,
        n_failed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn failed_ranking_counts_as_miss() {
        let scores = vec![
            InstanceScore::Ranking {
                ranked: vec!["a".into(), "b".into()],
                positive: "a".into(),
            },
            InstanceScore::Failed,
        ];
        let report = aggregate(TaskKind::DirectRec, &scores);
        assert_eq!(report.get("HR@5"), Some(0.5));
        assert_eq!(report.get("NDCG@10"), Some(0.5));
        assert_eq!((report.n_evaluated, report.n_failed), (1, 1));
    }

    #[test]
    fn failed_rating_excluded_but_counted() {
        let scores = vec![
            InstanceScore::Rating { predicted: 4.0, truth: 5.0 },
            InstanceScore::Rating { predicted: 3.0, truth: 3.0 },
            InstanceScore::Failed,
        ];
        let report = aggregate(TaskKind::RatingPrediction, &scores);
        assert!((report.get("RMSE").unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(report.get("MAE"), Some(0.5));
        assert_eq!(report.n_failed, 1);
    }

    #[test]
    fn text_report_has_four_columns() {
        let scores = vec![InstanceScore::Text {
            candidate: "great product".into(),
            reference: "great product".into(),
        }];
        let report = aggregate(TaskKind::ExplanationGen, &scores);
        for key in ["BLEU2", "ROUGE-1", "ROUGE-2", "ROUGE-L"] {
            assert!((report.get(key).unwrap() - 1.0).abs() < 1e-12, "{key}");
        }
    }
}
