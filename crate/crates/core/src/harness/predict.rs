use std::collections::{HashMap, HashSet};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{GroundTruth, HarnessError, TaskInstance, TaskKind};
use crate::memory::normalize_title;
use crate::metrics::InstanceScore;

/// Review titles generated from the star rating rather than written.
pub const AUTO_TITLE_BLOCKLIST: [&str; 5] = ["five stars", "four stars", "three stars", "two stars", "one star"];

const MAX_RANKED: usize = 10;

static NUMBER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"-?\d+(?:\.\d+)?").unwrap());
static QUOTED: LazyLock<Regex> = LazyLock::new(|| Regex::new(r#""([^"]+)""#).unwrap());
static BULLET: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\s*(?:\d+\s*[.):]|[-*•])\s*").unwrap());

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PredictionValue {
    Rating { value: f64, clamped: bool },
    Ranking { items: Vec<String> },
    Text { text: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub task: TaskKind,
    pub value: PredictionValue,
    pub raw_answer: String,
}

/// Normalized title to item id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TitleIndex {
    by_title: HashMap<String, String>,
}

impl TitleIndex {
    /// On duplicate normalized titles the first pair wins.
    pub fn new<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        let mut by_title = HashMap::new();
        for (id, title) in pairs {
            by_title.entry(normalize_title(title)).or_insert_with(|| id.to_string());
        }
        Self { by_title }
    }

    pub fn lookup(&self, title: &str) -> Option<&str> {
        self.by_title.get(&normalize_title(title)).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.by_title.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_title.is_empty()
    }
}

/// Splits a ranked answer into title strings: one per line when the
/// answer has several lines, else the double-quoted strings, else the
/// comma-separated parts.
fn split_titles(answer: &str) -> Vec<String> {
    let lines: Vec<&str> = answer.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    let parts: Vec<String> = if lines.len() > 1 {
        lines.iter().map(|l| BULLET.replace(l, "").into_owned()).collect()
    } else if QUOTED.is_match(answer) {
        QUOTED.captures_iter(answer).map(|c| c[1].to_string()).collect()
    } else {
        answer
            .trim()
            .trim_start_matches('[')
            .trim_end_matches(']')
            .split(',')
            .map(|p| BULLET.replace(p, "").into_owned())
            .collect()
    };
    parts
        .into_iter()
        .map(|p| p.trim().trim_matches(|c| c == '"' || c == '\'' || c == ',').trim().to_string())
        .filter(|p| !p.is_empty())
        .collect()
}

/// Turns a final answer into a prediction.
///
/// Rankings are matched by normalized title against the instance's
/// candidates (DirectRec) or against `catalog` (SequentialRec; falls back
/// to the instance's own titles when absent). Unmatched titles are
/// dropped and the list is cut to ten.
pub fn parse_prediction(
    answer: &str,
    instance: &TaskInstance,
    catalog: Option<&TitleIndex>,
) -> Result<Prediction, HarnessError> {
    let unparseable = || HarnessError::UnparseableAnswer(answer.to_string());
    let value = match instance.task {
        TaskKind::RatingPrediction => {
            let raw: f64 = NUMBER
                .find(answer)
                .and_then(|m| m.as_str().parse().ok())
                .ok_or_else(unparseable)?;
            let value = raw.clamp(1.0, 5.0);
            PredictionValue::Rating {
                value,
                clamped: value != raw,
            }
        }
        TaskKind::DirectRec | TaskKind::SequentialRec => {
            let own;
            let index = match (instance.task, catalog) {
                (TaskKind::SequentialRec, Some(c)) => c,
                _ => {
                    let ids: Vec<&String> = match &instance.candidates {
                        Some(c) => c.iter().collect(),
                        None => instance.item_titles.keys().collect(),
                    };
                    own = TitleIndex::new(ids.into_iter().map(|id| (id.as_str(), instance.title(id))));
                    &own
                }
            };
            let mut seen = HashSet::new();
            let items: Vec<String> = split_titles(answer)
                .iter()
                .filter_map(|t| index.lookup(t))
                .filter(|id| seen.insert(id.to_string()))
                .take(MAX_RANKED)
                .map(str::to_string)
                .collect();
            if items.is_empty() {
                return Err(unparseable());
            }
            PredictionValue::Ranking { items }
        }
        TaskKind::ExplanationGen | TaskKind::ReviewSummarization => PredictionValue::Text {
            text: answer.to_string(),
        },
    };
    Ok(Prediction {
        task: instance.task,
        value,
        raw_answer: answer.to_string(),
    })
}

/// Metric input for one instance. Parse failures and mismatched shapes
/// become [`InstanceScore::Failed`].
pub fn score_prediction(instance: &TaskInstance, prediction: Option<&Prediction>) -> InstanceScore {
    match (prediction.map(|p| &p.value), &instance.ground_truth) {
        (Some(PredictionValue::Rating { value, .. }), GroundTruth::Rating(truth)) => InstanceScore::Rating {
            predicted: *value,
            truth: *truth,
        },
        (Some(PredictionValue::Ranking { items }), GroundTruth::Item(positive)) => InstanceScore::Ranking {
            ranked: items.clone(),
            positive: positive.clone(),
        },
        (Some(PredictionValue::Text { text }), GroundTruth::Text(reference)) => InstanceScore::Text {
            candidate: text.clone(),
            reference: reference.clone(),
        },
        _ => InstanceScore::Failed,
    }
}

pub(crate) fn is_auto_title(title: &str) -> bool {
    let folded = normalize_title(title);
    AUTO_TITLE_BLOCKLIST.contains(&folded.as_str())
}

/// Drops summarization instances whose reference title is on the
/// blocklist, case-folded. `None` uses [`AUTO_TITLE_BLOCKLIST`].
pub fn filter_summarization_tests(instances: Vec<TaskInstance>, blocklist: Option<&[String]>) -> Vec<TaskInstance> {
    let blocked = |t: &str| match blocklist {
        Some(list) => {
            let folded = normalize_title(t);
            list.iter().any(|b| normalize_title(b) == folded)
        }
        None => is_auto_title(t),
    };
    instances
        .into_iter()
        .filter(|inst| match (&inst.task, &inst.ground_truth) {
            (TaskKind::ReviewSummarization, GroundTruth::Text(t)) => !blocked(t),
            _ => true,
        })
        .collect()
}
