//! Evaluation episodes for the five recommendation tasks.
//!
//! Splits are leave-last-out per user. Direct recommendation ranks the
//! held-out item among 99 sampled items the user never touched. Few-shot
//! exemplars come from training interactions only.

mod instances;
mod predict;
mod prompt;
mod split;

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::memory::StoreError;

pub use instances::{make_instances, InstanceConfig, InstanceSet};
pub use predict::{
    filter_summarization_tests, parse_prediction, score_prediction, Prediction, PredictionValue, TitleIndex,
    AUTO_TITLE_BLOCKLIST,
};
pub use prompt::PromptBuilder;
pub use split::{sample_candidates, sample_negatives, split_dataset, DatasetSplit, UserSplit, MIN_INTERACTIONS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskKind {
    RatingPrediction,
    SequentialRec,
    DirectRec,
    ExplanationGen,
    ReviewSummarization,
}

impl TaskKind {
    pub fn all() -> [TaskKind; 5] {
        [
            TaskKind::RatingPrediction,
            TaskKind::SequentialRec,
            TaskKind::DirectRec,
            TaskKind::ExplanationGen,
            TaskKind::ReviewSummarization,
        ]
    }

    pub fn label(self) -> &'static str {
        match self {
            TaskKind::RatingPrediction => "rating",
            TaskKind::SequentialRec => "sequential",
            TaskKind::DirectRec => "direct",
            TaskKind::ExplanationGen => "explanation",
            TaskKind::ReviewSummarization => "summarization",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let key = s.to_ascii_lowercase().replace(['-', '_', ' '], "");
        TaskKind::all().into_iter().find(|t| {
            key == t.label() || key == format!("{:?}", t).to_ascii_lowercase()
        })
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("need {needed} eligible items for user {user_id}, found {available}")]
    InsufficientItems {
        user_id: String,
        needed: usize,
        available: usize,
    },
    #[error("invalid exemplar configuration: {0}")]
    InvalidExemplarConfig(String),
    #[error("unparseable answer: {0:?}")]
    UnparseableAnswer(String),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("instance file: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum GroundTruth {
    Rating(f64),
    Item(String),
    Text(String),
}

/// One in-context example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shot {
    pub question: String,
    pub answer: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExemplarMode {
    #[default]
    InDomain,
    Transfer,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExemplarConfig {
    pub shot_count: usize,
    pub mode: ExemplarMode,
    /// Domain the exemplars come from in transfer mode.
    pub source_domain: Option<String>,
}

impl Default for ExemplarConfig {
    fn default() -> Self {
        Self {
            shot_count: 3,
            mode: ExemplarMode::InDomain,
            source_domain: None,
        }
    }
}

impl ExemplarConfig {
    pub fn zero_shot() -> Self {
        Self {
            shot_count: 0,
            ..Self::default()
        }
    }

    pub fn validate(&self, eval_domain: &str) -> Result<(), HarnessError> {
        if self.mode == ExemplarMode::Transfer {
            match &self.source_domain {
                None => {
                    return Err(HarnessError::InvalidExemplarConfig(
                        "transfer mode needs source_domain".into(),
                    ))
                }
                Some(d) if d == eval_domain => {
                    return Err(HarnessError::InvalidExemplarConfig(format!(
                        "source_domain {d} equals the evaluation domain"
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskInstance {
    /// Stable id, `<task>-<domain>-<index>`.
    pub id: String,
    pub task: TaskKind,
    pub domain: String,
    pub user_id: String,
    pub target_item: String,
    pub ground_truth: GroundTruth,
    /// DirectRec only: the positive plus 99 negatives.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidates: Option<Vec<String>>,
    /// Train-split item ids in chronological order.
    pub history: Vec<String>,
    /// Review text for summarization.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub review: Option<String>,
    /// Titles of every item the instance mentions.
    pub item_titles: BTreeMap<String, String>,
    pub shots: Vec<Shot>,
    pub seed: u64,
}

impl TaskInstance {
    pub fn title<'a>(&'a self, item_id: &'a str) -> &'a str {
        self.item_titles.get(item_id).map_or(item_id, String::as_str)
    }
}

pub fn write_instances(path: impl AsRef<Path>, instances: &[TaskInstance]) -> Result<(), HarnessError> {
    let io = |e: std::io::Error| HarnessError::Io(e.to_string());
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    for inst in instances {
        let line = serde_json::to_string(inst).map_err(|e| HarnessError::Io(e.to_string()))?;
        writeln!(out, "{line}").map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn read_instances(path: impl AsRef<Path>) -> Result<Vec<TaskInstance>, HarnessError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| HarnessError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| HarnessError::Io(format!("{}:{}: {e}", path.display(), i + 1)))?,
        );
    }
    Ok(out)
}
