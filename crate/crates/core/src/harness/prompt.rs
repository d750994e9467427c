use super::{Shot, TaskInstance, TaskKind};
use crate::prompts::{
    fill, tool_descriptions, AGENT_PREAMBLE, DIRECT_REC_QUESTION, EXEMPLAR_HEADER, EXPLANATION_QUESTION,
    RATING_QUESTION, SEQUENTIAL_REC_QUESTION, SUMMARIZATION_QUESTION,
};

/// Builds the problem statement handed to a planner.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptBuilder {
    database_info: String,
}

/// `"A", "B"` with embedded double quotes replaced by single quotes.
pub(crate) fn item_list<'a>(titles: impl IntoIterator<Item = &'a str>) -> String {
    titles
        .into_iter()
        .map(|t| format!("\"{}\"", t.replace('"', "'")))
        .collect::<Vec<_>>()
        .join(", ")
}

pub(crate) fn task_question(
    task: TaskKind,
    user_id: &str,
    item_title: &str,
    items: &str,
    review: &str,
) -> String {
    let template = match task {
        TaskKind::RatingPrediction => RATING_QUESTION,
        TaskKind::SequentialRec => SEQUENTIAL_REC_QUESTION,
        TaskKind::DirectRec => DIRECT_REC_QUESTION,
        TaskKind::ExplanationGen => EXPLANATION_QUESTION,
        TaskKind::ReviewSummarization => SUMMARIZATION_QUESTION,
    };
    fill(
        template,
        &[
            ("user_id", user_id),
            ("item_title", item_title),
            ("item_list", items),
            ("review", review),
        ],
    )
}

impl PromptBuilder {
    pub fn new(database_info: impl Into<String>) -> Self {
        Self {
            database_info: database_info.into(),
        }
    }

    /// The task question alone.
    pub fn question(&self, instance: &TaskInstance) -> String {
        let items = match instance.task {
            TaskKind::DirectRec => item_list(
                instance
                    .candidates
                    .iter()
                    .flatten()
                    .map(|id| instance.title(id)),
            ),
            TaskKind::SequentialRec => item_list(instance.history.iter().map(|id| instance.title(id))),
            _ => String::new(),
        };
        task_question(
            instance.task,
            &instance.user_id,
            instance.title(&instance.target_item),
            &items,
            instance.review.as_deref().unwrap_or(""),
        )
    }

    /// Preamble, tool list, exemplars (when present) and the question.
    pub fn build(&self, instance: &TaskInstance) -> String {
        let mut out = format!(
            "{AGENT_PREAMBLE}\n{}\n\n",
            tool_descriptions(&self.database_info)
        );
        if !instance.shots.is_empty() {
            out.push_str(&render_shots(&instance.shots));
            out.push('\n');
        }
        out.push_str("Question: ");
        out.push_str(&self.question(instance));
        out
    }
}

fn render_shots(shots: &[Shot]) -> String {
    let mut out = format!("{EXEMPLAR_HEADER}\n");
    for shot in shots {
        out.push_str(&format!("Question: {}\nAnswer: {}\n", shot.question, shot.answer));
    }
    out
}
