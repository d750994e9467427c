//! The agent's tools: SQL over the memory store, web search and
//! summarization. Each tool makes its own model calls through the episode
//! session.

mod search;

use std::time::Instant;

use thiserror::Error;

use crate::gateway::{CompletionRequest, GatewayError, Session, TOOL_TEMPERATURE};
use crate::memory::MemoryStore;
use crate::planning::{ActionSpec, Observation, Tool, ToolDispatch};
use crate::prompts::{fill, QUESTION_TO_SQL, SEARCH_RESULT_TO_TEXT, SQL_RESULT_TO_TEXT, SUMMARIZE};

pub use search::{normalize_question, FixtureSearchProvider, HttpSearchConfig, HttpSearchProvider, SearchProvider};

pub const TAG_SQL_TRANSLATE: &str = "tool.sql.translate";
pub const TAG_SQL_CONVERT: &str = "tool.sql.convert";
pub const TAG_SEARCH_CONVERT: &str = "tool.search.convert";
pub const TAG_SUMMARIZE: &str = "tool.summarize";

pub const OBSERVATION_CAP: usize = 2000;
pub const TRUNCATION_MARKER: &str = " ...[truncated]";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ToolError {
    #[error("model output is not a single SELECT: {0:?}")]
    SqlGenerationFailed(String),
    #[error("query failed: {message}")]
    SqlExecutionFailed { sql: String, message: String },
    #[error("search unavailable: {0}")]
    SearchUnavailable(String),
    #[error("conversion produced no text")]
    ConversionFailed,
    #[error("empty input")]
    EmptyInput,
    #[error("{0} cannot be dispatched")]
    NotDispatchable(&'static str),
}

impl ToolError {
    pub fn category(&self) -> &'static str {
        match self {
            ToolError::SqlGenerationFailed(_) => "SqlGenerationFailed",
            ToolError::SqlExecutionFailed { .. } => "SqlExecutionFailed",
            ToolError::SearchUnavailable(_) => "SearchUnavailable",
            ToolError::ConversionFailed => "ConversionFailed",
            ToolError::EmptyInput => "EmptyInput",
            ToolError::NotDispatchable(_) => "NotDispatchable",
        }
    }

    /// Audit data available even though the tool failed.
    pub fn intermediate(&self) -> Option<String> {
        match self {
            ToolError::SqlGenerationFailed(raw) => Some(raw.clone()),
            ToolError::SqlExecutionFailed { sql, .. } => Some(sql.clone()),
            _ => None,
        }
    }
}

/// Either a contained tool error or a gateway error that ends the episode.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ToolFailure {
    #[error(transparent)]
    Tool(#[from] ToolError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToolOutcome {
    pub observation: String,
    pub tool: Tool,
    /// Generated SQL, or the raw search payload.
    pub raw_intermediate: Option<String>,
    pub duration_ms: u64,
}

pub struct ToolSuite<'a> {
    store: &'a MemoryStore,
    search: Option<&'a dyn SearchProvider>,
    database_info: String,
    observation_cap: usize,
}

impl<'a> ToolSuite<'a> {
    pub fn new(store: &'a MemoryStore) -> Self {
        Self {
            store,
            search: None,
            database_info: store.schema_description().text,
            observation_cap: OBSERVATION_CAP,
        }
    }

    pub fn with_search(mut self, provider: &'a dyn SearchProvider) -> Self {
        self.search = Some(provider);
        self
    }

    pub fn with_observation_cap(mut self, cap: usize) -> Self {
        self.observation_cap = cap;
        self
    }

    pub fn database_info(&self) -> &str {
        &self.database_info
    }

    pub fn dispatch(&self, action: &ActionSpec, llm: &Session<'_>) -> Result<ToolOutcome, ToolFailure> {
        let started = Instant::now();
        let (observation, raw_intermediate) = match action.tool {
            Tool::Sql => self.sql_tool(&action.argument, llm)?,
            Tool::Search => self.search_tool(&action.argument, llm)?,
            Tool::Summarize => (self.summarize_tool(&action.argument, llm)?, None),
            Tool::Finish => return Err(ToolError::NotDispatchable("Finish").into()),
        };
        Ok(ToolOutcome {
            observation: cap(observation, self.observation_cap),
            tool: action.tool,
            raw_intermediate,
            duration_ms: started.elapsed().as_millis() as u64,
        })
    }

    /// Question to SQL, execution, rows to sentences. Returns the
    /// observation and the generated SQL.
    pub fn sql_tool(&self, question: &str, llm: &Session<'_>) -> Result<(String, Option<String>), ToolFailure> {
        let prompt = fill(
            QUESTION_TO_SQL,
            &[("question", question), ("database_info", &self.database_info)],
        );
        let generated = complete(llm, prompt, TAG_SQL_TRANSLATE)?;
        let sql = extract_select(&generated).ok_or_else(|| ToolError::SqlGenerationFailed(generated.clone()))?;
        let rows = self
            .store
            .execute_readonly(&sql)
            .map_err(|e| ToolError::SqlExecutionFailed {
                sql: sql.clone(),
                message: e.to_string(),
            })?;
        let result = rows.to_string();
        if llm.gateway().raw_tool_output() {
            let text = if result.is_empty() { "(no rows)".to_string() } else { result };
            return Ok((text, Some(sql)));
        }
        let prompt = fill(
            SQL_RESULT_TO_TEXT,
            &[("question", question), ("sql_query", &sql), ("sql_result", &result)],
        );
        let text = complete(llm, prompt, TAG_SQL_CONVERT)?;
        if text.trim().is_empty() {
            return Err(ToolError::ConversionFailed.into());
        }
        Ok((text.trim().to_string(), Some(sql)))
    }

    pub fn search_tool(&self, question: &str, llm: &Session<'_>) -> Result<(String, Option<String>), ToolFailure> {
        let provider = self
            .search
            .ok_or_else(|| ToolError::SearchUnavailable("no provider configured".into()))?;
        let payload = match provider.search(question)? {
            serde_json::Value::Null => String::new(),
            v => v.to_string(),
        };
        if llm.gateway().raw_tool_output() {
            let text = if payload.is_empty() { "(no results)".to_string() } else { payload.clone() };
            return Ok((text, Some(payload)));
        }
        let prompt = fill(
            SEARCH_RESULT_TO_TEXT,
            &[("search_result", &payload), ("question", question)],
        );
        let text = complete(llm, prompt, TAG_SEARCH_CONVERT)?;
        if text.trim().is_empty() {
            return Err(ToolError::ConversionFailed.into());
        }
        Ok((text.trim().to_string(), Some(payload)))
    }

    pub fn summarize_tool(&self, content: &str, llm: &Session<'_>) -> Result<String, ToolFailure> {
        if content.trim().is_empty() {
            return Err(ToolError::EmptyInput.into());
        }
        let text = complete(llm, fill(SUMMARIZE, &[("content", content)]), TAG_SUMMARIZE)?;
        if text.trim().is_empty() {
            return Err(ToolError::ConversionFailed.into());
        }
        Ok(text.trim().to_string())
    }
}

impl ToolDispatch for ToolSuite<'_> {
    fn execute(&self, action: &ActionSpec, llm: &Session<'_>) -> Result<Observation, GatewayError> {
        match self.dispatch(action, llm) {
            Ok(outcome) => Ok(Observation {
                text: outcome.observation,
                intermediate: outcome.raw_intermediate,
            }),
            Err(ToolFailure::Tool(e)) => {
                log::debug!("{} failed: {e}", action.tool.name());
                Ok(Observation {
                    text: format!("Error: {}", e.category()),
                    intermediate: e.intermediate(),
                })
            }
            Err(ToolFailure::Gateway(e)) => Err(e),
        }
    }
}

fn complete(llm: &Session<'_>, prompt: String, tag: &str) -> Result<String, GatewayError> {
    let request = CompletionRequest::new(prompt, tag).with_temperature(TOOL_TEMPERATURE);
    Ok(llm.complete(&request)?.text)
}

/// The single SELECT in a model reply: code fences and one trailing
/// semicolon removed. `None` for anything else.
pub fn extract_select(raw: &str) -> Option<String> {
    let mut text = raw.trim();
    if let Some(rest) = text.strip_prefix("```") {
        let rest = rest.strip_prefix("sql").or_else(|| rest.strip_prefix("SQL")).unwrap_or(rest);
        text = rest.trim_end().strip_suffix("```").unwrap_or(rest).trim();
    }
    let text = text.strip_suffix(';').unwrap_or(text).trim();
    let head = text.get(..6)?;
    if !head.eq_ignore_ascii_case("select") || text.contains(';') {
        return None;
    }
    if text[6..].chars().next().is_some_and(|c| c.is_alphanumeric() || c == '_') {
        return None;
    }
    Some(text.to_string())
}

fn cap(text: String, max: usize) -> String {
    match text.char_indices().nth(max) {
        Some((cut, _)) => format!("{}{TRUNCATION_MARKER}", &text[..cut]),
        None => text,
    }
}
