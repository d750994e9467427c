//! Planner output grammar.
//!
//! A step is a `Thought:` block followed by an `Action:` directive of the
//! form `ToolName[argument]`. Labels may carry a step number and branch
//! suffix (`Thought 3 (2):`). The argument runs to the last `]` before the
//! next `Thought`/`Action`/`Observation` label, so it may span lines.

use std::sync::LazyLock;

use regex::Regex;

use super::{ActionSpec, PlanError, Tool};
use crate::prompts::END_OF_PLANNING;

static LABEL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?im)^[ \t]*(thought|action|observation)(?:[ \t]+\d+(?:[ \t]*\(\d+\))?)?[ \t]*:[ \t]*").unwrap()
});
static DIRECTIVE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\s*([A-Za-z][A-Za-z _]*?)\s*\[").unwrap());
static NUMBERED: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?m)^[ \t]*(\d+)[.)][ \t]*").unwrap());
static VOTE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)the best choice is\W{0,3}(\d+)").unwrap());
static VERDICT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\b(sure|maybe|impossible)\b").unwrap());

/// One parsed planner reply.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepOutput {
    Step { thought: String, action: ActionSpec },
    EndOfPlanning,
}

pub(crate) fn is_end_of_planning(text: &str) -> bool {
    let t = text.trim().trim_end_matches('.').trim();
    t.eq_ignore_ascii_case(END_OF_PLANNING)
}

fn tool_from_name(name: &str) -> Option<Tool> {
    let key: String = name
        .chars()
        .filter(|c| !c.is_whitespace() && *c != '_')
        .collect::<String>()
        .to_ascii_lowercase();
    match key.as_str() {
        "sqltool" | "sql" => Some(Tool::Sql),
        "searchtool" | "search" => Some(Tool::Search),
        "summarizetool" | "summarize" | "summarizationtool" | "textsummarizationtool" => {
            Some(Tool::Summarize)
        }
        "finish" => Some(Tool::Finish),
        _ => None,
    }
}

/// Parses a bare directive such as `SQLTool[question]`.
pub fn parse_action(directive: &str) -> Result<ActionSpec, PlanError> {
    let malformed = || PlanError::MalformedStep(directive.to_string());
    let caps = DIRECTIVE.captures(directive).ok_or_else(malformed)?;
    let tool = tool_from_name(&caps[1]).ok_or_else(malformed)?;
    let open = caps.get(0).unwrap().end();
    let close = directive.rfind(']').filter(|&c| c >= open).ok_or_else(malformed)?;
    let argument = directive[open..close].trim().to_string();
    if argument.is_empty() && tool != Tool::Finish {
        return Err(malformed());
    }
    Ok(ActionSpec { tool, argument })
}

struct Block<'a> {
    label: String,
    body: &'a str,
}

fn blocks(raw: &str) -> Vec<Block<'_>> {
    let marks: Vec<_> = LABEL.captures_iter(raw).collect();
    marks
        .iter()
        .enumerate()
        .map(|(i, caps)| {
            let end = marks
                .get(i + 1)
                .map_or(raw.len(), |next| next.get(0).unwrap().start());
            Block {
                label: caps[1].to_ascii_lowercase(),
                body: raw[caps.get(0).unwrap().end()..end].trim(),
            }
        })
        .collect()
}

/// Parses a planner reply, recognizing the "End of Planning" thought.
pub fn parse_planner_output(raw: &str) -> Result<StepOutput, PlanError> {
    if is_end_of_planning(raw) {
        return Ok(StepOutput::EndOfPlanning);
    }
    let blocks = blocks(raw);
    let thought = blocks.iter().find(|b| b.label == "thought").map(|b| b.body);
    if thought.is_some_and(is_end_of_planning) {
        return Ok(StepOutput::EndOfPlanning);
    }
    let malformed = || PlanError::MalformedStep(raw.to_string());
    let thought = thought.filter(|t| !t.is_empty()).ok_or_else(malformed)?;
    let action = blocks
        .iter()
        .find(|b| b.label == "action")
        .ok_or_else(malformed)?;
    let action = parse_action(action.body).map_err(|_| malformed())?;
    Ok(StepOutput::Step {
        thought: thought.to_string(),
        action,
    })
}

/// Parses a reply that must be a regular step.
pub fn parse_step(raw: &str) -> Result<(String, ActionSpec), PlanError> {
    match parse_planner_output(raw)? {
        StepOutput::Step { thought, action } => Ok((thought, action)),
        StepOutput::EndOfPlanning => Err(PlanError::MalformedStep(raw.to_string())),
    }
}

/// Splits a thought-sampling reply into candidates numbered `1.` or `1)`.
/// Unparseable candidates are dropped; a reply without numbering is read
/// as a single candidate.
pub fn parse_candidates(raw: &str, k: usize) -> Result<Vec<StepOutput>, PlanError> {
    let marks: Vec<(usize, usize)> = NUMBERED.find_iter(raw).map(|m| (m.start(), m.end())).collect();
    let chunks: Vec<&str> = if marks.is_empty() {
        vec![raw]
    } else {
        marks
            .iter()
            .enumerate()
            .map(|(i, &(_, body))| &raw[body..marks.get(i + 1).map_or(raw.len(), |m| m.0)])
            .collect()
    };
    let candidates: Vec<StepOutput> = chunks
        .into_iter()
        .filter_map(|c| parse_planner_output(c).ok())
        .take(k)
        .collect();
    if candidates.is_empty() {
        return Err(PlanError::MalformedStep(raw.to_string()));
    }
    Ok(candidates)
}

/// Reads the last "The best choice is N" as a 1-based index into `n`
/// options, returned 0-based.
pub fn parse_vote(raw: &str, n: usize) -> Result<usize, PlanError> {
    VOTE.captures_iter(raw)
        .last()
        .and_then(|c| c[1].parse::<usize>().ok())
        .filter(|&i| (1..=n).contains(&i))
        .map(|i| i - 1)
        .ok_or_else(|| PlanError::VoteUnparseable(raw.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Verdict {
    Sure,
    Maybe,
    Impossible,
}

/// Last sure/maybe/impossible word in a branch-evaluation reply.
pub(crate) fn parse_verdict(raw: &str) -> Option<Verdict> {
    let word = VERDICT.captures_iter(raw).last()?[1].to_ascii_lowercase();
    Some(match word.as_str() {
        "sure" => Verdict::Sure,
        "maybe" => Verdict::Maybe,
        _ => Verdict::Impossible,
    })
}

/// Final answer text: `Finish[..]` unwrapped and answer prefixes removed.
pub(crate) fn clean_final_answer(raw: &str) -> String {
    let mut text = raw.trim();
    let directive = blocks(text)
        .into_iter()
        .find(|b| b.label == "action")
        .map_or(text, |b| b.body);
    if let Ok(action) = parse_action(directive) {
        if action.is_finish() {
            return action.argument;
        }
    }
    for prefix in ["final answer:", "answer:"] {
        if text.len() >= prefix.len() && text[..prefix.len()].eq_ignore_ascii_case(prefix) {
            text = text[prefix.len()..].trim();
            break;
        }
    }
    text.to_string()
}
