//! Planning over a latent reasoning tree.
//!
//! Every strategy produces a [`PlanTrace`]: the problem, the explored
//! paths, and the final answer. A state is one (thought, action,
//! observation) step.
//!
//! * Chain-of-thought follows one path.
//! * Tree-of-thoughts BFS samples `k` candidates per step and keeps the
//!   one a voting call selects. DFS extends one branch, and a branch
//!   evaluation of "impossible" prunes the newest state; pruned states are
//!   dropped from every later prompt.
//! * Self-inspiring asks after each step whether an alternative thought
//!   exists. If so it opens a new path from the same parent and keeps
//!   every state ever explored in the context of later prompts.

mod engine;
mod parse;
mod render;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{GatewayError, Session};

pub use engine::{Planner, PlannerConfig, TotMode, TAG_EVALUATE, TAG_FINAL, TAG_INSPIRE, TAG_STEP, TAG_VOTE};
pub use parse::{parse_action, parse_candidates, parse_planner_output, parse_step, parse_vote, StepOutput};
pub use render::{render_context, render_listing, render_state, ContextView};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("malformed planner step: {0:?}")]
    MalformedStep(String),
    #[error("vote response lacks 'The best choice is N': {0:?}")]
    VoteUnparseable(String),
    #[error("inspire response is neither a thought nor the empty sentinel: {0:?}")]
    InspireUnparseable(String),
    #[error("invalid planner configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Tool {
    #[serde(rename = "SQLTool")]
    Sql,
    #[serde(rename = "SearchTool")]
    Search,
    #[serde(rename = "SummarizeTool")]
    Summarize,
    Finish,
}

impl Tool {
    pub fn name(self) -> &'static str {
        match self {
            Tool::Sql => "SQLTool",
            Tool::Search => "SearchTool",
            Tool::Summarize => "SummarizeTool",
            Tool::Finish => "Finish",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActionSpec {
    pub tool: Tool,
    pub argument: String,
}

impl ActionSpec {
    pub fn new(tool: Tool, argument: impl Into<String>) -> Self {
        Self {
            tool,
            argument: argument.into(),
        }
    }

    pub fn finish(answer: impl Into<String>) -> Self {
        Self::new(Tool::Finish, answer)
    }

    pub fn is_finish(&self) -> bool {
        self.tool == Tool::Finish
    }
}

impl fmt::Display for ActionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.tool.name(), self.argument)
    }
}

/// Points at a state by the path that owns it and its depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StateRef {
    pub path_id: u32,
    pub step_index: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanState {
    pub path_id: u32,
    pub step_index: u32,
    pub thought: String,
    pub action: ActionSpec,
    /// Absent only for `Finish`.
    pub observation: Option<String>,
    /// Tool audit data: generated SQL, raw search payload.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intermediate: Option<String>,
    pub parent: Option<StateRef>,
}

impl PlanState {
    pub fn reference(&self) -> StateRef {
        StateRef {
            path_id: self.path_id,
            step_index: self.step_index,
        }
    }
}

/// One explored branch. A path holds only the states it added; its prefix
/// is reached through `branch_point`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasoningPath {
    pub path_id: u32,
    pub states: Vec<PlanState>,
    pub branch_point: Option<StateRef>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "CoT")]
    CoT,
    #[serde(rename = "ToT_BFS")]
    ToTBfs,
    #[serde(rename = "ToT_DFS")]
    ToTDfs,
    #[serde(rename = "SI")]
    SelfInspiring,
}

impl Strategy {
    pub fn label(self) -> &'static str {
        match self {
            Strategy::CoT => "CoT",
            Strategy::ToTBfs => "ToT_BFS",
            Strategy::ToTDfs => "ToT_DFS",
            Strategy::SelfInspiring => "SI",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().replace(['-', ' '], "_").as_str() {
            "cot" => Some(Strategy::CoT),
            "tot_bfs" | "bfs" => Some(Strategy::ToTBfs),
            "tot_dfs" | "dfs" => Some(Strategy::ToTDfs),
            "si" | "self_inspiring" => Some(Strategy::SelfInspiring),
            _ => None,
        }
    }

    pub fn all() -> [Strategy; 4] {
        [Strategy::CoT, Strategy::ToTBfs, Strategy::ToTDfs, Strategy::SelfInspiring]
    }

    /// Which part of a trace this strategy conditions on.
    pub fn view(self) -> ContextView {
        match self {
            Strategy::SelfInspiring => ContextView::AllPaths,
            _ => ContextView::SurvivingPath,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    Finish,
    EndOfPlanning,
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanTrace {
    pub problem: String,
    pub strategy: Strategy,
    pub paths: Vec<ReasoningPath>,
    pub step_budget: u32,
    /// Step-generation completions issued, reprompts included.
    pub steps_used: u32,
    pub final_answer: Option<String>,
    pub termination: Option<Termination>,
    pub pruned_states: Vec<PlanState>,
}

impl PlanTrace {
    pub fn new(problem: impl Into<String>, strategy: Strategy, step_budget: u32) -> Self {
        Self {
            problem: problem.into(),
            strategy,
            paths: vec![ReasoningPath {
                path_id: 1,
                states: Vec::new(),
                branch_point: None,
            }],
            step_budget,
            steps_used: 0,
            final_answer: None,
            termination: None,
            pruned_states: Vec::new(),
        }
    }

    /// Every retained state, paths in creation order.
    pub fn states(&self) -> impl Iterator<Item = &PlanState> {
        self.paths.iter().flat_map(|p| p.states.iter())
    }

    pub fn state_count(&self) -> usize {
        self.paths.iter().map(|p| p.states.len()).sum()
    }

    pub fn path(&self, path_id: u32) -> Option<&ReasoningPath> {
        self.paths.iter().find(|p| p.path_id == path_id)
    }

    pub fn get(&self, r: StateRef) -> Option<&PlanState> {
        self.path(r.path_id)?.states.iter().find(|s| s.step_index == r.step_index)
    }

    /// The newest path and its full chain of states from the root,
    /// following branch points back through earlier paths.
    pub fn surviving_chain(&self) -> Vec<&PlanState> {
        let Some(last) = self.paths.last() else { return Vec::new() };
        let mut chain: Vec<&PlanState> = last.states.iter().rev().collect();
        let mut cursor = match last.states.first() {
            Some(first) => first.parent,
            None => last.branch_point,
        };
        while let Some(r) = cursor {
            let Some(state) = self.get(r) else { break };
            chain.push(state);
            cursor = state.parent;
        }
        chain.reverse();
        chain
    }

    /// Records the whole trace as JSON lines: a header, one line per
    /// retained state, one per pruned state, then the outcome.
    pub fn to_jsonl(&self) -> String {
        let mut out = Vec::new();
        out.push(TraceRecord::Header {
            problem: self.problem.clone(),
            strategy: self.strategy,
            step_budget: self.step_budget,
        });
        for path in &self.paths {
            out.push(TraceRecord::Path {
                path_id: path.path_id,
                branch_point: path.branch_point,
            });
            for s in &path.states {
                out.push(TraceRecord::State(s.clone()));
            }
        }
        for s in &self.pruned_states {
            out.push(TraceRecord::Pruned(s.clone()));
        }
        out.push(TraceRecord::Outcome {
            steps_used: self.steps_used,
            final_answer: self.final_answer.clone(),
            termination: self.termination,
        });
        out.iter()
            .map(|r| serde_json::to_string(r).expect("trace record serializes") + "\n")
            .collect()
    }

    pub fn from_jsonl(text: &str) -> Result<Self, serde_json::Error> {
        let mut trace: Option<PlanTrace> = None;
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let record: TraceRecord = serde_json::from_str(line)?;
            match record {
                TraceRecord::Header {
                    problem,
                    strategy,
                    step_budget,
                } => {
                    let mut t = PlanTrace::new(problem, strategy, step_budget);
                    t.paths.clear();
                    trace = Some(t);
                }
                other => {
                    let t = trace
                        .as_mut()
                        .ok_or_else(|| serde::de::Error::custom("trace record before header"))?;
                    match other {
                        TraceRecord::Path { path_id, branch_point } => t.paths.push(ReasoningPath {
                            path_id,
                            states: Vec::new(),
                            branch_point,
                        }),
                        TraceRecord::State(s) => t
                            .paths
                            .last_mut()
                            .ok_or_else(|| serde::de::Error::custom("state before path"))?
                            .states
                            .push(s),
                        TraceRecord::Pruned(s) => t.pruned_states.push(s),
                        TraceRecord::Outcome {
                            steps_used,
                            final_answer,
                            termination,
                        } => {
                            t.steps_used = steps_used;
                            t.final_answer = final_answer;
                            t.termination = termination;
                        }
                        TraceRecord::Header { .. } => unreachable!(),
                    }
                }
            }
        }
        trace.ok_or_else(|| serde::de::Error::custom("empty trace"))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum TraceRecord {
    Header {
        problem: String,
        strategy: Strategy,
        step_budget: u32,
    },
    Path {
        path_id: u32,
        branch_point: Option<StateRef>,
    },
    State(PlanState),
    Pruned(PlanState),
    Outcome {
        steps_used: u32,
        final_answer: Option<String>,
        termination: Option<Termination>,
    },
}

/// Observation produced by executing an action.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observation {
    pub text: String,
    pub intermediate: Option<String>,
}

/// Executes non-Finish actions for the planners.
///
/// Tool failures must come back as `Ok` observations (`"Error: ..."`).
/// Only gateway failures (budget, script, backend) abort the episode.
pub trait ToolDispatch {
    fn execute(&self, action: &ActionSpec, llm: &Session<'_>) -> Result<Observation, GatewayError>;
}

impl<F> ToolDispatch for F
where
    F: Fn(&ActionSpec) -> String,
{
    fn execute(&self, action: &ActionSpec, _llm: &Session<'_>) -> Result<Observation, GatewayError> {
        Ok(Observation {
            text: self(action),
            intermediate: None,
        })
    }
}
