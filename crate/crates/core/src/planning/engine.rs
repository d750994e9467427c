use serde::{Deserialize, Serialize};

use super::parse::{clean_final_answer, is_end_of_planning, parse_verdict, Verdict};
use super::render::{render_split, render_steps};
use super::{
    parse_action, parse_candidates, parse_planner_output, parse_vote, render_context, ActionSpec,
    ContextView, PlanError, PlanState, PlanTrace, ReasoningPath, StateRef, StepOutput, Strategy,
    Termination, ToolDispatch,
};
use crate::gateway::{CompletionRequest, Session, PLANNER_TEMPERATURE};
use crate::prompts::{
    fill, thought_sampling, ALTERNATIVE_INSTRUCTION, BRANCH_EVALUATION, DECISION_MAKING,
    EMPTY_RESPONSE, FINAL_INSTRUCTION, REPROMPT_SUFFIX, SELF_INSPIRE, STEPWISE_INSTRUCTION,
    STEP_INSTRUCTION,
};

pub const TAG_STEP: &str = "planner.step";
pub const TAG_VOTE: &str = "planner.vote";
pub const TAG_EVALUATE: &str = "planner.evaluate";
pub const TAG_INSPIRE: &str = "planner.inspire";
pub const TAG_FINAL: &str = "planner.final";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TotMode {
    Bfs,
    Dfs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    /// T: step-generation completions allowed per episode.
    pub step_budget: u32,
    /// Candidates sampled per ToT-BFS step.
    pub k: usize,
    /// Prunes allowed per ToT-DFS episode.
    pub max_prunes: u32,
    pub temperature: f64,
    pub max_output_tokens: u32,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            step_budget: 15,
            k: 5,
            max_prunes: 2,
            temperature: PLANNER_TEMPERATURE,
            max_output_tokens: 512,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<(), PlanError> {
        if self.step_budget == 0 {
            return Err(PlanError::InvalidConfig("step_budget must be at least 1".into()));
        }
        if self.k < 2 {
            return Err(PlanError::InvalidConfig("k must be at least 2".into()));
        }
        if !(0.0..=1.0).contains(&self.temperature) {
            return Err(PlanError::InvalidConfig("temperature must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

pub struct Planner<'a, 'g> {
    llm: &'a Session<'g>,
    tools: &'a dyn ToolDispatch,
    config: PlannerConfig,
}

impl<'a, 'g> Planner<'a, 'g> {
    pub fn new(llm: &'a Session<'g>, tools: &'a dyn ToolDispatch) -> Self {
        Self {
            llm,
            tools,
            config: PlannerConfig::default(),
        }
    }

    pub fn with_config(mut self, config: PlannerConfig) -> Self {
        self.config = config;
        self
    }

    pub fn config(&self) -> &PlannerConfig {
        &self.config
    }

    pub fn run(&self, strategy: Strategy, problem: &str) -> Result<PlanTrace, PlanError> {
        match strategy {
            Strategy::CoT => self.run_cot(problem),
            Strategy::ToTBfs => self.run_tot(problem, TotMode::Bfs, self.config.k),
            Strategy::ToTDfs => self.run_tot(problem, TotMode::Dfs, self.config.k),
            Strategy::SelfInspiring => self.run_si(problem),
        }
    }

    pub fn run_cot(&self, problem: &str) -> Result<PlanTrace, PlanError> {
        self.config.validate()?;
        self.run_linear(problem, Strategy::CoT, self.config.k)
    }

    pub fn run_tot(&self, problem: &str, mode: TotMode, k: usize) -> Result<PlanTrace, PlanError> {
        PlannerConfig { k, ..self.config.clone() }.validate()?;
        let strategy = match mode {
            TotMode::Bfs => Strategy::ToTBfs,
            TotMode::Dfs => Strategy::ToTDfs,
        };
        self.run_linear(problem, strategy, k)
    }

    fn run_linear(&self, problem: &str, strategy: Strategy, k: usize) -> Result<PlanTrace, PlanError> {
        let mut trace = PlanTrace::new(problem, strategy, self.config.step_budget);
        let mut prunes = 0;
        let termination = loop {
            let next = match strategy {
                Strategy::ToTBfs => self.bfs_step(&mut trace, k)?,
                _ => {
                    let prompt = format!(
                        "{STEPWISE_INSTRUCTION}\n\n{}\n\n{STEP_INSTRUCTION}",
                        render_context(&trace, ContextView::SurvivingPath)
                    );
                    self.step_call(&mut trace, &prompt, parse_planner_output)?
                }
            };
            let (thought, action) = match next {
                None => break Termination::BudgetExhausted,
                Some(StepOutput::EndOfPlanning) => break Termination::EndOfPlanning,
                Some(StepOutput::Step { thought, action }) => (thought, action),
            };
            let parent = trace.paths[0].states.last().map(PlanState::reference);
            let state = self.make_state(1, parent, thought, action)?;
            let finished = state.action.is_finish();
            trace.paths[0].states.push(state);
            if finished {
                break Termination::Finish;
            }
            if strategy == Strategy::ToTDfs
                && prunes < self.config.max_prunes
                && self.evaluate(&trace)? == Verdict::Impossible
            {
                let pruned = trace.paths[0].states.pop().expect("state just pushed");
                trace.pruned_states.push(pruned);
                prunes += 1;
            }
        };
        self.finalize(&mut trace, termination)?;
        Ok(trace)
    }

    pub fn run_si(&self, problem: &str) -> Result<PlanTrace, PlanError> {
        self.config.validate()?;
        let budget = self.config.step_budget;
        let mut trace = PlanTrace::new(problem, Strategy::SelfInspiring, budget);
        let termination = loop {
            let prompt = format!(
                "{}\n\n{STEP_INSTRUCTION}",
                render_context(&trace, ContextView::AllPaths)
            );
            let (thought, action) = match self.step_call(&mut trace, &prompt, parse_planner_output)? {
                None => break Termination::BudgetExhausted,
                Some(StepOutput::EndOfPlanning) => break Termination::EndOfPlanning,
                Some(StepOutput::Step { thought, action }) => (thought, action),
            };
            let path = trace.paths.last().expect("trace has a path");
            let (path_id, parent) = (
                path.path_id,
                path.states.last().map(PlanState::reference).or(path.branch_point),
            );
            let state = self.make_state(path_id, parent, thought, action)?;
            let (finished, depth) = (state.action.is_finish(), state.step_index);
            trace.paths.last_mut().unwrap().states.push(state);
            if finished {
                break Termination::Finish;
            }
            if trace.steps_used >= budget {
                break Termination::BudgetExhausted;
            }
            let Some(alternative) = self.inspire(&trace)? else { continue };
            let prompt = format!(
                "{}\n\nAlternative thought {depth}: {alternative}\n{ALTERNATIVE_INSTRUCTION}",
                render_context(&trace, ContextView::AllPaths)
            );
            let Some(action) = self.step_call(&mut trace, &prompt, parse_alternative)? else {
                break Termination::BudgetExhausted;
            };
            let new_id = path_id + 1;
            let state = self.make_state(new_id, parent, alternative, action)?;
            let finished = state.action.is_finish();
            trace.paths.push(ReasoningPath {
                path_id: new_id,
                states: vec![state],
                branch_point: parent,
            });
            if finished {
                break Termination::Finish;
            }
        };
        self.finalize(&mut trace, termination)?;
        Ok(trace)
    }

    /// Asks whether the newest state has an alternative thought. `None`
    /// when the model answers with the empty-response sentinel.
    pub fn inspire(&self, trace: &PlanTrace) -> Result<Option<String>, PlanError> {
        let (previous, current) = render_split(trace, ContextView::AllPaths);
        let previous = if previous.is_empty() { "none".to_string() } else { previous };
        let prompt = fill(
            SELF_INSPIRE,
            &[
                ("task", &trace.problem),
                ("previous_steps", &previous),
                ("current_step", &current),
                ("empty_response", EMPTY_RESPONSE),
            ],
        );
        self.aux_call(&prompt, TAG_INSPIRE, self.config.temperature, parse_inspiration)
    }

    fn bfs_step(&self, trace: &mut PlanTrace, k: usize) -> Result<Option<StepOutput>, PlanError> {
        let steps = render_steps(trace, ContextView::SurvivingPath);
        let previous = if steps.is_empty() {
            "steps: none".to_string()
        } else {
            format!("steps:\n{steps}\n")
        };
        let prompt = format!(
            "{STEPWISE_INSTRUCTION}\n\n{}",
            thought_sampling(&previous, &trace.problem, k)
        );
        let Some(mut candidates) = self.step_call(trace, &prompt, |raw| parse_candidates(raw, k))? else {
            return Ok(None);
        };
        if candidates.len() == 1 {
            return Ok(candidates.pop());
        }
        let options: String = candidates
            .iter()
            .enumerate()
            .map(|(i, c)| match c {
                StepOutput::Step { thought, action } => {
                    format!("\n{}. Thought: {thought}\nAction: {action}", i + 1)
                }
                StepOutput::EndOfPlanning => format!("\n{}. End of Planning", i + 1),
            })
            .collect();
        let instruction = format!(
            "to choose the next step towards finishing the task {}\nThe previous {previous}",
            trace.problem
        );
        let prompt = fill(
            DECISION_MAKING,
            &[("task_specific_instruction", &instruction), ("option_list", &options)],
        );
        let n = candidates.len();
        let choice = self.aux_call(&prompt, TAG_VOTE, 0.0, |raw| parse_vote(raw, n))?;
        Ok(Some(candidates.swap_remove(choice)))
    }

    fn evaluate(&self, trace: &PlanTrace) -> Result<Verdict, PlanError> {
        let (previous, current) = render_split(trace, ContextView::SurvivingPath);
        let previous = if previous.is_empty() { "none".to_string() } else { previous };
        let prompt = fill(
            BRANCH_EVALUATION,
            &[
                ("task", &trace.problem),
                ("previous_steps", &previous),
                ("current_step", &current),
            ],
        );
        self.aux_call(&prompt, TAG_EVALUATE, 0.0, |raw| {
            parse_verdict(raw).ok_or_else(|| PlanError::VoteUnparseable(raw.to_string()))
        })
    }

    fn finalize(&self, trace: &mut PlanTrace, termination: Termination) -> Result<(), PlanError> {
        let view = trace.strategy.view();
        let header = match trace.strategy {
            Strategy::SelfInspiring => String::new(),
            _ => format!("{STEPWISE_INSTRUCTION}\n\n"),
        };
        let prompt = format!("{header}{}\n\n{FINAL_INSTRUCTION}", render_context(trace, view));
        let text = self.complete(&prompt, TAG_FINAL, 0.0)?;
        let mut answer = clean_final_answer(&text);
        if answer.is_empty() {
            if let Some(last) = trace.states().last().filter(|s| s.action.is_finish()) {
                answer = last.action.argument.clone();
            }
        }
        trace.termination = Some(termination);
        trace.final_answer = Some(answer);
        Ok(())
    }

    fn make_state(
        &self,
        path_id: u32,
        parent: Option<StateRef>,
        thought: String,
        action: ActionSpec,
    ) -> Result<PlanState, PlanError> {
        let (observation, intermediate) = if action.is_finish() {
            (None, None)
        } else {
            let obs = self.tools.execute(&action, self.llm)?;
            (Some(obs.text), obs.intermediate)
        };
        Ok(PlanState {
            path_id,
            step_index: parent.map_or(1, |p| p.step_index + 1),
            thought,
            action,
            observation,
            intermediate,
            parent,
        })
    }

    fn complete(&self, prompt: &str, tag: &str, temperature: f64) -> Result<String, PlanError> {
        let request = CompletionRequest::new(prompt, tag)
            .with_temperature(temperature)
            .with_max_output_tokens(self.config.max_output_tokens);
        Ok(self.llm.complete(&request)?.text)
    }

    /// One step-generation completion plus at most one reprompt, each
    /// charged to the step budget. `None` once the budget is spent.
    fn step_call<T>(
        &self,
        trace: &mut PlanTrace,
        prompt: &str,
        parse: impl Fn(&str) -> Result<T, PlanError>,
    ) -> Result<Option<T>, PlanError> {
        let mut failure = None;
        for attempt in 0..2 {
            if trace.steps_used >= trace.step_budget {
                return Ok(None);
            }
            trace.steps_used += 1;
            let text = if attempt == 0 {
                self.complete(prompt, TAG_STEP, self.config.temperature)?
            } else {
                self.complete(&format!("{prompt}\n\n{REPROMPT_SUFFIX}"), TAG_STEP, self.config.temperature)?
            };
            match parse(&text) {
                Ok(v) => return Ok(Some(v)),
                Err(e) => failure = Some(e),
            }
        }
        Err(failure.expect("two failed attempts"))
    }

    /// Vote, evaluation and inspire calls: one reprompt, not charged to
    /// the step budget.
    fn aux_call<T>(
        &self,
        prompt: &str,
        tag: &str,
        temperature: f64,
        parse: impl Fn(&str) -> Result<T, PlanError>,
    ) -> Result<T, PlanError> {
        match parse(&self.complete(prompt, tag, temperature)?) {
            Ok(v) => Ok(v),
            Err(_) => parse(&self.complete(&format!("{prompt}\n\n{REPROMPT_SUFFIX}"), tag, temperature)?),
        }
    }
}

fn parse_inspiration(raw: &str) -> Result<Option<String>, PlanError> {
    let text = raw
        .trim()
        .trim_matches(|c: char| c == '"' || c == '\'' || c == '`')
        .trim();
    let text = match text.get(..8) {
        Some(head) if head.eq_ignore_ascii_case("thought:") => text[8..].trim(),
        _ => text,
    };
    if text.is_empty() {
        return Err(PlanError::InspireUnparseable(raw.to_string()));
    }
    let last_line = text.lines().last().unwrap_or("").trim().trim_end_matches('.');
    let sentinel = |s: &str| s.trim_end_matches('.').eq_ignore_ascii_case(EMPTY_RESPONSE);
    if sentinel(text) || sentinel(last_line) || is_end_of_planning(text) {
        return Ok(None);
    }
    Ok(Some(text.to_string()))
}

/// The action for an alternative thought. Accepts a bare directive or an
/// `Action:` line anywhere in the reply.
fn parse_alternative(raw: &str) -> Result<ActionSpec, PlanError> {
    if let Ok(StepOutput::Step { action, .. }) = parse_planner_output(raw) {
        return Ok(action);
    }
    let lower = raw.to_ascii_lowercase();
    let directive = match lower.find("action") {
        Some(i) => raw[i..].split_once(':').map_or(raw, |(_, rest)| rest),
        None => raw,
    };
    parse_action(directive.trim()).map_err(|_| PlanError::MalformedStep(raw.to_string()))
}
