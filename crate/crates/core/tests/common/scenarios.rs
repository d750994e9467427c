//! Scripted planner episodes shared by the planning tests and the
//! acceptance suite.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use recmind_core::gateway::{CallRecord, Gateway, Script, ScriptEntry, ScriptedBackend};
use recmind_core::planning::{ActionSpec, PlanError, PlanTrace, Planner, PlannerConfig, Strategy};
use recmind_core::prompts::{EMPTY_RESPONSE, FINAL_INSTRUCTION};

/// Present in every step, candidate and alternative prompt.
pub const STEP_MARKER: &str = "'Action: ToolName[argument]'";
pub const INSPIRE_MARKER: &str = "decide if there is an alternative thought";
pub const EVALUATE_MARKER: &str = "Answer with one word: sure, maybe, or impossible.";

pub const PROBLEM: &str = "How will user U1 rate the item \"Sewak Al-Falah\"? Give a rating between 1 and 5.";

pub fn gateway(script: Script) -> Gateway {
    Gateway::new(Arc::new(ScriptedBackend::new(script)))
}

pub fn run(
    script: Script,
    tool: &dyn Fn(&ActionSpec) -> String,
    strategy: Strategy,
    config: PlannerConfig,
) -> (Result<PlanTrace, PlanError>, Vec<CallRecord>) {
    let gw = gateway(script);
    let session = gw.session(None);
    let result = Planner::new(&session, &tool).with_config(config).run(strategy, PROBLEM);
    (result, session.log())
}

/// Echoes the argument back as the observation.
pub fn echo_tool(action: &ActionSpec) -> String {
    format!("result for {}", action.argument)
}

/// Observations for the branching rating episode.
pub fn episode_tool(action: &ActionSpec) -> String {
    match action.argument.as_str() {
        "What ratings has user U1 given so far?" => "User U1 rated Rose Water Toner 3 and Argan Oil Shampoo 4.",
        "What is the product category of Sewak Al-Falah?" => "Sewak Al-Falah is a natural toothbrush (miswak) product.",
        "What rating did user U1 give to other oral care items?" => "User U1 has not rated any other oral care item.",
        "What is the average rating of product Sewak Al-Falah?" => "The average rating of Sewak Al-Falah is 4.5.",
        "Reviews of Sewak Al-Falah" => "Most customers think this product is durable and has a good price.",
        other => return format!("No information about {other}."),
    }
    .to_string()
}

pub const BRANCH_FIRST: &str = "A similar oral care item rated by this user would be a useful reference.";
pub const BRANCH_SECOND: &str = "Retrieve the average rating of Sewak Al-Falah across all users.";

/// Six states: three on the first path, then a branch at step 3 whose
/// path runs to Finish at step 5.
pub fn branch_script() -> Script {
    episode_script(true)
}

/// The same episode without the first step-3 idea: five states on one
/// path.
pub fn linear_script() -> Script {
    episode_script(false)
}

fn episode_script(branch: bool) -> Script {
    let mut steps = vec![
        "Thought: I need the user's past ratings to see how generous they are.\nAction: SQLTool[What ratings has user U1 given so far?]".to_string(),
        "Thought: I should find out what kind of product this is.\nAction: SearchTool[What is the product category of Sewak Al-Falah?]".to_string(),
        format!("Thought: {BRANCH_FIRST}\nAction: SQLTool[What rating did user U1 give to other oral care items?]"),
        "Action: SQLTool[What is the average rating of product Sewak Al-Falah?]".to_string(),
        "Thought: No similar item was rated, but the item averages 4.5. Reviews may show whether that holds.\nAction: SummarizeTool[Reviews of Sewak Al-Falah]".to_string(),
        "Thought: Reviews are positive and the average is 4.5, so I predict 4.5.\nAction: Finish[4.5]".to_string(),
    ];
    let mut script = Script::default();
    if branch {
        script.push(ScriptEntry::contains_all([INSPIRE_MARKER, BRANCH_FIRST], BRANCH_SECOND).once());
    } else {
        steps.remove(2);
        steps[2] = format!("Thought: {BRANCH_SECOND}\n{}", steps[2]);
    }
    script.push(ScriptEntry::contains(INSPIRE_MARKER, EMPTY_RESPONSE));
    script.push(ScriptEntry::contains(FINAL_INSTRUCTION, "4.5"));
    for s in steps {
        script.push(ScriptEntry::contains(STEP_MARKER, s).once());
    }
    script
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branching {
    /// No vote, prune or inspire ever fires.
    None,
    /// Inspire proposes alternatives at random steps.
    Inspire,
    /// The evaluator rejects up to two random steps.
    Prune,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub script: Script,
    pub pruned: Vec<String>,
    pub alternatives: Vec<String>,
}

fn step(thought: &str, action: &str) -> String {
    format!("Thought: {thought}\nAction: {action}")
}

/// A random linear episode of 2 to 6 steps ending in Finish.
pub fn scenario(seed: u64, branching: Branching) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=6usize);
    let mut fifo = Vec::new();
    let mut aux = Vec::new();
    let mut pruned = Vec::new();
    let mut alternatives = Vec::new();
    for i in 1..=n {
        let thought = format!("<s{i}> idea {} for step {i}", rng.random_range(0..1000u32));
        let action = if i == n {
            "Finish[3]".to_string()
        } else {
            format!("SearchTool[q{i}]")
        };
        if branching == Branching::Prune && i < n && pruned.len() < 2 && rng.random_bool(0.4) {
            let doomed = format!("<p{i}> doomed idea {i}");
            fifo.push(step(&doomed, &format!("SearchTool[doomed {i}]")));
            aux.push(ScriptEntry::contains_all([EVALUATE_MARKER, doomed.as_str()], "impossible").once());
            pruned.push(doomed);
        }
        fifo.push(step(&thought, &action));
        if branching == Branching::Inspire && i < n && rng.random_bool(0.5) {
            let alt = format!("<a{i}> alternative idea {i}");
            aux.push(ScriptEntry::contains_all([INSPIRE_MARKER, thought.as_str()], alt.as_str()).once());
            fifo.push(format!("Action: SearchTool[alt {i}]"));
            alternatives.push(alt);
        }
    }
    let mut script = Script::new(aux);
    script.push(ScriptEntry::contains(INSPIRE_MARKER, EMPTY_RESPONSE));
    script.push(ScriptEntry::contains(EVALUATE_MARKER, "sure"));
    script.push(ScriptEntry::contains(FINAL_INSTRUCTION, "3"));
    for s in fifo {
        script.push(ScriptEntry::contains(STEP_MARKER, s).once());
    }
    Scenario {
        script,
        pruned,
        alternatives,
    }
}

/// A random script for the termination property, with its step budget.
/// Malformed replies never come twice in a row, so episodes end through
/// Finish, End of Planning or the budget rather than an error.
pub fn termination_scenario(seed: u64, strategy: Strategy) -> (Script, u32) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let budget = rng.random_range(1..=8u32);
    let inspire_fires = strategy == Strategy::SelfInspiring && rng.random_bool(0.3);
    let mut fifo = Vec::new();
    let mut last_malformed = false;
    for i in 0..rng.random_range(0..12usize) {
        let roll = rng.random_range(0..100u32);
        let reply = if inspire_fires {
            if roll < 15 {
                step("wrap up", "Finish[2]")
            } else {
                step(&format!("look {i}"), &format!("SearchTool[q{i}]"))
            }
        } else if roll < 20 && !last_malformed {
            "I am not sure what to do next.".to_string()
        } else if roll < 30 {
            step("wrap up", "Finish[2]")
        } else if roll < 40 {
            "End of Planning".to_string()
        } else if roll < 55 && strategy == Strategy::ToTBfs {
            format!("1. Thought: first {i}\nAction: SearchTool[a{i}]\n2. Thought: second {i}\nAction: SearchTool[b{i}]")
        } else {
            step(&format!("look {i}"), &format!("SearchTool[q{i}]"))
        };
        last_malformed = reply.starts_with("I am not sure");
        fifo.push(reply);
    }
    let verdict = ["sure", "maybe", "impossible"][rng.random_range(0..3usize)];
    let mut script = Script::default();
    let inspiration = if inspire_fires { "Check the item price instead." } else { EMPTY_RESPONSE };
    script.push(ScriptEntry::contains(INSPIRE_MARKER, inspiration));
    script.push(ScriptEntry::contains(EVALUATE_MARKER, verdict));
    script.push(ScriptEntry::contains("The best choice is", "The best choice is 2"));
    script.push(ScriptEntry::contains(FINAL_INSTRUCTION, "2"));
    for reply in fifo {
        script.push(ScriptEntry::contains(STEP_MARKER, reply).once());
    }
    script.push(ScriptEntry::contains(STEP_MARKER, step("keep looking", "SearchTool[more]")));
    (script, budget)
}
