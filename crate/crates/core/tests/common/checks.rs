//! Property checks shared by the planning tests and the acceptance suite.
//! Each returns `Err` with a description of the first violation.

use recmind_core::gateway::CallRecord;
use recmind_core::planning::{PlanState, PlanTrace, PlannerConfig, Strategy, Termination, TAG_EVALUATE, TAG_FINAL, TAG_STEP};

use super::scenarios::{self, echo_tool, scenario, termination_scenario, Branching};

type Check = Result<(), String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn run_ok(script: recmind_core::gateway::Script, strategy: Strategy) -> Result<(PlanTrace, Vec<CallRecord>), String> {
    let (trace, calls) = scenarios::run(script, &echo_tool, strategy, PlannerConfig::default());
    trace.map(|t| (t, calls)).map_err(|e| format!("{strategy:?}: {e}"))
}

/// After each prune, no later prompt mentions the pruned thought.
pub fn dfs_excludes_pruned(seed: u64) -> Check {
    let sc = scenario(seed, Branching::Prune);
    let (trace, calls) = run_ok(sc.script, Strategy::ToTDfs)?;
    let pruned: Vec<&str> = trace.pruned_states.iter().map(|s| s.thought.as_str()).collect();
    ensure(pruned == sc.pruned, || format!("seed {seed}: pruned {pruned:?}, expected {:?}", sc.pruned))?;
    for thought in &sc.pruned {
        let at = calls
            .iter()
            .position(|c| c.tag == TAG_EVALUATE && c.prompt.contains(thought.as_str()) && c.response == "impossible")
            .ok_or_else(|| format!("seed {seed}: no prune call for {thought}"))?;
        if let Some(leak) = calls[at + 1..].iter().find(|c| c.prompt.contains(thought.as_str())) {
            return Err(format!("seed {seed}: {} prompt after prune contains {thought}", leak.tag));
        }
    }
    Ok(())
}

fn state_parts(s: &PlanState) -> Vec<String> {
    let mut parts = vec![s.thought.clone(), s.action.to_string()];
    parts.extend(s.observation.clone());
    parts
}

/// Every step completion sees every state created before it, across
/// all paths.
pub fn si_retains_all_paths(seed: u64) -> Check {
    let sc = scenario(seed, Branching::Inspire);
    let (trace, calls) = run_ok(sc.script, Strategy::SelfInspiring)?;
    ensure(trace.paths.len() == sc.alternatives.len() + 1, || {
        format!("seed {seed}: {} paths for {} alternatives", trace.paths.len(), sc.alternatives.len())
    })?;
    let states: Vec<&PlanState> = trace.states().collect();
    let step_calls: Vec<&CallRecord> = calls.iter().filter(|c| c.tag == TAG_STEP).collect();
    ensure(step_calls.len() == states.len(), || {
        format!("seed {seed}: {} step calls for {} states", step_calls.len(), states.len())
    })?;
    for (j, call) in step_calls.iter().enumerate() {
        for earlier in &states[..j] {
            for part in state_parts(earlier) {
                ensure(call.prompt.contains(&part), || format!("seed {seed}: step call {j} lacks {part:?}"))?;
            }
        }
    }
    let final_prompt = &calls.iter().find(|c| c.tag == TAG_FINAL).ok_or("no final call")?.prompt;
    for s in states.iter() {
        for part in state_parts(s) {
            ensure(final_prompt.contains(&part), || format!("seed {seed}: final prompt lacks {part:?}"))?;
        }
    }
    Ok(())
}

/// CoT keeps one path whose states chain through parent references.
pub fn cot_single_chain(seed: u64) -> Check {
    let sc = scenario(seed, Branching::None);
    let (trace, _) = run_ok(sc.script, Strategy::CoT)?;
    ensure(trace.paths.len() == 1 && trace.paths[0].branch_point.is_none(), || {
        format!("seed {seed}: {} paths", trace.paths.len())
    })?;
    let states = &trace.paths[0].states;
    for (i, s) in states.iter().enumerate() {
        ensure(s.step_index as usize == i + 1, || format!("seed {seed}: step index {} at {i}", s.step_index))?;
        let expected = (i > 0).then(|| states[i - 1].reference());
        ensure(s.parent == expected, || format!("seed {seed}: broken parent at step {}", i + 1))?;
    }
    Ok(())
}

type StateKey = (u32, u32, String, String, Option<String>);

fn keys(trace: &PlanTrace) -> Vec<StateKey> {
    trace
        .states()
        .map(|s| (s.path_id, s.step_index, s.thought.clone(), s.action.to_string(), s.observation.clone()))
        .collect()
}

/// With nothing firing, all four strategies build the same states.
pub fn degenerate_equivalence(seed: u64) -> Check {
    let sc = scenario(seed, Branching::None);
    let (reference, _) = run_ok(sc.script.clone(), Strategy::CoT)?;
    for strategy in [Strategy::ToTBfs, Strategy::ToTDfs, Strategy::SelfInspiring] {
        let (trace, _) = run_ok(sc.script.clone(), strategy)?;
        ensure(keys(&trace) == keys(&reference), || format!("seed {seed}: {strategy:?} differs from CoT"))?;
        ensure(trace.final_answer == reference.final_answer, || format!("seed {seed}: {strategy:?} answer differs"))?;
    }
    Ok(())
}

/// At most T step completions, exactly one finalization, and nothing but
/// the finalization after an End of Planning reply.
pub fn termination(seed: u64, strategy: Strategy) -> Check {
    let (script, budget) = termination_scenario(seed, strategy);
    let config = PlannerConfig {
        step_budget: budget,
        ..PlannerConfig::default()
    };
    let (trace, calls) = scenarios::run(script, &echo_tool, strategy, config);
    let trace = trace.map_err(|e| format!("seed {seed} {strategy:?}: {e}"))?;
    let steps = calls.iter().filter(|c| c.tag == TAG_STEP).count();
    let finals = calls.iter().filter(|c| c.tag == TAG_FINAL).count();
    ensure(steps as u32 <= budget && trace.steps_used <= budget, || {
        format!("seed {seed} {strategy:?}: {steps} step calls over budget {budget}")
    })?;
    ensure(finals == 1, || format!("seed {seed} {strategy:?}: {finals} final calls"))?;
    ensure(calls.last().is_some_and(|c| c.tag == TAG_FINAL), || format!("seed {seed} {strategy:?}: final call not last"))?;
    if let Some(stop) = calls.iter().position(|c| c.tag == TAG_STEP && c.response.trim() == "End of Planning") {
        ensure(stop + 2 == calls.len(), || format!("seed {seed} {strategy:?}: calls continue after End of Planning"))?;
        ensure(trace.termination == Some(Termination::EndOfPlanning), || {
            format!("seed {seed} {strategy:?}: termination {:?}", trace.termination)
        })?;
    }
    Ok(())
}

/// DirectRec instance invariants over `n` users of a synthetic store.
/// Returns the number of instances checked.
pub fn direct_rec_invariants(n: usize, seed: u64) -> Result<usize, String> {
    use std::collections::{HashMap, HashSet};

    use recmind_core::fixtures;
    use recmind_core::harness::{make_instances, GroundTruth, InstanceConfig, TaskKind};
    use recmind_core::memory::MemoryStore;

    let store = MemoryStore::in_memory().map_err(|e| e.to_string())?;
    store
        .ingest_reader(fixtures::synthetic_jsonl("Beauty", 400, n + 20, seed).as_bytes(), "Beauty")
        .map_err(|e| e.to_string())?;
    let config = InstanceConfig {
        seed,
        limit: Some(n),
        ..Default::default()
    };
    let set = make_instances(&store, TaskKind::DirectRec, "Beauty", &config).map_err(|e| e.to_string())?;
    ensure(set.instances.len() == n, || format!("{} instances, wanted {n}", set.instances.len()))?;

    let mut touched: HashMap<String, HashSet<String>> = HashMap::new();
    for r in store.domain_interactions("Beauty").map_err(|e| e.to_string())? {
        touched.entry(r.user_id).or_default().insert(r.item_id);
    }
    let mut violations = Vec::new();
    for inst in &set.instances {
        let Some(candidates) = &inst.candidates else {
            violations.push(format!("{}: no candidates", inst.id));
            continue;
        };
        let GroundTruth::Item(positive) = &inst.ground_truth else {
            violations.push(format!("{}: ground truth is not an item", inst.id));
            continue;
        };
        if candidates.len() != 100 {
            violations.push(format!("{}: {} candidates", inst.id, candidates.len()));
        }
        if candidates.iter().filter(|c| *c == positive).count() != 1 || positive != &inst.target_item {
            violations.push(format!("{}: positive not present exactly once", inst.id));
        }
        let unique: HashSet<&String> = candidates.iter().collect();
        if unique.len() != candidates.len() {
            violations.push(format!("{}: duplicate candidates", inst.id));
        }
        let history = &touched[&inst.user_id];
        if candidates.iter().any(|c| c != positive && history.contains(c)) {
            violations.push(format!("{}: a negative is in the user's history", inst.id));
        }
        if inst.history.iter().any(|h| h == positive) {
            violations.push(format!("{}: target leaks into the prompt history", inst.id));
        }
    }
    ensure(violations.is_empty(), || format!("{} violations, first: {}", violations.len(), violations[0]))?;
    Ok(set.instances.len())
}

pub const AVG_SQL: &str = "SELECT AVG(rating) FROM interactions WHERE item_title='Sewak Al-Falah'";
pub const AVG_QUESTION: &str = "What is the average rating of product Sewak Al-Falah?";
pub const AVG_SENTENCE: &str = "The average rating of Sewak Al-Falah is 4.5.";

/// The three SQL stages on the fixture store: the executed query returns
/// 4.5 and the scripted conversion becomes the observation.
pub fn sql_pipeline_average() -> Check {
    use recmind_core::fixtures;
    use recmind_core::gateway::{Script, ScriptEntry};
    use recmind_core::memory::MemoryStore;
    use recmind_core::planning::ActionSpec;
    use recmind_core::planning::Tool;
    use recmind_core::tools::{ToolSuite, TAG_SQL_CONVERT};

    let store = MemoryStore::in_memory().map_err(|e| e.to_string())?;
    store
        .ingest_reader(fixtures::sewak_jsonl().as_bytes(), "Beauty")
        .map_err(|e| e.to_string())?;
    let direct = store.execute_readonly(AVG_SQL).map_err(|e| e.to_string())?;
    let value = direct.scalar().and_then(|v| v.as_f64());
    ensure(value == Some(4.5), || format!("stage 2 returned {value:?}"))?;

    let script = Script::new(vec![
        ScriptEntry::contains("Your mission is to convert SQL query from given", AVG_SQL),
        ScriptEntry::contains("Here is the database result", AVG_SENTENCE),
    ]);
    let gw = scenarios::gateway(script);
    let session = gw.session(None);
    let tools = ToolSuite::new(&store);
    let outcome = tools
        .dispatch(&ActionSpec::new(Tool::Sql, AVG_QUESTION), &session)
        .map_err(|e| format!("{e:?}"))?;
    ensure(outcome.observation == AVG_SENTENCE, || format!("observation {:?}", outcome.observation))?;
    ensure(outcome.raw_intermediate.as_deref() == Some(AVG_SQL), || format!("intermediate {:?}", outcome.raw_intermediate))?;
    let convert = session.prompts_tagged(TAG_SQL_CONVERT);
    ensure(convert.len() == 1 && convert[0].contains("4.5"), || "stage 3 prompt lacks the 4.5 result".to_string())
}

pub const WRITE_ATTEMPTS: [&str; 6] = [
    "DROP TABLE interactions",
    "DELETE FROM items",
    "UPDATE interactions SET rating = 1",
    "INSERT INTO items (item_id, domain, title) VALUES ('X', 'Beauty', 'X')",
    "SELECT 1; DROP TABLE items",
    "```sql\nDELETE FROM interactions;\n```",
];

/// `episodes` SI episodes whose SQL translations alternate between reads
/// and write attempts; the store checksum must not move and every write
/// must come back as an error observation.
pub fn store_read_only(episodes: usize) -> Check {
    use recmind_core::fixtures;
    use recmind_core::gateway::{Script, ScriptEntry};
    use recmind_core::memory::MemoryStore;
    use recmind_core::planning::Planner;
    use recmind_core::prompts::{EMPTY_RESPONSE, FINAL_INSTRUCTION};
    use recmind_core::tools::ToolSuite;

    use super::scenarios::{INSPIRE_MARKER, STEP_MARKER};

    let store = MemoryStore::in_memory().map_err(|e| e.to_string())?;
    store
        .ingest_reader(fixtures::sewak_jsonl().as_bytes(), "Beauty")
        .map_err(|e| e.to_string())?;
    let before = store.checksum();
    let tools = ToolSuite::new(&store);
    for i in 0..episodes {
        let sql = if i % 2 == 0 { AVG_SQL } else { WRITE_ATTEMPTS[(i / 2) % WRITE_ATTEMPTS.len()] };
        let script = Script::new(vec![
            ScriptEntry::contains(INSPIRE_MARKER, EMPTY_RESPONSE),
            ScriptEntry::contains(FINAL_INSTRUCTION, "4.5"),
            ScriptEntry::contains("Your mission is to convert SQL query from given", sql),
            ScriptEntry::contains("Here is the database result", AVG_SENTENCE),
            ScriptEntry::contains_all([STEP_MARKER, "Observation 1"], "Thought: done\nAction: Finish[4.5]"),
            ScriptEntry::contains(STEP_MARKER, format!("Thought: look it up\nAction: SQLTool[{AVG_QUESTION}]")),
        ]);
        let gw = scenarios::gateway(script);
        let session = gw.session(None);
        let trace = Planner::new(&session, &tools)
            .run(Strategy::SelfInspiring, scenarios::PROBLEM)
            .map_err(|e| format!("episode {i}: {e}"))?;
        let observation = trace.paths[0].states[0].observation.clone().unwrap_or_default();
        let expected = if sql == AVG_SQL { AVG_SENTENCE } else { "Error: SqlGenerationFailed" };
        ensure(observation == expected, || format!("episode {i} ({sql}): observation {observation:?}"))?;
    }
    let after = store.checksum();
    ensure(before == after, || format!("checksum moved after {episodes} episodes"))
}
