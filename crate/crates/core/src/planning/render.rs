//! Text rendering of traces.
//!
//! Grammar, one block per state:
//!
//! ```text
//! Thought 3 (2): <thought>
//! Action 3 (2): <Tool>[<argument>]
//! Observation 3 (2): <observation>
//! ```
//!
//! The number is the depth. The ` (p)` suffix appears only when two or more
//! rendered states share a depth and gives their order of creation at that
//! depth. `Finish` states have no observation line. When more than one path
//! is rendered, each path starts with a `Path m:` line.

use std::collections::HashMap;

use super::{PlanState, PlanTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContextView {
    /// Every retained state of every path, paths in creation order.
    AllPaths,
    /// The newest path followed back to the root.
    SurvivingPath,
}

struct Entry<'a> {
    state: &'a PlanState,
    path_header: Option<u32>,
    pruned: bool,
}

fn view_entries(trace: &PlanTrace, view: ContextView) -> Vec<Entry<'_>> {
    match view {
        ContextView::SurvivingPath => trace
            .surviving_chain()
            .into_iter()
            .map(|state| Entry {
                state,
                path_header: None,
                pruned: false,
            })
            .collect(),
        ContextView::AllPaths => {
            let multi = trace.paths.iter().filter(|p| !p.states.is_empty()).count() > 1;
            let mut out = Vec::new();
            for path in trace.paths.iter().filter(|p| !p.states.is_empty()) {
                for (i, state) in path.states.iter().enumerate() {
                    out.push(Entry {
                        state,
                        path_header: (multi && i == 0).then_some(path.path_id),
                        pruned: false,
                    });
                }
            }
            out
        }
    }
}

/// Depth labels: "3" or "3 (2)".
fn labels(entries: &[Entry<'_>]) -> Vec<String> {
    let mut totals: HashMap<u32, usize> = HashMap::new();
    for e in entries {
        *totals.entry(e.state.step_index).or_default() += 1;
    }
    let mut seen: HashMap<u32, usize> = HashMap::new();
    entries
        .iter()
        .map(|e| {
            let d = e.state.step_index;
            let ordinal = seen.entry(d).or_default();
            *ordinal += 1;
            if totals[&d] > 1 {
                format!("{d} ({ordinal})")
            } else {
                d.to_string()
            }
        })
        .collect()
}

/// One state block with the given label, no trailing newline.
pub fn render_state(state: &PlanState, label: &str) -> String {
    let mut out = format!("Thought {label}: {}\nAction {label}: {}", state.thought, state.action);
    if let Some(obs) = &state.observation {
        out.push_str(&format!("\nObservation {label}: {obs}"));
    }
    out
}

fn render_entries(entries: &[Entry<'_>], with_intermediate: bool) -> Vec<(String, String)> {
    let labels = labels(entries);
    entries
        .iter()
        .zip(labels)
        .map(|(e, label)| {
            let mut block = String::new();
            if let Some(m) = e.path_header {
                block.push_str(&format!("Path {m}:\n"));
            }
            block.push_str(&render_state(e.state, &label));
            if with_intermediate {
                if let Some(im) = &e.state.intermediate {
                    block.push_str(&format!("\nIntermediate {label}: {im}"));
                }
            }
            if e.pruned {
                block.push_str(&format!("\n[pruned {label}]"));
            }
            (label, block)
        })
        .collect()
}

/// The steps of a view, without the problem. Empty for an empty trace.
pub(crate) fn render_steps(trace: &PlanTrace, view: ContextView) -> String {
    blocks_text(&render_entries(&view_entries(trace, view), false))
}

/// Steps of a view split into (everything before the newest state, the
/// newest state). Labels are computed over the whole view.
pub(crate) fn render_split(trace: &PlanTrace, view: ContextView) -> (String, String) {
    let mut blocks = render_entries(&view_entries(trace, view), false);
    let current = blocks.pop().map(|(_, b)| b).unwrap_or_default();
    (blocks_text(&blocks), current)
}

fn blocks_text(blocks: &[(String, String)]) -> String {
    blocks.iter().map(|(_, b)| b.as_str()).collect::<Vec<_>>().join("\n")
}

/// Problem statement followed by the steps of the view.
pub fn render_context(trace: &PlanTrace, view: ContextView) -> String {
    let steps = render_steps(trace, view);
    if steps.is_empty() {
        trace.problem.clone()
    } else {
        format!("{}\n\n{}", trace.problem, steps)
    }
}

/// Full human-readable listing of a trace: every path, pruned states at
/// their depth, tool intermediates and the outcome.
pub fn render_listing(trace: &PlanTrace) -> String {
    let mut entries = view_entries(trace, ContextView::AllPaths);
    if !trace.pruned_states.is_empty() {
        let mut merged = Vec::new();
        let mut pruned: Vec<&PlanState> = trace.pruned_states.iter().collect();
        for e in entries {
            let (here, rest): (Vec<_>, Vec<_>) =
                pruned.into_iter().partition(|p| p.step_index == e.state.step_index);
            pruned = rest;
            merged.extend(here.into_iter().map(|state| Entry {
                state,
                path_header: None,
                pruned: true,
            }));
            merged.push(e);
        }
        merged.extend(pruned.into_iter().map(|state| Entry {
            state,
            path_header: None,
            pruned: true,
        }));
        entries = merged;
    }
    let mut out = format!(
        "Strategy: {}\nSteps used: {} of {}\n\n{}\n",
        trace.strategy.label(),
        trace.steps_used,
        trace.step_budget,
        trace.problem
    );
    let steps = blocks_text(&render_entries(&entries, true));
    if !steps.is_empty() {
        out.push('\n');
        out.push_str(&steps);
        out.push('\n');
    }
    if let Some(t) = trace.termination {
        out.push_str(&format!("\nTermination: {t:?}\n"));
    }
    if let Some(answer) = &trace.final_answer {
        out.push_str(&format!("Final answer: {answer}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planning::{ActionSpec, ReasoningPath, StateRef, Strategy, Tool};

    fn state(path_id: u32, step_index: u32, thought: &str, parent: Option<StateRef>) -> PlanState {
        PlanState {
            path_id,
            step_index,
            thought: thought.into(),
            action: ActionSpec::new(Tool::Search, format!("q{step_index}")),
            observation: Some(format!("o{path_id}-{step_index}")),
            intermediate: None,
            parent,
        }
    }

    fn r(path_id: u32, step_index: u32) -> Option<StateRef> {
        Some(StateRef { path_id, step_index })
    }

    fn branched() -> PlanTrace {
        let mut t = PlanTrace::new("x", Strategy::SelfInspiring, 15);
        t.paths[0].states = vec![
            state(1, 1, "a", None),
            state(1, 2, "b", r(1, 1)),
            state(1, 3, "c1", r(1, 2)),
        ];
        t.paths.push(ReasoningPath {
            path_id: 2,
            states: vec![state(2, 3, "c2", r(1, 2)), state(2, 4, "d", r(2, 3))],
            branch_point: r(1, 2),
        });
        t
    }

    #[test]
    fn single_path_has_no_suffix() {
        let mut t = PlanTrace::new("x", Strategy::CoT, 15);
        t.paths[0].states = vec![state(1, 1, "a", None), state(1, 2, "b", r(1, 1))];
        let text = render_context(&t, ContextView::SurvivingPath);
        assert_eq!(
            text,
            "x\n\nThought 1: a\nAction 1: SearchTool[q1]\nObservation 1: o1-1\nThought 2: b\nAction 2: SearchTool[q2]\nObservation 2: o1-2"
        );
        assert!(!text.contains('('));
    }

    #[test]
    fn branch_labels() {
        let t = branched();
        let all = render_context(&t, ContextView::AllPaths);
        assert!(all.contains("Path 1:\nThought 1: a"));
        assert!(all.contains("Thought 3 (1): c1"));
        assert!(all.contains("Path 2:\nThought 3 (2): c2"));
        assert!(all.contains("Thought 4: d"));
        assert_eq!(all, render_context(&t, ContextView::AllPaths));

        let surviving = render_context(&t, ContextView::SurvivingPath);
        assert!(!surviving.contains("c1"));
        assert!(surviving.contains("Thought 3: c2"));
        assert!(surviving.contains("Thought 2: b"));
    }

    #[test]
    fn finish_has_no_observation() {
        let mut t = PlanTrace::new("x", Strategy::CoT, 15);
        t.paths[0].states = vec![PlanState {
            action: ActionSpec::finish("yes"),
            observation: None,
            ..state(1, 1, "done", None)
        }];
        let text = render_context(&t, ContextView::SurvivingPath);
        assert!(text.ends_with("Action 1: Finish[yes]"));
    }

    #[test]
    fn listing_places_pruned_states() {
        let mut t = PlanTrace::new("x", Strategy::ToTDfs, 15);
        t.paths[0].states = vec![
            state(1, 1, "a", None),
            state(1, 2, "b", r(1, 1)),
            state(1, 3, "adopted", r(1, 2)),
        ];
        t.pruned_states = vec![state(1, 3, "abandoned", r(1, 2))];
        let listing = render_listing(&t);
        let pruned = listing.find("Thought 3 (1): abandoned").unwrap();
        let adopted = listing.find("Thought 3 (2): adopted").unwrap();
        assert!(pruned < adopted);
        assert!(listing.contains("[pruned 3 (1)]"));
        assert!(!render_context(&t, ContextView::SurvivingPath).contains("abandoned"));
    }

    #[test]
    fn split_keeps_whole_view_labels() {
        let (before, current) = render_split(&branched(), ContextView::AllPaths);
        assert!(before.contains("Thought 3 (2): c2"));
        assert!(current.starts_with("Thought 4: d"));
    }
}
