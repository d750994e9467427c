//! Prompt templates.
//!
//! Placeholders are written `{name}` and filled with [`fill`]. The agent
//! preamble, tool descriptions, tool-internal templates, self-inspiring,
//! thought-sampling and decision-making templates and the direct and
//! sequential recommendation questions are fixed wording and must not be
//! edited. The remaining constants are formatting instructions matched by
//! this crate's parsers.

use std::collections::HashMap;

pub const AGENT_PREAMBLE: &str = "Perform a recommendation task with interleaving Thought, Action, and Observation steps. Thought can reason about the current situation, and Action can be the following types: ";

pub const SQL_TOOL_DESCRIPTION: &str = "SQL {question}, which aims to search for the answer to a question from the database. You can only put forward questions based on the available information in the database. Available information and schema of the database is provided in {database_info}.";

pub const SUMMARIZE_TOOL_DESCRIPTION: &str = "Summarize {content}, which condenses extensive text into a shorter version while retaining the core information and meaning by using a pre-trained text summarization model.";

pub const SEARCH_TOOL_DESCRIPTION: &str = "Search {question}, which formulates a search query for Google search engine based on the question. This tool can be used to search for information that is unavailable in the database.";

pub const FINISH_DESCRIPTION: &str = "Finish {answer}, which returns the answer and finishes the task.";

pub const SEARCH_RESULT_TO_TEXT: &str = "Your mission is to convert the Google search result {search_result} from search engine to meaningful sentences, which can be a response to question {question}.";

pub const QUESTION_TO_SQL: &str = "Your mission is to convert SQL query from given {question}. The information about the tables in the database is {database_info}. Only output the SQL query.";

pub const SQL_RESULT_TO_TEXT: &str = "Your mission is to convert SQL query execution results to meaningful sentences, which should be the answer to the question {question}. The query generated for this question is {sql_query}. Here is the database result: {sql_result}";

pub const SELF_INSPIRE: &str = "You are given multi-step problem-solving steps towards finishing the task {task}. The previous steps are {previous_steps}. You already have the thought, action, and observation in the current step {current_step}.\nYour mission is to decide if there is an alternative thought in the current step that can help finish this task following the previous steps. If there is, directly output the thought. If not, please respond {empty_response}.";

pub const STEPWISE_INSTRUCTION: &str = "Solve a recommendation task with interleaving Thought, Action, and Observation steps.";

pub const THOUGHT_SAMPLING: &str = "Given the previous {previous_steps}, list five possible thoughts for the next step towards finishing the task {task}.";

pub const DECISION_MAKING: &str = "Given an instruction and several choices, decide which choice is most promising. Your instruction is {task_specific_instruction}. Your available options are {option_list}. Analyze each choice, then conclude in the last line, 'The best choice is {s}', where s is the integer id of the choice.";

pub const DIRECT_REC_QUESTION: &str = "From the item candidates listed, choose the top 10 items to recommend to the user {user_id} and rank them in order of priority from highest to lowest. Candidates: [{item_list}]";

pub const SEQUENTIAL_REC_QUESTION: &str = "user {user_id} has interacted with the following items in chronological order: [{item_list}]. Please recommend the next item that the user might interact with. Choose the top 10 products to recommend in order of priority, from highest to lowest.";

pub const RATING_QUESTION: &str = "How will user {user_id} rate the item \"{item_title}\"? Give a rating between 1 and 5.";

pub const EXPLANATION_QUESTION: &str = "Generate an explanation of why user {user_id} interacted with the item \"{item_title}\", written as the user's own review.";

pub const SUMMARIZATION_QUESTION: &str = "Write a short review title that summarizes this review by user {user_id} of the item \"{item_title}\": \"{review}\"";

pub const EXEMPLAR_HEADER: &str = "Here are some examples:";

/// Reply that means "no alternative thought" in the self-inspiring check.
pub const EMPTY_RESPONSE: &str = "NO_ALTERNATIVE";

/// Thought text that ends planning.
pub const END_OF_PLANNING: &str = "End of Planning";

pub const STEP_INSTRUCTION: &str = "Write the next step as one line 'Thought: ...' followed by one line 'Action: ToolName[argument]'.";

pub const ALTERNATIVE_INSTRUCTION: &str = "Write the action for this alternative thought as one line 'Action: ToolName[argument]'.";

pub const FINAL_INSTRUCTION: &str = "Based on all the steps above, give the final answer to the task.";

pub const REPROMPT_SUFFIX: &str = "Your previous reply could not be parsed. Reply again using exactly the requested format.";

pub const CANDIDATE_FORMAT: &str = "Number the thoughts 1 to {k}. Give each as a line 'Thought: ...' followed by a line 'Action: ToolName[argument]'.";

pub const BRANCH_EVALUATION: &str = "Evaluate whether the latest step can still lead to finishing the task {task}. The previous steps are {previous_steps}. The latest step is {current_step}. Answer with one word: sure, maybe, or impossible.";

pub const SUMMARIZE: &str = "Summarize the following text in one or two sentences, keeping its core information and meaning:\n{content}";

/// Replaces each `{name}` whose name is in `values`. Single pass, so
/// braces inside substituted values are left alone; unknown placeholders
/// such as `{s}` stay literal.
pub fn fill(template: &str, values: &[(&str, &str)]) -> String {
    let map: HashMap<&str, &str> = values.iter().copied().collect();
    let mut out = String::with_capacity(template.len() + values.iter().map(|(_, v)| v.len()).sum::<usize>());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) if map.contains_key(&after[..close]) => {
                out.push_str(map[&after[..close]]);
                rest = &after[close + 1..];
            }
            _ => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

/// Thought-sampling prompt for `k` candidates.
pub fn thought_sampling(previous_steps: &str, task: &str, k: usize) -> String {
    let template = if k == 5 {
        THOUGHT_SAMPLING.to_string()
    } else {
        THOUGHT_SAMPLING.replace("list five", &format!("list {}", number_word(k)))
    };
    let k_text = k.to_string();
    format!(
        "{}\n{}",
        fill(&template, &[("previous_steps", previous_steps), ("task", task)]),
        fill(CANDIDATE_FORMAT, &[("k", &k_text)])
    )
}

fn number_word(k: usize) -> String {
    const WORDS: [&str; 11] = [
        "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
    ];
    WORDS.get(k).map_or_else(|| k.to_string(), |w| w.to_string())
}

/// Tool list shown to the agent, with `{database_info}` filled.
pub fn tool_descriptions(database_info: &str) -> String {
    let sql = fill(SQL_TOOL_DESCRIPTION, &[("database_info", database_info)]);
    format!(
        "(1) SQLTool[question]: {sql}\n(2) SummarizeTool[content]: {SUMMARIZE_TOOL_DESCRIPTION}\n(3) SearchTool[question]: {SEARCH_TOOL_DESCRIPTION}\n(4) Finish[answer]: {FINISH_DESCRIPTION}"
    )
}
