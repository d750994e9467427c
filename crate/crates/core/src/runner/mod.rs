//! Evaluation runs: config files, the per-run archive, and the episode loop.

mod archive;
mod config;

use std::collections::HashSet;
use std::path::Path;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use thiserror::Error;

pub use archive::{Archive, EpisodeRecord, EpisodeStatus, CONFIG_FILE, RECORDS_FILE, REPORT_FILE};
pub use config::{BackendConfig, Budgets, PlannerSettings, RunConfig, ToolSettings, CONFIG_VERSION};

use crate::gateway::{Gateway, LiveBackend, ResponseCache, Script, ScriptedBackend};
use crate::harness::{parse_prediction, score_prediction, PromptBuilder, TaskInstance, TaskKind, TitleIndex};
use crate::memory::MemoryStore;
use crate::metrics::{aggregate, InstanceScore, MetricReport};
use crate::planning::{render_listing, Planner};
use crate::tools::{FixtureSearchProvider, HttpSearchProvider, SearchProvider, ToolSuite};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config: {0}")]
    Config(String),
    #[error("guardrail: {0}")]
    Guardrail(String),
    #[error("archive: {0}")]
    Archive(String),
    #[error("unknown episode {0:?}")]
    UnknownEpisode(String),
}

impl RunError {
    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        1
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Run at most this many pending instances, then return.
    pub stop_after: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    /// Over every archived instance of the set, in set order.
    pub report: MetricReport,
    pub total: usize,
    pub archived: usize,
    /// Instances run by this call.
    pub ran: usize,
}

impl RunOutcome {
    pub fn is_complete(&self) -> bool {
        self.archived == self.total
    }

    pub fn failure_rate(&self) -> f64 {
        if self.archived == 0 {
            0.0
        } else {
            self.report.n_failed as f64 / self.archived as f64
        }
    }
}

enum GatewaySource {
    Shared(Gateway),
    PerEpisode { script: Script, raw: bool },
}

struct Env<'a> {
    config: &'a RunConfig,
    store: MemoryStore,
    prompts: PromptBuilder,
    catalog: Option<TitleIndex>,
    search: Option<Box<dyn SearchProvider>>,
    gateway: GatewaySource,
}

fn check_instances(config: &RunConfig, instances: &[TaskInstance]) -> Result<(), RunError> {
    if instances.is_empty() {
        return Err(RunError::Config("instance set is empty".into()));
    }
    let mut ids = HashSet::new();
    for inst in instances {
        if inst.task != config.task || inst.domain != config.domain {
            return Err(RunError::Config(format!(
                "instance {} is {}/{} but the config asks for {}/{}",
                inst.id,
                inst.task.label(),
                inst.domain,
                config.task.label(),
                config.domain
            )));
        }
        if !ids.insert(inst.id.as_str()) {
            return Err(RunError::Config(format!("duplicate instance id {}", inst.id)));
        }
    }
    Ok(())
}

/// Archived configs must match apart from parallelism.
fn check_archived_config(archive: &Archive, config: &RunConfig) -> Result<(), RunError> {
    let path = archive.dir().join(CONFIG_FILE);
    let normalized = RunConfig {
        parallelism: 1,
        ..config.clone()
    };
    if path.exists() {
        let text = std::fs::read_to_string(&path).map_err(|e| RunError::Archive(format!("{}: {e}", path.display())))?;
        let stored = RunConfig::from_toml(&text)?;
        if stored != normalized {
            return Err(RunError::Config(format!(
                "{} was created with a different configuration",
                archive.dir().display()
            )));
        }
        return Ok(());
    }
    std::fs::write(&path, normalized.to_toml()).map_err(|e| RunError::Archive(format!("{}: {e}", path.display())))
}

fn build_env(config: &RunConfig) -> Result<Env<'_>, RunError> {
    if !config.store.exists() {
        return Err(RunError::Config(format!("store {} does not exist", config.store.display())));
    }
    let store = MemoryStore::open(&config.store).map_err(|e| RunError::Config(e.to_string()))?;
    let items = store
        .domain_items(&config.domain)
        .map_err(|e| RunError::Config(e.to_string()))?;
    if items.is_empty() {
        return Err(RunError::Config(format!("store has no items for domain {}", config.domain)));
    }
    let catalog = (config.task == TaskKind::SequentialRec)
        .then(|| TitleIndex::new(items.iter().map(|i| (i.item_id.as_str(), i.title.as_str()))));
    let search: Option<Box<dyn SearchProvider>> = match (&config.tools.search_fixture, &config.tools.search_http) {
        (Some(_), Some(_)) => return Err(RunError::Config("set search_fixture or search_http, not both".into())),
        (Some(path), None) => Some(Box::new(
            FixtureSearchProvider::load(path).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?,
        )),
        (None, Some(http)) => Some(Box::new(HttpSearchProvider::new(http.clone()))),
        (None, None) => None,
    };
    let raw = config.tools.raw_output;
    let gateway = match &config.backend {
        BackendConfig::Scripted { script } => GatewaySource::PerEpisode {
            script: Script::load(script).map_err(|e| RunError::Config(e.to_string()))?,
            raw,
        },
        BackendConfig::Live(live) => {
            let backend = LiveBackend::new(live.clone()).map_err(|e| RunError::Config(e.to_string()))?;
            let mut gateway = Gateway::new(Arc::new(backend)).with_raw_tool_output(raw);
            if let Some(path) = &config.cache {
                gateway = gateway.with_cache(ResponseCache::open(path).map_err(|e| RunError::Config(e.to_string()))?);
            }
            GatewaySource::Shared(gateway)
        }
    };
    let prompts = PromptBuilder::new(store.schema_description().text);
    Ok(Env {
        config,
        store,
        prompts,
        catalog,
        search,
        gateway,
    })
}

fn run_episode(env: &Env<'_>, index: usize, instance: &TaskInstance) -> EpisodeRecord {
    let mut instance = instance.clone();
    instance.shots.truncate(env.config.shots.shot_count);
    let prompt = env.prompts.build(&instance);

    let owned;
    let gateway = match &env.gateway {
        GatewaySource::Shared(g) => g,
        GatewaySource::PerEpisode { script, raw } => {
            owned = Gateway::new(Arc::new(ScriptedBackend::new(script.clone()))).with_raw_tool_output(*raw);
            &owned
        }
    };
    let session = gateway.session(Some(env.config.budgets.episode_max_calls));
    let mut tools = ToolSuite::new(&env.store).with_observation_cap(env.config.tools.observation_cap);
    if let Some(search) = &env.search {
        tools = tools.with_search(search.as_ref());
    }
    let planner = Planner::new(&session, &tools).with_config(env.config.planner_config());

    let mut record = EpisodeRecord {
        index,
        instance_id: instance.id.clone(),
        status: archive::EpisodeStatus::Failed,
        prompt: prompt.clone(),
        trace: None,
        prediction: None,
        score: InstanceScore::Failed,
        calls: Vec::new(),
        error: None,
    };
    match planner.run(env.config.strategy, &prompt) {
        Ok(trace) => {
            let answer = trace.final_answer.clone().unwrap_or_default();
            match parse_prediction(&answer, &instance, env.catalog.as_ref()) {
                Ok(prediction) => {
                    record.score = score_prediction(&instance, Some(&prediction));
                    if record.score != InstanceScore::Failed {
                        record.status = EpisodeStatus::Completed;
                    }
                    record.prediction = Some(prediction);
                }
                Err(e) => record.error = Some(e.to_string()),
            }
            record.trace = Some(trace);
        }
        Err(e) => record.error = Some(e.to_string()),
    }
    record.calls = session.log();
    record
}

/// Runs every instance not yet in the archive and returns the report over
/// all archived instances. `report.json` is written once the set is
/// complete.
pub fn run(
    config: &RunConfig,
    instances: &[TaskInstance],
    archive_dir: impl AsRef<Path>,
    options: &RunOptions,
) -> Result<RunOutcome, RunError> {
    config.validate()?;
    check_instances(config, instances)?;
    config.check_guardrails(instances.len())?;
    let mut archive = Archive::open(archive_dir)?;
    check_archived_config(&archive, config)?;
    let env = build_env(config)?;

    let mut pending: Vec<(usize, &TaskInstance)> = instances
        .iter()
        .enumerate()
        .filter(|(_, inst)| !archive.contains(&inst.id))
        .collect();
    if let Some(n) = options.stop_after {
        pending.truncate(n);
    }
    log::info!(
        "{} of {} instances pending; running {}",
        instances.len() - archive.len().min(instances.len()),
        instances.len(),
        pending.len()
    );

    let writer = Mutex::new(archive.writer()?);
    let finished = Mutex::new(Vec::with_capacity(pending.len()));
    let write_error = Mutex::new(None);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallelism)
        .build()
        .map_err(|e| RunError::Config(e.to_string()))?;
    pool.install(|| {
        pending.par_iter().for_each(|&(index, instance)| {
            let record = run_episode(&env, index, instance);
            if let Some(e) = &record.error {
                log::warn!("{}: {e}", record.instance_id);
            }
            if let Err(e) = writer.lock().unwrap().append(&record) {
                write_error.lock().unwrap().get_or_insert(e);
                return;
            }
            finished.lock().unwrap().push(record);
        })
    });
    if let Some(e) = write_error.into_inner().unwrap() {
        return Err(e);
    }
    let finished = finished.into_inner().unwrap();
    let ran = finished.len();
    for record in finished {
        archive.insert(record);
    }

    let scores: Vec<InstanceScore> = instances
        .iter()
        .filter_map(|inst| archive.get(&inst.id))
        .map(|r| r.score.clone())
        .collect();
    let report = aggregate(config.task, &scores);
    let outcome = RunOutcome {
        archived: scores.len(),
        total: instances.len(),
        ran,
        report,
    };
    if outcome.is_complete() {
        let path = archive.dir().join(REPORT_FILE);
        let text = serde_json::to_string_pretty(&outcome.report).expect("report serializes");
        std::fs::write(&path, text + "\n").map_err(|e| RunError::Archive(format!("{}: {e}", path.display())))?;
    }
    Ok(outcome)
}

/// Human-readable listing of one archived episode.
pub fn render_episode(record: &EpisodeRecord) -> String {
    let status = match record.status {
        EpisodeStatus::Completed => "completed",
        EpisodeStatus::Failed => "failed",
    };
    let mut out = format!("Episode {} ({status}, {} calls)\n", record.instance_id, record.calls.len());
    if let Some(trace) = &record.trace {
        out.push('\n');
        out.push_str(&render_listing(trace));
        if !out.ends_with('\n') {
            out.push('\n');
        }
    }
    if let Some(e) = &record.error {
        out.push_str(&format!("Error: {e}\n"));
    }
    out
}

/// Looks up `episode_id` in the archive at `dir` and renders it.
pub fn trace_episode(dir: impl AsRef<Path>, episode_id: &str) -> Result<String, RunError> {
    let dir = dir.as_ref();
    if !dir.join(RECORDS_FILE).exists() {
        return Err(RunError::Archive(format!("{} holds no records", dir.display())));
    }
    let archive = Archive::open(dir)?;
    archive
        .get(episode_id)
        .map(render_episode)
        .ok_or_else(|| RunError::UnknownEpisode(episode_id.to_string()))
}

/// The config and report stored in a finished archive.
pub fn load_archive_report(dir: impl AsRef<Path>) -> Result<(RunConfig, MetricReport), RunError> {
    let dir = dir.as_ref();
    let read = |name: &str| {
        let path = dir.join(name);
        std::fs::read_to_string(&path).map_err(|e| RunError::Archive(format!("{}: {e}", path.display())))
    };
    let config = RunConfig::from_toml(&read(CONFIG_FILE)?)?;
    let report = serde_json::from_str(&read(REPORT_FILE)?)
        .map_err(|e| RunError::Archive(format!("{}: {e}", dir.join(REPORT_FILE).display())))?;
    Ok((config, report))
}
