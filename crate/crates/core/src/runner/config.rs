use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::RunError;
use crate::gateway::{LiveConfig, PLANNER_TEMPERATURE};
use crate::harness::{ExemplarConfig, TaskKind};
use crate::planning::{PlannerConfig, Strategy};
use crate::tools::{HttpSearchConfig, OBSERVATION_CAP};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendConfig {
    /// Responses come from a TOML script; each episode starts from a fresh
    /// copy so use limits reset per episode.
    Scripted { script: PathBuf },
    Live(LiveConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Budgets {
    /// T: step-generation completions per episode.
    pub step_budget: u32,
    /// Live runs refuse to start when instances × T exceeds this.
    pub max_calls: u64,
    /// Hard cap on completions of any kind inside one episode.
    pub episode_max_calls: u64,
    /// Upper bound on instances × T × `cost_per_call`.
    pub max_cost_estimate: Option<f64>,
    pub cost_per_call: f64,
}

impl Default for Budgets {
    fn default() -> Self {
        Self {
            step_budget: 15,
            max_calls: 10_000,
            episode_max_calls: 200,
            max_cost_estimate: None,
            cost_per_call: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerSettings {
    pub k: usize,
    pub max_prunes: u32,
    pub temperature: f64,
    pub max_output_tokens: u32,
}

impl Default for PlannerSettings {
    fn default() -> Self {
        let d = PlannerConfig::default();
        Self {
            k: d.k,
            max_prunes: d.max_prunes,
            temperature: PLANNER_TEMPERATURE,
            max_output_tokens: d.max_output_tokens,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToolSettings {
    /// Skip the result-to-sentences calls and return raw rows.
    pub raw_output: bool,
    pub observation_cap: usize,
    /// Canned search results keyed by normalized question.
    pub search_fixture: Option<PathBuf>,
    pub search_http: Option<HttpSearchConfig>,
}

impl Default for ToolSettings {
    fn default() -> Self {
        Self {
            raw_output: false,
            observation_cap: OBSERVATION_CAP,
            search_fixture: None,
            search_http: None,
        }
    }
}

/// One evaluation run. Stored as TOML with `version = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    /// SQLite file produced by `ingest`.
    pub store: PathBuf,
    pub domain: String,
    pub task: TaskKind,
    pub strategy: Strategy,
    /// Seed for instance generation.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub parallelism: usize,
    /// Share of failed instances above which the run counts as failed.
    #[serde(default = "half")]
    pub failure_threshold: f64,
    /// Response cache for temperature-0 calls (live backend only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache: Option<PathBuf>,
    #[serde(default)]
    pub shots: ExemplarConfig,
    #[serde(default)]
    pub budgets: Budgets,
    #[serde(default)]
    pub planner: PlannerSettings,
    #[serde(default)]
    pub tools: ToolSettings,
    pub backend: BackendConfig,
}

fn one() -> usize {
    1
}

fn half() -> f64 {
    0.5
}

impl RunConfig {
    pub fn new(store: impl Into<PathBuf>, domain: &str, task: TaskKind, strategy: Strategy, backend: BackendConfig) -> Self {
        Self {
            version: CONFIG_VERSION,
            store: store.into(),
            domain: domain.to_string(),
            task,
            strategy,
            seed: 0,
            parallelism: 1,
            failure_threshold: 0.5,
            cache: None,
            shots: ExemplarConfig::default(),
            budgets: Budgets::default(),
            planner: PlannerSettings::default(),
            tools: ToolSettings::default(),
            backend,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, RunError> {
        let config: RunConfig = toml::from_str(text).map_err(|e| RunError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Reads and validates a config file. Relative paths inside it are
    /// resolved against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, RunError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
        let config = Self::from_toml(&text).map_err(|e| match e {
            RunError::Config(m) => RunError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        Ok(config.resolved(path.parent().unwrap_or(Path::new("."))))
    }

    pub fn resolved(mut self, base: &Path) -> Self {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.store);
        if let Some(c) = self.cache.as_mut() {
            fix(c);
        }
        if let Some(f) = self.tools.search_fixture.as_mut() {
            fix(f);
        }
        if let BackendConfig::Scripted { script } = &mut self.backend {
            fix(script);
        }
        self
    }

    pub fn validate(&self) -> Result<(), RunError> {
        let bad = |m: String| Err(RunError::Config(m));
        if self.version != CONFIG_VERSION {
            return bad(format!("unsupported config version {}; expected {CONFIG_VERSION}", self.version));
        }
        if self.parallelism == 0 {
            return bad("parallelism must be at least 1".into());
        }
        if self.budgets.step_budget == 0 || self.budgets.max_calls == 0 || self.budgets.episode_max_calls == 0 {
            return bad("budgets must be positive".into());
        }
        if self.budgets.cost_per_call < 0.0 || self.budgets.max_cost_estimate.is_some_and(|c| c <= 0.0) {
            return bad("cost budgets must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.failure_threshold) {
            return bad("failure_threshold must lie in [0, 1]".into());
        }
        if self.domain.trim().is_empty() {
            return bad("domain is empty".into());
        }
        self.shots
            .validate(&self.domain)
            .map_err(|e| RunError::Config(e.to_string()))?;
        self.planner_config()
            .validate()
            .map_err(|e| RunError::Config(e.to_string()))
    }

    pub fn planner_config(&self) -> PlannerConfig {
        PlannerConfig {
            step_budget: self.budgets.step_budget,
            k: self.planner.k,
            max_prunes: self.planner.max_prunes,
            temperature: self.planner.temperature,
            max_output_tokens: self.planner.max_output_tokens,
        }
    }

    /// Row label used in report tables, e.g. `RecMind-SI (few-shot)`.
    pub fn method_label(&self) -> String {
        let shots = if self.shots.shot_count == 0 { "zero-shot" } else { "few-shot" };
        match self.strategy {
            Strategy::CoT => format!("RecMind-CoT ({shots})"),
            Strategy::ToTBfs => format!("RecMind-ToT (BFS, {shots})"),
            Strategy::ToTDfs => format!("RecMind-ToT (DFS, {shots})"),
            Strategy::SelfInspiring => format!("RecMind-SI ({shots})"),
        }
    }

    /// Pre-flight checks for live runs: the call and cost guardrails.
    pub fn check_guardrails(&self, instance_count: usize) -> Result<(), RunError> {
        if !matches!(self.backend, BackendConfig::Live(_)) {
            return Ok(());
        }
        let planned = instance_count as u64 * u64::from(self.budgets.step_budget);
        if planned > self.budgets.max_calls {
            return Err(RunError::Guardrail(format!(
                "{instance_count} instances × T={} = {planned} step calls exceeds max_calls {}",
                self.budgets.step_budget, self.budgets.max_calls
            )));
        }
        if let Some(limit) = self.budgets.max_cost_estimate {
            let cost = planned as f64 * self.budgets.cost_per_call;
            if cost > limit {
                return Err(RunError::Guardrail(format!(
                    "estimated cost {cost:.2} exceeds max_cost_estimate {limit:.2}"
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scripted() -> RunConfig {
        RunConfig::new(
            "store.db",
            "Beauty",
            TaskKind::RatingPrediction,
            Strategy::SelfInspiring,
            BackendConfig::Scripted { script: "s.toml".into() },
        )
    }

    #[test]
    fn toml_round_trip() {
        let mut c = scripted();
        c.budgets.max_cost_estimate = Some(12.5);
        c.tools.search_fixture = Some("search.json".into());
        assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);

        let live = RunConfig {
            backend: BackendConfig::Live(LiveConfig {
                endpoint: "https://example.invalid/v1/chat/completions".into(),
                model: "m".into(),
                api_key_env: "KEY".into(),
                timeout_secs: 5,
            }),
            ..scripted()
        };
        assert_eq!(RunConfig::from_toml(&live.to_toml()).unwrap(), live);
    }

    #[test]
    fn minimal_file() {
        let text = r#"
version = 1
store = "db.sqlite"
domain = "Beauty"
task = "RatingPrediction"
strategy = "SI"

[backend]
kind = "scripted"
script = "script.toml"
"#;
        let c = RunConfig::from_toml(text).unwrap();
        assert_eq!(c.parallelism, 1);
        assert_eq!(c.budgets.step_budget, 15);
        assert_eq!(c.shots.shot_count, 3);
        assert_eq!(c.method_label(), "RecMind-SI (few-shot)");
        let resolved = c.resolved(Path::new("/runs"));
        assert_eq!(resolved.store, Path::new("/runs/db.sqlite"));
    }

    #[test]
    fn rejects_unknown_keys_and_versions() {
        let base = scripted().to_toml();
        assert!(matches!(RunConfig::from_toml(&format!("colour = 1\n{base}")), Err(RunError::Config(_))));
        let v2 = base.replace("version = 1", "version = 2");
        assert!(RunConfig::from_toml(&v2).is_err());
        let nested = base.replace("[budgets]", "[budgets]\nsteps = 3");
        assert!(RunConfig::from_toml(&nested).is_err());
        let zero = base.replace("parallelism = 1", "parallelism = 0");
        assert!(RunConfig::from_toml(&zero).is_err());
    }

    #[test]
    fn live_guardrail() {
        let mut c = scripted();
        c.budgets.max_calls = 100;
        assert!(c.check_guardrails(1000).is_ok());
        c.backend = BackendConfig::Live(LiveConfig {
            endpoint: "http://x".into(),
            model: "m".into(),
            api_key_env: "K".into(),
            timeout_secs: 1,
        });
        assert!(c.check_guardrails(6).is_ok());
        assert!(matches!(c.check_guardrails(7), Err(RunError::Guardrail(_))));
        c.budgets.max_cost_estimate = Some(1.0);
        c.budgets.cost_per_call = 0.02;
        assert!(c.check_guardrails(3).is_ok());
        assert!(c.check_guardrails(4).is_err());
    }
}
