//! Deterministic scripted backend.
//!
//! A script is an ordered list of entries. For each prompt the backend
//! picks an entry that still has uses left: exact matches win over
//! substring matches, and among matches of the same kind the first
//! declared entry wins. Entries with `max_uses = 1` that share a matcher
//! therefore behave like a queue. A prompt that matches nothing is an
//! error.

use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{CompletionBackend, CompletionRequest, GatewayError};

#[derive(Debug, Clone, PartialEq)]
pub enum Matcher {
    /// Whole prompt equals this string.
    Exact(String),
    /// Prompt contains this substring.
    Contains(String),
    /// Prompt contains every one of these substrings.
    ContainsAll(Vec<String>),
}

impl Matcher {
    fn matches(&self, prompt: &str) -> bool {
        match self {
            Matcher::Exact(s) => prompt == s,
            Matcher::Contains(s) => prompt.contains(s.as_str()),
            Matcher::ContainsAll(parts) => parts.iter().all(|p| prompt.contains(p.as_str())),
        }
    }

    fn is_exact(&self) -> bool {
        matches!(self, Matcher::Exact(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEntry", into = "RawEntry")]
pub struct ScriptEntry {
    pub matcher: Matcher,
    pub response: String,
    pub max_uses: Option<u32>,
}

/// On-disk shape of an entry: exactly one of the matcher keys.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    exact: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    contains: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    contains_all: Option<Vec<String>>,
    response: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max_uses: Option<u32>,
}

impl TryFrom<RawEntry> for ScriptEntry {
    type Error = String;

    fn try_from(raw: RawEntry) -> Result<Self, Self::Error> {
        let matcher = match (raw.exact, raw.contains, raw.contains_all) {
            (Some(s), None, None) => Matcher::Exact(s),
            (None, Some(s), None) => Matcher::Contains(s),
            (None, None, Some(v)) => Matcher::ContainsAll(v),
            _ => return Err("entry needs exactly one of exact, contains, contains_all".into()),
        };
        if raw.max_uses == Some(0) {
            return Err("max_uses must be positive".into());
        }
        Ok(Self {
            matcher,
            response: raw.response,
            max_uses: raw.max_uses,
        })
    }
}

impl From<ScriptEntry> for RawEntry {
    fn from(e: ScriptEntry) -> Self {
        let (exact, contains, contains_all) = match e.matcher {
            Matcher::Exact(s) => (Some(s), None, None),
            Matcher::Contains(s) => (None, Some(s), None),
            Matcher::ContainsAll(v) => (None, None, Some(v)),
        };
        RawEntry {
            exact,
            contains,
            contains_all,
            response: e.response,
            max_uses: e.max_uses,
        }
    }
}

impl ScriptEntry {
    pub fn exact(prompt: impl Into<String>, response: impl Into<String>) -> Self {
        Self {
            matcher: Matcher::Exact(prompt.into()),
            response: response.into(),
            max_uses: None,
        }
    }

    pub fn contains(needle: impl Into<String>, response: impl Into<String>) -> Self {
        Self {
            matcher: Matcher::Contains(needle.into()),
            response: response.into(),
            max_uses: None,
        }
    }

    pub fn contains_all<I, S>(needles: I, response: impl Into<String>) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            matcher: Matcher::ContainsAll(needles.into_iter().map(Into::into).collect()),
            response: response.into(),
            max_uses: None,
        }
    }

    /// Shorthand for a single-use entry.
    pub fn once(self) -> Self {
        self.max_uses(1)
    }

    pub fn max_uses(mut self, n: u32) -> Self {
        self.max_uses = Some(n);
        self
    }
}

/// Script file contents. Stored as TOML:
///
/// ```toml
/// [[entries]]
/// contains = "Your mission is to convert SQL query"
/// response = "SELECT AVG(rating) FROM interactions"
/// max_uses = 1
/// ```
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Script {
    #[serde(default)]
    pub entries: Vec<ScriptEntry>,
}

impl Script {
    pub fn new(entries: Vec<ScriptEntry>) -> Self {
        Self { entries }
    }

    pub fn push(&mut self, entry: ScriptEntry) -> &mut Self {
        self.entries.push(entry);
        self
    }

    pub fn extend(&mut self, other: Script) -> &mut Self {
        self.entries.extend(other.entries);
        self
    }

    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("script serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GatewayError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| GatewayError::InvalidRequest(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
            .map_err(|e| GatewayError::InvalidRequest(format!("{}: {e}", path.display())))
    }
}

pub struct ScriptedBackend {
    id: String,
    entries: Vec<ScriptEntry>,
    uses: Mutex<Vec<u32>>,
}

impl ScriptedBackend {
    pub fn new(script: Script) -> Self {
        Self::with_id("scripted", script)
    }

    pub fn with_id(id: impl Into<String>, script: Script) -> Self {
        let uses = Mutex::new(vec![0; script.entries.len()]);
        Self {
            id: id.into(),
            entries: script.entries,
            uses,
        }
    }

    /// Number of times each entry has been consumed, in declaration order.
    pub fn use_counts(&self) -> Vec<u32> {
        self.uses.lock().unwrap().clone()
    }

    fn select(&self, prompt: &str, uses: &[u32]) -> Option<usize> {
        let available = |i: &usize| {
            let e = &self.entries[*i];
            e.max_uses.is_none_or(|m| uses[*i] < m) && e.matcher.matches(prompt)
        };
        let idx = 0..self.entries.len();
        idx.clone()
            .filter(|i| self.entries[*i].matcher.is_exact())
            .find(available)
            .or_else(|| idx.filter(|i| !self.entries[*i].matcher.is_exact()).find(available))
    }
}

impl CompletionBackend for ScriptedBackend {
    fn backend_id(&self) -> &str {
        &self.id
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String, GatewayError> {
        let mut uses = self.uses.lock().unwrap();
        match self.select(&request.prompt, &uses) {
            Some(i) => {
                uses[i] += 1;
                Ok(self.entries[i].response.clone())
            }
            None => {
                let head: String = request.prompt.chars().take(120).collect();
                Err(GatewayError::ScriptExhausted(head))
            }
        }
    }
}
