use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::RunError;
use crate::gateway::CallRecord;
use crate::harness::Prediction;
use crate::metrics::InstanceScore;
use crate::planning::PlanTrace;

pub const RECORDS_FILE: &str = "records.jsonl";
pub const CONFIG_FILE: &str = "config.toml";
pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeStatus {
    Completed,
    Failed,
}

/// Everything kept about one finished instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    /// Position in the instance set.
    pub index: usize,
    pub instance_id: String,
    pub status: EpisodeStatus,
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<PlanTrace>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prediction: Option<Prediction>,
    pub score: InstanceScore,
    pub calls: Vec<CallRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// A run directory: `config.toml`, `records.jsonl`, `report.json`.
#[derive(Debug)]
pub struct Archive {
    dir: PathBuf,
    records: BTreeMap<String, EpisodeRecord>,
}

impl Archive {
    /// Opens or creates `dir`. A torn final line left by an interrupted
    /// write is dropped; any other unreadable line is an error.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, RunError> {
        let dir = dir.as_ref().to_path_buf();
        std::fs::create_dir_all(&dir).map_err(|e| RunError::Archive(format!("{}: {e}", dir.display())))?;
        let mut records = BTreeMap::new();
        let path = dir.join(RECORDS_FILE);
        if path.exists() {
            let io = |e: std::io::Error| RunError::Archive(format!("{}: {e}", path.display()));
            let lines: Vec<String> = BufReader::new(File::open(&path).map_err(io)?)
                .lines()
                .collect::<Result<_, _>>()
                .map_err(io)?;
            let last = lines.len().saturating_sub(1);
            for (i, line) in lines.iter().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<EpisodeRecord>(line) {
                    Ok(r) => {
                        records.entry(r.instance_id.clone()).or_insert(r);
                    }
                    Err(_) if i == last => log::warn!("dropping torn record at end of {}", path.display()),
                    Err(e) => return Err(RunError::Archive(format!("{}:{}: {e}", path.display(), i + 1))),
                }
            }
            if lines.last().is_some_and(|l| serde_json::from_str::<EpisodeRecord>(l).is_err()) {
                rewrite(&path, records.values())?;
            }
        }
        Ok(Self { dir, records })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn contains(&self, instance_id: &str) -> bool {
        self.records.contains_key(instance_id)
    }

    pub fn get(&self, instance_id: &str) -> Option<&EpisodeRecord> {
        self.records.get(instance_id)
    }

    /// Records sorted by instance position.
    pub fn records(&self) -> Vec<&EpisodeRecord> {
        let mut out: Vec<&EpisodeRecord> = self.records.values().collect();
        out.sort_by_key(|r| r.index);
        out
    }

    pub(crate) fn writer(&self) -> Result<RecordWriter, RunError> {
        let path = self.dir.join(RECORDS_FILE);
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| RunError::Archive(format!("{}: {e}", path.display())))?;
        Ok(RecordWriter { file, path })
    }

    pub(crate) fn insert(&mut self, record: EpisodeRecord) {
        self.records.insert(record.instance_id.clone(), record);
    }
}

fn rewrite<'a>(path: &Path, records: impl Iterator<Item = &'a EpisodeRecord>) -> Result<(), RunError> {
    let io = |e: std::io::Error| RunError::Archive(format!("{}: {e}", path.display()));
    let tmp = path.with_extension("jsonl.tmp");
    let mut out = File::create(&tmp).map_err(io)?;
    for r in records {
        writeln!(out, "{}", serde_json::to_string(r).expect("record serializes")).map_err(io)?;
    }
    out.sync_all().map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)
}

pub(crate) struct RecordWriter {
    file: File,
    path: PathBuf,
}

impl RecordWriter {
    /// One line per record, flushed before returning.
    pub(crate) fn append(&mut self, record: &EpisodeRecord) -> Result<(), RunError> {
        let line = serde_json::to_string(record).expect("record serializes");
        writeln!(self.file, "{line}")
            .and_then(|_| self.file.flush())
            .map_err(|e| RunError::Archive(format!("{}: {e}", self.path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(i: usize) -> EpisodeRecord {
        EpisodeRecord {
            index: i,
            instance_id: format!("rating-D-{i}"),
            status: EpisodeStatus::Failed,
            prompt: "p".into(),
            trace: None,
            prediction: None,
            score: InstanceScore::Failed,
            calls: vec![],
            error: Some("x".into()),
        }
    }

    #[test]
    fn torn_tail_is_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let archive = Archive::open(dir.path()).unwrap();
        let mut w = archive.writer().unwrap();
        w.append(&record(1)).unwrap();
        w.append(&record(0)).unwrap();
        drop(w);
        let mut f = OpenOptions::new().append(true).open(dir.path().join(RECORDS_FILE)).unwrap();
        write!(f, "{{\"index\":2,\"instan").unwrap();
        drop(f);

        let archive = Archive::open(dir.path()).unwrap();
        let ids: Vec<usize> = archive.records().iter().map(|r| r.index).collect();
        assert_eq!(ids, [0, 1]);
        let text = std::fs::read_to_string(dir.path().join(RECORDS_FILE)).unwrap();
        assert_eq!(text.lines().count(), 2);
    }

    #[test]
    fn corrupt_middle_line_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let line = serde_json::to_string(&record(0)).unwrap();
        std::fs::write(dir.path().join(RECORDS_FILE), format!("garbage\n{line}\n")).unwrap();
        assert!(matches!(Archive::open(dir.path()), Err(RunError::Archive(_))));
    }
}
