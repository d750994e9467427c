#![allow(dead_code)]

pub mod checks;
pub mod oracles;
pub mod scenarios;

use std::path::{Path, PathBuf};

use recmind_core::fixtures;
use recmind_core::harness::{make_instances, InstanceConfig, TaskInstance, TaskKind};
use recmind_core::memory::MemoryStore;
use recmind_core::planning::Strategy;
use recmind_core::runner::{BackendConfig, RunConfig};

pub const DOMAIN: &str = "Beauty";

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// A file-backed store holding the synthetic Beauty dataset.
pub fn synthetic_store(dir: &Path) -> PathBuf {
    let path = dir.join("store.db");
    let store = MemoryStore::open(&path).unwrap();
    store
        .ingest_reader(fixtures::synthetic_jsonl(DOMAIN, 120, 40, 11).as_bytes(), DOMAIN)
        .unwrap();
    path
}

pub fn rating_instances(store: &Path, n: usize) -> Vec<TaskInstance> {
    let store = MemoryStore::open(store).unwrap();
    let config = InstanceConfig {
        seed: 5,
        limit: Some(n),
        ..Default::default()
    };
    make_instances(&store, TaskKind::RatingPrediction, DOMAIN, &config)
        .unwrap()
        .instances
}

pub fn rating_config(store: &Path, strategy: Strategy) -> RunConfig {
    RunConfig::new(
        store,
        DOMAIN,
        TaskKind::RatingPrediction,
        strategy,
        BackendConfig::Scripted {
            script: fixture("rating_script.toml"),
        },
    )
}
