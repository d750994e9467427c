//! Persistent completion cache.
//!
//! File format: one record per line, each record is a length-prefixed key
//! followed by a length-prefixed response, lengths in bytes:
//!
//! ```text
//! <key_len>:<key> <response_len>:<response>\n
//! ```
//!
//! Responses may contain newlines; the length prefix makes that safe. The
//! file is append-only and loaded in full on open. A truncated trailing
//! record (interrupted write) is ignored.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use super::GatewayError;

pub struct ResponseCache {
    inner: Mutex<CacheInner>,
}

struct CacheInner {
    entries: HashMap<String, String>,
    file: Option<(PathBuf, File)>,
}

impl ResponseCache {
    pub fn in_memory() -> Self {
        Self {
            inner: Mutex::new(CacheInner {
                entries: HashMap::new(),
                file: None,
            }),
        }
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self, GatewayError> {
        let path = path.as_ref().to_path_buf();
        let mut entries = HashMap::new();
        if path.exists() {
            let mut bytes = Vec::new();
            File::open(&path)
                .and_then(|mut f| f.read_to_end(&mut bytes))
                .map_err(|e| GatewayError::Cache(format!("{}: {e}", path.display())))?;
            for (key, response) in decode_records(&bytes) {
                entries.insert(key, response);
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| GatewayError::Cache(format!("{}: {e}", path.display())))?;
        Ok(Self {
            inner: Mutex::new(CacheInner {
                entries,
                file: Some((path, file)),
            }),
        })
    }

    pub fn get(&self, key: &str) -> Option<String> {
        self.inner.lock().unwrap().entries.get(key).cloned()
    }

    pub fn put(&self, key: String, response: String) -> Result<(), GatewayError> {
        let mut inner = self.inner.lock().unwrap();
        if inner.entries.get(&key) == Some(&response) {
            return Ok(());
        }
        if let Some((path, file)) = inner.file.as_mut() {
            file.write_all(&encode_record(&key, &response))
                .and_then(|_| file.flush())
                .map_err(|e| GatewayError::Cache(format!("{}: {e}", path.display())))?;
        }
        inner.entries.insert(key, response);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.inner.lock().unwrap().entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub(crate) fn encode_record(key: &str, response: &str) -> Vec<u8> {
    let mut out = Vec::with_capacity(key.len() + response.len() + 24);
    out.extend_from_slice(format!("{}:", key.len()).as_bytes());
    out.extend_from_slice(key.as_bytes());
    out.extend_from_slice(format!(" {}:", response.len()).as_bytes());
    out.extend_from_slice(response.as_bytes());
    out.push(b'\n');
    out
}

fn read_prefixed<'a>(bytes: &'a [u8], pos: &mut usize) -> Option<&'a [u8]> {
    let colon = bytes[*pos..].iter().position(|&b| b == b':')? + *pos;
    let len: usize = std::str::from_utf8(&bytes[*pos..colon]).ok()?.parse().ok()?;
    let start = colon + 1;
    let end = start.checked_add(len)?;
    if end > bytes.len() {
        return None;
    }
    *pos = end;
    Some(&bytes[start..end])
}

pub(crate) fn decode_records(bytes: &[u8]) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let mut pos = 0;
    while pos < bytes.len() {
        let Some(key) = read_prefixed(bytes, &mut pos) else { break };
        if bytes.get(pos) != Some(&b' ') {
            break;
        }
        pos += 1;
        let Some(response) = read_prefixed(bytes, &mut pos) else { break };
        if bytes.get(pos) != Some(&b'\n') {
            break;
        }
        pos += 1;
        match (std::str::from_utf8(key), std::str::from_utf8(response)) {
            (Ok(k), Ok(r)) => out.push((k.to_string(), r.to_string())),
            _ => break,
        }
    }
    if pos < bytes.len() {
        log::warn!("ignoring {} trailing bytes in cache file", bytes.len() - pos);
    }
    out
}
