//! Personalized memory and in-domain world knowledge.
//!
//! Two tables in an embedded SQLite database: `items` (product metadata)
//! and `interactions` (user ratings and reviews). Ingestion is the only
//! writer; everything tool-facing goes through [`MemoryStore::execute_readonly`].

mod ingest;

use std::fmt;
use std::path::Path;
use std::sync::Mutex;

use rusqlite::types::ValueRef;
use rusqlite::{params, Connection, OpenFlags};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use ingest::{IngestStats, RejectReason};

/// Hard cap on rows returned by a tool query.
pub const ROW_LIMIT: usize = 1000;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("cannot read {path}: {source}")]
    UnreadableFile {
        path: String,
        source: std::io::Error,
    },
    #[error("only a single SELECT statement is allowed")]
    NotReadOnly,
    #[error("query error: {0}")]
    QuerySyntaxError(String),
    #[error("sqlite: {0}")]
    Sqlite(#[from] rusqlite::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemRecord {
    pub item_id: String,
    pub title: String,
    pub brand: Option<String>,
    pub price: Option<f64>,
    pub category: Option<String>,
    pub description: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionRecord {
    pub user_id: String,
    pub item_id: String,
    pub rating: f64,
    pub review_text: Option<String>,
    pub review_title: Option<String>,
    pub timestamp: i64,
}

/// Human-readable table and column listing used as `{database_info}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaDescription {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CellValue {
    Null,
    Integer(i64),
    Real(f64),
    Text(String),
}

impl fmt::Display for CellValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CellValue::Null => f.write_str("NULL"),
            CellValue::Integer(i) => write!(f, "{i}"),
            CellValue::Real(r) => write!(f, "{r}"),
            CellValue::Text(s) => f.write_str(s),
        }
    }
}

impl CellValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            CellValue::Integer(i) => Some(*i as f64),
            CellValue::Real(r) => Some(*r),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowSet {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<CellValue>>,
    /// True when more than [`ROW_LIMIT`] rows matched.
    pub truncated: bool,
}

impl RowSet {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// First cell of the first row.
    pub fn scalar(&self) -> Option<&CellValue> {
        self.rows.first().and_then(|r| r.first())
    }
}

/// Empty result renders as the empty string; otherwise a `col | col`
/// header followed by one line per row.
impl fmt::Display for RowSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.rows.is_empty() {
            return Ok(());
        }
        write!(f, "{}", self.columns.join(" | "))?;
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
            write!(f, "\n{}", cells.join(" | "))?;
        }
        if self.truncated {
            write!(f, "\n(truncated to {ROW_LIMIT} rows)")?;
        }
        Ok(())
    }
}

const SCHEMA: &str = "
CREATE TABLE IF NOT EXISTS items (
    item_id TEXT PRIMARY KEY NOT NULL,
    domain TEXT NOT NULL,
    title TEXT NOT NULL,
    title_folded TEXT NOT NULL,
    brand TEXT,
    price REAL,
    category TEXT,
    description TEXT
);
CREATE INDEX IF NOT EXISTS items_title_folded ON items(title_folded);
CREATE TABLE IF NOT EXISTS interactions (
    user_id TEXT NOT NULL,
    item_id TEXT NOT NULL REFERENCES items(item_id),
    item_title TEXT NOT NULL,
    domain TEXT NOT NULL,
    rating REAL NOT NULL CHECK (rating >= 1 AND rating <= 5),
    review_text TEXT,
    review_title TEXT,
    timestamp INTEGER NOT NULL,
    UNIQUE (user_id, item_id, timestamp)
);
CREATE INDEX IF NOT EXISTS interactions_user ON interactions(user_id, timestamp);
CREATE INDEX IF NOT EXISTS interactions_item ON interactions(item_id);
CREATE INDEX IF NOT EXISTS interactions_title ON interactions(item_title COLLATE NOCASE);
";

const TABLE_DOCS: [(&str, &str); 2] = [
    ("items", "product metadata, one row per item"),
    ("interactions", "user interaction history: ratings (1-5) and reviews"),
];

pub struct MemoryStore {
    conn: Mutex<Connection>,
}

impl MemoryStore {
    pub fn in_memory() -> Result<Self, StoreError> {
        Self::init(Connection::open_in_memory()?)
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let flags = OpenFlags::SQLITE_OPEN_READ_WRITE | OpenFlags::SQLITE_OPEN_CREATE;
        Self::init(Connection::open_with_flags(path, flags)?)
    }

    fn init(conn: Connection) -> Result<Self, StoreError> {
        conn.execute_batch("PRAGMA foreign_keys = ON;")?;
        conn.execute_batch(SCHEMA)?;
        Ok(Self {
            conn: Mutex::new(conn),
        })
    }

    /// Runs one read-only SELECT and returns at most [`ROW_LIMIT`] rows.
    pub fn execute_readonly(&self, query: &str) -> Result<RowSet, StoreError> {
        let trimmed = query.trim();
        if !starts_with_select(trimmed) {
            return Err(StoreError::NotReadOnly);
        }
        let conn = self.conn.lock().unwrap();
        conn.pragma_update(None, "query_only", true)?;
        let result = run_select(&conn, trimmed);
        conn.pragma_update(None, "query_only", false)?;
        result
    }

    pub fn schema_description(&self) -> SchemaDescription {
        let conn = self.conn.lock().unwrap();
        let mut text = String::from("The database has two tables.\n");
        for (table, doc) in TABLE_DOCS {
            let columns = table_columns(&conn, table);
            text.push_str(&format!("\nTable {table} ({doc}):\n"));
            for (name, ty) in &columns {
                text.push_str(&format!("  - {name} {ty}\n"));
            }
            let example = conn
                .prepare(&format!("SELECT * FROM {table} ORDER BY rowid LIMIT 1"))
                .and_then(|mut stmt| {
                    let n = stmt.column_count();
                    stmt.query_row([], |row| {
                        (0..n).map(|i| Ok(cell(row.get_ref(i)?))).collect::<Result<Vec<_>, _>>()
                    })
                });
            match example {
                Ok(cells) => {
                    let rendered: Vec<String> = columns
                        .iter()
                        .zip(&cells)
                        .map(|((name, _), value)| format!("{name}={}", clip(&value.to_string(), 60)))
                        .collect();
                    text.push_str(&format!("  Example row: {}\n", rendered.join(", ")));
                }
                Err(_) => text.push_str("  The table is empty.\n"),
            }
        }
        SchemaDescription { text }
    }

    /// Content hash over every row of both tables.
    pub fn checksum(&self) -> String {
        let conn = self.conn.lock().unwrap();
        let mut hasher = Sha256::new();
        for (table, order) in [("items", "item_id"), ("interactions", "rowid")] {
            let mut stmt = conn
                .prepare(&format!("SELECT * FROM {table} ORDER BY {order}"))
                .expect("static query");
            let n = stmt.column_count();
            let mut rows = stmt.query([]).expect("static query");
            while let Some(row) = rows.next().expect("row") {
                for i in 0..n {
                    let value = cell(row.get_ref(i).expect("column"));
                    hasher.update(format!("{value:?}").as_bytes());
                    hasher.update([0x1f]);
                }
                hasher.update([0x1e]);
            }
        }
        hex::encode(hasher.finalize())
    }

    pub fn counts(&self) -> (usize, usize) {
        let conn = self.conn.lock().unwrap();
        let count = |t: &str| -> usize {
            conn.query_row(&format!("SELECT COUNT(*) FROM {t}"), [], |r| r.get::<_, i64>(0))
                .unwrap_or(0) as usize
        };
        (count("items"), count("interactions"))
    }

    pub fn domains(&self) -> Result<Vec<String>, StoreError> {
        let conn = self.conn.lock().unwrap();
        let mut stmt = conn.prepare("SELECT DISTINCT domain FROM items ORDER BY domain")?;
        let rows = stmt.query_map([], |r| r.get(0))?;
        Ok(rows.collect::<Result<_, _>>()?)
    }

    pub fn domain_items(&self, domain: &str) -> Result<Vec<ItemRecord>, StoreError> {
        let conn = self.conn.lock().unwrap();
        let mut stmt = conn.prepare(
            "SELECT item_id, title, brand, price, category, description
             FROM items WHERE domain = ?1 ORDER BY item_id",
        )?;
        let rows = stmt.query_map(params![domain], item_from_row)?;
        Ok(rows.collect::<Result<_, _>>()?)
    }

    pub fn item(&self, item_id: &str) -> Result<Option<ItemRecord>, StoreError> {
        let conn = self.conn.lock().unwrap();
        let mut stmt = conn.prepare(
            "SELECT item_id, title, brand, price, category, description FROM items WHERE item_id = ?1",
        )?;
        let mut rows = stmt.query_map(params![item_id], item_from_row)?;
        Ok(rows.next().transpose()?)
    }

    /// All interactions in a domain, grouped by user and in chronological
    /// order within each user (ties broken by insertion order).
    pub fn domain_interactions(&self, domain: &str) -> Result<Vec<InteractionRecord>, StoreError> {
        let conn = self.conn.lock().unwrap();
        let mut stmt = conn.prepare(
            "SELECT user_id, item_id, rating, review_text, review_title, timestamp
             FROM interactions WHERE domain = ?1 ORDER BY user_id, timestamp, rowid",
        )?;
        let rows = stmt.query_map(params![domain], |r| {
            Ok(InteractionRecord {
                user_id: r.get(0)?,
                item_id: r.get(1)?,
                rating: r.get(2)?,
                review_text: r.get(3)?,
                review_title: r.get(4)?,
                timestamp: r.get(5)?,
            })
        })?;
        Ok(rows.collect::<Result<_, _>>()?)
    }

    pub(crate) fn with_conn<T>(&self, f: impl FnOnce(&mut Connection) -> T) -> T {
        let mut conn = self.conn.lock().unwrap();
        f(&mut conn)
    }
}

fn item_from_row(r: &rusqlite::Row<'_>) -> rusqlite::Result<ItemRecord> {
    Ok(ItemRecord {
        item_id: r.get(0)?,
        title: r.get(1)?,
        brand: r.get(2)?,
        price: r.get(3)?,
        category: r.get(4)?,
        description: r.get(5)?,
    })
}

fn starts_with_select(query: &str) -> bool {
    query
        .get(..6)
        .is_some_and(|head| head.eq_ignore_ascii_case("select"))
        && query[6..].chars().next().is_none_or(|c| !c.is_alphanumeric() && c != '_')
}

fn run_select(conn: &Connection, query: &str) -> Result<RowSet, StoreError> {
    let mut stmt = conn.prepare(query).map_err(|e| match e {
        rusqlite::Error::MultipleStatement => StoreError::NotReadOnly,
        other => StoreError::QuerySyntaxError(other.to_string()),
    })?;
    if !stmt.readonly() {
        return Err(StoreError::NotReadOnly);
    }
    let columns: Vec<String> = stmt.column_names().iter().map(|s| s.to_string()).collect();
    let n = columns.len();
    let mut rows_out = Vec::new();
    let mut truncated = false;
    let mut rows = stmt
        .query([])
        .map_err(|e| StoreError::QuerySyntaxError(e.to_string()))?;
    while let Some(row) = rows.next().map_err(|e| StoreError::QuerySyntaxError(e.to_string()))? {
        if rows_out.len() == ROW_LIMIT {
            truncated = true;
            break;
        }
        let cells = (0..n)
            .map(|i| row.get_ref(i).map(cell))
            .collect::<Result<Vec<_>, _>>()?;
        rows_out.push(cells);
    }
    Ok(RowSet {
        columns,
        rows: rows_out,
        truncated,
    })
}

fn cell(v: ValueRef<'_>) -> CellValue {
    match v {
        ValueRef::Null => CellValue::Null,
        ValueRef::Integer(i) => CellValue::Integer(i),
        ValueRef::Real(r) => CellValue::Real(r),
        ValueRef::Text(t) => CellValue::Text(String::from_utf8_lossy(t).into_owned()),
        ValueRef::Blob(b) => CellValue::Text(format!("<{} bytes>", b.len())),
    }
}

fn table_columns(conn: &Connection, table: &str) -> Vec<(String, String)> {
    let mut stmt = conn
        .prepare(&format!("PRAGMA table_info({table})"))
        .expect("static pragma");
    stmt.query_map([], |r| Ok((r.get::<_, String>(1)?, r.get::<_, String>(2)?)))
        .expect("static pragma")
        .collect::<Result<_, _>>()
        .unwrap_or_default()
}

fn clip(s: &str, max: usize) -> String {
    if s.chars().count() <= max {
        s.to_string()
    } else {
        let head: String = s.chars().take(max).collect();
        format!("{head}...")
    }
}

/// Case-folds, collapses whitespace and strips surrounding punctuation.
pub fn normalize_title(title: &str) -> String {
    let folded = title.to_lowercase();
    let collapsed = folded.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed
        .trim_matches(|c: char| !c.is_alphanumeric())
        .to_string()
}
