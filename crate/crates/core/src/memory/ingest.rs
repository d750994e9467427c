//! Newline-delimited JSON ingestion.
//!
//! Each line is one record. Three field mappings are recognized:
//!
//! | shape            | item record                                  | interaction record                                    |
//! |------------------|----------------------------------------------|-------------------------------------------------------|
//! | native           | `type="item"`, `item_id`, `title`, ...       | `type="interaction"`, `user_id`, `item_id`, `rating`  |
//! | Amazon Reviews   | `asin`, `title`, `brand`, `price`, `categories`/`category`, `description` | `reviewerID`, `asin`, `overall`, `reviewText`, `summary`, `unixReviewTime` |
//! | Yelp             | `business_id`, `name`, `categories`          | `user_id`, `business_id`, `stars`, `text`, `date`     |
//!
//! Items are inserted before interactions regardless of line order. A
//! missing timestamp defaults to the record's line index.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rusqlite::params;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{normalize_title, InteractionRecord, ItemRecord, MemoryStore, StoreError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RejectReason {
    MalformedJson,
    UnrecognizedRecord,
    MissingField,
    EmptyTitle,
    OutOfRangeRating,
    UnknownItem,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestStats {
    /// Item rows accepted (already-present rows included).
    pub items: usize,
    /// Interaction rows accepted (already-present rows included).
    pub interactions: usize,
    pub rejected: usize,
    pub rejected_by_reason: BTreeMap<RejectReason, usize>,
    pub new_items: usize,
    pub new_interactions: usize,
}

impl IngestStats {
    pub fn total_rows(&self) -> usize {
        self.items + self.interactions + self.rejected
    }

    pub fn new_rows(&self) -> usize {
        self.new_items + self.new_interactions
    }

    fn reject(&mut self, reason: RejectReason) {
        self.rejected += 1;
        *self.rejected_by_reason.entry(reason).or_insert(0) += 1;
    }
}

enum Parsed {
    Item(ItemRecord),
    Interaction(InteractionRecord),
}

impl MemoryStore {
    pub fn ingest(&self, dataset_file: impl AsRef<Path>, domain: &str) -> Result<IngestStats, StoreError> {
        let path = dataset_file.as_ref();
        let file = File::open(path).map_err(|source| StoreError::UnreadableFile {
            path: path.display().to_string(),
            source,
        })?;
        self.ingest_reader(BufReader::new(file), domain)
    }

    pub fn ingest_reader(&self, reader: impl BufRead, domain: &str) -> Result<IngestStats, StoreError> {
        let mut stats = IngestStats::default();
        let mut items = Vec::new();
        let mut interactions = Vec::new();
        for (index, line) in reader.lines().enumerate() {
            let line = line.map_err(|source| StoreError::UnreadableFile {
                path: "<input>".into(),
                source,
            })?;
            if line.trim().is_empty() {
                continue;
            }
            match parse_line(&line, index as i64) {
                Ok(Parsed::Item(item)) => items.push(item),
                Ok(Parsed::Interaction(ix)) => interactions.push(ix),
                Err(reason) => stats.reject(reason),
            }
        }

        self.with_conn(|conn| -> Result<(), StoreError> {
            let tx = conn.transaction()?;
            {
                let mut insert_item = tx.prepare(
                    "INSERT OR IGNORE INTO items
                     (item_id, domain, title, title_folded, brand, price, category, description)
                     VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8)",
                )?;
                for item in &items {
                    stats.items += 1;
                    stats.new_items += insert_item.execute(params![
                        item.item_id,
                        domain,
                        item.title,
                        normalize_title(&item.title),
                        item.brand,
                        item.price,
                        item.category,
                        item.description
                    ])?;
                }

                let mut titles: HashMap<String, String> = HashMap::new();
                let mut lookup = tx.prepare("SELECT title FROM items WHERE item_id = ?1")?;
                let mut insert_ix = tx.prepare(
                    "INSERT OR IGNORE INTO interactions
                     (user_id, item_id, item_title, domain, rating, review_text, review_title, timestamp)
                     VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8)",
                )?;
                for ix in &interactions {
                    let title = match titles.get(&ix.item_id) {
                        Some(t) => Some(t.clone()),
                        None => {
                            let found: Option<String> = lookup
                                .query_row(params![ix.item_id], |r| r.get(0))
                                .ok();
                            if let Some(t) = &found {
                                titles.insert(ix.item_id.clone(), t.clone());
                            }
                            found
                        }
                    };
                    let Some(title) = title else {
                        stats.reject(RejectReason::UnknownItem);
                        continue;
                    };
                    stats.interactions += 1;
                    stats.new_interactions += insert_ix.execute(params![
                        ix.user_id,
                        ix.item_id,
                        title,
                        domain,
                        ix.rating,
                        ix.review_text,
                        ix.review_title,
                        ix.timestamp
                    ])?;
                }
            }
            tx.commit()?;
            Ok(())
        })?;
        Ok(stats)
    }
}

fn parse_line(line: &str, index: i64) -> Result<Parsed, RejectReason> {
    let value: Value = serde_json::from_str(line).map_err(|_| RejectReason::MalformedJson)?;
    let obj = value.as_object().ok_or(RejectReason::MalformedJson)?;
    if let Some(kind) = obj.get("type").and_then(Value::as_str) {
        return match kind {
            "item" => item(obj, "item_id", "title", "brand", "price", "category", "description"),
            "interaction" => interaction(
                obj, "user_id", "item_id", "rating", "review_text", "review_title", "timestamp", index,
            ),
            _ => Err(RejectReason::UnrecognizedRecord),
        };
    }
    if obj.contains_key("reviewerID") {
        return interaction(
            obj, "reviewerID", "asin", "overall", "reviewText", "summary", "unixReviewTime", index,
        );
    }
    if obj.contains_key("asin") {
        let category_key = if obj.contains_key("categories") { "categories" } else { "category" };
        return item(obj, "asin", "title", "brand", "price", category_key, "description");
    }
    if obj.contains_key("business_id") && obj.contains_key("user_id") {
        return interaction(obj, "user_id", "business_id", "stars", "text", "title", "date", index);
    }
    if obj.contains_key("business_id") {
        return item(obj, "business_id", "name", "brand", "price", "categories", "description");
    }
    Err(RejectReason::UnrecognizedRecord)
}

fn text_field(obj: &Map<String, Value>, key: &str) -> Option<String> {
    match obj.get(key)? {
        Value::String(s) if !s.trim().is_empty() => Some(s.trim().to_string()),
        Value::Number(n) => Some(n.to_string()),
        // Amazon descriptions are sometimes lists of paragraphs.
        Value::Array(parts) => {
            let joined: Vec<String> = parts
                .iter()
                .filter_map(|p| p.as_str().map(str::trim).filter(|s| !s.is_empty()).map(str::to_string))
                .collect();
            (!joined.is_empty()).then(|| joined.join(" "))
        }
        _ => None,
    }
}

fn category_field(obj: &Map<String, Value>, key: &str) -> Option<String> {
    match obj.get(key)? {
        // Amazon `categories`: list of category paths; keep the first path.
        Value::Array(paths) => match paths.first()? {
            Value::Array(path) => {
                let parts: Vec<&str> = path.iter().filter_map(Value::as_str).collect();
                (!parts.is_empty()).then(|| parts.join(" > "))
            }
            Value::String(_) => {
                let parts: Vec<&str> = paths.iter().filter_map(Value::as_str).collect();
                Some(parts.join(" > "))
            }
            _ => None,
        },
        Value::String(s) if !s.trim().is_empty() => Some(s.trim().to_string()),
        _ => None,
    }
}

fn price_field(obj: &Map<String, Value>, key: &str) -> Option<f64> {
    match obj.get(key)? {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.trim().trim_start_matches('$').replace(',', "").parse().ok(),
        _ => None,
    }
}

fn item(
    obj: &Map<String, Value>,
    id_key: &str,
    title_key: &str,
    brand_key: &str,
    price_key: &str,
    category_key: &str,
    description_key: &str,
) -> Result<Parsed, RejectReason> {
    let item_id = text_field(obj, id_key).ok_or(RejectReason::MissingField)?;
    let title = text_field(obj, title_key).ok_or(RejectReason::EmptyTitle)?;
    Ok(Parsed::Item(ItemRecord {
        item_id,
        title,
        brand: text_field(obj, brand_key),
        price: price_field(obj, price_key),
        category: category_field(obj, category_key),
        description: text_field(obj, description_key),
    }))
}

#[allow(clippy::too_many_arguments)]
fn interaction(
    obj: &Map<String, Value>,
    user_key: &str,
    item_key: &str,
    rating_key: &str,
    text_key: &str,
    title_key: &str,
    time_key: &str,
    index: i64,
) -> Result<Parsed, RejectReason> {
    let user_id = text_field(obj, user_key).ok_or(RejectReason::MissingField)?;
    let item_id = text_field(obj, item_key).ok_or(RejectReason::MissingField)?;
    let rating = match obj.get(rating_key) {
        Some(Value::Number(n)) => n.as_f64(),
        Some(Value::String(s)) => s.trim().parse().ok(),
        _ => None,
    }
    .ok_or(RejectReason::MissingField)?;
    if !(1.0..=5.0).contains(&rating) {
        return Err(RejectReason::OutOfRangeRating);
    }
    let timestamp = match obj.get(time_key) {
        Some(Value::Number(n)) => n.as_i64().unwrap_or(index),
        Some(Value::String(s)) => parse_date(s).unwrap_or(index),
        _ => index,
    };
    Ok(Parsed::Interaction(InteractionRecord {
        user_id,
        item_id,
        rating,
        review_text: text_field(obj, text_key),
        review_title: text_field(obj, title_key),
        timestamp,
    }))
}

fn parse_date(s: &str) -> Option<i64> {
    use chrono::{NaiveDate, NaiveDateTime};
    let s = s.trim();
    if let Ok(n) = s.parse::<i64>() {
        return Some(n);
    }
    NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S")
        .ok()
        .or_else(|| NaiveDate::parse_from_str(s, "%Y-%m-%d").ok()?.and_hms_opt(0, 0, 0))
        .map(|dt| dt.and_utc().timestamp())
}
