//! Result tables: one row per method, one column group per dataset.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::harness::TaskKind;
use crate::metrics::MetricReport;

/// Metric keys whose values are stored in [0, 1] and shown ×100.
const SCALED: [&str; 4] = ["BLEU2", "ROUGE-1", "ROUGE-2", "ROUGE-L"];

/// Report columns for a task, as metric keys.
pub fn task_metrics(task: TaskKind) -> &'static [&'static str] {
    match task {
        TaskKind::RatingPrediction => &["RMSE", "MAE"],
        TaskKind::SequentialRec | TaskKind::DirectRec => &["HR@5", "NDCG@5", "HR@10", "NDCG@10"],
        TaskKind::ExplanationGen | TaskKind::ReviewSummarization => &["BLEU2", "ROUGE-1", "ROUGE-2", "ROUGE-L"],
    }
}

/// Header text for a metric key (`ROUGE-1` prints as `ROUGE1`).
pub fn column_label(metric: &str) -> String {
    match metric {
        "ROUGE-1" | "ROUGE-2" | "ROUGE-L" => metric.replace('-', ""),
        other => other.to_string(),
    }
}

/// Display value for a raw metric value.
pub fn display_value(metric: &str, value: f64) -> f64 {
    if SCALED.contains(&metric) {
        value * 100.0
    } else {
        value
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: String,
    /// dataset -> metric -> display value.
    pub cells: BTreeMap<String, BTreeMap<String, f64>>,
}

/// Cells hold display values: text metrics are already ×100.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportTable {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    pub datasets: Vec<String>,
    pub metrics: Vec<String>,
    pub rows: Vec<ReportRow>,
}

impl ReportTable {
    pub fn new(datasets: Vec<String>, metrics: Vec<String>) -> Self {
        Self {
            title: None,
            datasets,
            metrics,
            rows: Vec::new(),
        }
    }

    pub fn for_task(task: TaskKind, datasets: Vec<String>) -> Self {
        Self::new(datasets, task_metrics(task).iter().map(|m| m.to_string()).collect())
    }

    pub fn with_title(mut self, title: impl Into<String>) -> Self {
        self.title = Some(title.into());
        self
    }

    /// Sets one display value. Unknown methods append a row; unknown
    /// datasets or metrics append a column.
    pub fn set(&mut self, method: &str, dataset: &str, metric: &str, value: f64) {
        if !self.datasets.iter().any(|d| d == dataset) {
            self.datasets.push(dataset.to_string());
        }
        if !self.metrics.iter().any(|m| m == metric) {
            self.metrics.push(metric.to_string());
        }
        let row = match self.rows.iter().position(|r| r.method == method) {
            Some(i) => &mut self.rows[i],
            None => {
                self.rows.push(ReportRow {
                    method: method.to_string(),
                    cells: BTreeMap::new(),
                });
                self.rows.last_mut().expect("just pushed")
            }
        };
        row.cells
            .entry(dataset.to_string())
            .or_default()
            .insert(metric.to_string(), value);
    }

    /// Adds every metric of `report` under `method` and `dataset`, scaling
    /// text metrics.
    pub fn add_report(&mut self, method: &str, dataset: &str, report: &MetricReport) {
        for metric in task_metrics(report.task) {
            if let Some(v) = report.get(metric) {
                self.set(method, dataset, metric, display_value(metric, v));
            }
        }
    }

    pub fn cell(&self, method: &str, dataset: &str, metric: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.method == method)?
            .cells
            .get(dataset)?
            .get(metric)
            .copied()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Fixed-width text. Missing cells print as `-`.
    pub fn render_text(&self) -> String {
        let cell_text = |row: &ReportRow, d: &str, m: &str| {
            row.cells
                .get(d)
                .and_then(|c| c.get(m))
                .map_or_else(|| "-".to_string(), |v| format!("{v:.4}"))
        };
        let method_w = self
            .rows
            .iter()
            .map(|r| r.method.chars().count())
            .chain(std::iter::once("Method".len()))
            .max()
            .unwrap_or(6);
        let col_w = self
            .metrics
            .iter()
            .map(|m| column_label(m).len())
            .chain(self.rows.iter().flat_map(|r| {
                self.datasets
                    .iter()
                    .flat_map(move |d| self.metrics.iter().map(move |m| cell_text(r, d, m).len()))
            }))
            .max()
            .unwrap_or(6);
        let group_w = self.metrics.len() * (col_w + 1) - 1;

        let mut lines = Vec::new();
        if let Some(title) = &self.title {
            lines.push(title.clone());
        }
        let mut top = format!("{:<method_w$}", "");
        let mut sub = format!("{:<method_w$}", "Method");
        for d in &self.datasets {
            top.push_str(&format!(" | {d:<group_w$}"));
            let labels: Vec<String> = self.metrics.iter().map(|m| format!("{:>col_w$}", column_label(m))).collect();
            sub.push_str(&format!(" | {}", labels.join(" ")));
        }
        lines.push(top.trim_end().to_string());
        lines.push(sub);
        lines.push("-".repeat(lines.last().map_or(0, |l| l.chars().count())));
        for row in &self.rows {
            let mut line = format!("{:<method_w$}", row.method);
            for d in &self.datasets {
                let values: Vec<String> = self
                    .metrics
                    .iter()
                    .map(|m| format!("{:>col_w$}", cell_text(row, d, m)))
                    .collect();
                line.push_str(&format!(" | {}", values.join(" ")));
            }
            lines.push(line);
        }
        let mut out = lines.join("\n");
        out.push('\n');
        out
    }
}
