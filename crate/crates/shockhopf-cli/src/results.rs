use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::Stage;

/// Numeric table, one CSV file per table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len(), "row width of table {}", self.name);
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub label: String,
    pub points: Vec<[f64; 2]>,
    /// Draw markers instead of a polyline.
    pub markers: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinePlot {
    pub name: String,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
}

impl LinePlot {
    pub fn new(name: &str, title: &str, x_label: &str, y_label: &str, log_x: bool, log_y: bool) -> Self {
        Self {
            name: name.into(),
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            log_x,
            log_y,
            series: Vec::new(),
        }
    }

    pub fn line(mut self, label: &str, x: &[f64], y: &[f64]) -> Self {
        self.series.push(Series { label: label.into(), points: x.iter().zip(y).map(|(a, b)| [*a, *b]).collect(), markers: false });
        self
    }

    pub fn dots(mut self, label: &str, x: &[f64], y: &[f64]) -> Self {
        self.series.push(Series { label: label.into(), points: x.iter().zip(y).map(|(a, b)| [*a, *b]).collect(), markers: true });
        self
    }
}

/// Values on an `x × y` lattice, stored row by row in `y`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub name: String,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Plot {
    Lines(LinePlot),
    Heatmap(Heatmap),
}

impl Plot {
    pub fn name(&self) -> &str {
        match self {
            Plot::Lines(p) => &p.name,
            Plot::Heatmap(h) => &h.name,
        }
    }
}

/// A structured JSON artifact, such as orbit snapshots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub name: String,
    pub body: serde_json::Value,
}

/// Everything a stage measured. Timings are wall-clock seconds and are kept
/// out of the CSV files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageResult {
    pub stage: Stage,
    pub tables: Vec<Table>,
    pub constants: BTreeMap<String, f64>,
    pub plots: Vec<Plot>,
    pub documents: Vec<Document>,
    pub timings: BTreeMap<String, f64>,
}

impl StageResult {
    pub fn new(stage: Stage) -> Self {
        Self {
            stage,
            tables: Vec::new(),
            constants: BTreeMap::new(),
            plots: Vec::new(),
            documents: Vec::new(),
            timings: BTreeMap::new(),
        }
    }

    pub fn set(&mut self, name: &str, value: f64) {
        self.constants.insert(name.into(), value);
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.constants.get(name).copied()
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn time(&mut self, name: &str, seconds: f64) {
        self.timings.insert(name.into(), seconds);
    }

    /// JSON cannot carry NaN or infinities; such results are not cached.
    pub fn is_finite(&self) -> bool {
        self.constants.values().all(|v| v.is_finite()) && self.tables.iter().all(|t| t.rows.iter().flatten().all(|v| v.is_finite()))
    }
}
