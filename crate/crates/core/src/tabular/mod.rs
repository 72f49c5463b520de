//! Tabular data: schema, rows with missing cells, labels, CSV I/O,
//! train-fitted encoding, seeded splitting and synthetic generators.

mod csv_io;
mod encode;
mod split;
mod synthetic;

pub use csv_io::{load_csv, read_csv, write_csv, MISSING_MARKERS};
pub use encode::{preprocess, ColumnEncoding, EncodedMatrix, Encoder};
pub use split::{split, split_with_remainder, subsample, SplitSpec};
pub use synthetic::{make_synthetic, SyntheticSpec};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TabularError {
    #[error("cannot read {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("dataset has no data rows")]
    EmptyDataset,
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("column `{0}` has no observed value in the training split")]
    AllMissingColumn(String),
    #[error("need {needed} rows, only {available} available")]
    InsufficientRows { needed: usize, available: usize },
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, TabularError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

/// Name, kind and (for categorical columns) the ordered distinct levels.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub kind: ColumnKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
}

impl ColumnSchema {
    pub fn numeric(name: impl Into<String>) -> Self {
        Self { name: name.into(), kind: ColumnKind::Numeric, categories: Vec::new() }
    }

    pub fn categorical(name: impl Into<String>, categories: Vec<String>) -> Result<Self> {
        let col = Self { name: name.into(), kind: ColumnKind::Categorical, categories };
        col.validate()?;
        Ok(col)
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            ColumnKind::Numeric if !self.categories.is_empty() => Err(TabularError::InvalidDataset(
                format!("numeric column `{}` carries categories", self.name),
            )),
            ColumnKind::Categorical => {
                if self.categories.is_empty() {
                    return Err(TabularError::InvalidDataset(format!(
                        "categorical column `{}` has no levels",
                        self.name
                    )));
                }
                let mut seen = std::collections::HashSet::new();
                for c in &self.categories {
                    if !seen.insert(c) {
                        return Err(TabularError::InvalidDataset(format!(
                            "categorical column `{}` repeats level `{c}`",
                            self.name
                        )));
                    }
                }
                Ok(())
            }
            ColumnKind::Numeric => Ok(()),
        }
    }

    pub fn is_numeric(&self) -> bool {
        self.kind == ColumnKind::Numeric
    }

    /// Same name and kind. Category lists may differ between files.
    pub fn compatible(&self, other: &ColumnSchema) -> bool {
        self.name == other.name && self.kind == other.kind
    }
}

/// One cell. Categorical cells index into their column's `categories`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Cell {
    Missing,
    Num(f64),
    Cat(u32),
}

impl Cell {
    pub fn as_num(&self) -> Option<f64> {
        match *self {
            Cell::Num(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }
}

/// An `n x d` grid of cells with an optional label vector.
///
/// `row_ids` records provenance: ids assigned at construction survive
/// splitting, subsampling and row-preserving shifts, so any derived dataset
/// can be traced back to the rows it came from.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    schema: Vec<ColumnSchema>,
    rows: Vec<Vec<Cell>>,
    labels: Option<Vec<usize>>,
    class_names: Option<Vec<String>>,
    label_name: Option<String>,
    row_ids: Vec<u64>,
}

impl Dataset {
    pub fn new(
        schema: Vec<ColumnSchema>,
        rows: Vec<Vec<Cell>>,
        labels: Option<Vec<usize>>,
        class_names: Option<Vec<String>>,
    ) -> Result<Self> {
        let ids = (0..rows.len() as u64).collect();
        Self::with_ids(schema, rows, labels, class_names, ids)
    }

    pub fn with_ids(
        schema: Vec<ColumnSchema>,
        rows: Vec<Vec<Cell>>,
        labels: Option<Vec<usize>>,
        class_names: Option<Vec<String>>,
        row_ids: Vec<u64>,
    ) -> Result<Self> {
        let ds = Self { schema, rows, labels, class_names, label_name: None, row_ids };
        ds.validate()?;
        Ok(ds)
    }

    /// All-numeric dataset from a dense grid.
    pub fn from_numeric(
        names: &[String],
        values: &[Vec<f64>],
        labels: Option<Vec<usize>>,
    ) -> Result<Self> {
        let schema = names.iter().map(ColumnSchema::numeric).collect();
        let rows = values
            .iter()
            .map(|r| r.iter().map(|&v| if v.is_nan() { Cell::Missing } else { Cell::Num(v) }).collect())
            .collect();
        let class_names = labels.as_ref().map(|l| {
            let k = l.iter().max().map_or(0, |m| m + 1);
            (0..k).map(|c| c.to_string()).collect()
        });
        Self::new(schema, rows, labels, class_names)
    }

    fn validate(&self) -> Result<()> {
        for col in &self.schema {
            col.validate()?;
        }
        let d = self.schema.len();
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != d {
                return Err(TabularError::InvalidDataset(format!(
                    "row {i} has {} cells, schema has {d}",
                    row.len()
                )));
            }
            for (cell, col) in row.iter().zip(&self.schema) {
                let ok = match (cell, col.kind) {
                    (Cell::Missing, _) => true,
                    (Cell::Num(v), ColumnKind::Numeric) => v.is_finite(),
                    (Cell::Cat(c), ColumnKind::Categorical) => (*c as usize) < col.categories.len(),
                    _ => false,
                };
                if !ok {
                    return Err(TabularError::InvalidDataset(format!(
                        "row {i}: cell {cell:?} does not match column `{}`",
                        col.name
                    )));
                }
            }
        }
        if self.row_ids.len() != self.rows.len() {
            return Err(TabularError::InvalidDataset("row id count differs from row count".into()));
        }
        if let Some(labels) = &self.labels {
            if labels.len() != self.rows.len() {
                return Err(TabularError::InvalidDataset(format!(
                    "{} labels for {} rows",
                    labels.len(),
                    self.rows.len()
                )));
            }
            let k = self.class_count();
            if let Some(bad) = labels.iter().find(|&&y| y >= k) {
                return Err(TabularError::InvalidDataset(format!("label {bad} >= class count {k}")));
            }
        }
        Ok(())
    }

    pub fn schema(&self) -> &[ColumnSchema] {
        &self.schema
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[Cell] {
        &self.rows[i]
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn class_names(&self) -> Option<&[String]> {
        self.class_names.as_deref()
    }

    pub fn label_name(&self) -> Option<&str> {
        self.label_name.as_deref()
    }

    pub fn set_label_name(&mut self, name: Option<String>) {
        self.label_name = name;
    }

    pub fn row_ids(&self) -> &[u64] {
        &self.row_ids
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.schema.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Number of classes `k` (0 when unlabeled).
    pub fn class_count(&self) -> usize {
        match (&self.class_names, &self.labels) {
            (Some(names), _) => names.len(),
            (None, Some(l)) => l.iter().max().map_or(0, |m| m + 1),
            (None, None) => 0,
        }
    }

    /// Per-class row counts, length `k`.
    pub fn class_counts(&self) -> Option<Vec<usize>> {
        let labels = self.labels.as_ref()?;
        let mut counts = vec![0; self.class_count()];
        for &y in labels {
            counts[y] += 1;
        }
        Some(counts)
    }

    pub fn numeric_columns(&self) -> Vec<usize> {
        (0..self.schema.len()).filter(|&j| self.schema[j].is_numeric()).collect()
    }

    pub fn compatible(&self, other: &Dataset) -> bool {
        self.schema.len() == other.schema.len()
            && self.schema.iter().zip(&other.schema).all(|(a, b)| a.compatible(b))
    }

    /// Rows at `indices`, in that order; schema, class names and ids carried over.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: self.labels.as_ref().map(|l| indices.iter().map(|&i| l[i]).collect()),
            class_names: self.class_names.clone(),
            label_name: self.label_name.clone(),
            row_ids: indices.iter().map(|&i| self.row_ids[i]).collect(),
        }
    }

    /// New dataset with the same schema and class metadata but different rows.
    pub fn with_rows(
        &self,
        rows: Vec<Vec<Cell>>,
        labels: Option<Vec<usize>>,
        row_ids: Vec<u64>,
    ) -> Result<Dataset> {
        let mut ds = Dataset::with_ids(self.schema.clone(), rows, labels, self.class_names.clone(), row_ids)?;
        ds.label_name = self.label_name.clone();
        Ok(ds)
    }

    /// Rendered value of a cell (`""` for missing).
    pub fn cell_text(&self, row: usize, col: usize) -> String {
        match self.rows[row][col] {
            Cell::Missing => String::new(),
            Cell::Num(v) => format!("{v}"),
            Cell::Cat(c) => self.schema[col].categories[c as usize].clone(),
        }
    }

    /// Largest provenance id, if any rows exist.
    pub fn max_row_id(&self) -> Option<u64> {
        self.row_ids.iter().copied().max()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn categorical_schema_rejects_duplicates() {
        assert!(ColumnSchema::categorical("c", vec!["a".into(), "a".into()]).is_err());
        assert!(ColumnSchema::categorical("c", vec![]).is_err());
        assert!(ColumnSchema::categorical("c", vec!["a".into(), "b".into()]).is_ok());
    }

    #[test]
    fn dataset_checks_arity_and_labels() {
        let schema = vec![ColumnSchema::numeric("a")];
        assert!(Dataset::new(schema.clone(), vec![vec![Cell::Num(1.0), Cell::Num(2.0)]], None, None).is_err());
        let err = Dataset::new(schema.clone(), vec![vec![Cell::Num(1.0)]], Some(vec![3]), Some(vec!["x".into()]));
        assert!(err.is_err());
        let ok = Dataset::new(schema, vec![vec![Cell::Num(1.0)]], Some(vec![0]), Some(vec!["x".into()])).unwrap();
        assert_eq!(ok.class_counts(), Some(vec![1]));
    }

    #[test]
    fn schema_json_round_trip() {
        let col = ColumnSchema::categorical("colour", vec!["red".into(), "blue".into()]).unwrap();
        let text = serde_json::to_string(&col).unwrap();
        let back: ColumnSchema = serde_json::from_str(&text).unwrap();
        assert_eq!(col, back);
        let num: ColumnSchema = serde_json::from_str(r#"{"name":"x","kind":"Numeric"}"#).unwrap();
        assert_eq!(num, ColumnSchema::numeric("x"));
    }
}
