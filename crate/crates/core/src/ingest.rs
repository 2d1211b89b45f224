//! CSV ingestion into a typed, schema-checked table.
//!
//! Cell types come from the schema, never from the content: a numeric
//! column holding text yields [`Cell::Missing`] for that cell.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CrlError, Result};

/// Name of the target column of the credit-risk dataset.
pub const TARGET_COLUMN: &str = "loan_status";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Categorical,
    BinaryTarget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allowed_categories: Option<Vec<String>>,
}

impl ColumnSpec {
    pub fn numeric(name: &str) -> Self {
        Self {
            name: name.to_string(),
            kind: ColumnKind::Numeric,
            allowed_categories: None,
        }
    }

    pub fn categorical(name: &str) -> Self {
        Self {
            name: name.to_string(),
            kind: ColumnKind::Categorical,
            allowed_categories: None,
        }
    }

    pub fn target(name: &str) -> Self {
        Self {
            name: name.to_string(),
            kind: ColumnKind::BinaryTarget,
            allowed_categories: None,
        }
    }
}

/// Ordered column list with exactly one binary target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSchema {
    columns: Vec<ColumnSpec>,
}

impl DatasetSchema {
    pub fn new(columns: Vec<ColumnSpec>) -> Result<Self> {
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.name.as_str()) {
                return Err(CrlError::InvalidSchema(format!(
                    "duplicate column `{}`",
                    c.name
                )));
            }
        }
        let targets = columns
            .iter()
            .filter(|c| c.kind == ColumnKind::BinaryTarget)
            .count();
        if targets != 1 {
            return Err(CrlError::InvalidSchema(format!(
                "expected exactly one binary target, found {targets}"
            )));
        }
        Ok(Self { columns })
    }

    /// The twelve-column credit-risk schema, in file order.
    pub fn credit_risk() -> Self {
        Self::new(vec![
            ColumnSpec::numeric("person_age"),
            ColumnSpec::numeric("person_income"),
            ColumnSpec::categorical("person_home_ownership"),
            ColumnSpec::numeric("person_emp_length"),
            ColumnSpec::categorical("loan_intent"),
            ColumnSpec::categorical("loan_grade"),
            ColumnSpec::numeric("loan_amnt"),
            ColumnSpec::numeric("loan_int_rate"),
            ColumnSpec::target(TARGET_COLUMN),
            ColumnSpec::numeric("loan_percent_income"),
            ColumnSpec::categorical("cb_person_default_on_file"),
            ColumnSpec::numeric("cb_person_cred_hist_length"),
        ])
        .expect("credit-risk schema is valid")
    }

    pub fn columns(&self) -> &[ColumnSpec] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn target_index(&self) -> usize {
        self.columns
            .iter()
            .position(|c| c.kind == ColumnKind::BinaryTarget)
            .expect("schema has a target")
    }

    /// Non-target columns in schema order.
    pub fn feature_columns(&self) -> impl Iterator<Item = (usize, &ColumnSpec)> {
        self.columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.kind != ColumnKind::BinaryTarget)
    }

    /// Hex SHA-256 over column names and kinds; stored in model files to
    /// detect scoring against a different schema.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        for c in &self.columns {
            let kind = match c.kind {
                ColumnKind::Numeric => "numeric",
                ColumnKind::Categorical => "categorical",
                ColumnKind::BinaryTarget => "target",
            };
            hasher.update(c.name.as_bytes());
            hasher.update(b":");
            hasher.update(kind.as_bytes());
            hasher.update(b";");
        }
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Numeric(f64),
    Category(String),
    Missing,
}

impl Cell {
    pub fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Numeric(v) => Some(*v),
            _ => None,
        }
    }
}

/// Parsed rows, one cell per schema column. Target cells are always
/// `Numeric(0.0)` or `Numeric(1.0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    schema: DatasetSchema,
    rows: Vec<Vec<Cell>>,
}

impl RawTable {
    /// Builds a table from already-typed rows, checking the row invariants.
    pub fn from_rows(schema: DatasetSchema, rows: Vec<Vec<Cell>>) -> Result<Self> {
        let target = schema.target_index();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != schema.len() {
                return Err(CrlError::LengthMismatch {
                    left: row.len(),
                    right: schema.len(),
                });
            }
            match &row[target] {
                Cell::Numeric(v) if *v == 0.0 || *v == 1.0 => {}
                other => {
                    return Err(CrlError::BadTarget {
                        row: i + 1,
                        value: format!("{other:?}"),
                    })
                }
            }
        }
        Ok(Self { schema, rows })
    }

    pub fn schema(&self) -> &DatasetSchema {
        &self.schema
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn column(&self, index: usize) -> impl Iterator<Item = &Cell> + '_ {
        self.rows.iter().map(move |r| &r[index])
    }

    pub fn labels(&self) -> Vec<u8> {
        let t = self.schema.target_index();
        self.rows
            .iter()
            .map(|r| match r[t] {
                Cell::Numeric(1.0) => 1,
                _ => 0,
            })
            .collect()
    }

    /// Row subset in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        Self {
            schema: self.schema.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }
}

/// Reads a CSV file under `schema`.
pub fn load_csv(path: impl AsRef<Path>, schema: &DatasetSchema) -> Result<RawTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| CrlError::io(path, e))?;
    read_csv(file, schema)
}

/// Reads CSV text under `schema`. Header columns are matched by trimmed
/// name in any order; extra columns are ignored with a warning.
pub fn read_csv<R: Read>(reader: R, schema: &DatasetSchema) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let positions: HashMap<&str, usize> = headers
        .iter()
        .enumerate()
        .map(|(i, h)| (h.trim(), i))
        .collect();

    let mut mapping = Vec::with_capacity(schema.len());
    for col in schema.columns() {
        match positions.get(col.name.as_str()) {
            Some(&p) => mapping.push(p),
            None => return Err(CrlError::MissingColumn(col.name.clone())),
        }
    }
    for h in headers.iter() {
        if schema.index_of(h.trim()).is_none() {
            log::warn!("ignoring extra column `{}`", h.trim());
        }
    }

    let mut rows = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let mut row = Vec::with_capacity(schema.len());
        for (spec, &pos) in schema.columns().iter().zip(&mapping) {
            let raw = record.get(pos).unwrap_or("").trim();
            row.push(parse_cell(spec, raw, line + 1)?);
        }
        rows.push(row);
    }
    Ok(RawTable {
        schema: schema.clone(),
        rows,
    })
}

fn parse_cell(spec: &ColumnSpec, raw: &str, row: usize) -> Result<Cell> {
    match spec.kind {
        ColumnKind::Numeric => Ok(match raw.parse::<f64>() {
            Ok(v) if v.is_finite() => Cell::Numeric(v),
            _ => Cell::Missing,
        }),
        ColumnKind::Categorical => Ok(if raw.is_empty() {
            Cell::Missing
        } else {
            Cell::Category(raw.to_string())
        }),
        ColumnKind::BinaryTarget => match raw.parse::<f64>() {
            Ok(v) if v == 0.0 || v == 1.0 => Ok(Cell::Numeric(v)),
            _ => Err(CrlError::BadTarget {
                row,
                value: raw.to_string(),
            }),
        },
    }
}

/// Writes the table back out in schema column order. Missing cells become
/// empty fields, so `read_csv(write_csv(t)) == t`.
pub fn write_csv<W: Write>(table: &RawTable, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(table.schema.columns().iter().map(|c| c.name.as_str()))?;
    for row in &table.rows {
        let fields: Vec<String> = row
            .iter()
            .map(|c| match c {
                Cell::Numeric(v) => format!("{v}"),
                Cell::Category(s) => s.clone(),
                Cell::Missing => String::new(),
            })
            .collect();
        w.write_record(&fields)?;
    }
    w.flush().map_err(|e| CrlError::io("<writer>", e))?;
    Ok(())
}

/// Number of missing cells per schema column, in schema order.
pub fn missing_summary(table: &RawTable) -> Vec<(String, usize)> {
    table
        .schema
        .columns()
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let n = table.column(i).filter(|cell| cell.is_missing()).count();
            (c.name.clone(), n)
        })
        .collect()
}
