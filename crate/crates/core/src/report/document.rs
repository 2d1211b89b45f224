//! The versioned model file: fitted preprocessing, selected features and
//! the trained classifier, enough to score raw rows without the training
//! data.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CrlError, Result};
use crate::ingest::{DatasetSchema, RawTable};
use crate::matrix::Matrix;
use crate::models::{Model, Prediction};
use crate::preprocess::{DesignMatrix, FittedParams};

pub const FORMAT_VERSION: u32 = 1;
pub const MODEL_EXTENSION: &str = ".crl.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub seed: u64,
    pub train_fraction: f64,
    /// Rows in the table the split was drawn from.
    pub source_rows: usize,
    pub train_rows: usize,
    pub threshold: f64,
    /// RFC 3339; the only non-deterministic field.
    pub timestamp: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format_version: u32,
    pub schema_digest: String,
    pub preprocessing: FittedParams,
    pub selected_features: Vec<String>,
    pub model: Model,
    pub metadata: TrainingMetadata,
}

impl ModelDocument {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let probe: serde_json::Value = serde_json::from_str(text)?;
        let version = probe
            .get("format_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| CrlError::SchemaMismatch("model file lacks format_version".into()))?;
        if version != u64::from(FORMAT_VERSION) {
            return Err(CrlError::UnsupportedVersion(version as u32));
        }
        let doc: ModelDocument = serde_json::from_value(probe)?;
        doc.check_consistency()?;
        Ok(doc)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| CrlError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CrlError::io(path, e))?;
        Self::from_json(&text)
    }

    fn check_consistency(&self) -> Result<()> {
        let scaled = self.preprocessing.feature_names();
        if scaled != self.selected_features {
            return Err(CrlError::SchemaMismatch(format!(
                "selected features {:?} differ from scaled columns {:?}",
                self.selected_features, scaled
            )));
        }
        let width = self.model.n_features();
        if width != self.selected_features.len() && width != 0 {
            return Err(CrlError::SchemaMismatch(format!(
                "model expects {width} features, document lists {}",
                self.selected_features.len()
            )));
        }
        Ok(())
    }

    /// Fails with `SchemaMismatch` unless `schema` is the training schema.
    pub fn check_schema(&self, schema: &DatasetSchema) -> Result<()> {
        let digest = schema.digest();
        if digest != self.schema_digest {
            return Err(CrlError::SchemaMismatch(format!(
                "data schema digest {digest} differs from model's {}",
                self.schema_digest
            )));
        }
        Ok(())
    }

    /// Encodes, imputes and scales raw rows with the stored parameters.
    pub fn transform(&self, table: &RawTable) -> Result<DesignMatrix> {
        self.check_schema(table.schema())?;
        self.preprocessing.transform_table(table)
    }

    /// Scores an already-transformed matrix; its width must match.
    pub fn predict_matrix(&self, x: &Matrix) -> Result<Vec<Prediction>> {
        if x.n_cols() != self.selected_features.len() {
            return Err(CrlError::SchemaMismatch(format!(
                "model was trained on {} features, matrix has {}",
                self.selected_features.len(),
                x.n_cols()
            )));
        }
        self.model.predict_matrix(x)
    }

    pub fn predict_table(&self, table: &RawTable) -> Result<Vec<Prediction>> {
        let design = self.transform(table)?;
        self.predict_matrix(&design.features)
    }
}
