//! The four classifiers behind one fit/predict contract.

pub mod forest;
pub mod logistic;
pub mod svm;
pub mod tree;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{CrlError, Result};
use crate::matrix::Matrix;
use crate::preprocess::DesignMatrix;

pub use forest::{train_forest, FeaturesPerSplit, ForestModel, ForestParams};
pub use logistic::{sigmoid, train_logistic, LogisticModel, LogisticParams};
pub use svm::{train_svm, Kernel, KernelChoice, SvmModel, SvmParams};
pub use tree::{gini_impurity, train_tree, TreeModel, TreeNode, TreeParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Svm,
    Rf,
    Dt,
    Lr,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Svm, ModelKind::Rf, ModelKind::Dt, ModelKind::Lr];

    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Svm => "svm",
            ModelKind::Rf => "rf",
            ModelKind::Dt => "dt",
            ModelKind::Lr => "lr",
        }
    }

    pub fn display_name(&self) -> &'static str {
        match self {
            ModelKind::Svm => "SVM",
            ModelKind::Rf => "Random Forest",
            ModelKind::Dt => "Decision Tree",
            ModelKind::Lr => "Logistic Regression",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = CrlError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "svm" => Ok(ModelKind::Svm),
            "rf" => Ok(ModelKind::Rf),
            "dt" => Ok(ModelKind::Dt),
            "lr" => Ok(ModelKind::Lr),
            other => Err(CrlError::Config(format!(
                "unknown model `{other}` (expected svm, rf, dt or lr)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Hyperparams {
    pub logistic: LogisticParams,
    pub svm: SvmParams,
    pub tree: TreeParams,
    pub forest: ForestParams,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub label: u8,
    /// Logistic: probability. SVM: signed margin. Tree: leaf fraction of
    /// class 1. Forest: fraction of trees voting 1.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum Model {
    Lr(LogisticModel),
    Svm(SvmModel),
    Dt(TreeModel),
    Rf(ForestModel),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Lr(_) => ModelKind::Lr,
            Model::Svm(_) => ModelKind::Svm,
            Model::Dt(_) => ModelKind::Dt,
            Model::Rf(_) => ModelKind::Rf,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            Model::Lr(m) => m.weights.len(),
            Model::Svm(m) => m
                .support_vectors
                .first()
                .map(Vec::len)
                .or_else(|| m.linear_weights.as_ref().map(Vec::len))
                .unwrap_or(0),
            Model::Dt(m) => m.n_features,
            Model::Rf(m) => m.trees.first().map_or(0, |t| t.n_features),
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        let expected = self.n_features();
        // an SVM without support vectors is a constant; accept any width
        let unconstrained = matches!(self, Model::Svm(m) if m.support_vectors.is_empty());
        if x.len() != expected && !unconstrained {
            return Err(CrlError::DimensionMismatch {
                expected,
                got: x.len(),
            });
        }
        if x.iter().any(|v| v.is_nan()) {
            return Err(CrlError::Config("feature vector contains NaN".into()));
        }
        Ok(match self {
            Model::Lr(m) => {
                let p = m.probability(x);
                Prediction {
                    label: u8::from(p >= 0.5),
                    score: p,
                }
            }
            Model::Svm(m) => {
                let s = m.decision(x);
                Prediction {
                    label: u8::from(s >= 0.0),
                    score: s,
                }
            }
            Model::Dt(m) => {
                let (label, score) = m.predict(x);
                Prediction { label, score }
            }
            Model::Rf(m) => {
                let (label, score) = m.predict(x);
                Prediction { label, score }
            }
        })
    }

    pub fn predict_matrix(&self, x: &Matrix) -> Result<Vec<Prediction>> {
        x.rows().map(|r| self.predict(r)).collect()
    }

    /// Training warnings worth surfacing (currently: SMO iteration cap).
    pub fn warnings(&self) -> Vec<String> {
        match self {
            Model::Svm(m) if !m.converged => vec![format!(
                "SVM stopped after {} updates without meeting the KKT tolerance",
                m.iterations
            )],
            _ => Vec::new(),
        }
    }
}

pub fn train(kind: ModelKind, data: &DesignMatrix, hp: &Hyperparams) -> Result<Model> {
    Ok(match kind {
        ModelKind::Lr => Model::Lr(train_logistic(data, &hp.logistic)?),
        ModelKind::Svm => Model::Svm(train_svm(data, &hp.svm)?),
        ModelKind::Dt => Model::Dt(train_tree(data, &hp.tree)?),
        ModelKind::Rf => Model::Rf(train_forest(data, &hp.forest)?),
    })
}
