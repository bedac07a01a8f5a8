//! Classifiers: a one-hidden-layer MLP, bagged decision trees, and a
//! one-class wrapper trained against artificial outliers.

mod bagging;
mod mlp;
mod oneclass;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bagging::{BaggingModel, BaggingParams, DecisionTree, TreeParams, bootstrap_indices, train_bagging};
pub use mlp::{MinMaxScaler, MlpModel, MlpParams, Network, hidden_units, predict_mlp, train_mlp, training_steps};
pub use oneclass::{
    BaseKind, OneClassModel, OneClassParams, ThresholdSource, calibrate_threshold, generate_artificial_outliers,
    one_class_predict, refine_threshold, train_one_class,
};

use crate::dataset::FEATURE_SCHEMA_VERSION;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("training needs at least two classes with instances, got {0}")]
    SingleClass(usize),
    #[error("no training instances")]
    Empty,
    #[error("expected {expected} attributes, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("label {label} out of range for {n_classes} classes")]
    Label { label: usize, n_classes: usize },
    #[error("non-finite feature value in training data")]
    NonFinite,
    #[error("invalid model parameters: {0}")]
    Params(String),
    #[error("model file {path}: {msg}")]
    Io { path: PathBuf, msg: String },
}

/// Anything that maps a feature row to a class distribution.
pub trait Classifier {
    fn n_attributes(&self) -> usize;
    fn class_names(&self) -> &[String];

    fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>, ModelError>;

    /// Most probable class; ties go to the earlier class.
    fn predict(&self, x: &[f64]) -> Result<usize, ModelError> {
        Ok(argmax(&self.predict_proba(x)?))
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), ModelError> {
        if x.len() != self.n_attributes() {
            return Err(ModelError::Dimension { expected: self.n_attributes(), got: x.len() });
        }
        Ok(())
    }
}

pub(crate) fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn validate_training(
    rows: &[Vec<f64>],
    labels: &[usize],
    n_classes: usize,
) -> Result<usize, ModelError> {
    let Some(first) = rows.first() else {
        return Err(ModelError::Empty);
    };
    let dim = first.len();
    if labels.len() != rows.len() {
        return Err(ModelError::Params(format!("{} labels for {} rows", labels.len(), rows.len())));
    }
    for row in rows {
        if row.len() != dim {
            return Err(ModelError::Dimension { expected: dim, got: row.len() });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite);
        }
    }
    let mut seen = vec![false; n_classes];
    for &l in labels {
        if l >= n_classes {
            return Err(ModelError::Label { label: l, n_classes });
        }
        seen[l] = true;
    }
    let present = seen.iter().filter(|&&s| s).count();
    if present < 2 {
        return Err(ModelError::SingleClass(present));
    }
    Ok(dim)
}

/// Always answers the same class. Stands in when a training fold holds a
/// single class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantModel {
    pub class: usize,
    pub class_names: Vec<String>,
    pub n_attributes: usize,
}

impl Classifier for ConstantModel {
    fn n_attributes(&self) -> usize {
        self.n_attributes
    }

    fn class_names(&self) -> &[String] {
        &self.class_names
    }

    fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.check_dim(x)?;
        let mut p = vec![0.0; self.class_names.len()];
        p[self.class] = 1.0;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SavedModel {
    Mlp(MlpModel),
    Bagging(BaggingModel),
    OneClass(OneClassModel),
    Constant(ConstantModel),
}

pub const MODEL_FORMAT: &str = "fractvox-model-v1";

/// Self-describing JSON model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub feature_schema: String,
    pub feature_names: Vec<String>,
    pub model: SavedModel,
}

impl ModelFile {
    pub fn new(feature_names: Vec<String>, model: SavedModel) -> Self {
        Self {
            format: MODEL_FORMAT.to_string(),
            feature_schema: FEATURE_SCHEMA_VERSION.to_string(),
            feature_names,
            model,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if file.format != MODEL_FORMAT {
            return Err(format!("unsupported model format '{}'", file.format));
        }
        Ok(file)
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        std::fs::write(path, self.to_json()).map_err(|e| ModelError::Io { path: path.to_path_buf(), msg: e.to_string() })
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ModelError::Io { path: path.to_path_buf(), msg: e.to_string() })?;
        Self::from_json(&text).map_err(|msg| ModelError::Io { path: path.to_path_buf(), msg })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_ties_to_first() {
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[0.2, 0.3, 0.3]), 1);
    }

    #[test]
    fn constant_model() {
        let m = ConstantModel { class: 0, class_names: vec!["CR".into(), "AD".into()], n_attributes: 2 };
        assert_eq!(m.predict(&[1.0, 2.0]).unwrap(), 0);
        assert!(matches!(m.predict(&[1.0]), Err(ModelError::Dimension { expected: 2, got: 1 })));
    }

    #[test]
    fn training_validation() {
        let rows = vec![vec![0.0], vec![1.0]];
        assert!(matches!(validate_training(&rows, &[0, 0], 2), Err(ModelError::SingleClass(1))));
        assert!(matches!(validate_training(&[], &[], 2), Err(ModelError::Empty)));
        assert!(matches!(validate_training(&rows, &[0, 5], 2), Err(ModelError::Label { .. })));
        assert_eq!(validate_training(&rows, &[0, 1], 2).unwrap(), 1);
    }
}
