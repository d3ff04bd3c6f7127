//! Nearest-neighbour and one-vs-one linear SVM classifiers, leave-one-out
//! evaluation, and accuracy/confusion reports.

mod loo;
mod nn;
mod report;
mod svm;

use std::collections::HashSet;

use thiserror::Error;

use crate::lbptop::LbpError;

pub use loo::{loo_evaluate, loo_folds, Classifier};
pub use nn::{nn_classify, Metric};
pub use report::{confusion_path, read_report, write_report, EvalReport};
pub use svm::{gram_matrix, Gram, svm_predict, svm_train, svm_train_with_gram, BinaryMachine, SvmConfig, SvmModel};

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("invalid feature set: {0}")]
    InvalidSet(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("training set is empty")]
    EmptyTrain,
    #[error("SVM needs at least two classes, got {0}")]
    SingleClass(usize),
    #[error("query has length {got}, features have length {expected}")]
    QueryDims { expected: usize, got: usize },
    #[error("fold {fold}: test sample {id:?} appears in its own training set")]
    Leak { fold: usize, id: String },
    #[error("non-finite value encountered: {0}")]
    Numeric(String),
    #[error(transparent)]
    Distance(#[from] LbpError),
    #[error("report {path}: {msg}")]
    Report { path: String, msg: String },
}

/// `M` feature vectors with class indices into `class_names` and video ids.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledFeatureSet {
    features: Vec<Vec<f32>>,
    labels: Vec<usize>,
    class_names: Vec<String>,
    ids: Vec<String>,
}

impl LabeledFeatureSet {
    pub fn new(
        features: Vec<Vec<f32>>,
        labels: Vec<usize>,
        class_names: Vec<String>,
        ids: Vec<String>,
    ) -> Result<Self, ClassifyError> {
        let bad = |m: String| Err(ClassifyError::InvalidSet(m));
        if features.len() != labels.len() || features.len() != ids.len() {
            return bad(format!(
                "{} features, {} labels, {} ids",
                features.len(),
                labels.len(),
                ids.len()
            ));
        }
        if let Some(first) = features.first() {
            if let Some(i) = features.iter().position(|f| f.len() != first.len()) {
                return bad(format!("feature {i} has length {}, feature 0 has {}", features[i].len(), first.len()));
            }
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= class_names.len()) {
            return bad(format!("label {l} out of range for {} classes", class_names.len()));
        }
        let mut seen = HashSet::new();
        if let Some(id) = ids.iter().find(|id| !seen.insert(id.as_str())) {
            return bad(format!("duplicate id {id:?}"));
        }
        if features.iter().flatten().any(|v| !v.is_finite()) {
            return Err(ClassifyError::Numeric("feature set contains NaN or infinity".into()));
        }
        Ok(Self {
            features,
            labels,
            class_names,
            ids,
        })
    }

    /// Builds a set with ids `"0"`, `"1"`, ... .
    pub fn from_labeled(features: Vec<Vec<f32>>, labels: Vec<usize>, class_names: Vec<String>) -> Result<Self, ClassifyError> {
        let ids = (0..features.len()).map(|i| i.to_string()).collect();
        Self::new(features, labels, class_names, ids)
    }

    pub fn features(&self) -> &[Vec<f32>] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Rows at `indices`, in that order, with the same class names.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_names: self.class_names.clone(),
            ids: indices.iter().map(|&i| self.ids[i].clone()).collect(),
        }
    }
}
