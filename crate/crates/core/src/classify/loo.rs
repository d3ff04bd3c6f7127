use std::collections::HashSet;
use std::fmt;

use rayon::prelude::*;

use super::nn::nearest_label;
use super::svm::{gram_matrix, svm_predict, svm_train_with_gram};
use super::{ClassifyError, EvalReport, LabeledFeatureSet, Metric, SvmConfig};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Classifier {
    Nn(Metric),
    Svm(SvmConfig),
}

impl fmt::Display for Classifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Classifier::Nn(m) => write!(f, "nn-{m}"),
            Classifier::Svm(_) => write!(f, "svm"),
        }
    }
}

/// Training rows of each fold: fold `i` holds out sample `i`.
pub fn loo_folds(m: usize) -> Vec<Vec<usize>> {
    (0..m).map(|i| (0..m).filter(|&j| j != i).collect()).collect()
}

fn check_disjoint(data: &LabeledFeatureSet, fold: usize, train: &[usize]) -> Result<(), ClassifyError> {
    let test_id = &data.ids()[fold];
    let train_ids: HashSet<&str> = train.iter().map(|&j| data.ids()[j].as_str()).collect();
    if train.contains(&fold) || train_ids.contains(test_id.as_str()) {
        return Err(ClassifyError::Leak {
            fold,
            id: test_id.clone(),
        });
    }
    Ok(())
}

/// Runs all `M` folds on a pool of `workers` threads. Results are gathered in
/// sample order, so the report does not depend on scheduling.
pub fn loo_evaluate(data: &LabeledFeatureSet, classifier: &Classifier, workers: usize) -> Result<EvalReport, ClassifyError> {
    let m = data.len();
    if m < 2 {
        return Err(ClassifyError::InvalidSet(format!("leave-one-out needs at least 2 samples, got {m}")));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| ClassifyError::Config(e.to_string()))?;
    let predictions = pool.install(|| {
        let folds = loo_folds(m);
        let gram = matches!(classifier, Classifier::Svm(_)).then(|| gram_matrix(data.features()));
        (0..m)
            .into_par_iter()
            .map(|i| {
                let train = &folds[i];
                check_disjoint(data, i, train)?;
                let query = &data.features()[i];
                let predicted = match classifier {
                    Classifier::Nn(metric) => nearest_label(data, train, query, *metric)?,
                    Classifier::Svm(cfg) => {
                        let mut present: Vec<usize> = train.iter().map(|&j| data.labels()[j]).collect();
                        present.sort_unstable();
                        present.dedup();
                        if present.len() < data.num_classes() {
                            log::warn!(
                                "fold {i} ({}): training set covers {} of {} classes",
                                data.ids()[i],
                                present.len(),
                                data.num_classes()
                            );
                        }
                        if present.len() == 1 {
                            present[0]
                        } else {
                            let gram = gram.as_ref().expect("Gram matrix is built for SVM");
                            let model = svm_train_with_gram(data, gram, train, cfg)?;
                            svm_predict(&model, query)?
                        }
                    }
                };
                Ok((data.labels()[i], predicted))
            })
            .collect::<Result<Vec<_>, ClassifyError>>()
    })?;
    Ok(EvalReport::new(data.class_names().to_vec(), data.ids().to_vec(), predictions))
}
