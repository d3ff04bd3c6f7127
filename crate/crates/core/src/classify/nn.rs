use std::fmt;
use std::str::FromStr;

use crate::lbptop::chi2_distance;

use super::{ClassifyError, LabeledFeatureSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Metric {
    #[default]
    Euclidean,
    Chi2,
}

impl Metric {
    pub fn distance(&self, a: &[f32], b: &[f32]) -> Result<f64, ClassifyError> {
        match self {
            Metric::Euclidean => Ok(a
                .iter()
                .zip(b)
                .map(|(&x, &y)| (x as f64 - y as f64).powi(2))
                .sum::<f64>()
                .sqrt()),
            Metric::Chi2 => Ok(chi2_distance(a, b)?),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Euclidean => "euclidean",
            Metric::Chi2 => "chi2",
        })
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "euclidean" | "l2" => Ok(Metric::Euclidean),
            "chi2" => Ok(Metric::Chi2),
            _ => Err(format!("unknown metric {s:?}; use euclidean or chi2")),
        }
    }
}

/// Label of the closest training point; the lowest index wins ties.
pub fn nn_classify(train: &LabeledFeatureSet, query: &[f32], metric: Metric) -> Result<usize, ClassifyError> {
    if train.is_empty() {
        return Err(ClassifyError::EmptyTrain);
    }
    if query.len() != train.dim() {
        return Err(ClassifyError::QueryDims {
            expected: train.dim(),
            got: query.len(),
        });
    }
    let all: Vec<usize> = (0..train.len()).collect();
    nearest_label(train, &all, query, metric)
}

/// Nearest-neighbour label among the rows `rows` of `data`; earlier rows win ties.
pub(crate) fn nearest_label(
    data: &LabeledFeatureSet,
    rows: &[usize],
    query: &[f32],
    metric: Metric,
) -> Result<usize, ClassifyError> {
    let mut best: Option<(f64, usize)> = None;
    for &i in rows {
        let d = metric.distance(&data.features()[i], query)?;
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, i));
        }
    }
    let (_, i) = best.ok_or(ClassifyError::EmptyTrain)?;
    Ok(data.labels()[i])
}
