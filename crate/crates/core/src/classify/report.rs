use std::path::{Path, PathBuf};

use super::ClassifyError;

/// Leave-one-out outcome: one `(true, predicted)` pair per sample.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    class_names: Vec<String>,
    ids: Vec<String>,
    predictions: Vec<(usize, usize)>,
    confusion: Vec<Vec<u64>>,
}

impl EvalReport {
    pub fn new(class_names: Vec<String>, ids: Vec<String>, predictions: Vec<(usize, usize)>) -> Self {
        let k = class_names.len();
        let mut confusion = vec![vec![0u64; k]; k];
        for &(t, p) in &predictions {
            confusion[t][p] += 1;
        }
        Self {
            class_names,
            ids,
            predictions,
            confusion,
        }
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn predictions(&self) -> &[(usize, usize)] {
        &self.predictions
    }

    /// `confusion[true][predicted]` counts.
    pub fn confusion(&self) -> &[Vec<u64>] {
        &self.confusion
    }

    /// `trace(confusion) / M * 100`.
    pub fn overall_accuracy(&self) -> f64 {
        let correct: u64 = (0..self.confusion.len()).map(|i| self.confusion[i][i]).sum();
        correct as f64 * 100.0 / self.predictions.len() as f64
    }

    /// Per-class recall in percent; 0 for classes with no samples.
    pub fn per_category_accuracy(&self) -> Vec<f64> {
        self.confusion
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let total: u64 = row.iter().sum();
                if total == 0 {
                    0.0
                } else {
                    row[i] as f64 * 100.0 / total as f64
                }
            })
            .collect()
    }
}

/// `<dir>/<stem>_confusion.csv` next to an accuracy report at `path`.
pub fn confusion_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    path.with_file_name(format!("{stem}_confusion.csv"))
}

fn report_err(path: &Path, e: impl ToString) -> ClassifyError {
    ClassifyError::Report {
        path: path.display().to_string(),
        msg: e.to_string(),
    }
}

/// Writes `category,accuracy_percent` rows and an `overall` row to `path`,
/// and the confusion matrix to [`confusion_path`]. Returns the latter.
pub fn write_report(report: &EvalReport, path: &Path) -> Result<PathBuf, ClassifyError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| report_err(path, e))?;
    let mut rows = vec![("category".to_string(), "accuracy_percent".to_string())];
    for (name, acc) in report.class_names.iter().zip(report.per_category_accuracy()) {
        rows.push((name.clone(), format!("{acc:.2}")));
    }
    rows.push(("overall".into(), format!("{:.2}", report.overall_accuracy())));
    for (a, b) in &rows {
        w.write_record([a, b]).map_err(|e| report_err(path, e))?;
    }
    w.flush().map_err(|e| report_err(path, e))?;

    let cpath = confusion_path(path);
    let mut w = csv::Writer::from_path(&cpath).map_err(|e| report_err(&cpath, e))?;
    let header: Vec<&str> = std::iter::once("true\\predicted")
        .chain(report.class_names.iter().map(String::as_str))
        .collect();
    w.write_record(&header).map_err(|e| report_err(&cpath, e))?;
    for (name, row) in report.class_names.iter().zip(&report.confusion) {
        let record: Vec<String> = std::iter::once(name.clone())
            .chain(row.iter().map(u64::to_string))
            .collect();
        w.write_record(&record).map_err(|e| report_err(&cpath, e))?;
    }
    w.flush().map_err(|e| report_err(&cpath, e))?;
    Ok(cpath)
}

/// Parses an accuracy report into `(category, percent)` rows, `overall` last.
pub fn read_report(path: &Path) -> Result<Vec<(String, f64)>, ClassifyError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| report_err(path, e))?;
    let header = r.headers().map_err(|e| report_err(path, e))?;
    if header.iter().collect::<Vec<_>>() != ["category", "accuracy_percent"] {
        return Err(report_err(path, "expected header `category,accuracy_percent`"));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| report_err(path, e))?;
        let value = rec[1]
            .parse::<f64>()
            .map_err(|e| report_err(path, format!("row {:?}: {e}", &rec[0])))?;
        rows.push((rec[0].to_string(), value));
    }
    Ok(rows)
}
