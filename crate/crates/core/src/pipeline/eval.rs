use std::fmt;
use std::path::{Path, PathBuf};

use crate::classify::{loo_evaluate, read_report, write_report, Classifier, EvalReport, LabeledFeatureSet};
use crate::ingest::DatasetManifest;
use crate::pooling::{combine, TcofVariant};

use super::cache::{cache_path, read_lbptop, read_tcof};
use super::{io_err, PipelineError};

/// Which cached descriptor to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Descriptor {
    Tcof(TcofVariant),
    LbpTop,
}

impl fmt::Display for Descriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Descriptor::Tcof(v) => write!(f, "{v}"),
            Descriptor::LbpTop => write!(f, "lbptop"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct EvalConfig {
    pub manifest: PathBuf,
    pub descriptor: Descriptor,
    pub classifier: Classifier,
    pub cache_dir: PathBuf,
    /// Accuracy CSV; defaults to `<cache>/report_<descriptor>_<classifier>.csv`.
    pub output: Option<PathBuf>,
    pub workers: usize,
}

#[derive(Clone, Debug)]
pub struct EvalOutcome {
    pub report: EvalReport,
    pub report_path: PathBuf,
    pub confusion_path: PathBuf,
}

fn tags(descriptor: Descriptor) -> Vec<&'static str> {
    match descriptor {
        Descriptor::Tcof(TcofVariant::Combined) => vec!["spatial", "temporal"],
        Descriptor::Tcof(v) => vec![v.as_str()],
        Descriptor::LbpTop => vec!["lbptop"],
    }
}

fn load_feature(cache_dir: &Path, id: &str, descriptor: Descriptor) -> Result<Vec<f32>, PipelineError> {
    Ok(match descriptor {
        Descriptor::Tcof(TcofVariant::Combined) => {
            let (s, _) = read_tcof(&cache_path(cache_dir, id, "spatial"), TcofVariant::Spatial)?;
            let (t, _) = read_tcof(&cache_path(cache_dir, id, "temporal"), TcofVariant::Temporal)?;
            combine(&s, &t)?.f
        }
        Descriptor::Tcof(v) => read_tcof(&cache_path(cache_dir, id, v.as_str()), v)?.0.f,
        Descriptor::LbpTop => read_lbptop(&cache_path(cache_dir, id, "lbptop"))?.to_vec(),
    })
}

/// Leave-one-out evaluation over cached descriptors. Fails before any
/// training if cache files are missing, listing all of them.
pub fn cmd_eval(cfg: &EvalConfig) -> Result<EvalOutcome, PipelineError> {
    if cfg.workers == 0 {
        return Err(PipelineError::Usage("--workers must be at least 1".into()));
    }
    let manifest = DatasetManifest::load(&cfg.manifest)?;
    let missing: Vec<String> = manifest
        .records()
        .iter()
        .flat_map(|r| tags(cfg.descriptor).into_iter().map(move |tag| (r.id(), tag)))
        .filter(|(id, tag)| !cache_path(&cfg.cache_dir, id, tag).is_file())
        .map(|(id, tag)| format!("{id} ({tag})"))
        .collect();
    if !missing.is_empty() {
        return Err(PipelineError::MissingCache(missing));
    }

    let mut features = Vec::with_capacity(manifest.len());
    let mut labels = Vec::with_capacity(manifest.len());
    let mut ids = Vec::with_capacity(manifest.len());
    for r in manifest.records() {
        features.push(load_feature(&cfg.cache_dir, r.id(), cfg.descriptor).map_err(|e| e.for_video(r.id()))?);
        labels.push(manifest.class_index(&r.label).expect("label comes from the manifest"));
        ids.push(r.id().to_string());
    }
    let data = LabeledFeatureSet::new(features, labels, manifest.classes().to_vec(), ids)?;
    let report = loo_evaluate(&data, &cfg.classifier, cfg.workers)?;

    let report_path = cfg.output.clone().unwrap_or_else(|| {
        cfg.cache_dir
            .join(format!("report_{}_{}.csv", cfg.descriptor, cfg.classifier))
    });
    if let Some(parent) = report_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    let confusion_path = write_report(&report, &report_path)?;
    log::info!(
        "{} / {}: overall {:.2}% over {} videos",
        cfg.descriptor,
        cfg.classifier,
        report.overall_accuracy(),
        data.len()
    );
    Ok(EvalOutcome {
        report,
        report_path,
        confusion_path,
    })
}

/// Side-by-side table of accuracy reports, one column per file.
pub fn format_reports(paths: &[PathBuf]) -> Result<String, PipelineError> {
    if paths.is_empty() {
        return Err(PipelineError::Usage("report needs at least one CSV file".into()));
    }
    let tables = paths
        .iter()
        .map(|p| read_report(p))
        .collect::<Result<Vec<_>, _>>()?;
    let mut categories: Vec<String> = Vec::new();
    for table in &tables {
        for (name, _) in table {
            if !categories.contains(name) {
                categories.push(name.clone());
            }
        }
    }
    // Keep `overall` as the last row.
    if let Some(i) = categories.iter().position(|c| c == "overall") {
        let overall = categories.remove(i);
        categories.push(overall);
    }
    let headers: Vec<String> = paths
        .iter()
        .map(|p| {
            p.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| p.display().to_string())
        })
        .collect();
    let first_w = categories.iter().map(String::len).chain(["category".len()]).max().unwrap_or(8);
    let widths: Vec<usize> = headers.iter().map(|h| h.len().max(7)).collect();

    let mut out = format!("{:<first_w$}", "category");
    for (h, w) in headers.iter().zip(&widths) {
        out.push_str(&format!("  {h:>w$}"));
    }
    out.push('\n');
    for cat in &categories {
        out.push_str(&format!("{cat:<first_w$}"));
        for (table, w) in tables.iter().zip(&widths) {
            let cell = table
                .iter()
                .find(|(name, _)| name == cat)
                .map_or_else(|| "-".to_string(), |(_, v)| format!("{v:.2}"));
            out.push_str(&format!("  {cell:>w$}"));
        }
        out.push('\n');
    }
    Ok(out)
}
