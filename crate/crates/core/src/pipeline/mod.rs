//! End-to-end commands: synthetic datasets, feature extraction into a
//! per-video cache, leave-one-out evaluation, and report formatting.

mod cache;
mod eval;
mod extract;
mod synth;

use thiserror::Error;

use crate::classify::ClassifyError;
use crate::convnet::ConvNetError;
use crate::ingest::IngestError;
use crate::lbptop::LbpError;
use crate::pooling::PoolingError;
use crate::tensor::TensorError;

pub use cache::{cache_path, read_lbptop, read_tcof, CACHE_ENV};
pub use eval::{cmd_eval, format_reports, Descriptor, EvalConfig, EvalOutcome};
pub use extract::{
    cmd_extract, cmd_lbptop, load_network, ExtractConfig, ExtractSummary, LbpConfig, MeanSource, WeightSource,
};
pub use synth::{cmd_synth, video_mean_intensity, SynthConfig, NOISE};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
    #[error("cache is missing {} entr{}: {}", .0.len(), if .0.len() == 1 { "y" } else { "ies" }, .0.join(", "))]
    MissingCache(Vec<String>),
}

impl PipelineError {
    /// Process exit status: 1 usage, 2 data, 3 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Usage(_) => 1,
            PipelineError::Data(_) | PipelineError::MissingCache(_) => 2,
            PipelineError::Numeric(_) => 3,
        }
    }

    /// Prefixes the message with the video it concerns.
    pub(crate) fn for_video(self, id: &str) -> Self {
        match self {
            PipelineError::Usage(m) => PipelineError::Usage(format!("video {id}: {m}")),
            PipelineError::Data(m) => PipelineError::Data(format!("video {id}: {m}")),
            PipelineError::Numeric(m) => PipelineError::Numeric(format!("video {id}: {m}")),
            other => other,
        }
    }
}

impl From<IngestError> for PipelineError {
    fn from(e: IngestError) -> Self {
        PipelineError::Data(e.to_string())
    }
}

impl From<ConvNetError> for PipelineError {
    fn from(e: ConvNetError) -> Self {
        PipelineError::Data(e.to_string())
    }
}

impl From<TensorError> for PipelineError {
    fn from(e: TensorError) -> Self {
        PipelineError::Data(e.to_string())
    }
}

impl From<PoolingError> for PipelineError {
    fn from(e: PoolingError) -> Self {
        PipelineError::Data(e.to_string())
    }
}

impl From<LbpError> for PipelineError {
    fn from(e: LbpError) -> Self {
        PipelineError::Data(e.to_string())
    }
}

impl From<ClassifyError> for PipelineError {
    fn from(e: ClassifyError) -> Self {
        match e {
            ClassifyError::Numeric(_) => PipelineError::Numeric(e.to_string()),
            ClassifyError::Config(_) => PipelineError::Usage(e.to_string()),
            _ => PipelineError::Data(e.to_string()),
        }
    }
}

pub(crate) fn io_err(path: &std::path::Path, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Data(format!("{}: {e}", path.display()))
}

pub(crate) fn thread_pool(workers: usize) -> Result<rayon::ThreadPool, PipelineError> {
    if workers == 0 {
        return Err(PipelineError::Usage("--workers must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| PipelineError::Usage(format!("cannot start {workers} workers: {e}")))
}
