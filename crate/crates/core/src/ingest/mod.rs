//! Dataset manifests, frame decoding, and the spatial/temporal preprocessing
//! that turns a clip into network inputs.

mod frames;
mod manifest;
mod preprocess;

use std::path::PathBuf;

pub use frames::{decode_frame, list_frame_files, load_frames, write_frame, VideoClip};
pub use manifest::{parse_manifest, DatasetManifest, ManifestRecord};
pub use preprocess::{
    compute_mean_image, prepare_frame, select_frames, spatial_inputs, temporal_inputs, FrameSubset,
    InputGeometry, MeanImageAccumulator,
};

use thiserror::Error;

use crate::tensor::TensorError;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("manifest line {line}: {msg}")]
    Manifest { line: usize, msg: String },
    #[error("{}: {msg}", path.display())]
    Frame { path: PathBuf, msg: String },
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Loads the clip for one manifest record.
pub fn load_record(manifest: &DatasetManifest, record: &ManifestRecord) -> Result<VideoClip, IngestError> {
    load_frames(&manifest.video_path(record), record.id(), &record.label)
}
