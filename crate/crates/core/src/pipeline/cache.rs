//! Per-video descriptor files `<cache>/<video id>.<tag>.tnsr`, each with a
//! `.key` sidecar holding the SHA-256 of everything the descriptor depends on.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::ingest::list_frame_files;
use crate::lbptop::{LbpTopDescriptor, DESCRIPTOR_LEN};
use crate::pooling::{TcofVariant, TcofVector};
use crate::tensor::{Tensor, TensorContainer};

use super::{io_err, PipelineError};

/// Environment variable that overrides the default cache directory.
pub const CACHE_ENV: &str = "TCOF_CACHE_DIR";

pub fn cache_path(cache_dir: &Path, video_id: &str, tag: &str) -> PathBuf {
    cache_dir.join(format!("{video_id}.{tag}.tnsr"))
}

fn key_path(path: &Path) -> PathBuf {
    path.with_extension("key")
}

/// Accumulates `name=value` lines into a SHA-256 digest.
#[derive(Clone, Default)]
pub(crate) struct KeyBuilder(Sha256);

impl KeyBuilder {
    pub fn field(mut self, name: &str, value: impl std::fmt::Display) -> Self {
        self.0.update(format!("{name}={value}\n").as_bytes());
        self
    }

    pub fn bytes(mut self, data: &[u8]) -> Self {
        self.0.update((data.len() as u64).to_le_bytes());
        self.0.update(data);
        self
    }

    pub fn finish(self) -> String {
        hex::encode(self.0.finalize())
    }
}

/// Digest of a video directory: frame file names and contents in order.
pub(crate) fn video_digest(dir: &Path) -> Result<String, PipelineError> {
    let mut h = Sha256::new();
    for file in list_frame_files(dir)? {
        let bytes = fs::read(&file).map_err(|e| io_err(&file, e))?;
        h.update(file.file_name().map(|n| n.as_encoded_bytes()).unwrap_or_default());
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(hex::encode(h.finalize()))
}

pub(crate) fn is_fresh(path: &Path, key: &str) -> bool {
    path.is_file() && fs::read_to_string(key_path(path)).is_ok_and(|k| k.trim() == key)
}

/// Writes the container through a temporary file, then the key sidecar.
pub(crate) fn store(path: &Path, container: &TensorContainer, key: &str) -> Result<(), PipelineError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    let bytes = container.to_bytes()?;
    let tmp = path.with_extension("tnsr.tmp");
    fs::write(&tmp, bytes).map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))?;
    let kp = key_path(path);
    fs::write(&kp, format!("{key}\n")).map_err(|e| io_err(&kp, e))
}

pub(crate) fn tcof_container(t: &TcofVector, meta: [usize; 3]) -> Result<TensorContainer, PipelineError> {
    let mut c = TensorContainer::new();
    c.insert("u", Tensor::vector(t.u.clone()))?;
    c.insert("v", Tensor::vector(t.v.clone()))?;
    c.insert("f", Tensor::vector(t.f.clone()))?;
    c.insert("meta", Tensor::vector(meta.iter().map(|&m| m as f32).collect()))?;
    Ok(c)
}

fn entry<'a>(c: &'a TensorContainer, name: &str, path: &Path) -> Result<&'a Tensor, PipelineError> {
    c.get(name)
        .ok_or_else(|| PipelineError::Data(format!("{}: no entry {name:?}", path.display())))
}

/// Reads a spatial or temporal descriptor and its `[N, d, tau]` meta entry.
pub fn read_tcof(path: &Path, variant: TcofVariant) -> Result<(TcofVector, [usize; 3]), PipelineError> {
    let c = TensorContainer::load(path)?;
    let (u, v, f, meta) = (
        entry(&c, "u", path)?,
        entry(&c, "v", path)?,
        entry(&c, "f", path)?,
        entry(&c, "meta", path)?,
    );
    let d = u.len();
    if v.len() != d || f.len() != 2 * d || meta.len() != 3 {
        return Err(PipelineError::Data(format!(
            "{}: inconsistent lengths u={}, v={}, f={}, meta={}",
            path.display(),
            d,
            v.len(),
            f.len(),
            meta.len()
        )));
    }
    let m = meta.data();
    let meta = [m[0] as usize, m[1] as usize, m[2] as usize];
    let t = TcofVector {
        variant,
        u: u.data().to_vec(),
        v: v.data().to_vec(),
        f: f.data().to_vec(),
    };
    Ok((t, meta))
}

/// Reads a 768-entry LBP-TOP descriptor and checks its plane sums.
pub fn read_lbptop(path: &Path) -> Result<LbpTopDescriptor, PipelineError> {
    let c = TensorContainer::load(path)?;
    let t = entry(&c, "lbptop", path)?;
    if t.len() != DESCRIPTOR_LEN {
        return Err(PipelineError::Data(format!(
            "{}: lbptop has {} entries, expected {DESCRIPTOR_LEN}",
            path.display(),
            t.len()
        )));
    }
    let d = LbpTopDescriptor::from_slice(t.data())?;
    for plane in d.planes() {
        let sum: f64 = plane.iter().map(|&v| v as f64).sum();
        if plane.iter().any(|&v| v < 0.0) || (sum.abs() > 1e-6 && (sum - 1.0).abs() > 1e-6) {
            return Err(PipelineError::Data(format!(
                "{}: plane histogram sums to {sum}",
                path.display()
            )));
        }
    }
    Ok(d)
}
