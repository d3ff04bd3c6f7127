use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::convnet::{load_weights, random_weights, Network, NetworkSpec};
use crate::ingest::{
    load_record, prepare_frame, select_frames, spatial_inputs, temporal_inputs, DatasetManifest, FrameSubset,
    InputGeometry, VideoClip,
};
use crate::lbptop::{gray_volume, lbp_top};
use crate::pooling::{make_tcof, TcofVariant, TcofVector};
use crate::tensor::{Tensor, TensorContainer};

use super::cache::{cache_path, is_fresh, store, tcof_container, video_digest, KeyBuilder};
use super::{thread_pool, PipelineError};

const MEAN_ENTRY: &str = "mean";

#[derive(Clone, Debug, PartialEq)]
pub enum WeightSource {
    /// TNSR container with `layer<k>.weight` / `layer<k>.bias` entries.
    File(PathBuf),
    /// Seeded random initialization.
    Random(u64),
}

#[derive(Clone, Debug, PartialEq)]
pub enum MeanSource {
    /// Pixelwise mean over every frame of every manifest video.
    Dataset,
    /// TNSR container with a single `[C, H, W]` entry.
    File(PathBuf),
}

#[derive(Clone, Debug)]
pub struct ExtractConfig {
    pub manifest: PathBuf,
    /// `alexnet`, `test`, or a path to a network spec file.
    pub network: String,
    pub weights: WeightSource,
    pub variant: TcofVariant,
    pub tau: usize,
    pub subset: FrameSubset,
    pub mean: MeanSource,
    pub cache_dir: PathBuf,
    pub workers: usize,
}

#[derive(Clone, Debug)]
pub struct LbpConfig {
    pub manifest: PathBuf,
    pub subset: FrameSubset,
    pub cache_dir: PathBuf,
    pub workers: usize,
}

/// Files written or found up to date, in manifest order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExtractSummary {
    pub computed: Vec<PathBuf>,
    pub skipped: Vec<PathBuf>,
}

impl ExtractSummary {
    fn push(&mut self, path: PathBuf, computed: bool) {
        if computed {
            self.computed.push(path);
        } else {
            self.skipped.push(path);
        }
    }
}

pub fn load_network(network: &str, weights: &WeightSource) -> Result<Network, PipelineError> {
    let spec = NetworkSpec::resolve(network)?;
    let weights = match weights {
        WeightSource::File(path) => load_weights(&spec, &TensorContainer::load(path)?)?,
        WeightSource::Random(seed) => random_weights(&spec, *seed),
    };
    Ok(Network::new(spec, weights)?)
}

fn geometry(network: &Network) -> InputGeometry {
    let (c, h, w) = network.spec().input_dims();
    InputGeometry::new(c, h, w)
}

fn load_mean_file(path: &Path, geometry: InputGeometry) -> Result<Tensor, PipelineError> {
    let c = TensorContainer::load(path)?;
    let tensor = match c.get(MEAN_ENTRY) {
        Some(t) => t.clone(),
        None if c.len() == 1 => c.entries()[0].1.clone(),
        None => {
            return Err(PipelineError::Data(format!(
                "{}: expected a {MEAN_ENTRY:?} entry or a single tensor",
                path.display()
            )))
        }
    };
    if tensor.dims() != geometry.dims().as_slice() {
        return Err(PipelineError::Data(format!(
            "{}: mean image has dims {:?}, network input is {:?}",
            path.display(),
            tensor.dims(),
            geometry.dims()
        )));
    }
    Ok(tensor)
}

/// Dataset mean image, cached as `<cache>/mean_image.tnsr`. Clips are summed in
/// manifest order so the result does not depend on the worker count.
fn dataset_mean(
    manifest: &DatasetManifest,
    digests: &[String],
    geometry: InputGeometry,
    cache_dir: &Path,
) -> Result<Tensor, PipelineError> {
    let mut key = KeyBuilder::default().field("kind", "mean_image").field("geometry", format!("{:?}", geometry.dims()));
    for (r, d) in manifest.records().iter().zip(digests) {
        key = key.field("video", format!("{} {d}", r.id()));
    }
    let key = key.finish();
    let path = cache_dir.join("mean_image.tnsr");
    if is_fresh(&path, &key) {
        return load_mean_file(&path, geometry);
    }
    let plane_len: usize = geometry.dims().iter().product();
    let mut total = vec![0f64; plane_len];
    let mut count = 0u64;
    let chunk = rayon::current_num_threads().max(1);
    for records in manifest.records().chunks(chunk) {
        let partial = records
            .par_iter()
            .map(|r| {
                let clip = load_record(manifest, r).map_err(|e| PipelineError::from(e).for_video(r.id()))?;
                let mut sum = vec![0f64; plane_len];
                for frame in clip.frames() {
                    for (s, &v) in sum.iter_mut().zip(prepare_frame(frame, geometry)?.data()) {
                        *s += v as f64;
                    }
                }
                Ok((sum, clip.frame_count() as u64))
            })
            .collect::<Result<Vec<_>, PipelineError>>()?;
        for (sum, n) in partial {
            for (t, s) in total.iter_mut().zip(sum) {
                *t += s;
            }
            count += n;
        }
    }
    let mean = Tensor::new(
        geometry.dims(),
        total.iter().map(|&s| (s / count as f64) as f32).collect(),
    )?;
    let mut c = TensorContainer::new();
    c.insert(MEAN_ENTRY, mean.clone())?;
    store(&path, &c, &key)?;
    log::info!("mean image over {count} frames written to {}", path.display());
    Ok(mean)
}

fn check_finite(t: &TcofVector) -> Result<(), PipelineError> {
    if t.f.iter().chain(&t.u).chain(&t.v).all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(PipelineError::Numeric("descriptor contains NaN or infinity".into()))
    }
}

fn features(network: &Network, inputs: &[Tensor]) -> Result<Vec<Vec<f32>>, PipelineError> {
    inputs
        .iter()
        .map(|x| Ok(network.forward(x)?.into_data()))
        .collect()
}

fn tcof_for(
    network: &Network,
    clip: &VideoClip,
    variant: TcofVariant,
    tau: usize,
    mean: Option<&Tensor>,
) -> Result<TcofVector, PipelineError> {
    let inputs = match variant {
        TcofVariant::Spatial => spatial_inputs(clip, mean.expect("mean image is prepared for spatial runs"))?,
        _ => temporal_inputs(clip, tau, geometry(network))?,
    };
    let t = make_tcof(features(network, &inputs)?, variant)?;
    check_finite(&t)?;
    Ok(t)
}

/// Computes spatial and/or temporal descriptors for every manifest video.
/// `Combined` writes both the spatial and the temporal file; entries whose
/// key matches the current inputs are left untouched.
pub fn cmd_extract(cfg: &ExtractConfig) -> Result<ExtractSummary, PipelineError> {
    if cfg.tau == 0 {
        return Err(PipelineError::Usage("--tau must be at least 1".into()));
    }
    let pool = thread_pool(cfg.workers)?;
    let manifest = DatasetManifest::load(&cfg.manifest)?;
    let network = load_network(&cfg.network, &cfg.weights)?;
    let geometry = geometry(&network);
    let variants: Vec<TcofVariant> = match cfg.variant {
        TcofVariant::Combined => vec![TcofVariant::Spatial, TcofVariant::Temporal],
        v => vec![v],
    };

    pool.install(|| {
        let digests = manifest
            .records()
            .par_iter()
            .map(|r| video_digest(&manifest.video_path(r)).map_err(|e| e.for_video(r.id())))
            .collect::<Result<Vec<_>, _>>()?;

        let mean = if variants.contains(&TcofVariant::Spatial) {
            Some(match &cfg.mean {
                MeanSource::File(p) => load_mean_file(p, geometry)?,
                MeanSource::Dataset => dataset_mean(&manifest, &digests, geometry, &cfg.cache_dir)?,
            })
        } else {
            None
        };
        let mean_hash = mean.as_ref().map(|m| {
            let bytes: Vec<u8> = m.data().iter().flat_map(|v| v.to_le_bytes()).collect();
            KeyBuilder::default().bytes(&bytes).finish()
        });
        let base = KeyBuilder::default()
            .field("kind", "tcof")
            .field("network", network.spec().to_text())
            .field("weights", network.weights().content_hash())
            .field("subset", cfg.subset);

        let results = manifest
            .records()
            .par_iter()
            .zip(&digests)
            .map(|(record, digest)| {
                let id = record.id();
                let mut clip: Option<VideoClip> = None;
                let mut out = Vec::new();
                for &variant in &variants {
                    let path = cache_path(&cfg.cache_dir, id, variant.as_str());
                    let mut key = base.clone().field("variant", variant).field("video", digest);
                    key = match variant {
                        TcofVariant::Spatial => key.field("mean", mean_hash.as_deref().unwrap_or_default()),
                        _ => key.field("tau", cfg.tau),
                    };
                    let key = key.finish();
                    if is_fresh(&path, &key) {
                        out.push((path, false));
                        continue;
                    }
                    if clip.is_none() {
                        let full = load_record(&manifest, record)?;
                        clip = Some(select_frames(&full, cfg.subset));
                    }
                    let clip = clip.as_ref().expect("loaded above");
                    let t = tcof_for(&network, clip, variant, cfg.tau, mean.as_ref())?;
                    let tau = if variant == TcofVariant::Spatial { 0 } else { cfg.tau };
                    let meta = [clip.frame_count(), network.feature_dim(), tau];
                    store(&path, &tcof_container(&t, meta)?, &key)?;
                    out.push((path, true));
                }
                Ok(out)
            })
            .collect::<Vec<Result<_, PipelineError>>>();

        let mut summary = ExtractSummary::default();
        for (record, result) in manifest.records().iter().zip(results) {
            for (path, computed) in result.map_err(|e| e.for_video(record.id()))? {
                summary.push(path, computed);
            }
        }
        log::info!(
            "extract: {} computed, {} up to date",
            summary.computed.len(),
            summary.skipped.len()
        );
        Ok(summary)
    })
}

/// Writes `<cache>/<video id>.lbptop.tnsr` for every manifest video.
pub fn cmd_lbptop(cfg: &LbpConfig) -> Result<ExtractSummary, PipelineError> {
    let pool = thread_pool(cfg.workers)?;
    let manifest = DatasetManifest::load(&cfg.manifest)?;
    pool.install(|| {
        let results = manifest
            .records()
            .par_iter()
            .map(|record| {
                let path = cache_path(&cfg.cache_dir, record.id(), "lbptop");
                let key = KeyBuilder::default()
                    .field("kind", "lbptop")
                    .field("subset", cfg.subset)
                    .field("video", video_digest(&manifest.video_path(record))?)
                    .finish();
                if is_fresh(&path, &key) {
                    return Ok((path, false));
                }
                let clip = select_frames(&load_record(&manifest, record)?, cfg.subset);
                let descriptor = lbp_top(&gray_volume(&clip))?;
                let mut c = TensorContainer::new();
                c.insert("lbptop", Tensor::vector(descriptor.to_vec()))?;
                store(&path, &c, &key)?;
                Ok((path, true))
            })
            .collect::<Vec<Result<_, PipelineError>>>();
        let mut summary = ExtractSummary::default();
        for (record, result) in manifest.records().iter().zip(results) {
            let (path, computed) = result.map_err(|e| e.for_video(record.id()))?;
            summary.push(path, computed);
        }
        log::info!(
            "lbptop: {} computed, {} up to date",
            summary.computed.len(),
            summary.skipped.len()
        );
        Ok(summary)
    })
}
