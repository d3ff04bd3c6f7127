//! Seeded synthetic dataset: class `k` of `K` has base intensity
//! `(k + 1) / (K + 1)`, a class-specific linear drift over time centred on
//! the middle frame, and uniform pixel noise.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ingest::write_frame;
use crate::tensor::Tensor;

use super::{io_err, PipelineError};

/// Half-width of the uniform pixel noise.
pub const NOISE: f64 = 0.05;

#[derive(Clone, Debug)]
pub struct SynthConfig {
    pub out_dir: PathBuf,
    pub classes: usize,
    pub videos_per_class: usize,
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub seed: u64,
    pub force: bool,
}

impl SynthConfig {
    pub fn class_name(k: usize) -> String {
        format!("class{k:02}")
    }

    /// Per-frame drift of class `k`: evenly spaced in `[-r, r]`, with `r` small
    /// enough that drift plus noise stays within half the gap between bases.
    pub fn drift_rate(&self, k: usize) -> f64 {
        if self.classes < 2 || self.frames < 2 {
            return 0.0;
        }
        let half_gap = 0.5 / (self.classes + 1) as f64;
        let r = (half_gap - NOISE).max(0.0) * 2.0 / (self.frames - 1) as f64;
        r * (2.0 * k as f64 / (self.classes - 1) as f64 - 1.0)
    }

    pub fn base_intensity(&self, k: usize) -> f64 {
        (k + 1) as f64 / (self.classes + 1) as f64
    }
}

fn frame_rng(seed: u64, class: usize, video: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((class as u64) << 32) | video as u64);
    rng
}

/// Writes `classNN/vidNNN/frame_NNNN.ppm` files and `manifest.tsv` under
/// `out_dir`; returns the manifest path.
pub fn cmd_synth(cfg: &SynthConfig) -> Result<PathBuf, PipelineError> {
    for (name, v) in [
        ("--classes", cfg.classes),
        ("--videos-per-class", cfg.videos_per_class),
        ("--frames", cfg.frames),
        ("--height", cfg.height),
        ("--width", cfg.width),
    ] {
        if v == 0 {
            return Err(PipelineError::Usage(format!("{name} must be at least 1")));
        }
    }
    let out = &cfg.out_dir;
    if out.exists() && !cfg.force {
        let non_empty = fs::read_dir(out).map_err(|e| io_err(out, e))?.next().is_some();
        if non_empty {
            return Err(PipelineError::Usage(format!(
                "{} is not empty; pass --force to write into it",
                out.display()
            )));
        }
    }
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;

    let (h, w, f) = (cfg.height, cfg.width, cfg.frames);
    let mut manifest = String::new();
    for k in 0..cfg.classes {
        let class = SynthConfig::class_name(k);
        let (base, drift) = (cfg.base_intensity(k), cfg.drift_rate(k));
        for v in 0..cfg.videos_per_class {
            let rel = format!("{class}/vid{v:03}");
            let dir = out.join(&rel);
            fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
            let mut rng = frame_rng(cfg.seed, k, v);
            for t in 0..f {
                let level = base + drift * (t as f64 - (f - 1) as f64 / 2.0);
                let data = (0..3 * h * w)
                    .map(|_| (level + rng.random_range(-NOISE..NOISE)).clamp(0.0, 1.0) as f32)
                    .collect();
                let frame = Tensor::new(vec![3, h, w], data)?;
                write_frame(&dir.join(format!("frame_{t:04}.ppm")), &frame)?;
            }
            manifest.push_str(&format!("{rel}\t{class}\n"));
        }
    }
    let path = out.join("manifest.tsv");
    fs::write(&path, manifest).map_err(|e| io_err(&path, e))?;
    log::info!(
        "synth: {} videos of {f} frames in {}",
        cfg.classes * cfg.videos_per_class,
        out.display()
    );
    Ok(path)
}

/// Mean over all frame pixels of one synthetic video directory.
pub fn video_mean_intensity(dir: &Path) -> Result<f64, PipelineError> {
    let clip = crate::ingest::load_frames(dir, "", "")?;
    let (sum, n) = clip
        .frames()
        .iter()
        .flat_map(|fr| fr.data())
        .fold((0.0, 0usize), |(s, n), &v| (s + v as f64, n + 1));
    Ok(sum / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(dir: &Path) -> SynthConfig {
        SynthConfig {
            out_dir: dir.to_path_buf(),
            classes: 3,
            videos_per_class: 2,
            frames: 4,
            height: 6,
            width: 5,
            seed: 7,
            force: false,
        }
    }

    #[test]
    fn drift_keeps_classes_apart() {
        let c = SynthConfig { frames: 10, ..cfg(Path::new("x")) };
        assert_eq!(c.drift_rate(1), 0.0);
        assert!((c.drift_rate(0) + c.drift_rate(2)).abs() < 1e-15);
        let excursion = c.drift_rate(2).abs() * 4.5 + NOISE;
        assert!(excursion <= 0.5 / 4.0 + 1e-12);
    }

    #[test]
    fn layout_and_refusal() {
        let tmp = tempfile::tempdir().unwrap();
        let out = tmp.path().join("d");
        let manifest = cmd_synth(&cfg(&out)).unwrap();
        let text = fs::read_to_string(&manifest).unwrap();
        assert_eq!(text.lines().count(), 6);
        assert!(text.starts_with("class00/vid000\tclass00\n"));
        assert!(out.join("class02/vid001/frame_0003.ppm").is_file());
        assert!(matches!(cmd_synth(&cfg(&out)), Err(PipelineError::Usage(_))));
        assert!(cmd_synth(&SynthConfig { force: true, ..cfg(&out) }).is_ok());
    }

    #[test]
    fn class_means_separated() {
        let tmp = tempfile::tempdir().unwrap();
        cmd_synth(&cfg(tmp.path())).unwrap();
        let m0 = video_mean_intensity(&tmp.path().join("class00/vid000")).unwrap();
        let m1 = video_mean_intensity(&tmp.path().join("class01/vid000")).unwrap();
        assert!(m1 - m0 >= 0.25 - NOISE, "{m0} {m1}");
    }
}
