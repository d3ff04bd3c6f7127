use std::fmt;
use std::str::FromStr;

use crate::tensor::{bilinear_resize, Tensor};

use super::{IngestError, VideoClip};

/// Which leading frames of a clip to keep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum FrameSubset {
    First,
    /// The first `max(1, floor(N / denominator))` frames.
    Fraction(usize),
    #[default]
    All,
}

impl FrameSubset {
    pub fn selected_count(&self, n: usize) -> usize {
        match *self {
            FrameSubset::First => 1.min(n),
            FrameSubset::Fraction(den) => (n / den.max(1)).max(1).min(n),
            FrameSubset::All => n,
        }
    }
}

impl fmt::Display for FrameSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FrameSubset::First => write!(f, "first"),
            FrameSubset::Fraction(d) => write!(f, "n/{d}"),
            FrameSubset::All => write!(f, "all"),
        }
    }
}

impl FromStr for FrameSubset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "first" | "1st" => Ok(FrameSubset::First),
            "all" | "n" => Ok(FrameSubset::All),
            other => {
                let den = other
                    .strip_prefix("n/")
                    .and_then(|d| d.parse::<usize>().ok())
                    .filter(|&d| matches!(d, 2 | 4 | 8))
                    .ok_or_else(|| format!("unknown frame subset {s:?}; use first, n/8, n/4, n/2 or all"))?;
                Ok(FrameSubset::Fraction(den))
            }
        }
    }
}

pub fn select_frames(clip: &VideoClip, subset: FrameSubset) -> VideoClip {
    let keep = subset.selected_count(clip.frame_count());
    clip.with_frames(clip.frames()[..keep].to_vec())
}

/// Channel count and spatial size the network expects.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InputGeometry {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl InputGeometry {
    pub fn new(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
        }
    }

    pub fn dims(&self) -> Vec<usize> {
        vec![self.channels, self.height, self.width]
    }

    fn from_dims(dims: &[usize]) -> Result<Self, IngestError> {
        match *dims {
            [c, h, w] => Ok(Self::new(c, h, w)),
            _ => Err(IngestError::Config(format!("mean image must be [C, H, W], got {dims:?}"))),
        }
    }
}

/// Maps a frame's channels onto `channels`: 3 -> 1 averages, 1 -> 3 replicates.
fn adapt_channels(frame: &Tensor, channels: usize) -> Result<Tensor, IngestError> {
    let (c, h, w) = frame.chw("adapt_channels")?;
    if c == channels {
        return Ok(frame.clone());
    }
    let plane = h * w;
    let src = frame.data();
    let data = match (c, channels) {
        (3, 1) => (0..plane)
            .map(|i| ((src[i] as f64 + src[plane + i] as f64 + src[2 * plane + i] as f64) / 3.0) as f32)
            .collect(),
        (1, 3) => src.iter().chain(src).chain(src).copied().collect(),
        _ => {
            return Err(IngestError::Config(format!(
                "cannot map {c}-channel frames onto a {channels}-channel network input"
            )))
        }
    };
    Ok(Tensor::new(vec![channels, h, w], data)?)
}

/// Channel adaptation followed by bilinear resize to the network geometry.
pub fn prepare_frame(frame: &Tensor, geometry: InputGeometry) -> Result<Tensor, IngestError> {
    let adapted = adapt_channels(frame, geometry.channels)?;
    if adapted.dims()[1..] == [geometry.height, geometry.width] {
        return Ok(adapted);
    }
    Ok(bilinear_resize(&adapted, geometry.height, geometry.width)?)
}

/// Spatial-variant network inputs: each frame resized to the mean image's
/// geometry, minus the mean image. One input per frame, in order.
pub fn spatial_inputs(clip: &VideoClip, mean_image: &Tensor) -> Result<Vec<Tensor>, IngestError> {
    let geometry = InputGeometry::from_dims(mean_image.dims())?;
    if !mean_image.is_finite() {
        return Err(IngestError::Config("mean image has non-finite values".into()));
    }
    clip.frames()
        .iter()
        .map(|f| Ok(prepare_frame(f, geometry)?.sub(mean_image)?))
        .collect()
}

/// Temporal-variant network inputs: `prepare(frame[i + tau]) - prepare(frame[i])`
/// for `i in 0..N - tau`. No mean image is subtracted.
pub fn temporal_inputs(clip: &VideoClip, tau: usize, geometry: InputGeometry) -> Result<Vec<Tensor>, IngestError> {
    let n = clip.frame_count();
    if tau == 0 || tau >= n {
        return Err(IngestError::Config(format!(
            "tau={tau} needs 1 <= tau <= N-1, clip {} has N={n}",
            clip.id()
        )));
    }
    let prepared = clip
        .frames()
        .iter()
        .map(|f| prepare_frame(f, geometry))
        .collect::<Result<Vec<_>, _>>()?;
    (0..n - tau)
        .map(|i| Ok(prepared[i + tau].sub(&prepared[i])?))
        .collect()
}

/// Streaming pixelwise mean over prepared frames, accumulated in `f64`.
#[derive(Clone, Debug)]
pub struct MeanImageAccumulator {
    geometry: InputGeometry,
    sum: Vec<f64>,
    count: u64,
}

impl MeanImageAccumulator {
    pub fn new(geometry: InputGeometry) -> Self {
        Self {
            geometry,
            sum: vec![0.0; geometry.channels * geometry.height * geometry.width],
            count: 0,
        }
    }

    pub fn add_clip(&mut self, clip: &VideoClip) -> Result<(), IngestError> {
        for frame in clip.frames() {
            let p = prepare_frame(frame, self.geometry)?;
            for (s, &v) in self.sum.iter_mut().zip(p.data()) {
                *s += v as f64;
            }
            self.count += 1;
        }
        Ok(())
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn finish(&self) -> Result<Tensor, IngestError> {
        if self.count == 0 {
            return Err(IngestError::Config("mean image over zero frames".into()));
        }
        let n = self.count as f64;
        Ok(Tensor::new(
            self.geometry.dims(),
            self.sum.iter().map(|&s| (s / n) as f32).collect(),
        )?)
    }
}

/// Pixelwise mean of every prepared frame of every clip (frame-weighted).
pub fn compute_mean_image<'a>(
    clips: impl IntoIterator<Item = &'a VideoClip>,
    geometry: InputGeometry,
) -> Result<Tensor, IngestError> {
    let mut acc = MeanImageAccumulator::new(geometry);
    for clip in clips {
        acc.add_clip(clip)?;
    }
    acc.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clip_of(values: &[f32], dims: [usize; 3]) -> VideoClip {
        let frames = values
            .iter()
            .map(|&v| Tensor::filled(dims.to_vec(), v))
            .collect();
        VideoClip::new("v", "c", frames).unwrap()
    }

    #[test]
    fn subset_counts() {
        assert_eq!(FrameSubset::Fraction(8).selected_count(16), 2);
        assert_eq!(FrameSubset::Fraction(8).selected_count(3), 1);
        assert_eq!(FrameSubset::First.selected_count(9), 1);
        assert_eq!(FrameSubset::All.selected_count(9), 9);
        let clip = clip_of(&[0.0; 16], [3, 2, 2]);
        assert_eq!(select_frames(&clip, FrameSubset::Fraction(8)).frame_count(), 2);
        assert_eq!(select_frames(&clip, FrameSubset::All), clip);
        for s in ["first", "n/8", "n/4", "n/2", "all"] {
            assert_eq!(s.parse::<FrameSubset>().unwrap().to_string(), s);
        }
        assert!("n/3".parse::<FrameSubset>().is_err());
    }

    #[test]
    fn spatial_self_subtraction_and_constants() {
        let g = InputGeometry::new(3, 8, 8);
        let clip = clip_of(&[0.5, 0.5], [3, 5, 7]);
        let mean = Tensor::filled(g.dims(), 0.2);
        let inputs = spatial_inputs(&clip, &mean).unwrap();
        assert_eq!(inputs.len(), 2);
        for t in &inputs {
            assert_eq!(t.dims(), &[3, 8, 8]);
            assert!(t.data().iter().all(|&v| (v - 0.3).abs() < 1e-6));
        }
        let same = clip_of(&[0.25], [3, 8, 8]);
        let zero = spatial_inputs(&same, &same.frames()[0]).unwrap();
        assert!(zero[0].data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn temporal_counts_and_ramp() {
        let g = InputGeometry::new(3, 4, 4);
        let c = 0.0625;
        let ramp: Vec<f32> = (0..10).map(|i| i as f32 * c).collect();
        let inputs = temporal_inputs(&clip_of(&ramp, [3, 4, 4]), 3, g).unwrap();
        assert_eq!(inputs.len(), 7);
        for t in &inputs {
            assert!(t.data().iter().all(|&v| (v - 3.0 * c).abs() < 1e-6));
        }
        let constant = temporal_inputs(&clip_of(&[0.4; 6], [3, 4, 4]), 2, g).unwrap();
        assert_eq!(constant.len(), 4);
        assert!(constant.iter().all(|t| t.data().iter().all(|&v| v == 0.0)));
        assert!(temporal_inputs(&clip_of(&[0.0; 3], [3, 4, 4]), 3, g).is_err());
        assert!(temporal_inputs(&clip_of(&[0.0; 3], [3, 4, 4]), 0, g).is_err());
    }

    #[test]
    fn gray_network_input_averages_channels() {
        let frame = Tensor::new(vec![3, 1, 1], vec![0.3, 0.6, 0.9]).unwrap();
        let p = prepare_frame(&frame, InputGeometry::new(1, 1, 1)).unwrap();
        assert!((p.data()[0] - 0.6).abs() < 1e-7);
    }

    #[test]
    fn mean_image_weighted_average() {
        let g = InputGeometry::new(3, 4, 4);
        let a = clip_of(&[0.0, 0.0, 0.0], [3, 6, 6]);
        let b = clip_of(&[1.0, 1.0, 1.0], [3, 6, 6]);
        let m = compute_mean_image([&a, &b], g).unwrap();
        assert!(m.data().iter().all(|&v| (v - 0.5).abs() < 1e-7));
        let c = clip_of(&[0.7; 4], [3, 3, 3]);
        let m = compute_mean_image([&c], g).unwrap();
        assert!(m.data().iter().all(|&v| (v - 0.7).abs() < 1e-6));
    }
}
