//! LBP-TOP: 8-neighbor, radius-1 local binary pattern histograms on the XY,
//! XT and YT planes of a gray video volume, and the χ² histogram distance.

use thiserror::Error;

use crate::ingest::VideoClip;
use crate::tensor::Tensor;

pub const BINS: usize = 256;
pub const DESCRIPTOR_LEN: usize = 3 * BINS;

#[derive(Debug, Error, PartialEq)]
pub enum LbpError {
    #[error("volume must be [T, H, W] with every dim >= 3, got {0:?}")]
    VolumeDims(Vec<usize>),
    #[error("histograms differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("histogram entry {index} is negative ({value})")]
    NegativeEntry { index: usize, value: f64 },
    #[error("descriptor must have {DESCRIPTOR_LEN} entries, got {0}")]
    DescriptorLen(usize),
}

/// Code of a 3×3 patch. Bit `b` is set when neighbor `b` is `>=` the center;
/// neighbors run counterclockwise starting east: E, NE, N, NW, W, SW, S, SE.
pub fn lbp_code(p: &[[f32; 3]; 3]) -> u8 {
    let center = p[1][1];
    let neighbors = [p[1][2], p[0][2], p[0][1], p[0][0], p[1][0], p[2][0], p[2][1], p[2][2]];
    neighbors
        .iter()
        .enumerate()
        .fold(0u8, |code, (b, &n)| if n >= center { code | (1 << b) } else { code })
}

/// Per-plane histograms, each summing to 1.
#[derive(Clone, Debug, PartialEq)]
pub struct LbpTopDescriptor {
    pub hist_xy: Vec<f32>,
    pub hist_xt: Vec<f32>,
    pub hist_yt: Vec<f32>,
}

impl LbpTopDescriptor {
    /// `[xy; xt; yt]`, 768 entries.
    pub fn to_vec(&self) -> Vec<f32> {
        self.hist_xy
            .iter()
            .chain(&self.hist_xt)
            .chain(&self.hist_yt)
            .copied()
            .collect()
    }

    pub fn from_slice(v: &[f32]) -> Result<Self, LbpError> {
        if v.len() != DESCRIPTOR_LEN {
            return Err(LbpError::DescriptorLen(v.len()));
        }
        Ok(Self {
            hist_xy: v[..BINS].to_vec(),
            hist_xt: v[BINS..2 * BINS].to_vec(),
            hist_yt: v[2 * BINS..].to_vec(),
        })
    }

    pub fn planes(&self) -> [&[f32]; 3] {
        [&self.hist_xy, &self.hist_xt, &self.hist_yt]
    }
}

fn volume_dims(volume: &Tensor) -> Result<(usize, usize, usize), LbpError> {
    match *volume.dims() {
        [t, h, w] if t >= 3 && h >= 3 && w >= 3 => Ok((t, h, w)),
        _ => Err(LbpError::VolumeDims(volume.dims().to_vec())),
    }
}

/// Raw code counts `[xy, xt, yt]` over all interior voxels.
pub fn lbp_top_counts(volume: &Tensor) -> Result<[[u64; BINS]; 3], LbpError> {
    let (t_len, h, w) = volume_dims(volume)?;
    let v = volume.data();
    let at = |t: usize, y: usize, x: usize| v[(t * h + y) * w + x];
    let mut counts = [[0u64; BINS]; 3];
    let mut patch = [[0f32; 3]; 3];
    for t in 1..t_len - 1 {
        for y in 1..h - 1 {
            for x in 1..w - 1 {
                // XY: rows along y, columns along x.
                for (r, row) in patch.iter_mut().enumerate() {
                    for (c, cell) in row.iter_mut().enumerate() {
                        *cell = at(t, y + r - 1, x + c - 1);
                    }
                }
                counts[0][lbp_code(&patch) as usize] += 1;
                // XT: rows along t, columns along x.
                for (r, row) in patch.iter_mut().enumerate() {
                    for (c, cell) in row.iter_mut().enumerate() {
                        *cell = at(t + r - 1, y, x + c - 1);
                    }
                }
                counts[1][lbp_code(&patch) as usize] += 1;
                // YT: rows along t, columns along y.
                for (r, row) in patch.iter_mut().enumerate() {
                    for (c, cell) in row.iter_mut().enumerate() {
                        *cell = at(t + r - 1, y + c - 1, x);
                    }
                }
                counts[2][lbp_code(&patch) as usize] += 1;
            }
        }
    }
    Ok(counts)
}

pub fn lbp_top(volume: &Tensor) -> Result<LbpTopDescriptor, LbpError> {
    let counts = lbp_top_counts(volume)?;
    let norm = |c: &[u64; BINS]| {
        let total: u64 = c.iter().sum();
        c.iter().map(|&n| (n as f64 / total as f64) as f32).collect::<Vec<_>>()
    };
    Ok(LbpTopDescriptor {
        hist_xy: norm(&counts[0]),
        hist_xt: norm(&counts[1]),
        hist_yt: norm(&counts[2]),
    })
}

/// `[T, H, W]` gray volume of a clip, averaging channels per pixel.
pub fn gray_volume(clip: &VideoClip) -> Tensor {
    let dims = clip.frames()[0].dims();
    let (c, plane) = (dims[0], dims[1] * dims[2]);
    let mut data = Vec::with_capacity(clip.frame_count() * plane);
    for frame in clip.frames() {
        let src = frame.data();
        data.extend((0..plane).map(|i| {
            let sum: f64 = (0..c).map(|ch| src[ch * plane + i] as f64).sum();
            (sum / c as f64) as f32
        }));
    }
    Tensor::new(vec![clip.frame_count(), dims[1], dims[2]], data).expect("clip frames share dims")
}

/// `Σ (a_i - b_i)² / (a_i + b_i)`, skipping terms with `a_i + b_i = 0`.
pub fn chi2_distance(a: &[f32], b: &[f32]) -> Result<f64, LbpError> {
    if a.len() != b.len() {
        return Err(LbpError::LengthMismatch(a.len(), b.len()));
    }
    let mut sum = 0.0;
    for (i, (&x, &y)) in a.iter().zip(b).enumerate() {
        for v in [x, y] {
            if v < 0.0 {
                return Err(LbpError::NegativeEntry {
                    index: i,
                    value: v as f64,
                });
            }
        }
        let (x, y) = (x as f64, y as f64);
        if x + y > 0.0 {
            sum += (x - y) * (x - y) / (x + y);
        }
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn code_examples() {
        assert_eq!(lbp_code(&[[5.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 9.0]]), 136);
        assert_eq!(lbp_code(&[[0.3; 3]; 3]), 255);
        let mut p = [[0.0; 3]; 3];
        p[1][1] = 1.0;
        assert_eq!(lbp_code(&p), 0);
        // East neighbor alone is bit 0.
        p[1][2] = 2.0;
        assert_eq!(lbp_code(&p), 1);
    }

    #[test]
    fn constant_volume_is_point_mass() {
        let d = lbp_top(&Tensor::filled(vec![4, 5, 6], 0.7)).unwrap();
        for plane in d.planes() {
            assert_eq!(plane[255], 1.0);
            assert_eq!(plane.iter().sum::<f32>(), 1.0);
        }
    }

    #[test]
    fn small_volume_rejected() {
        assert!(lbp_top(&Tensor::zeros(vec![2, 5, 5])).is_err());
        assert!(lbp_top(&Tensor::zeros(vec![5, 5])).is_err());
    }

    #[test]
    fn xt_plane_sees_time() {
        // Intensity increasing with t only: XY codes are all 255, XT and YT
        // set exactly the three neighbors from t+1 plus the two same-time ties.
        let data: Vec<f32> = (0..5 * 4 * 4).map(|i| (i / 16) as f32).collect();
        let c = lbp_top_counts(&Tensor::new(vec![5, 4, 4], data).unwrap()).unwrap();
        assert_eq!(c[0][255], 3 * 2 * 2);
        // Row 2 of the patch is t+1: bits SW(5), S(6), SE(7); row 1 ties: E(0), W(4).
        let expected = (1 << 0) | (1 << 4) | (1 << 5) | (1 << 6) | (1 << 7);
        assert_eq!(c[1][expected], 12);
        assert_eq!(c[2][expected], 12);
    }

    #[test]
    fn chi2_cases() {
        assert_eq!(chi2_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 2.0);
        assert_eq!(chi2_distance(&[0.0, 0.0], &[0.0, 0.0]).unwrap(), 0.0);
        assert!(matches!(
            chi2_distance(&[1.0, -0.5], &[0.0, 1.0]),
            Err(LbpError::NegativeEntry { index: 1, .. })
        ));
        assert!(chi2_distance(&[1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn gray_volume_averages() {
        let f = Tensor::new(vec![3, 1, 2], vec![0.0, 0.3, 0.3, 0.6, 0.6, 0.9]).unwrap();
        let clip = VideoClip::new("v", "c", vec![f.clone(), f]).unwrap();
        let g = gray_volume(&clip);
        assert_eq!(g.dims(), &[2, 1, 2]);
        assert!((g.data()[0] - 0.3).abs() < 1e-7 && (g.data()[1] - 0.6).abs() < 1e-7);
    }

    proptest! {
        #[test]
        fn chi2_symmetric_nonnegative(pairs in prop::collection::vec((0.0f32..1.0, 0.0f32..1.0), 1..40)) {
            let (a, b): (Vec<f32>, Vec<f32>) = pairs.into_iter().unzip();
            let d = chi2_distance(&a, &b).unwrap();
            prop_assert!(d >= 0.0);
            prop_assert_eq!(d, chi2_distance(&b, &a).unwrap());
            prop_assert_eq!(chi2_distance(&a, &a).unwrap(), 0.0);
        }

        #[test]
        fn plane_totals(t in 3usize..7, h in 3usize..7, w in 3usize..7, seed in any::<u32>()) {
            let data: Vec<f32> = (0..t * h * w).map(|i| ((i as u32).wrapping_mul(2654435761).wrapping_add(seed) % 7) as f32).collect();
            let c = lbp_top_counts(&Tensor::new(vec![t, h, w], data).unwrap()).unwrap();
            let interior = ((t - 2) * (h - 2) * (w - 2)) as u64;
            for plane in &c {
                prop_assert_eq!(plane.iter().sum::<u64>(), interior);
            }
        }
    }
}
