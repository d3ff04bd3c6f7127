//! First- and second-order statistics over frame-level features.
//!
//! A video with frame features `x_1..x_N` is summarised by the mean `u`, the
//! per-dimension population variance `v` (the diagonal of the `1/N`
//! covariance), and `f = [u; v]` scaled to unit L2 norm.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PoolingError {
    #[error("feature has length {got}, accumulator expects {expected}")]
    DimMismatch { expected: usize, got: usize },
    #[error("cannot pool an empty feature sequence")]
    Empty,
    #[error("cannot combine {0} with {1}; need one spatial and one temporal vector")]
    VariantMismatch(TcofVariant, TcofVariant),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TcofVariant {
    Spatial,
    Temporal,
    Combined,
}

impl TcofVariant {
    pub fn as_str(&self) -> &'static str {
        match self {
            TcofVariant::Spatial => "spatial",
            TcofVariant::Temporal => "temporal",
            TcofVariant::Combined => "combined",
        }
    }
}

impl fmt::Display for TcofVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TcofVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "spatial" | "s" => Ok(TcofVariant::Spatial),
            "temporal" | "t" => Ok(TcofVariant::Temporal),
            "combined" | "st" => Ok(TcofVariant::Combined),
            _ => Err(format!("unknown variant {s:?}")),
        }
    }
}

/// Welford running mean and sum of squared deviations per dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct StatsAccumulator {
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl StatsAccumulator {
    pub fn new(dim: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn running_mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn running_m2(&self) -> &[f64] {
        &self.m2
    }

    pub fn accumulate(&mut self, x: &[f32]) -> Result<(), PoolingError> {
        if x.len() != self.dim() {
            return Err(PoolingError::DimMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        self.count += 1;
        let n = self.count as f64;
        for ((mean, m2), &xi) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let xi = xi as f64;
            let delta = xi - *mean;
            *mean += delta / n;
            *m2 += delta * (xi - *mean);
        }
        Ok(())
    }

    /// Chan et al. pairwise merge of two partial accumulators.
    pub fn merge(&mut self, other: &StatsAccumulator) -> Result<(), PoolingError> {
        if other.dim() != self.dim() {
            return Err(PoolingError::DimMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        if other.count == 0 {
            return Ok(());
        }
        if self.count == 0 {
            *self = other.clone();
            return Ok(());
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        for i in 0..self.dim() {
            let delta = other.mean[i] - self.mean[i];
            self.mean[i] += delta * nb / n;
            self.m2[i] += other.m2[i] + delta * delta * na * nb / n;
        }
        self.count += other.count;
        Ok(())
    }

    /// `(u, v)`: the mean and the population variance `M2 / N`.
    pub fn finalize(&self) -> Result<(Vec<f32>, Vec<f32>), PoolingError> {
        if self.count == 0 {
            return Err(PoolingError::Empty);
        }
        let n = self.count as f64;
        let u = self.mean.iter().map(|&m| m as f32).collect();
        let v = self.m2.iter().map(|&m2| (m2.max(0.0) / n) as f32).collect();
        Ok((u, v))
    }
}

/// `x / ||x||_2`, or `x` unchanged when the norm is at most `1e-12`.
pub fn l2_normalize(x: &[f32]) -> Vec<f32> {
    let norm = x.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt();
    if norm <= 1e-12 {
        return x.to_vec();
    }
    x.iter().map(|&v| (v as f64 / norm) as f32).collect()
}

/// Video-level descriptor. For the combined variant `u`, `v` and `f` are the
/// spatial and temporal parts concatenated.
#[derive(Clone, Debug, PartialEq)]
pub struct TcofVector {
    pub variant: TcofVariant,
    pub u: Vec<f32>,
    pub v: Vec<f32>,
    pub f: Vec<f32>,
}

impl TcofVector {
    /// Frame-feature dimension `d`.
    pub fn feature_dim(&self) -> usize {
        match self.variant {
            TcofVariant::Combined => self.u.len() / 2,
            _ => self.u.len(),
        }
    }

    fn from_stats(acc: &StatsAccumulator, variant: TcofVariant) -> Result<Self, PoolingError> {
        let (u, v) = acc.finalize()?;
        let raw: Vec<f32> = u.iter().chain(&v).copied().collect();
        Ok(Self {
            variant,
            f: l2_normalize(&raw),
            u,
            v,
        })
    }
}

/// Pools frame-level features into a normalized descriptor.
pub fn make_tcof<I, F>(features: I, variant: TcofVariant) -> Result<TcofVector, PoolingError>
where
    I: IntoIterator<Item = F>,
    F: AsRef<[f32]>,
{
    let mut iter = features.into_iter().peekable();
    let dim = iter.peek().map(|x| x.as_ref().len()).ok_or(PoolingError::Empty)?;
    let mut acc = StatsAccumulator::new(dim);
    for x in iter {
        acc.accumulate(x.as_ref())?;
    }
    TcofVector::from_stats(&acc, variant)
}

/// Same as [`make_tcof`] but accumulates `shards` contiguous chunks
/// independently and merges them left to right.
pub fn make_tcof_sharded(features: &[Vec<f32>], shards: usize, variant: TcofVariant) -> Result<TcofVector, PoolingError> {
    let dim = features.first().ok_or(PoolingError::Empty)?.len();
    let chunk = features.len().div_ceil(shards.max(1));
    let mut total = StatsAccumulator::new(dim);
    for part in features.chunks(chunk.max(1)) {
        let mut acc = StatsAccumulator::new(dim);
        for x in part {
            acc.accumulate(x)?;
        }
        total.merge(&acc)?;
    }
    TcofVector::from_stats(&total, variant)
}

/// Concatenates a spatial and a temporal descriptor (in that order) without
/// renormalizing.
pub fn combine(s: &TcofVector, t: &TcofVector) -> Result<TcofVector, PoolingError> {
    if s.variant != TcofVariant::Spatial || t.variant != TcofVariant::Temporal {
        return Err(PoolingError::VariantMismatch(s.variant, t.variant));
    }
    if s.u.len() != t.u.len() {
        return Err(PoolingError::DimMismatch {
            expected: s.u.len(),
            got: t.u.len(),
        });
    }
    let cat = |a: &[f32], b: &[f32]| a.iter().chain(b).copied().collect::<Vec<_>>();
    Ok(TcofVector {
        variant: TcofVariant::Combined,
        u: cat(&s.u, &t.u),
        v: cat(&s.v, &t.v),
        f: cat(&s.f, &t.f),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn norm(x: &[f32]) -> f64 {
        x.iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt()
    }

    #[test]
    fn single_sample_has_zero_m2() {
        let mut acc = StatsAccumulator::new(3);
        acc.accumulate(&[1.0, -2.0, 0.5]).unwrap();
        assert_eq!(acc.running_mean(), &[1.0, -2.0, 0.5]);
        assert_eq!(acc.running_m2(), &[0.0; 3]);
    }

    #[test]
    fn two_sample_hand_case() {
        let mut acc = StatsAccumulator::new(2);
        acc.accumulate(&[0.0, 2.0]).unwrap();
        acc.accumulate(&[2.0, 0.0]).unwrap();
        assert_eq!(acc.running_mean(), &[1.0, 1.0]);
        assert_eq!(acc.running_m2(), &[2.0, 2.0]);
        let (u, v) = acc.finalize().unwrap();
        assert_eq!((u, v), (vec![1.0, 1.0], vec![1.0, 1.0]));
    }

    #[test]
    fn errors() {
        let mut acc = StatsAccumulator::new(2);
        assert_eq!(acc.finalize(), Err(PoolingError::Empty));
        assert!(acc.accumulate(&[1.0]).is_err());
        assert_eq!(make_tcof(Vec::<Vec<f32>>::new(), TcofVariant::Spatial), Err(PoolingError::Empty));
    }

    #[test]
    fn normalize_cases() {
        assert_eq!(l2_normalize(&[3.0, 4.0]), vec![0.6, 0.8]);
        assert_eq!(l2_normalize(&[0.0, 0.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn single_feature_and_constant_video() {
        let x = vec![0.5f32, 1.5, 0.0];
        let t = make_tcof([&x], TcofVariant::Spatial).unwrap();
        assert_eq!(t.f.len(), 6);
        let mut padded = x.clone();
        padded.extend([0.0; 3]);
        assert_eq!(t.f, l2_normalize(&padded));
        let same = make_tcof(vec![x.clone(); 7], TcofVariant::Temporal).unwrap();
        assert!(same.v.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn combine_rules() {
        let s = make_tcof([vec![1.0f32, 2.0], vec![0.0, 1.0]], TcofVariant::Spatial).unwrap();
        let t = make_tcof([vec![0.5f32, 0.0], vec![0.2, 1.0]], TcofVariant::Temporal).unwrap();
        let st = combine(&s, &t).unwrap();
        assert_eq!(st.f.len(), 8);
        assert_eq!(&st.f[..4], s.f.as_slice());
        assert!((norm(&st.f) - 2f64.sqrt()).abs() < 1e-6);
        assert!(combine(&s, &s).is_err());
        assert!(combine(&t, &s).is_err());
    }

    fn features() -> impl Strategy<Value = Vec<Vec<f32>>> {
        (1usize..10, 1usize..30).prop_flat_map(|(d, n)| {
            prop::collection::vec(prop::collection::vec(-10.0f32..10.0, d), n)
        })
    }

    proptest! {
        #[test]
        fn permutation_invariant(feats in features(), seed in any::<u64>()) {
            let a = make_tcof(&feats, TcofVariant::Spatial).unwrap();
            let mut shuffled = feats.clone();
            let n = shuffled.len();
            let mut s = seed;
            for i in (1..n).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                shuffled.swap(i, (s >> 33) as usize % (i + 1));
            }
            let b = make_tcof(&shuffled, TcofVariant::Spatial).unwrap();
            for (x, y) in a.f.iter().zip(&b.f) {
                prop_assert!((x - y).abs() <= 1e-6 * x.abs().max(1e-3));
            }
        }

        #[test]
        fn shard_merge_matches_sequential(feats in features(), shards in 1usize..6) {
            let a = make_tcof(&feats, TcofVariant::Spatial).unwrap();
            let b = make_tcof_sharded(&feats, shards, TcofVariant::Spatial).unwrap();
            for (x, y) in a.u.iter().chain(&a.v).zip(b.u.iter().chain(&b.v)) {
                prop_assert!((x - y).abs() <= 1e-6 * x.abs().max(1e-3));
            }
        }

        #[test]
        fn unit_norm_and_nonnegative_variance(feats in features()) {
            let t = make_tcof(&feats, TcofVariant::Temporal).unwrap();
            prop_assert!(t.v.iter().all(|&v| v >= -1e-9));
            if t.f.iter().any(|&v| v != 0.0) {
                prop_assert!((norm(&t.f) - 1.0).abs() <= 1e-6);
            }
        }

        #[test]
        fn positive_scaling_invariance(feats in features(), c in 0.1f32..10.0) {
            let a = make_tcof(&feats, TcofVariant::Spatial).unwrap();
            let scaled: Vec<Vec<f32>> = feats.iter().map(|x| x.iter().map(|v| v * c).collect()).collect();
            let b = make_tcof(&scaled, TcofVariant::Spatial).unwrap();
            // Rounding error scales with the input magnitude, not the output, since means can cancel.
            let m = scaled.iter().flatten().fold(1e-3f32, |acc, v| acc.max(v.abs()));
            for (x, y) in a.u.iter().zip(&b.u) {
                prop_assert!((x * c - y).abs() <= 1e-5 * m);
            }
            for (x, y) in a.v.iter().zip(&b.v) {
                prop_assert!((x * c * c - y).abs() <= 1e-4 * m * m);
            }
        }
    }
}
