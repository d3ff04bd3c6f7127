//! Forward-only ConvNet: a validated layer graph, its parameters, and the
//! per-frame feature extractor.

mod spec;
mod weights;

pub use spec::{parse_network_spec, ConvLayer, Layer, NetworkSpec, Shape};
pub use weights::{bias_name, load_weights, random_weights, validate_weights, weight_name, LayerParams, WeightSet};

use thiserror::Error;

use crate::tensor::{self, Tensor, TensorError};

#[derive(Debug, Error)]
pub enum ConvNetError {
    #[error("network spec line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("weights: missing entry {0}")]
    MissingWeight(String),
    #[error("weights: {name} has dims {actual:?}, expected {expected:?}")]
    WeightDims {
        name: String,
        expected: Vec<usize>,
        actual: Vec<usize>,
    },
    #[error("frame dims {actual:?} do not match network input {expected:?}")]
    InputDims {
        expected: Vec<usize>,
        actual: Vec<usize>,
    },
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// A spec together with weights that have been checked against it.
///
/// Immutable after construction; `forward` may be called from many threads.
#[derive(Clone, Debug)]
pub struct Network {
    spec: NetworkSpec,
    weights: WeightSet,
}

impl Network {
    pub fn new(spec: NetworkSpec, weights: WeightSet) -> Result<Self, ConvNetError> {
        validate_weights(&spec, &weights)?;
        Ok(Self { spec, weights })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn weights(&self) -> &WeightSet {
        &self.weights
    }

    pub fn feature_dim(&self) -> usize {
        self.spec.feature_dim()
    }

    pub fn forward(&self, frame: &Tensor) -> Result<Tensor, ConvNetError> {
        forward(&self.spec, &self.weights, frame)
    }
}

/// Runs `frame` through every layer and returns the flattened final
/// activation (length `spec.feature_dim()`).
pub fn forward(spec: &NetworkSpec, weights: &WeightSet, frame: &Tensor) -> Result<Tensor, ConvNetError> {
    let (c, h, w) = spec.input_dims();
    if frame.dims() != [c, h, w] {
        return Err(ConvNetError::InputDims {
            expected: vec![c, h, w],
            actual: frame.dims().to_vec(),
        });
    }
    let mut x = frame.clone();
    for (idx, layer) in spec.layers().iter().enumerate() {
        let params = || {
            weights
                .get(idx)
                .ok_or_else(|| ConvNetError::MissingWeight(weight_name(idx)))
        };
        x = match layer {
            Layer::Conv(cv) => {
                let p = params()?;
                tensor::conv2d(&x, &p.weight, &p.bias, cv.stride, cv.pad, cv.groups)?
            }
            Layer::Relu => tensor::relu(&x),
            Layer::Lrn(lp) => tensor::lrn(&x, *lp)?,
            Layer::MaxPool { kernel, stride } => tensor::maxpool2d(&x, *kernel, *stride)?,
            Layer::Fc { .. } => {
                let p = params()?;
                tensor::fully_connected(&x, &p.weight, &p.bias)?
            }
        };
    }
    let d = x.len();
    Ok(x.reshape(vec![d])?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::LrnParams;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_frame_gives_zero_features_with_random_weights() {
        let spec = NetworkSpec::test_topology();
        let w = random_weights(&spec, 3);
        let out = forward(&spec, &w, &Tensor::zeros(vec![1, 32, 32])).unwrap();
        assert_eq!(out.dims(), &[16]);
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identical_frames_identical_features() {
        let spec = NetworkSpec::test_topology();
        let net = Network::new(spec.clone(), random_weights(&spec, 3)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let frame = Tensor::new(vec![1, 32, 32], (0..1024).map(|_| rng.random()).collect()).unwrap();
        let a = net.forward(&frame).unwrap();
        let b = net.forward(&frame.clone()).unwrap();
        let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn wrong_frame_dims_is_shape_error() {
        let spec = NetworkSpec::test_topology();
        let w = random_weights(&spec, 3);
        assert!(matches!(
            forward(&spec, &w, &Tensor::zeros(vec![3, 32, 32])),
            Err(ConvNetError::InputDims { .. })
        ));
    }

    #[test]
    fn matches_layer_by_layer_composition() {
        let spec = parse_network_spec(
            "input 1 6 6\nconv out=3 k=3 stride=1 pad=1\nrelu\nlrn\nmaxpool k=2 stride=2\nfc out=4\n",
        )
        .unwrap();
        let w = random_weights(&spec, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let frame = Tensor::new(vec![1, 6, 6], (0..36).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let c = w.get(0).unwrap();
        let f = w.get(4).unwrap();
        let x = tensor::conv2d(&frame, &c.weight, &c.bias, 1, 1, 1).unwrap();
        let x = tensor::relu(&x);
        let x = tensor::lrn(&x, LrnParams::default()).unwrap();
        let x = tensor::maxpool2d(&x, 2, 2).unwrap();
        let x = tensor::fully_connected(&x, &f.weight, &f.bias).unwrap();
        let out = forward(&spec, &w, &frame).unwrap();
        for (a, b) in out.data().iter().zip(x.data()) {
            assert!((a - b).abs() <= 1e-5 * b.abs().max(1.0));
        }
    }
}
