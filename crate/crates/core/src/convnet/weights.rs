use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};

use crate::tensor::{Tensor, TensorContainer};

use super::spec::{Layer, NetworkSpec};
use super::ConvNetError;

/// Kernel/weight matrix and bias of one parameterized layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams {
    pub weight: Tensor,
    pub bias: Tensor,
}

/// Parameters keyed by layer index in the owning [`NetworkSpec`].
#[derive(Clone, Debug, PartialEq, Default)]
pub struct WeightSet {
    params: BTreeMap<usize, LayerParams>,
}

impl WeightSet {
    pub fn get(&self, layer: usize) -> Option<&LayerParams> {
        self.params.get(&layer)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &LayerParams)> {
        self.params.iter().map(|(&k, v)| (k, v))
    }

    /// Serializes as `layer<k>.weight` / `layer<k>.bias` entries.
    pub fn to_container(&self) -> TensorContainer {
        let mut c = TensorContainer::new();
        for (k, p) in &self.params {
            c.insert(weight_name(*k), p.weight.clone()).expect("unique layer index");
            c.insert(bias_name(*k), p.bias.clone()).expect("unique layer index");
        }
        c
    }

    /// SHA-256 of the serialized container, hex encoded.
    pub fn content_hash(&self) -> String {
        let bytes = self
            .to_container()
            .to_bytes()
            .expect("weight tensors always serialize");
        hex::encode(Sha256::digest(&bytes))
    }
}

pub fn weight_name(layer: usize) -> String {
    format!("layer{layer}.weight")
}

pub fn bias_name(layer: usize) -> String {
    format!("layer{layer}.bias")
}

/// `(weight dims, bias dims, fan-in)` for every parameterized layer.
fn expected_params(spec: &NetworkSpec) -> Vec<(usize, Vec<usize>, Vec<usize>, usize)> {
    spec.layers()
        .iter()
        .enumerate()
        .filter_map(|(idx, layer)| {
            let input = spec.input_shape(idx);
            match *layer {
                Layer::Conv(cv) => {
                    let in_c = match input {
                        super::Shape::Spatial { c, .. } => c,
                        super::Shape::Flat(_) => unreachable!("validated spec"),
                    };
                    let per_group = in_c / cv.groups;
                    Some((
                        idx,
                        vec![cv.out_channels, per_group, cv.kernel, cv.kernel],
                        vec![cv.out_channels],
                        per_group * cv.kernel * cv.kernel,
                    ))
                }
                Layer::Fc { out } => Some((idx, vec![out, input.len()], vec![out], input.len())),
                _ => None,
            }
        })
        .collect()
}

/// Pulls every parameter tensor the spec needs out of `container`, checking dims.
pub fn load_weights(spec: &NetworkSpec, container: &TensorContainer) -> Result<WeightSet, ConvNetError> {
    let mut params = BTreeMap::new();
    for (idx, wdims, bdims, _) in expected_params(spec) {
        let fetch = |name: String, dims: &[usize]| -> Result<Tensor, ConvNetError> {
            let t = container
                .get(&name)
                .ok_or_else(|| ConvNetError::MissingWeight(name.clone()))?;
            if t.dims() != dims {
                return Err(ConvNetError::WeightDims {
                    name,
                    expected: dims.to_vec(),
                    actual: t.dims().to_vec(),
                });
            }
            Ok(t.clone())
        };
        let weight = fetch(weight_name(idx), &wdims)?;
        let bias = fetch(bias_name(idx), &bdims)?;
        params.insert(idx, LayerParams { weight, bias });
    }
    Ok(WeightSet { params })
}

/// Checks that `weights` holds exactly the tensors `spec` needs, with matching dims.
pub fn validate_weights(spec: &NetworkSpec, weights: &WeightSet) -> Result<(), ConvNetError> {
    for (idx, wdims, bdims, _) in expected_params(spec) {
        let p = weights
            .get(idx)
            .ok_or_else(|| ConvNetError::MissingWeight(weight_name(idx)))?;
        for (name, t, dims) in [(weight_name(idx), &p.weight, wdims), (bias_name(idx), &p.bias, bdims)] {
            if t.dims() != dims.as_slice() {
                return Err(ConvNetError::WeightDims {
                    name,
                    expected: dims,
                    actual: t.dims().to_vec(),
                });
            }
        }
    }
    Ok(())
}

/// Deterministic weights: zero-mean normal with standard deviation
/// `1/sqrt(fan_in)`, zero biases. Layers draw from one stream in layer order.
pub fn random_weights(spec: &NetworkSpec, seed: u64) -> WeightSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = BTreeMap::new();
    for (idx, wdims, bdims, fan_in) in expected_params(spec) {
        let normal = Normal::new(0.0f32, 1.0 / (fan_in as f32).sqrt()).expect("positive std");
        let n: usize = wdims.iter().product();
        let data = (0..n).map(|_| normal.sample(&mut rng)).collect();
        params.insert(
            idx,
            LayerParams {
                weight: Tensor::new(wdims, data).expect("dims match"),
                bias: Tensor::zeros(bdims),
            },
        );
    }
    WeightSet { params }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_weights_round_trip_through_container() {
        let spec = NetworkSpec::test_topology();
        let w = random_weights(&spec, 11);
        let bytes = w.to_container().to_bytes().unwrap();
        let back = load_weights(&spec, &TensorContainer::from_bytes(&bytes).unwrap()).unwrap();
        assert_eq!(back, w);
    }

    #[test]
    fn determinism_and_seed_sensitivity() {
        let spec = NetworkSpec::test_topology();
        let a = random_weights(&spec, 5);
        let b = random_weights(&spec, 5);
        assert_eq!(a.to_container().to_bytes().unwrap(), b.to_container().to_bytes().unwrap());
        assert_ne!(a, random_weights(&spec, 6));
        for (_, p) in a.iter() {
            assert!(p.bias.data().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn missing_bias_is_named() {
        let spec = NetworkSpec::test_topology();
        let full = random_weights(&spec, 1).to_container();
        let mut partial = TensorContainer::new();
        for (name, t) in full.entries() {
            if name != "layer0.bias" {
                partial.insert(name.clone(), t.clone()).unwrap();
            }
        }
        match load_weights(&spec, &partial) {
            Err(ConvNetError::MissingWeight(name)) => assert_eq!(name, "layer0.bias"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn swapped_kernel_dims_report_both_tuples() {
        let spec = NetworkSpec::test_topology();
        let full = random_weights(&spec, 1).to_container();
        let mut bad = TensorContainer::new();
        for (name, t) in full.entries() {
            let t = if name == "layer0.weight" {
                // [8,1,5,5] -> [1,8,5,5]
                t.clone().reshape(vec![1, 8, 5, 5]).unwrap()
            } else {
                t.clone()
            };
            bad.insert(name.clone(), t).unwrap();
        }
        let err = load_weights(&spec, &bad).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("layer0.weight"), "{msg}");
        assert!(msg.contains("[8, 1, 5, 5]") && msg.contains("[1, 8, 5, 5]"), "{msg}");
    }
}
