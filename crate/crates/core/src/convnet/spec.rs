use std::fmt;

use crate::tensor::LrnParams;

use super::ConvNetError;

const ALEXNET_SPEC: &str = include_str!("../../specs/alexnet.spec");
const TEST_SPEC: &str = include_str!("../../specs/test.spec");

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvLayer {
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    pub groups: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Layer {
    Conv(ConvLayer),
    Relu,
    Lrn(LrnParams),
    MaxPool { kernel: usize, stride: usize },
    Fc { out: usize },
}

impl Layer {
    pub fn has_params(&self) -> bool {
        matches!(self, Layer::Conv(_) | Layer::Fc { .. })
    }

    fn keyword(&self) -> &'static str {
        match self {
            Layer::Conv(_) => "conv",
            Layer::Relu => "relu",
            Layer::Lrn(_) => "lrn",
            Layer::MaxPool { .. } => "maxpool",
            Layer::Fc { .. } => "fc",
        }
    }
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Layer::Conv(c) => write!(
                f,
                "conv out={} k={} stride={} pad={} groups={}",
                c.out_channels, c.kernel, c.stride, c.pad, c.groups
            ),
            Layer::Relu => write!(f, "relu"),
            Layer::Lrn(p) => write!(
                f,
                "lrn depth={} k={} alpha={} beta={}",
                p.depth, p.k, p.alpha, p.beta
            ),
            Layer::MaxPool { kernel, stride } => write!(f, "maxpool k={kernel} stride={stride}"),
            Layer::Fc { out } => write!(f, "fc out={out}"),
        }
    }
}

/// Activation shape between layers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shape {
    Spatial { c: usize, h: usize, w: usize },
    Flat(usize),
}

impl Shape {
    pub fn len(&self) -> usize {
        match *self {
            Shape::Spatial { c, h, w } => c * h * w,
            Shape::Flat(n) => n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Validated layer graph: every layer's input shape is known and consistent.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkSpec {
    input: (usize, usize, usize),
    layers: Vec<Layer>,
    /// `shapes[i]` is the input shape of layer `i`; the last entry is the output.
    shapes: Vec<Shape>,
}

impl NetworkSpec {
    /// Builds a spec from already-typed layers, propagating shapes.
    pub fn new(input: (usize, usize, usize), layers: Vec<Layer>) -> Result<Self, ConvNetError> {
        let lines: Vec<usize> = (0..layers.len()).map(|i| i + 2).collect();
        Self::build(input, layers, &lines, &[None; 0])
    }

    pub fn alexnet() -> Self {
        parse_network_spec(ALEXNET_SPEC).expect("bundled alexnet spec is valid")
    }

    /// Tiny 2-conv/1-fc network on `1x32x32` inputs producing 16-d features.
    pub fn test_topology() -> Self {
        parse_network_spec(TEST_SPEC).expect("bundled test spec is valid")
    }

    /// Resolves `"alexnet"`, `"test"`, or a path to a spec file.
    pub fn resolve(name_or_path: &str) -> Result<Self, ConvNetError> {
        match name_or_path {
            "alexnet" | "default" => Ok(Self::alexnet()),
            "test" => Ok(Self::test_topology()),
            path => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| ConvNetError::Io(format!("{path}: {e}")))?;
                parse_network_spec(&text)
            }
        }
    }

    pub fn input_dims(&self) -> (usize, usize, usize) {
        self.input
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_shape(&self, layer: usize) -> Shape {
        self.shapes[layer]
    }

    pub fn output_shape(&self) -> Shape {
        *self.shapes.last().expect("shapes always has the input entry")
    }

    pub fn feature_dim(&self) -> usize {
        self.output_shape().len()
    }

    /// Canonical text form; parses back to an equal spec.
    pub fn to_text(&self) -> String {
        let (c, h, w) = self.input;
        let mut s = format!("input {c} {h} {w}\n");
        for layer in &self.layers {
            s.push_str(&layer.to_string());
            s.push('\n');
        }
        s
    }

    fn build(
        input: (usize, usize, usize),
        layers: Vec<Layer>,
        line_numbers: &[usize],
        fc_inputs: &[Option<usize>],
    ) -> Result<Self, ConvNetError> {
        if layers.is_empty() {
            return Err(ConvNetError::Parse {
                line: line_numbers.first().copied().unwrap_or(1),
                msg: "network has no layers".into(),
            });
        }
        let (c, h, w) = input;
        if c == 0 || h == 0 || w == 0 {
            return Err(ConvNetError::Parse {
                line: 1,
                msg: format!("input dims must be positive, got {c} {h} {w}"),
            });
        }
        let mut shapes = vec![Shape::Spatial { c, h, w }];
        for (idx, layer) in layers.iter().enumerate() {
            let line = line_numbers[idx];
            let fail = |msg: String| ConvNetError::Parse {
                line,
                msg: format!("layer {idx} ({}): {msg}", layer.keyword()),
            };
            let cur = *shapes.last().unwrap();
            let next = match (layer, cur) {
                (Layer::Relu, s) => s,
                (Layer::Lrn(p), s @ Shape::Spatial { .. }) => {
                    if p.depth == 0 || p.k.is_nan() || p.k <= 0.0 {
                        return Err(fail("lrn needs depth >= 1 and k > 0".into()));
                    }
                    s
                }
                (Layer::Conv(cv), Shape::Spatial { c, h, w }) => {
                    if cv.out_channels == 0 || cv.kernel == 0 || cv.stride == 0 || cv.groups == 0 {
                        return Err(fail("out, k, stride and groups must be positive".into()));
                    }
                    if c % cv.groups != 0 || cv.out_channels % cv.groups != 0 {
                        return Err(fail(format!(
                            "groups={} must divide input channels {c} and out={}",
                            cv.groups, cv.out_channels
                        )));
                    }
                    if h + 2 * cv.pad < cv.kernel || w + 2 * cv.pad < cv.kernel {
                        return Err(fail(format!(
                            "kernel {k}x{k} does not fit {h}x{w} input padded by {}",
                            cv.pad,
                            k = cv.kernel
                        )));
                    }
                    Shape::Spatial {
                        c: cv.out_channels,
                        h: (h + 2 * cv.pad - cv.kernel) / cv.stride + 1,
                        w: (w + 2 * cv.pad - cv.kernel) / cv.stride + 1,
                    }
                }
                (Layer::MaxPool { kernel, stride }, Shape::Spatial { c, h, w }) => {
                    if *kernel == 0 || *stride == 0 {
                        return Err(fail("k and stride must be positive".into()));
                    }
                    if *kernel > h || *kernel > w {
                        return Err(fail(format!("pool kernel {kernel} larger than {h}x{w} input")));
                    }
                    Shape::Spatial {
                        c,
                        h: (h - kernel) / stride + 1,
                        w: (w - kernel) / stride + 1,
                    }
                }
                (Layer::Fc { out }, s) => {
                    if *out == 0 {
                        return Err(fail("out must be positive".into()));
                    }
                    if let Some(Some(declared)) = fc_inputs.get(idx) {
                        if *declared != s.len() {
                            return Err(fail(format!(
                                "declared in={declared} but the propagated input length is {} ({s:?})",
                                s.len()
                            )));
                        }
                    }
                    Shape::Flat(*out)
                }
                (_, Shape::Flat(n)) => {
                    return Err(fail(format!("needs a spatial input, got a flat vector of {n}")));
                }
            };
            shapes.push(next);
        }
        Ok(Self {
            input,
            layers,
            shapes,
        })
    }
}

struct Args<'a> {
    line: usize,
    pairs: Vec<(&'a str, &'a str)>,
}

impl<'a> Args<'a> {
    fn parse(line: usize, tokens: &[&'a str]) -> Result<Self, ConvNetError> {
        let pairs = tokens
            .iter()
            .map(|t| {
                t.split_once('=').ok_or_else(|| ConvNetError::Parse {
                    line,
                    msg: format!("expected key=value, got {t:?}"),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { line, pairs })
    }

    fn check_keys(&self, allowed: &[&str]) -> Result<(), ConvNetError> {
        for (k, _) in &self.pairs {
            if !allowed.contains(k) {
                return Err(ConvNetError::Parse {
                    line: self.line,
                    msg: format!("unknown attribute {k:?}"),
                });
            }
        }
        Ok(())
    }

    fn get<T: std::str::FromStr>(&self, key: &str, default: Option<T>) -> Result<T, ConvNetError> {
        match self.pairs.iter().find(|(k, _)| *k == key) {
            Some((_, v)) => v.parse().map_err(|_| ConvNetError::Parse {
                line: self.line,
                msg: format!("invalid value {v:?} for {key}"),
            }),
            None => default.ok_or_else(|| ConvNetError::Parse {
                line: self.line,
                msg: format!("missing required attribute {key}"),
            }),
        }
    }

    fn opt<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ConvNetError> {
        if self.pairs.iter().any(|(k, _)| *k == key) {
            self.get(key, None).map(Some)
        } else {
            Ok(None)
        }
    }
}

/// Parses the line-oriented network description.
///
/// Blank lines and `#` comments are ignored. The first statement must be
/// `input C H W`; each following line is one layer.
pub fn parse_network_spec(text: &str) -> Result<NetworkSpec, ConvNetError> {
    let mut input = None;
    let mut layers = Vec::new();
    let mut lines = Vec::new();
    let mut fc_inputs = Vec::new();
    let mut last_line = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        last_line = line;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = content.split_whitespace().collect();
        let keyword = tokens[0];
        if input.is_none() {
            if keyword != "input" || tokens.len() != 4 {
                return Err(ConvNetError::Parse {
                    line,
                    msg: "first statement must be `input C H W`".into(),
                });
            }
            let dims = tokens[1..]
                .iter()
                .map(|t| t.parse::<usize>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| ConvNetError::Parse {
                    line,
                    msg: format!("bad input dims: {e}"),
                })?;
            input = Some((dims[0], dims[1], dims[2]));
            continue;
        }
        let args = Args::parse(line, &tokens[1..])?;
        let mut fc_in = None;
        let layer = match keyword {
            "conv" => {
                args.check_keys(&["out", "k", "stride", "pad", "groups"])?;
                Layer::Conv(ConvLayer {
                    out_channels: args.get("out", None)?,
                    kernel: args.get("k", None)?,
                    stride: args.get("stride", Some(1))?,
                    pad: args.get("pad", Some(0))?,
                    groups: args.get("groups", Some(1))?,
                })
            }
            "relu" => {
                args.check_keys(&[])?;
                Layer::Relu
            }
            "lrn" => {
                args.check_keys(&["depth", "k", "alpha", "beta"])?;
                let d = LrnParams::default();
                Layer::Lrn(LrnParams {
                    depth: args.get("depth", Some(d.depth))?,
                    k: args.get("k", Some(d.k))?,
                    alpha: args.get("alpha", Some(d.alpha))?,
                    beta: args.get("beta", Some(d.beta))?,
                })
            }
            "maxpool" => {
                args.check_keys(&["k", "stride"])?;
                let kernel = args.get("k", None)?;
                Layer::MaxPool {
                    kernel,
                    stride: args.get("stride", Some(kernel))?,
                }
            }
            "fc" => {
                args.check_keys(&["out", "in"])?;
                fc_in = args.opt("in")?;
                Layer::Fc {
                    out: args.get("out", None)?,
                }
            }
            "input" => {
                return Err(ConvNetError::Parse {
                    line,
                    msg: "duplicate input statement".into(),
                })
            }
            other => {
                return Err(ConvNetError::Parse {
                    line,
                    msg: format!("unknown layer keyword {other:?}"),
                })
            }
        };
        layers.push(layer);
        lines.push(line);
        fc_inputs.push(fc_in);
    }
    let input = input.ok_or_else(|| ConvNetError::Parse {
        line: last_line.max(1),
        msg: "missing `input C H W` statement".into(),
    })?;
    if layers.is_empty() {
        return Err(ConvNetError::Parse {
            line: last_line.max(1),
            msg: "network has no layers".into(),
        });
    }
    NetworkSpec::build(input, layers, &lines, &fc_inputs)
}
