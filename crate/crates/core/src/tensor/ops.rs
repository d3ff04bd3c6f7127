//! Forward-only layer kernels. Every kernel is a pure function of its inputs;
//! dot products accumulate in `f64` and round once to `f32`.

use super::{shape_err, Tensor, TensorError};

/// Cross-correlation of `[C_in, H, W]` input with `[C_out, C_in/groups, kH, kW]`
/// kernels over a zero-padded input, plus a per-output-channel bias.
pub fn conv2d(
    input: &Tensor,
    kernels: &Tensor,
    bias: &Tensor,
    stride: usize,
    pad: usize,
    groups: usize,
) -> Result<Tensor, TensorError> {
    const OP: &str = "conv2d";
    let (c_in, h, w) = input.chw(OP)?;
    let (c_out, k_cin, kh, kw) = match *kernels.dims() {
        [a, b, c, d] => (a, b, c, d),
        ref d => return Err(shape_err(OP, format!("kernels must be rank 4, got {d:?}"))),
    };
    if stride == 0 {
        return Err(shape_err(OP, "stride must be at least 1"));
    }
    if groups == 0 || c_in % groups != 0 || c_out % groups != 0 {
        return Err(shape_err(
            OP,
            format!("groups={groups} must divide C_in={c_in} and C_out={c_out}"),
        ));
    }
    if k_cin != c_in / groups {
        return Err(shape_err(
            OP,
            format!(
                "kernel dims {:?} expect {} input channels per group, input {:?} with groups={groups} gives {}",
                kernels.dims(),
                k_cin,
                input.dims(),
                c_in / groups
            ),
        ));
    }
    if bias.dims() != [c_out] {
        return Err(shape_err(
            OP,
            format!("bias dims {:?}, expected [{c_out}]", bias.dims()),
        ));
    }
    if h + 2 * pad < kh || w + 2 * pad < kw {
        return Err(shape_err(
            OP,
            format!(
                "kernel {kh}x{kw} does not fit input {h}x{w} padded by {pad}"
            ),
        ));
    }
    let oh = (h + 2 * pad - kh) / stride + 1;
    let ow = (w + 2 * pad - kw) / stride + 1;

    let src = input.data();
    let wts = kernels.data();
    let cin_g = c_in / groups;
    let cout_g = c_out / groups;
    let mut out = Vec::with_capacity(c_out * oh * ow);
    let mut acc = vec![0f64; oh * ow];

    for oc in 0..c_out {
        acc.iter_mut().for_each(|a| *a = 0.0);
        let group = oc / cout_g;
        for icg in 0..cin_g {
            let plane = &src[(group * cin_g + icg) * h * w..][..h * w];
            for ky in 0..kh {
                for kx in 0..kw {
                    let wv = wts[((oc * cin_g + icg) * kh + ky) * kw + kx] as f64;
                    let (ox_lo, ox_hi) = valid_range(kx, pad, stride, w, ow);
                    if ox_lo >= ox_hi {
                        continue;
                    }
                    for oy in 0..oh {
                        let iy = oy * stride + ky;
                        if iy < pad || iy - pad >= h {
                            continue;
                        }
                        let row = &plane[(iy - pad) * w..][..w];
                        let acc_row = &mut acc[oy * ow..][..ow];
                        for ox in ox_lo..ox_hi {
                            acc_row[ox] += wv * row[ox * stride + kx - pad] as f64;
                        }
                    }
                }
            }
        }
        let b = bias.data()[oc] as f64;
        out.extend(acc.iter().map(|&a| (a + b) as f32));
    }
    Tensor::new(vec![c_out, oh, ow], out)
}

/// Output positions `o` in `[lo, hi)` whose input index `o*stride + k - pad`
/// lands inside `[0, extent)`.
fn valid_range(k: usize, pad: usize, stride: usize, extent: usize, out_len: usize) -> (usize, usize) {
    let lo = if pad > k { (pad - k).div_ceil(stride) } else { 0 };
    // largest o with o*stride + k - pad <= extent - 1
    let limit = extent - 1 + pad;
    if limit < k {
        return (0, 0);
    }
    let hi = ((limit - k) / stride + 1).min(out_len);
    (lo.min(hi), hi)
}

pub fn relu(input: &Tensor) -> Tensor {
    input.map(|v| v.max(0.0))
}

/// Cross-channel local response normalization parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LrnParams {
    pub depth: usize,
    pub k: f32,
    pub alpha: f32,
    pub beta: f32,
}

impl Default for LrnParams {
    fn default() -> Self {
        Self {
            depth: 5,
            k: 2.0,
            alpha: 1e-4,
            beta: 0.75,
        }
    }
}

/// `x / (k + alpha/depth * sum of squares over `depth` neighbouring channels)^beta`.
///
/// The window for channel `c` spans `[c - (depth-1)/2, c - (depth-1)/2 + depth - 1]`,
/// clipped to the valid channel range.
pub fn lrn(input: &Tensor, params: LrnParams) -> Result<Tensor, TensorError> {
    const OP: &str = "lrn";
    let (c, h, w) = input.chw(OP)?;
    if params.depth == 0 || params.k.is_nan() || params.k <= 0.0 {
        return Err(shape_err(
            OP,
            format!("need depth >= 1 and k > 0, got {params:?}"),
        ));
    }
    let plane = h * w;
    let src = input.data();
    let pre = (params.depth - 1) / 2;
    let k = params.k as f64;
    let scale = params.alpha as f64 / params.depth as f64;
    let beta = params.beta as f64;
    let mut out = vec![0f32; src.len()];
    for ch in 0..c {
        let lo = ch.saturating_sub(pre);
        let hi = (ch + params.depth - pre).min(c);
        for p in 0..plane {
            let sumsq: f64 = (lo..hi)
                .map(|j| {
                    let v = src[j * plane + p] as f64;
                    v * v
                })
                .sum();
            let x = src[ch * plane + p] as f64;
            out[ch * plane + p] = (x / (k + scale * sumsq).powf(beta)) as f32;
        }
    }
    Tensor::new(input.dims().to_vec(), out)
}

/// Max over `kernel x kernel` windows placed every `stride` pixels; windows
/// may overlap.
pub fn maxpool2d(input: &Tensor, kernel: usize, stride: usize) -> Result<Tensor, TensorError> {
    const OP: &str = "maxpool2d";
    let (c, h, w) = input.chw(OP)?;
    if kernel == 0 || stride == 0 {
        return Err(shape_err(OP, "kernel and stride must be at least 1"));
    }
    if kernel > h || kernel > w {
        return Err(shape_err(
            OP,
            format!("kernel {kernel} larger than input {h}x{w}"),
        ));
    }
    let oh = (h - kernel) / stride + 1;
    let ow = (w - kernel) / stride + 1;
    let src = input.data();
    let mut out = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        let plane = &src[ch * h * w..][..h * w];
        for oy in 0..oh {
            for ox in 0..ow {
                let mut m = f32::NEG_INFINITY;
                for ky in 0..kernel {
                    let row = &plane[(oy * stride + ky) * w + ox * stride..][..kernel];
                    m = row.iter().fold(m, |a, &b| a.max(b));
                }
                out.push(m);
            }
        }
    }
    Tensor::new(vec![c, oh, ow], out)
}

/// `weights · flatten(input) + bias` with `weights` of dims `[m, n]`.
pub fn fully_connected(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor, TensorError> {
    const OP: &str = "fully_connected";
    let (m, n) = match *weights.dims() {
        [m, n] => (m, n),
        ref d => return Err(shape_err(OP, format!("weights must be rank 2, got {d:?}"))),
    };
    if input.len() != n {
        return Err(shape_err(
            OP,
            format!(
                "weights {:?} expect {n} inputs, input {:?} flattens to {}",
                weights.dims(),
                input.dims(),
                input.len()
            ),
        ));
    }
    if bias.dims() != [m] {
        return Err(shape_err(OP, format!("bias dims {:?}, expected [{m}]", bias.dims())));
    }
    let x = input.data();
    let out = weights
        .data()
        .chunks_exact(n)
        .zip(bias.data())
        .map(|(row, &b)| {
            let dot: f64 = row.iter().zip(x).map(|(&a, &v)| a as f64 * v as f64).sum();
            (dot + b as f64) as f32
        })
        .collect();
    Tensor::new(vec![m], out)
}

/// Bilinear resampling of each channel with half-pixel centers; source
/// coordinates outside the image clamp to the border.
pub fn bilinear_resize(input: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor, TensorError> {
    const OP: &str = "bilinear_resize";
    let (c, h, w) = input.chw(OP)?;
    if out_h == 0 || out_w == 0 {
        return Err(shape_err(OP, format!("output size {out_h}x{out_w} must be positive")));
    }
    let ys = sample_taps(h, out_h);
    let xs = sample_taps(w, out_w);
    let src = input.data();
    let mut out = Vec::with_capacity(c * out_h * out_w);
    for ch in 0..c {
        let plane = &src[ch * h * w..][..h * w];
        for &(y0, y1, ly) in &ys {
            for &(x0, x1, lx) in &xs {
                let top = plane[y0 * w + x0] as f64 * (1.0 - lx) + plane[y0 * w + x1] as f64 * lx;
                let bot = plane[y1 * w + x0] as f64 * (1.0 - lx) + plane[y1 * w + x1] as f64 * lx;
                out.push((top * (1.0 - ly) + bot * ly) as f32);
            }
        }
    }
    Tensor::new(vec![c, out_h, out_w], out)
}

/// Per output index: the two source indices and the weight of the second.
fn sample_taps(in_len: usize, out_len: usize) -> Vec<(usize, usize, f64)> {
    let scale = in_len as f64 / out_len as f64;
    (0..out_len)
        .map(|o| {
            let s = ((o as f64 + 0.5) * scale - 0.5).max(0.0);
            let i0 = (s.floor() as usize).min(in_len - 1);
            let i1 = (i0 + 1).min(in_len - 1);
            let frac = if i0 == in_len - 1 { 0.0 } else { s - i0 as f64 };
            (i0, i1, frac)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(dims: Vec<usize>, rng: &mut ChaCha8Rng) -> Tensor {
        let n = dims.iter().product();
        Tensor::new(dims, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    fn naive_conv(x: &Tensor, k: &Tensor, b: &Tensor, s: usize, p: usize, g: usize) -> Vec<f64> {
        let (ci, h, w) = (x.dims()[0], x.dims()[1] as isize, x.dims()[2] as isize);
        let (co, kc, kh, kw) = (k.dims()[0], k.dims()[1], k.dims()[2], k.dims()[3]);
        let oh = ((h + 2 * p as isize - kh as isize) / s as isize + 1) as usize;
        let ow = ((w + 2 * p as isize - kw as isize) / s as isize + 1) as usize;
        let mut out = vec![];
        for o in 0..co {
            let grp = o / (co / g);
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = b.data()[o] as f64;
                    for c in 0..kc {
                        let ic = grp * (ci / g) + c;
                        for ky in 0..kh {
                            for kx in 0..kw {
                                let iy = (oy * s + ky) as isize - p as isize;
                                let ix = (ox * s + kx) as isize - p as isize;
                                if iy < 0 || ix < 0 || iy >= h || ix >= w {
                                    continue;
                                }
                                let xv = x.data()[(ic * h as usize + iy as usize) * w as usize + ix as usize];
                                let kv = k.data()[((o * kc + c) * kh + ky) * kw + kx];
                                acc += xv as f64 * kv as f64;
                            }
                        }
                    }
                    out.push(acc);
                }
            }
        }
        out
    }

    #[test]
    fn conv_zero_input_gives_bias() {
        let x = Tensor::zeros(vec![1, 4, 4]);
        let k = Tensor::new(vec![1, 1, 3, 3], (0..9).map(|v| v as f32).collect()).unwrap();
        let b = Tensor::vector(vec![0.7]);
        let y = conv2d(&x, &k, &b, 1, 0, 1).unwrap();
        assert_eq!(y.dims(), &[1, 2, 2]);
        assert!(y.data().iter().all(|&v| v == 0.7));
    }

    #[test]
    fn conv_identity_kernel() {
        let mut data = vec![0.0; 9];
        data[4] = 1.0;
        let x = Tensor::new(vec![1, 3, 3], data.clone()).unwrap();
        let k = Tensor::new(vec![1, 1, 3, 3], data).unwrap();
        let y = conv2d(&x, &k, &Tensor::vector(vec![0.0]), 1, 1, 1).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn conv_matches_naive_with_stride_pad_groups() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = random(vec![1, 5, 5], &mut rng);
        let k = random(vec![2, 1, 3, 3], &mut rng);
        let b = random(vec![2], &mut rng);
        let y = conv2d(&x, &k, &b, 2, 1, 1).unwrap();
        assert_eq!(y.dims(), &[2, 3, 3]);
        for (a, e) in y.data().iter().zip(naive_conv(&x, &k, &b, 2, 1, 1)) {
            assert!((*a as f64 - e).abs() <= 1e-6 * e.abs().max(1.0));
        }

        let x = random(vec![4, 7, 6], &mut rng);
        let k = random(vec![6, 2, 3, 2], &mut rng);
        let b = random(vec![6], &mut rng);
        let y = conv2d(&x, &k, &b, 3, 2, 2).unwrap();
        for (a, e) in y.data().iter().zip(naive_conv(&x, &k, &b, 3, 2, 2)) {
            assert!((*a as f64 - e).abs() <= 1e-6 * e.abs().max(1.0));
        }
    }

    #[test]
    fn conv_shape_errors() {
        let x = Tensor::zeros(vec![3, 4, 4]);
        let b = Tensor::zeros(vec![2]);
        // C_in not divisible by groups
        assert!(conv2d(&x, &Tensor::zeros(vec![2, 1, 3, 3]), &b, 1, 0, 2).is_err());
        // kernel larger than padded input
        assert!(conv2d(&x, &Tensor::zeros(vec![2, 3, 7, 7]), &b, 1, 1, 1).is_err());
        // wrong in-channel count
        let err = conv2d(&x, &Tensor::zeros(vec![2, 2, 3, 3]), &b, 1, 0, 1).unwrap_err();
        assert!(err.to_string().contains("[2, 2, 3, 3]"));
    }

    #[test]
    fn relu_cases() {
        let x = Tensor::vector(vec![-1.0, 0.0, 2.0]);
        assert_eq!(relu(&x).data(), &[0.0, 0.0, 2.0]);
        assert_eq!(relu(&relu(&x)), relu(&x));
    }

    #[test]
    fn lrn_scalar_case() {
        let x = Tensor::filled(vec![1, 1, 1], 1.0);
        let y = lrn(&x, LrnParams::default()).unwrap();
        let expected = 1.0 / (2.0f64 + 2e-5).powf(0.75);
        assert!((y.data()[0] as f64 - expected).abs() < 1e-7);
        let z = lrn(&Tensor::zeros(vec![4, 2, 2]), LrnParams::default()).unwrap();
        assert!(z.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn maxpool_hand_enumerated() {
        let x = Tensor::new(vec![1, 4, 4], (1..=16).map(|v| v as f32).collect()).unwrap();
        let y = maxpool2d(&x, 2, 2).unwrap();
        assert_eq!(y.dims(), &[1, 2, 2]);
        assert_eq!(y.data(), &[6.0, 8.0, 14.0, 16.0]);
        assert!(maxpool2d(&x, 5, 1).is_err());
        let c = maxpool2d(&Tensor::filled(vec![2, 5, 5], 3.5), 3, 2).unwrap();
        assert!(c.data().iter().all(|&v| v == 3.5));
    }

    #[test]
    fn fc_identity_and_bias() {
        let mut eye = vec![0.0; 9];
        for i in 0..3 {
            eye[i * 3 + i] = 1.0;
        }
        let w = Tensor::new(vec![3, 3], eye).unwrap();
        let x = Tensor::vector(vec![0.5, -2.0, 3.0]);
        assert_eq!(fully_connected(&x, &w, &Tensor::zeros(vec![3])).unwrap(), x);
        let b = Tensor::vector(vec![1.0, 2.0, 3.0]);
        assert_eq!(fully_connected(&Tensor::zeros(vec![3]), &w, &b).unwrap(), b);
        assert!(fully_connected(&Tensor::zeros(vec![4]), &w, &b).is_err());
    }

    #[test]
    fn resize_identity_and_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random(vec![2, 5, 7], &mut rng);
        assert_eq!(bilinear_resize(&x, 5, 7).unwrap(), x);
        let c = bilinear_resize(&Tensor::filled(vec![3, 4, 6], 0.25), 9, 2).unwrap();
        assert!(c.data().iter().all(|&v| (v - 0.25).abs() < 1e-7));
    }

    #[test]
    fn resize_hand_computed_upsample() {
        let x = Tensor::new(vec![1, 2, 2], vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let y = bilinear_resize(&x, 4, 4).unwrap();
        // half-pixel centers: source coords -0.25→0, 0.25, 0.75, 1.25→1
        let taps = [0.0, 0.25, 0.75, 1.0];
        for (r, &ty) in taps.iter().enumerate() {
            for (c, &tx) in taps.iter().enumerate() {
                let expected = 2.0 * ty + tx;
                assert!((y.data()[r * 4 + c] as f64 - expected).abs() < 1e-6);
            }
        }
    }
}
