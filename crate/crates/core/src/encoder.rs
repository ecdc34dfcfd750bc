//! Convolutional feature extractors.
//!
//! The appearance, reference-label and input-label encoders share one
//! [`EncoderConfig`], so for equal input spatial size their outputs have
//! equal extents. Only the weights differ.

use alloc::vec;
use alloc::vec::Vec;

use crate::tensor::{random_fill, FeatureTensor, Seed};
use crate::{Error, Result};

pub const LEAKY_SLOPE: f32 = 0.2;

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EncoderConfig {
    pub layers: usize,
    pub channels: Vec<usize>,
    pub kernel_size: usize,
    pub strides: Vec<usize>,
    pub input_channels: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            layers: 5,
            channels: vec![64, 64, 128, 128, 256],
            kernel_size: 3,
            strides: vec![1, 2, 2, 2, 2],
            input_channels: 3,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(alloc::format!("encoder config: {msg}")));
        if self.layers == 0 {
            return bad("layers must be >= 1");
        }
        if self.channels.len() != self.layers || self.strides.len() != self.layers {
            return bad("channels and strides need one entry per layer");
        }
        if self.kernel_size.is_multiple_of(2) {
            return bad("kernel size must be odd");
        }
        if self.input_channels == 0 || self.channels.contains(&0) || self.strides.contains(&0) {
            return bad("channels and strides must be positive");
        }
        Ok(())
    }

    /// Input channel count of layer `i`.
    pub fn in_channels(&self, i: usize) -> usize {
        if i == 0 {
            self.input_channels
        } else {
            self.channels[i - 1]
        }
    }

    pub fn kernel_dims(&self, i: usize) -> [usize; 4] {
        [self.channels[i], self.in_channels(i), self.kernel_size, self.kernel_size]
    }

    /// Output `[c, h, w]` for an input of spatial size `h × w`.
    pub fn output_dims(&self, h: usize, w: usize) -> [usize; 3] {
        let (h, w) = self.strides.iter().fold((h, w), |(h, w), &s| (h.div_ceil(s), w.div_ceil(s)));
        [*self.channels.last().unwrap_or(&self.input_channels), h, w]
    }
}

/// Per-layer kernels (`c_out × c_in × k × k`) and biases (`c_out`).
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderWeights {
    pub kernels: Vec<FeatureTensor>,
    pub biases: Vec<FeatureTensor>,
}

impl EncoderWeights {
    pub fn check(&self, cfg: &EncoderConfig) -> Result<()> {
        cfg.validate()?;
        if self.kernels.len() != cfg.layers || self.biases.len() != cfg.layers {
            return Err(Error::shape(
                "encoder weights (layer count)",
                &[self.kernels.len(), self.biases.len()],
                &[cfg.layers, cfg.layers],
            ));
        }
        for i in 0..cfg.layers {
            let kd = cfg.kernel_dims(i);
            if self.kernels[i].dims() != kd {
                return Err(Error::shape("encoder kernel", self.kernels[i].dims(), &kd));
            }
            if self.biases[i].dims() != [kd[0]] {
                return Err(Error::shape("encoder bias", self.biases[i].dims(), &[kd[0]]));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    LeakyRelu,
    Identity,
}

/// Zero-padded cross-correlation, padding `(k - 1) / 2`, output spatial size
/// `ceil(h / stride) × ceil(w / stride)`.
pub fn conv2d_forward(
    input: &FeatureTensor,
    kernel: &FeatureTensor,
    bias: &FeatureTensor,
    stride: usize,
    activation: Activation,
) -> Result<FeatureTensor> {
    let &[c_in, h, w] = input.dims() else {
        return Err(Error::shape("conv2d input (expected c×h×w)", input.dims(), &[0, 0, 0]));
    };
    let &[c_out, kc, kh, kw] = kernel.dims() else {
        return Err(Error::shape("conv2d kernel (expected o×i×k×k)", kernel.dims(), &[0, 0, 0, 0]));
    };
    if kc != c_in {
        return Err(Error::shape("conv2d channels", input.dims(), kernel.dims()));
    }
    if kh % 2 == 0 || kw % 2 == 0 {
        return Err(Error::InvalidArgument(alloc::format!("conv2d kernel {kh}×{kw} must be odd")));
    }
    if bias.dims() != [c_out] {
        return Err(Error::shape("conv2d bias", bias.dims(), &[c_out]));
    }
    if stride == 0 {
        return Err(Error::InvalidArgument("conv2d stride must be >= 1".into()));
    }
    let (ph, pw) = ((kh / 2) as isize, (kw / 2) as isize);
    let (oh, ow) = (h.div_ceil(stride), w.div_ceil(stride));
    let src = input.data();
    let ker = kernel.data();
    let mut out = vec![0f32; c_out * oh * ow];
    for o in 0..c_out {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = bias.data()[o] as f64;
                for i in 0..c_in {
                    for ky in 0..kh {
                        let y = (oy * stride) as isize + ky as isize - ph;
                        if y < 0 || y >= h as isize {
                            continue;
                        }
                        for kx in 0..kw {
                            let x = (ox * stride) as isize + kx as isize - pw;
                            if x < 0 || x >= w as isize {
                                continue;
                            }
                            let kv = ker[((o * c_in + i) * kh + ky) * kw + kx] as f64;
                            acc += kv * src[(i * h + y as usize) * w + x as usize] as f64;
                        }
                    }
                }
                let v = acc as f32;
                out[(o * oh + oy) * ow + ox] = match activation {
                    Activation::LeakyRelu if v < 0.0 => v * LEAKY_SLOPE,
                    _ => v,
                };
            }
        }
    }
    FeatureTensor::new(vec![c_out, oh, ow], out)
}

/// Runs the layer stack on a `c×h×w` image. The last layer has no
/// activation.
pub fn encode(weights: &EncoderWeights, cfg: &EncoderConfig, image: &FeatureTensor) -> Result<FeatureTensor> {
    weights.check(cfg)?;
    if image.dims().len() != 3 || image.dims()[0] != cfg.input_channels {
        return Err(Error::shape("encode input", image.dims(), &[cfg.input_channels, 0, 0]));
    }
    let mut x = image.clone();
    for i in 0..cfg.layers {
        let act = if i + 1 == cfg.layers { Activation::Identity } else { Activation::LeakyRelu };
        x = conv2d_forward(&x, &weights.kernels[i], &weights.biases[i], cfg.strides[i], act)?;
    }
    Ok(x)
}

/// Encodes each image of an `m×c×h×w` batch and stacks the results.
pub fn encode_batch(weights: &EncoderWeights, cfg: &EncoderConfig, images: &FeatureTensor) -> Result<FeatureTensor> {
    let &[m, c, h, w] = images.dims() else {
        return encode(weights, cfg, images);
    };
    let per = c * h * w;
    let mut data = Vec::new();
    let mut dims = Vec::new();
    for im in 0..m {
        let img = FeatureTensor::new(vec![c, h, w], images.data()[im * per..(im + 1) * per].to_vec())?;
        let out = encode(weights, cfg, &img)?;
        dims = out.dims().to_vec();
        data.extend_from_slice(out.data());
    }
    dims.insert(0, m);
    FeatureTensor::new(dims, data)
}

/// Seeded weights, uniform in `±1/sqrt(fan_in)` with `fan_in = c_in·k·k`.
pub fn init_encoder(cfg: &EncoderConfig, seed: Seed) -> Result<EncoderWeights> {
    cfg.validate()?;
    let mut kernels = Vec::with_capacity(cfg.layers);
    let mut biases = Vec::with_capacity(cfg.layers);
    for i in 0..cfg.layers {
        let kd = cfg.kernel_dims(i);
        let scale = 1.0 / libm::sqrtf((kd[1] * kd[2] * kd[3]) as f32);
        let k = random_fill(&kd, seed.derive(2 * i as u64))?;
        let b = random_fill(&[kd[0]], seed.derive(2 * i as u64 + 1))?;
        kernels.push(FeatureTensor::new(kd.to_vec(), k.data().iter().map(|v| v * scale).collect())?);
        biases.push(FeatureTensor::new(vec![kd[0]], b.data().iter().map(|v| v * scale).collect())?);
    }
    Ok(EncoderWeights { kernels, biases })
}

/// A single 1×1, stride-1 layer whose kernel is the channel identity.
pub fn identity_encoder(channels: usize) -> (EncoderConfig, EncoderWeights) {
    let cfg = EncoderConfig {
        layers: 1,
        channels: vec![channels],
        kernel_size: 1,
        strides: vec![1],
        input_channels: channels,
    };
    let mut k = vec![0f32; channels * channels];
    for i in 0..channels {
        k[i * channels + i] = 1.0;
    }
    let weights = EncoderWeights {
        kernels: vec![FeatureTensor::new(vec![channels, channels, 1, 1], k).unwrap()],
        biases: vec![FeatureTensor::zeros(&[channels]).unwrap()],
    };
    (cfg, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nested_loop_conv(x: &FeatureTensor, k: &FeatureTensor, b: &FeatureTensor, stride: usize) -> Vec<f64> {
        let [ci, h, w] = [x.dims()[0], x.dims()[1], x.dims()[2]];
        let [co, _, kh, kw] = [k.dims()[0], k.dims()[1], k.dims()[2], k.dims()[3]];
        let get = |c: usize, y: i64, xx: i64| -> f64 {
            if y < 0 || xx < 0 || y >= h as i64 || xx >= w as i64 {
                0.0
            } else {
                x.data()[(c * h + y as usize) * w + xx as usize] as f64
            }
        };
        let oh = h.div_ceil(stride);
        let ow = w.div_ceil(stride);
        let mut out = Vec::new();
        for o in 0..co {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut s = b.data()[o] as f64;
                    for c in 0..ci {
                        for dy in 0..kh {
                            for dx in 0..kw {
                                let y = (oy * stride + dy) as i64 - (kh / 2) as i64;
                                let xx = (ox * stride + dx) as i64 - (kw / 2) as i64;
                                s += k.data()[((o * ci + c) * kh + dy) * kw + dx] as f64 * get(c, y, xx);
                            }
                        }
                    }
                    out.push(if s < 0.0 { 0.2 * s } else { s });
                }
            }
        }
        out
    }

    #[test]
    fn identity_kernel() {
        let x = random_fill(&[1, 4, 5], Seed(3)).unwrap();
        let k = FeatureTensor::new(vec![1, 1, 1, 1], vec![1.0]).unwrap();
        let b = FeatureTensor::zeros(&[1]).unwrap();
        assert_eq!(conv2d_forward(&x, &k, &b, 1, Activation::Identity).unwrap(), x);
    }

    #[test]
    fn ones_kernel_counts_padding_overlap() {
        let x = FeatureTensor::new(vec![1, 3, 3], vec![1.0; 9]).unwrap();
        let k = FeatureTensor::new(vec![1, 1, 3, 3], vec![1.0; 9]).unwrap();
        let b = FeatureTensor::zeros(&[1]).unwrap();
        let y = conv2d_forward(&x, &k, &b, 1, Activation::LeakyRelu).unwrap();
        assert_eq!(y.data(), &[4.0, 6.0, 4.0, 6.0, 9.0, 6.0, 4.0, 6.0, 4.0]);
    }

    #[test]
    fn matches_nested_loop_oracle() {
        let x = random_fill(&[2, 5, 5], Seed(11)).unwrap();
        let k = random_fill(&[3, 2, 3, 3], Seed(12)).unwrap();
        let b = random_fill(&[3], Seed(13)).unwrap();
        for stride in [1, 2] {
            let got = conv2d_forward(&x, &k, &b, stride, Activation::LeakyRelu).unwrap();
            let want = nested_loop_conv(&x, &k, &b, stride);
            assert_eq!(got.len(), want.len());
            for (g, w) in got.data().iter().zip(&want) {
                assert!((*g as f64 - w).abs() <= 1e-5);
            }
        }
    }

    #[test]
    fn channel_mismatch() {
        let x = random_fill(&[2, 3, 3], Seed(1)).unwrap();
        let k = random_fill(&[1, 3, 3, 3], Seed(1)).unwrap();
        let b = FeatureTensor::zeros(&[1]).unwrap();
        assert!(matches!(
            conv2d_forward(&x, &k, &b, 1, Activation::Identity),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn linear_before_activation() {
        let x = random_fill(&[2, 4, 4], Seed(5)).unwrap();
        let k = random_fill(&[2, 2, 3, 3], Seed(6)).unwrap();
        let b = FeatureTensor::zeros(&[2]).unwrap();
        let alpha = 2.5f32;
        let xs = FeatureTensor::new(x.dims().to_vec(), x.data().iter().map(|v| v * alpha).collect()).unwrap();
        let fx = conv2d_forward(&x, &k, &b, 1, Activation::Identity).unwrap();
        let fax = conv2d_forward(&xs, &k, &b, 1, Activation::Identity).unwrap();
        for (a, b) in fx.data().iter().zip(fax.data()) {
            assert!((a * alpha - b).abs() <= 1e-5);
        }
    }

    #[test]
    fn identity_encoder_is_identity() {
        let (cfg, w) = identity_encoder(3);
        let x = random_fill(&[3, 4, 4], Seed(1)).unwrap();
        assert_eq!(encode(&w, &cfg, &x).unwrap(), x);
    }

    #[test]
    fn default_chain_reaches_4x4() {
        let cfg = EncoderConfig::default();
        assert_eq!(cfg.output_dims(64, 64), [256, 4, 4]);
        let small = EncoderConfig { channels: vec![4, 4, 6, 6, 8], ..cfg };
        let x = random_fill(&[3, 64, 64], Seed(2)).unwrap();
        let y = encode(&init_encoder(&small, Seed(1)).unwrap(), &small, &x).unwrap();
        assert_eq!(y.dims(), &[8, 4, 4]);
    }

    #[test]
    fn encoders_share_output_shape() {
        let cfg = EncoderConfig { channels: vec![4, 5, 6, 7, 8], ..EncoderConfig::default() };
        let x = random_fill(&[3, 20, 13], Seed(2)).unwrap();
        let dims: Vec<_> = [Seed(1), Seed(2), Seed(3)]
            .iter()
            .map(|&s| encode(&init_encoder(&cfg, s).unwrap(), &cfg, &x).unwrap().dims().to_vec())
            .collect();
        assert!(dims.windows(2).all(|d| d[0] == d[1]));
        assert_eq!(dims[0], cfg.output_dims(20, 13).to_vec());
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let cfg = EncoderConfig { channels: vec![8, 4], strides: vec![1, 2], layers: 2, ..EncoderConfig::default() };
        let a = init_encoder(&cfg, Seed(9)).unwrap();
        assert_eq!(a, init_encoder(&cfg, Seed(9)).unwrap());
        assert_ne!(a, init_encoder(&cfg, Seed(10)).unwrap());
        // layer 1 kernel is 4×8×3×3: fan-in 72
        let bound = 1.0 / 72f32.sqrt();
        assert!(a.kernels[1].data().iter().all(|v| v.abs() <= bound));
        let x = random_fill(&[3, 9, 9], Seed(4)).unwrap();
        let y1 = encode(&a, &cfg, &x).unwrap();
        let y2 = encode(&a, &cfg, &x).unwrap();
        assert!(y1.data().iter().zip(y2.data()).all(|(p, q)| p.to_bits() == q.to_bits()));
        assert!(y1.data().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn bad_config() {
        let cfg = EncoderConfig { layers: 0, ..EncoderConfig::default() };
        assert!(init_encoder(&cfg, Seed(0)).is_err());
        let cfg = EncoderConfig { kernel_size: 2, ..EncoderConfig::default() };
        assert!(cfg.validate().is_err());
    }
}
