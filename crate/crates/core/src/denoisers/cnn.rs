use super::{Denoiser, NoiseLevel, WeightsError};
use crate::linalg::{pixel_shuffle, pixel_unshuffle, RealTensor3};
use crate::transform::CsiVector;
use crate::{Error, Result};

pub const KERNEL: usize = 3;
/// Eight unshuffled sub-tensor channels plus the noise-level map.
pub const MODEL_INPUT_CHANNELS: usize = 9;
pub const MODEL_OUTPUT_CHANNELS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
    Linear,
}

impl Activation {
    pub fn tag(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Tanh => 1,
            Activation::Linear => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Tanh),
            2 => Some(Activation::Linear),
            _ => None,
        }
    }

    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Linear => x,
        }
    }
}

/// One 3x3 same-padded convolution with bias and activation. Batch norm, if
/// any, is already folded into `weights` and `bias`.
#[derive(Clone, Debug)]
pub struct ConvLayer {
    in_channels: usize,
    out_channels: usize,
    activation: Activation,
    /// `[out][in][ky][kx]`, as stored on disk.
    weights: Vec<f32>,
    bias: Vec<f32>,
    /// `[ky][kx][in][out]` in f64 for the forward pass.
    packed: Vec<f64>,
}

impl PartialEq for ConvLayer {
    fn eq(&self, other: &Self) -> bool {
        self.in_channels == other.in_channels
            && self.out_channels == other.out_channels
            && self.activation == other.activation
            && self.weights.iter().map(|w| w.to_bits()).eq(other.weights.iter().map(|w| w.to_bits()))
            && self.bias.iter().map(|b| b.to_bits()).eq(other.bias.iter().map(|b| b.to_bits()))
    }
}

impl ConvLayer {
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        activation: Activation,
        weights: Vec<f32>,
        bias: Vec<f32>,
    ) -> Result<Self, WeightsError> {
        if in_channels == 0 || out_channels == 0 {
            return Err(WeightsError::EmptyLayer);
        }
        let expected = out_channels * in_channels * KERNEL * KERNEL;
        if weights.len() != expected || bias.len() != out_channels {
            return Err(WeightsError::ParameterCount {
                expected: expected + out_channels,
                found: weights.len() + bias.len(),
            });
        }
        if !weights.iter().chain(bias.iter()).all(|w| w.is_finite()) {
            return Err(WeightsError::NonFinite { layer: None });
        }
        let mut packed = vec![0.0; expected];
        for o in 0..out_channels {
            for c in 0..in_channels {
                for ky in 0..KERNEL {
                    for kx in 0..KERNEL {
                        let src = ((o * in_channels + c) * KERNEL + ky) * KERNEL + kx;
                        let dst = ((ky * KERNEL + kx) * in_channels + c) * out_channels + o;
                        packed[dst] = f64::from(weights[src]);
                    }
                }
            }
        }
        Ok(ConvLayer {
            in_channels,
            out_channels,
            activation,
            weights,
            bias,
            packed,
        })
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &[f32] {
        &self.weights
    }

    pub fn bias(&self) -> &[f32] {
        &self.bias
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// 3x3 cross-correlation, zero padding 1, stride 1, then bias and activation.
pub fn conv2d_same(input: &RealTensor3, layer: &ConvLayer) -> Result<RealTensor3> {
    let [rows, cols, cin] = input.dims();
    if cin != layer.in_channels {
        return Err(Error::invalid(format!(
            "layer expects {} input channels, tensor has {cin}",
            layer.in_channels
        )));
    }
    let cout = layer.out_channels;
    let data = input.as_slice();
    let mut out = RealTensor3::zeros(rows, cols, cout);
    let mut acc = vec![0.0f64; cout];
    for i in 0..rows {
        for j in 0..cols {
            for (a, b) in acc.iter_mut().zip(&layer.bias) {
                *a = f64::from(*b);
            }
            for ky in 0..KERNEL {
                let Some(ii) = (i + ky).checked_sub(1).filter(|&r| r < rows) else {
                    continue;
                };
                for kx in 0..KERNEL {
                    let Some(jj) = (j + kx).checked_sub(1).filter(|&c| c < cols) else {
                        continue;
                    };
                    let pixel = &data[(ii * cols + jj) * cin..(ii * cols + jj + 1) * cin];
                    let tap = &layer.packed[(ky * KERNEL + kx) * cin * cout..(ky * KERNEL + kx + 1) * cin * cout];
                    for (c, &x) in pixel.iter().enumerate() {
                        if x == 0.0 {
                            continue;
                        }
                        for (a, &w) in acc.iter_mut().zip(&tap[c * cout..(c + 1) * cout]) {
                            *a += x * w;
                        }
                    }
                }
            }
            let o = out.offset(i, j, 0);
            for (dst, &a) in out.as_mut_slice()[o..o + cout].iter_mut().zip(&acc) {
                *dst = layer.activation.apply(a);
            }
        }
    }
    Ok(out)
}

/// Sequential conv stack consuming a 9-channel tensor and producing the 8
/// denoised sub-tensor channels.
#[derive(Clone, Debug, PartialEq)]
pub struct DenoiserModel {
    layers: Vec<ConvLayer>,
}

impl DenoiserModel {
    pub fn new(layers: Vec<ConvLayer>) -> Result<Self, WeightsError> {
        let (first, last) = match (layers.first(), layers.last()) {
            (Some(f), Some(l)) => (f, l),
            _ => return Err(WeightsError::NoLayers),
        };
        if first.in_channels != MODEL_INPUT_CHANNELS {
            return Err(WeightsError::ChannelMismatch {
                layer: 0,
                expected: MODEL_INPUT_CHANNELS,
                found: first.in_channels,
            });
        }
        for (idx, pair) in layers.windows(2).enumerate() {
            if pair[1].in_channels != pair[0].out_channels {
                return Err(WeightsError::ChannelMismatch {
                    layer: idx + 1,
                    expected: pair[0].out_channels,
                    found: pair[1].in_channels,
                });
            }
        }
        if last.out_channels != MODEL_OUTPUT_CHANNELS {
            return Err(WeightsError::ChannelMismatch {
                layer: layers.len() - 1,
                expected: MODEL_OUTPUT_CHANNELS,
                found: last.out_channels,
            });
        }
        if last.activation != Activation::Tanh {
            return Err(WeightsError::FinalActivation {
                found: last.activation.tag(),
            });
        }
        Ok(DenoiserModel { layers })
    }

    pub fn layers(&self) -> &[ConvLayer] {
        &self.layers
    }

    /// Number of stored weights and biases.
    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(ConvLayer::parameter_count).sum()
    }

    /// Runs only the conv stack on an already assembled 9-channel tensor.
    pub fn forward(&self, input: &RealTensor3) -> Result<RealTensor3> {
        let mut x = conv2d_same(input, &self.layers[0])?;
        for layer in &self.layers[1..] {
            x = conv2d_same(&x, layer)?;
        }
        Ok(x)
    }
}

/// `pixel_unshuffle -> append noise map -> conv stack -> pixel_shuffle` on a
/// `rows x cols x 2` tensor with even `rows` and `cols`.
pub fn denoise_cnn(model: &DenoiserModel, z: &RealTensor3, sigma: NoiseLevel) -> Result<RealTensor3> {
    let [_, _, channels] = z.dims();
    if channels != 2 {
        return Err(Error::shape(format!("denoiser input needs 2 channels, got {channels}")));
    }
    let sub = pixel_unshuffle(z)?;
    let input = sub.with_constant_channel(sigma.sigma());
    pixel_shuffle(&model.forward(&input)?)
}

#[derive(Clone, Debug)]
pub struct CnnDenoiser {
    model: DenoiserModel,
    label: String,
}

impl CnnDenoiser {
    pub fn new(model: DenoiserModel) -> Self {
        CnnDenoiser {
            model,
            label: "cnn".into(),
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn model(&self) -> &DenoiserModel {
        &self.model
    }
}

impl Denoiser for CnnDenoiser {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn denoise(&self, z: &CsiVector, sigma: NoiseLevel) -> Result<CsiVector> {
        let out = denoise_cnn(&self.model, &z.to_tensor(), sigma)?;
        CsiVector::from_tensor(&out)
    }
}
