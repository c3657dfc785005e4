//! Generator and patch discriminator, 1-D adaptations of the residual
//! image-translation generator and the 70-pixel PatchGAN.

use rand::Rng;

use super::config::TranslatorConfig;
use super::nn::{receptive_field, Act, Cache, NetBuilder, Network};

/// Window-to-window generator.
///
/// `c7 -> d(2c) -> d(4c) -> R x res(4c) -> u(2c) -> u(c) -> c7 -> tanh`, with
/// reflection padding around the wide convolutions, instance norm and ReLU
/// after every hidden convolution. Inputs are reflection-padded to a multiple
/// of 4 and trimmed back, and the tanh output is mapped to [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub net: Network,
}

pub struct GeneratorTape {
    tape: Vec<Cache>,
    pad_left: usize,
    padded_len: usize,
}

fn pad_split(len: usize) -> (usize, usize) {
    let p = (4 - len % 4) % 4;
    (p / 2, p - p / 2)
}

impl Generator {
    pub fn build<R: Rng>(cfg: &TranslatorConfig, rng: &mut R) -> Self {
        let c = cfg.gen_base_channels;
        let mut b = NetBuilder::new();
        b.reflect_pad(3, 3)
            .conv(1, c, 7, 1, 0)
            .instance_norm()
            .relu();
        b.conv(c, 2 * c, 3, 2, 1).instance_norm().relu();
        b.conv(2 * c, 4 * c, 3, 2, 1).instance_norm().relu();
        for _ in 0..cfg.residual_blocks {
            b.begin_residual()
                .reflect_pad(1, 1)
                .conv(4 * c, 4 * c, 3, 1, 0)
                .instance_norm()
                .relu()
                .reflect_pad(1, 1)
                .conv(4 * c, 4 * c, 3, 1, 0)
                .instance_norm()
                .end_residual();
        }
        b.conv_transpose(4 * c, 2 * c, 3, 2, 1, 1)
            .instance_norm()
            .relu();
        b.conv_transpose(2 * c, c, 3, 2, 1, 1)
            .instance_norm()
            .relu();
        b.reflect_pad(3, 3).conv(c, 1, 7, 1, 0).tanh();
        let mut net = b.build(cfg.init_std, rng);
        net.exec = cfg.exec;
        Self { net }
    }

    fn pad_input(x: &[f64]) -> (Act, usize) {
        let (l, r) = pad_split(x.len());
        let a = Act::from_signal(x);
        if l + r == 0 {
            return (a, 0);
        }
        (super::nn::reflect_pad(&a, l, r), l)
    }

    fn finish(y: &Act, pad_left: usize, len: usize) -> Vec<f64> {
        y.data[pad_left..pad_left + len]
            .iter()
            .map(|t| 0.5 * (t + 1.0))
            .collect()
    }

    pub fn forward(&self, x: &[f64]) -> (Vec<f64>, GeneratorTape) {
        let (a, pad_left) = Self::pad_input(x);
        let padded_len = a.len;
        let (y, tape) = self.net.forward(&a);
        (
            Self::finish(&y, pad_left, x.len()),
            GeneratorTape {
                tape,
                pad_left,
                padded_len,
            },
        )
    }

    pub fn infer(&self, x: &[f64]) -> Vec<f64> {
        let (a, pad_left) = Self::pad_input(x);
        let y = self.net.infer(&a);
        Self::finish(&y, pad_left, x.len())
    }

    /// Gradient w.r.t. the unpadded input given the gradient w.r.t. the output.
    pub fn backward(&self, tape: &GeneratorTape, grad: &[f64], pgrad: &mut [f64]) -> Vec<f64> {
        let mut g = Act::zeros(1, tape.padded_len);
        for (i, v) in grad.iter().enumerate() {
            g.data[tape.pad_left + i] = 0.5 * v;
        }
        let dx = self.net.backward(&tape.tape, g, pgrad);
        let len = grad.len();
        if tape.padded_len == len {
            return dx.data;
        }
        // Fold the reflection padding back onto the input samples.
        let right = tape.padded_len - len - tape.pad_left;
        let mut out = dx.data[tape.pad_left..tape.pad_left + len].to_vec();
        for j in 0..tape.pad_left {
            out[tape.pad_left - j] += dx.data[j];
        }
        for j in 0..right {
            out[len - 2 - j] += dx.data[tape.pad_left + len + j];
        }
        out
    }
}

/// Patch discriminator: stride-2 width-4 convolutions followed by two
/// stride-1 width-4 convolutions, the last producing one score per patch.
#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator {
    pub net: Network,
    pub receptive_field: usize,
}

/// Number of stride-2 layers whose receptive field is closest to `target`.
pub fn discriminator_depth(target: usize) -> usize {
    (1..=8)
        .min_by_key(|&n| {
            let rf = receptive_field(&discriminator_geometry(n));
            (rf as i64 - target as i64).abs()
        })
        .unwrap()
}

/// `(kernel, stride)` of each conv layer for `n_down` stride-2 layers.
pub fn discriminator_geometry(n_down: usize) -> Vec<(usize, usize)> {
    let mut g = vec![(4, 2); n_down];
    g.extend([(4, 1), (4, 1)]);
    g
}

impl Discriminator {
    pub fn build<R: Rng>(cfg: &TranslatorConfig, rng: &mut R) -> Self {
        let n_down = discriminator_depth(cfg.discriminator_receptive_field);
        let c = cfg.disc_base_channels;
        let mut b = NetBuilder::new();
        b.conv(1, c, 4, 2, 1).leaky_relu(0.2);
        let mut ch = c;
        for i in 1..n_down {
            let next = c * (1 << i.min(3));
            b.conv(ch, next, 4, 2, 1).instance_norm().leaky_relu(0.2);
            ch = next;
        }
        let next = c * (1 << n_down.min(3));
        b.conv(ch, next, 4, 1, 1).instance_norm().leaky_relu(0.2);
        b.conv(next, 1, 4, 1, 1);
        let mut net = b.build(cfg.init_std, rng);
        net.exec = cfg.exec;
        Self {
            net,
            receptive_field: receptive_field(&discriminator_geometry(n_down)),
        }
    }

    pub fn forward(&self, x: &[f64]) -> (Vec<f64>, Vec<Cache>) {
        let (y, tape) = self.net.forward(&Act::from_signal(x));
        (y.data, tape)
    }

    pub fn infer(&self, x: &[f64]) -> Vec<f64> {
        self.net.infer(&Act::from_signal(x)).data
    }

    pub fn backward(&self, tape: &[Cache], grad: &[f64], pgrad: &mut [f64]) -> Vec<f64> {
        let g = Act {
            channels: 1,
            len: grad.len(),
            data: grad.to_vec(),
        };
        self.net.backward(tape, g, pgrad).data
    }
}
