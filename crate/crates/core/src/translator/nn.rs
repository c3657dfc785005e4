//! Minimal 1-D convolutional network with explicit reverse-mode gradients.
//!
//! Every network owns one flat parameter vector; layers address their
//! weights by offset. `forward` returns the output together with a tape of
//! per-layer caches, and `backward` consumes that tape, accumulating
//! parameter gradients into a caller-provided flat buffer of the same size.
//! Networks are immutable during a pass, so many samples can be pushed
//! through concurrently.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::parallel::{self, ExecMode};

const NORM_EPS: f64 = 1e-5;
/// Below this many multiply-adds a layer runs on the calling thread.
const PAR_THRESHOLD: usize = 1 << 18;

/// Activation of one sample, `channels x len`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Act {
    pub channels: usize,
    pub len: usize,
    pub data: Vec<f64>,
}

impl Act {
    pub fn zeros(channels: usize, len: usize) -> Self {
        Self {
            channels,
            len,
            data: vec![0.0; channels * len],
        }
    }

    pub fn from_signal(x: &[f64]) -> Self {
        Self {
            channels: 1,
            len: x.len(),
            data: x.to_vec(),
        }
    }

    pub fn row(&self, c: usize) -> &[f64] {
        &self.data[c * self.len..(c + 1) * self.len]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub cin: usize,
    pub cout: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    pub w_off: usize,
    pub b_off: usize,
}

impl ConvSpec {
    fn weight_len(&self) -> usize {
        self.cin * self.cout * self.kernel
    }

    pub fn out_len(&self, lin: usize) -> usize {
        (lin + 2 * self.pad - self.kernel) / self.stride + 1
    }

    /// Output positions `t` for which input index `t*stride + k - pad` is valid.
    fn valid_range(&self, k: usize, lin: usize, lout: usize) -> std::ops::Range<usize> {
        let s = self.stride;
        let lo = if self.pad > k {
            (self.pad - k).div_ceil(s)
        } else {
            0
        };
        let top = lin + self.pad;
        if top <= k {
            return 0..0;
        }
        let hi = ((top - k - 1) / s + 1).min(lout);
        lo..hi.max(lo)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvTSpec {
    pub cin: usize,
    pub cout: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    pub out_pad: usize,
    pub w_off: usize,
    pub b_off: usize,
}

impl ConvTSpec {
    fn weight_len(&self) -> usize {
        self.cin * self.cout * self.kernel
    }

    pub fn out_len(&self, lin: usize) -> usize {
        (lin - 1) * self.stride + self.kernel + self.out_pad - 2 * self.pad
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Conv(ConvSpec),
    ConvTranspose(ConvTSpec),
    ReflectPad { left: usize, right: usize },
    InstanceNorm,
    Relu,
    LeakyRelu(f64),
    Tanh,
    Residual(Vec<Layer>),
}

#[derive(Debug, Clone)]
pub enum Cache {
    Input(Act),
    Norm { xhat: Act, inv_std: Vec<f64> },
    Output(Act),
    Pad { len: usize },
    Residual(Vec<Cache>),
}

/// Accumulates layers and hands out parameter offsets.
#[derive(Debug, Default)]
pub struct NetBuilder {
    layers: Vec<Layer>,
    n_params: usize,
    stack: Vec<Vec<Layer>>,
}

impl NetBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn alloc(&mut self, n: usize) -> usize {
        let off = self.n_params;
        self.n_params += n;
        off
    }

    fn push(&mut self, l: Layer) -> &mut Self {
        match self.stack.last_mut() {
            Some(inner) => inner.push(l),
            None => self.layers.push(l),
        }
        self
    }

    pub fn conv(
        &mut self,
        cin: usize,
        cout: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
    ) -> &mut Self {
        let w_off = self.alloc(cin * cout * kernel);
        let b_off = self.alloc(cout);
        self.push(Layer::Conv(ConvSpec {
            cin,
            cout,
            kernel,
            stride,
            pad,
            w_off,
            b_off,
        }))
    }

    pub fn conv_transpose(
        &mut self,
        cin: usize,
        cout: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        out_pad: usize,
    ) -> &mut Self {
        let w_off = self.alloc(cin * cout * kernel);
        let b_off = self.alloc(cout);
        self.push(Layer::ConvTranspose(ConvTSpec {
            cin,
            cout,
            kernel,
            stride,
            pad,
            out_pad,
            w_off,
            b_off,
        }))
    }

    pub fn reflect_pad(&mut self, left: usize, right: usize) -> &mut Self {
        self.push(Layer::ReflectPad { left, right })
    }

    pub fn instance_norm(&mut self) -> &mut Self {
        self.push(Layer::InstanceNorm)
    }

    pub fn relu(&mut self) -> &mut Self {
        self.push(Layer::Relu)
    }

    pub fn leaky_relu(&mut self, slope: f64) -> &mut Self {
        self.push(Layer::LeakyRelu(slope))
    }

    pub fn tanh(&mut self) -> &mut Self {
        self.push(Layer::Tanh)
    }

    pub fn begin_residual(&mut self) -> &mut Self {
        self.stack.push(Vec::new());
        self
    }

    pub fn end_residual(&mut self) -> &mut Self {
        let inner = self
            .stack
            .pop()
            .expect("end_residual without begin_residual");
        self.push(Layer::Residual(inner))
    }

    /// Finish and initialize weights from N(0, init_std); biases start at zero.
    pub fn build<R: Rng>(self, init_std: f64, rng: &mut R) -> Network {
        assert!(self.stack.is_empty(), "unterminated residual block");
        let mut params = vec![0.0; self.n_params];
        let normal = Normal::new(0.0, init_std).unwrap();
        fn init<R: Rng>(layers: &[Layer], p: &mut [f64], n: &Normal<f64>, rng: &mut R) {
            for l in layers {
                match l {
                    Layer::Conv(c) => {
                        for w in &mut p[c.w_off..c.w_off + c.weight_len()] {
                            *w = n.sample(rng);
                        }
                    }
                    Layer::ConvTranspose(c) => {
                        for w in &mut p[c.w_off..c.w_off + c.weight_len()] {
                            *w = n.sample(rng);
                        }
                    }
                    Layer::Residual(inner) => init(inner, p, n, rng),
                    _ => {}
                }
            }
        }
        init(&self.layers, &mut params, &normal, rng);
        Network {
            layers: self.layers,
            params,
            exec: ExecMode::Parallel,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub layers: Vec<Layer>,
    pub params: Vec<f64>,
    pub exec: ExecMode,
}

impl Network {
    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn forward(&self, x: &Act) -> (Act, Vec<Cache>) {
        let mut tape = Vec::with_capacity(self.layers.len());
        let y = forward_seq(
            &self.layers,
            &self.params,
            x.clone(),
            Some(&mut tape),
            self.exec,
        );
        (y, tape)
    }

    /// Forward pass without recording a tape.
    pub fn infer(&self, x: &Act) -> Act {
        forward_seq(&self.layers, &self.params, x.clone(), None, self.exec)
    }

    /// Backpropagate `grad` through the recorded `tape`, adding parameter
    /// gradients into `pgrad` and returning the gradient w.r.t. the input.
    pub fn backward(&self, tape: &[Cache], grad: Act, pgrad: &mut [f64]) -> Act {
        assert_eq!(pgrad.len(), self.params.len());
        backward_seq(&self.layers, &self.params, tape, grad, pgrad, self.exec)
    }
}

fn forward_seq(
    layers: &[Layer],
    p: &[f64],
    mut x: Act,
    mut tape: Option<&mut Vec<Cache>>,
    exec: ExecMode,
) -> Act {
    for l in layers {
        let (y, cache) = forward_layer(l, p, x, tape.is_some(), exec);
        if let (Some(t), Some(c)) = (tape.as_deref_mut(), cache) {
            t.push(c);
        }
        x = y;
    }
    x
}

fn forward_layer(l: &Layer, p: &[f64], x: Act, keep: bool, exec: ExecMode) -> (Act, Option<Cache>) {
    match l {
        Layer::Conv(c) => {
            let y = conv_forward(c, p, &x, exec);
            (y, keep.then_some(Cache::Input(x)))
        }
        Layer::ConvTranspose(c) => {
            let y = conv_t_forward(c, p, &x, exec);
            (y, keep.then_some(Cache::Input(x)))
        }
        Layer::ReflectPad { left, right } => {
            let y = reflect_pad(&x, *left, *right);
            (y, keep.then_some(Cache::Pad { len: x.len }))
        }
        Layer::InstanceNorm => {
            let (y, inv_std) = instance_norm(&x);
            if keep {
                let cache = Cache::Norm {
                    xhat: y.clone(),
                    inv_std,
                };
                (y, Some(cache))
            } else {
                (y, None)
            }
        }
        Layer::Relu => {
            let mut y = x;
            y.data.iter_mut().for_each(|v| *v = v.max(0.0));
            let cache = keep.then(|| Cache::Output(y.clone()));
            (y, cache)
        }
        Layer::LeakyRelu(slope) => {
            let cache = keep.then(|| Cache::Input(x.clone()));
            let mut y = x;
            y.data.iter_mut().for_each(|v| {
                if *v < 0.0 {
                    *v *= slope
                }
            });
            (y, cache)
        }
        Layer::Tanh => {
            let mut y = x;
            y.data.iter_mut().for_each(|v| *v = v.tanh());
            let cache = keep.then(|| Cache::Output(y.clone()));
            (y, cache)
        }
        Layer::Residual(inner) => {
            let mut sub = Vec::new();
            let mut y = forward_seq(inner, p, x.clone(), keep.then_some(&mut sub), exec);
            assert_eq!(
                (y.channels, y.len),
                (x.channels, x.len),
                "residual shape mismatch"
            );
            y.data.iter_mut().zip(&x.data).for_each(|(a, b)| *a += b);
            (y, keep.then_some(Cache::Residual(sub)))
        }
    }
}

fn backward_seq(
    layers: &[Layer],
    p: &[f64],
    tape: &[Cache],
    mut g: Act,
    pgrad: &mut [f64],
    exec: ExecMode,
) -> Act {
    assert_eq!(layers.len(), tape.len(), "tape does not match network");
    for (l, c) in layers.iter().zip(tape).rev() {
        g = backward_layer(l, p, c, g, pgrad, exec);
    }
    g
}

fn backward_layer(
    l: &Layer,
    p: &[f64],
    cache: &Cache,
    g: Act,
    pgrad: &mut [f64],
    exec: ExecMode,
) -> Act {
    match (l, cache) {
        (Layer::Conv(c), Cache::Input(x)) => conv_backward(c, p, x, &g, pgrad, exec),
        (Layer::ConvTranspose(c), Cache::Input(x)) => conv_t_backward(c, p, x, &g, pgrad, exec),
        (Layer::ReflectPad { left, right }, Cache::Pad { len }) => {
            reflect_pad_backward(&g, *left, *right, *len)
        }
        (Layer::InstanceNorm, Cache::Norm { xhat, inv_std }) => {
            instance_norm_backward(xhat, inv_std, &g)
        }
        (Layer::Relu, Cache::Output(y)) => {
            let mut g = g;
            g.data.iter_mut().zip(&y.data).for_each(|(d, y)| {
                if *y <= 0.0 {
                    *d = 0.0
                }
            });
            g
        }
        (Layer::LeakyRelu(slope), Cache::Input(x)) => {
            let mut g = g;
            g.data.iter_mut().zip(&x.data).for_each(|(d, x)| {
                if *x < 0.0 {
                    *d *= slope
                }
            });
            g
        }
        (Layer::Tanh, Cache::Output(y)) => {
            let mut g = g;
            g.data
                .iter_mut()
                .zip(&y.data)
                .for_each(|(d, y)| *d *= 1.0 - y * y);
            g
        }
        (Layer::Residual(inner), Cache::Residual(sub)) => {
            let mut through = backward_seq(inner, p, sub, g.clone(), pgrad, exec);
            through
                .data
                .iter_mut()
                .zip(&g.data)
                .for_each(|(a, b)| *a += b);
            through
        }
        _ => panic!("cache variant does not match layer"),
    }
}

fn conv_forward(c: &ConvSpec, p: &[f64], x: &Act, exec: ExecMode) -> Act {
    assert_eq!(x.channels, c.cin, "conv input channels");
    assert!(
        x.len + 2 * c.pad >= c.kernel,
        "conv input shorter than kernel"
    );
    let lout = c.out_len(x.len);
    let mut y = Act::zeros(c.cout, lout);
    let w = &p[c.w_off..c.w_off + c.weight_len()];
    let b = &p[c.b_off..c.b_off + c.cout];
    let work = c.cin * c.cout * c.kernel * lout;
    let mode = if work < PAR_THRESHOLD {
        ExecMode::Sequential
    } else {
        exec
    };
    let ranges: Vec<_> = (0..c.kernel)
        .map(|k| c.valid_range(k, x.len, lout))
        .collect();
    parallel::for_each_chunk_mut(mode, &mut y.data, lout, |co, out| {
        out.fill(b[co]);
        for ci in 0..c.cin {
            let xr = x.row(ci);
            let wr = &w[(co * c.cin + ci) * c.kernel..][..c.kernel];
            for (k, &wk) in wr.iter().enumerate() {
                let r = ranges[k].clone();
                if c.stride == 1 {
                    let base = r.start + k - c.pad;
                    let xs = &xr[base..base + r.len()];
                    for (o, xv) in out[r].iter_mut().zip(xs) {
                        *o += wk * xv;
                    }
                } else {
                    for t in r {
                        out[t] += wk * xr[t * c.stride + k - c.pad];
                    }
                }
            }
        }
    });
    y
}

fn conv_backward(
    c: &ConvSpec,
    p: &[f64],
    x: &Act,
    g: &Act,
    pgrad: &mut [f64],
    exec: ExecMode,
) -> Act {
    let lout = g.len;
    let w = &p[c.w_off..c.w_off + c.weight_len()];
    let work = c.cin * c.cout * c.kernel * lout;
    let mode = if work < PAR_THRESHOLD {
        ExecMode::Sequential
    } else {
        exec
    };
    let ranges: Vec<_> = (0..c.kernel)
        .map(|k| c.valid_range(k, x.len, lout))
        .collect();

    // Bias and weight gradients, one output channel per chunk.
    for co in 0..c.cout {
        pgrad[c.b_off + co] += g.row(co).iter().sum::<f64>();
    }
    let gw = &mut pgrad[c.w_off..c.w_off + c.weight_len()];
    parallel::for_each_chunk_mut(mode, gw, c.cin * c.kernel, |co, gw_co| {
        let gr = g.row(co);
        for ci in 0..c.cin {
            let xr = x.row(ci);
            for k in 0..c.kernel {
                let mut acc = 0.0;
                for t in ranges[k].clone() {
                    acc += gr[t] * xr[t * c.stride + k - c.pad];
                }
                gw_co[ci * c.kernel + k] += acc;
            }
        }
    });

    // Input gradient, one input channel per chunk.
    let mut dx = Act::zeros(c.cin, x.len);
    parallel::for_each_chunk_mut(mode, &mut dx.data, x.len, |ci, dxr| {
        for co in 0..c.cout {
            let gr = g.row(co);
            let wr = &w[(co * c.cin + ci) * c.kernel..][..c.kernel];
            for (k, &wk) in wr.iter().enumerate() {
                for t in ranges[k].clone() {
                    dxr[t * c.stride + k - c.pad] += wk * gr[t];
                }
            }
        }
    });
    dx
}

fn conv_t_forward(c: &ConvTSpec, p: &[f64], x: &Act, exec: ExecMode) -> Act {
    assert_eq!(x.channels, c.cin, "transposed conv input channels");
    let lout = c.out_len(x.len);
    let mut y = Act::zeros(c.cout, lout);
    let w = &p[c.w_off..c.w_off + c.weight_len()];
    let b = &p[c.b_off..c.b_off + c.cout];
    let work = c.cin * c.cout * c.kernel * x.len;
    let mode = if work < PAR_THRESHOLD {
        ExecMode::Sequential
    } else {
        exec
    };
    parallel::for_each_chunk_mut(mode, &mut y.data, lout, |co, out| {
        out.fill(b[co]);
        for ci in 0..c.cin {
            let xr = x.row(ci);
            let wr = &w[(ci * c.cout + co) * c.kernel..][..c.kernel];
            for (t, &xv) in xr.iter().enumerate() {
                for (k, &wk) in wr.iter().enumerate() {
                    let pos = t * c.stride + k;
                    if pos >= c.pad && pos - c.pad < lout {
                        out[pos - c.pad] += wk * xv;
                    }
                }
            }
        }
    });
    y
}

fn conv_t_backward(
    c: &ConvTSpec,
    p: &[f64],
    x: &Act,
    g: &Act,
    pgrad: &mut [f64],
    exec: ExecMode,
) -> Act {
    let lout = g.len;
    let w = &p[c.w_off..c.w_off + c.weight_len()];
    let work = c.cin * c.cout * c.kernel * x.len;
    let mode = if work < PAR_THRESHOLD {
        ExecMode::Sequential
    } else {
        exec
    };
    for co in 0..c.cout {
        pgrad[c.b_off + co] += g.row(co).iter().sum::<f64>();
    }
    let gw = &mut pgrad[c.w_off..c.w_off + c.weight_len()];
    parallel::for_each_chunk_mut(mode, gw, c.cout * c.kernel, |ci, gw_ci| {
        let xr = x.row(ci);
        for co in 0..c.cout {
            let gr = g.row(co);
            for k in 0..c.kernel {
                let mut acc = 0.0;
                for (t, &xv) in xr.iter().enumerate() {
                    let pos = t * c.stride + k;
                    if pos >= c.pad && pos - c.pad < lout {
                        acc += xv * gr[pos - c.pad];
                    }
                }
                gw_ci[co * c.kernel + k] += acc;
            }
        }
    });
    let mut dx = Act::zeros(c.cin, x.len);
    parallel::for_each_chunk_mut(mode, &mut dx.data, x.len, |ci, dxr| {
        for co in 0..c.cout {
            let gr = g.row(co);
            let wr = &w[(ci * c.cout + co) * c.kernel..][..c.kernel];
            for (t, d) in dxr.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (k, &wk) in wr.iter().enumerate() {
                    let pos = t * c.stride + k;
                    if pos >= c.pad && pos - c.pad < lout {
                        acc += wk * gr[pos - c.pad];
                    }
                }
                *d += acc;
            }
        }
    });
    dx
}

/// Reflection index (edge sample not repeated), valid for `|i| < 2*len - 1`.
fn reflect(i: isize, len: usize) -> usize {
    let n = len as isize;
    let j = if i < 0 {
        -i
    } else if i >= n {
        2 * (n - 1) - i
    } else {
        i
    };
    j as usize
}

pub fn reflect_pad(x: &Act, left: usize, right: usize) -> Act {
    assert!(
        left < x.len && right < x.len,
        "reflection pad wider than signal"
    );
    let lout = x.len + left + right;
    let mut y = Act::zeros(x.channels, lout);
    for c in 0..x.channels {
        let xr = x.row(c);
        let yr = &mut y.data[c * lout..(c + 1) * lout];
        for (t, v) in yr.iter_mut().enumerate() {
            *v = xr[reflect(t as isize - left as isize, x.len)];
        }
    }
    y
}

fn reflect_pad_backward(g: &Act, left: usize, _right: usize, len: usize) -> Act {
    let mut dx = Act::zeros(g.channels, len);
    for c in 0..g.channels {
        let gr = g.row(c);
        let dr = &mut dx.data[c * len..(c + 1) * len];
        for (t, gv) in gr.iter().enumerate() {
            dr[reflect(t as isize - left as isize, len)] += gv;
        }
    }
    dx
}

fn instance_norm(x: &Act) -> (Act, Vec<f64>) {
    let mut y = x.clone();
    let n = x.len as f64;
    let mut inv = Vec::with_capacity(x.channels);
    for row in y.data.chunks_mut(x.len) {
        let m = row.iter().sum::<f64>() / n;
        let var = row.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
        let s = 1.0 / (var + NORM_EPS).sqrt();
        row.iter_mut().for_each(|v| *v = (*v - m) * s);
        inv.push(s);
    }
    (y, inv)
}

fn instance_norm_backward(xhat: &Act, inv_std: &[f64], g: &Act) -> Act {
    let mut dx = g.clone();
    let n = g.len as f64;
    for (c, row) in dx.data.chunks_mut(g.len).enumerate() {
        let xr = xhat.row(c);
        let gm = row.iter().sum::<f64>() / n;
        let gx = row.iter().zip(xr).map(|(a, b)| a * b).sum::<f64>() / n;
        for (d, xh) in row.iter_mut().zip(xr) {
            *d = inv_std[c] * (*d - gm - xh * gx);
        }
    }
    dx
}

/// Receptive field of a conv stack given `(kernel, stride)` per layer, using
/// the recurrence `r <- r*s + (k - s)` from the output back to the input.
pub fn receptive_field(layers: &[(usize, usize)]) -> usize {
    layers.iter().rev().fold(1, |r, &(k, s)| r * s + k - s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_act(c: usize, l: usize, rng: &mut ChaCha8Rng) -> Act {
        let n = Normal::new(0.0, 1.0).unwrap();
        Act {
            channels: c,
            len: l,
            data: (0..c * l).map(|_| n.sample(rng)).collect(),
        }
    }

    /// Loss = sum(y * probe); checks input and parameter gradients by
    /// central differences.
    fn check_grads(net: &Network, x: &Act, rng: &mut ChaCha8Rng) {
        let (y, tape) = net.forward(x);
        let probe = random_act(y.channels, y.len, rng);
        let loss = |net: &Network, x: &Act| -> f64 {
            net.infer(x)
                .data
                .iter()
                .zip(&probe.data)
                .map(|(a, b)| a * b)
                .sum()
        };
        let mut pg = vec![0.0; net.n_params()];
        let dx = net.backward(&tape, probe.clone(), &mut pg);
        let h = 1e-5;
        for i in (0..x.data.len()).step_by(3) {
            let mut xp = x.clone();
            xp.data[i] += h;
            let mut xm = x.clone();
            xm.data[i] -= h;
            let fd = (loss(net, &xp) - loss(net, &xm)) / (2.0 * h);
            assert!(
                (fd - dx.data[i]).abs() <= 1e-6 * (1.0 + fd.abs()),
                "dx[{i}] fd {fd} vs {}",
                dx.data[i]
            );
        }
        for i in (0..net.n_params()).step_by(7) {
            let mut np = net.clone();
            np.params[i] += h;
            let mut nm = net.clone();
            nm.params[i] -= h;
            let fd = (loss(&np, x) - loss(&nm, x)) / (2.0 * h);
            assert!(
                (fd - pg[i]).abs() <= 1e-6 * (1.0 + fd.abs()),
                "dp[{i}] fd {fd} vs {}",
                pg[i]
            );
        }
    }

    #[test]
    fn conv_stack_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut b = NetBuilder::new();
        b.reflect_pad(2, 1)
            .conv(2, 3, 3, 1, 0)
            .instance_norm()
            .relu()
            .conv(3, 4, 4, 2, 1)
            .leaky_relu(0.2)
            .conv(4, 2, 3, 2, 1)
            .tanh();
        let net = b.build(0.3, &mut rng);
        let x = random_act(2, 17, &mut rng);
        check_grads(&net, &x, &mut rng);
    }

    #[test]
    fn transpose_and_residual_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut b = NetBuilder::new();
        b.conv(1, 3, 3, 1, 1)
            .begin_residual()
            .reflect_pad(1, 1)
            .conv(3, 3, 3, 1, 0)
            .instance_norm()
            .relu()
            .end_residual()
            .conv_transpose(3, 2, 3, 2, 1, 1)
            .instance_norm()
            .conv_transpose(2, 1, 4, 2, 1, 0);
        let net = b.build(0.3, &mut rng);
        let x = random_act(1, 9, &mut rng);
        let y = net.infer(&x);
        assert_eq!(y.len, 36);
        check_grads(&net, &x, &mut rng);
    }

    #[test]
    fn parallel_and_sequential_agree_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut b = NetBuilder::new();
        b.conv(16, 64, 7, 1, 3)
            .relu()
            .conv_transpose(64, 32, 3, 2, 1, 1);
        let mut net = b.build(0.05, &mut rng);
        let x = random_act(16, 600, &mut rng);
        net.exec = ExecMode::Sequential;
        let (ys, ts) = net.forward(&x);
        let mut gs = vec![0.0; net.n_params()];
        let dxs = net.backward(&ts, ys.clone(), &mut gs);
        net.exec = ExecMode::Parallel;
        let (yp, tp) = net.forward(&x);
        let mut gp = vec![0.0; net.n_params()];
        let dxp = net.backward(&tp, yp.clone(), &mut gp);
        assert_eq!(ys, yp);
        assert_eq!(gs, gp);
        assert_eq!(dxs, dxp);
    }

    #[test]
    fn receptive_field_recurrence() {
        let patch = [(4, 2), (4, 2), (4, 2), (4, 1), (4, 1)];
        assert_eq!(receptive_field(&patch), 70);
        assert_eq!(receptive_field(&[(3, 1)]), 3);
        assert_eq!(receptive_field(&[]), 1);
    }

    #[test]
    fn reflect_pad_matches_definition() {
        let x = Act::from_signal(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(
            reflect_pad(&x, 2, 3).data,
            vec![3.0, 2.0, 1.0, 2.0, 3.0, 4.0, 3.0, 2.0, 1.0]
        );
    }
}
