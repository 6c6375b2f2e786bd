//! The ConvLSTM sequence autoencoder.
//!
//! Per frame: strided conv encoder → stacked ConvLSTM encoder ending in the
//! bottleneck → ConvLSTM decoder → transposed-conv decoder → sigmoid. The
//! recurrent layers carry state across the ten frames of a window.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::frame::{Frame, SequenceWindow, WINDOW_LEN};
use super::persist::Persist;
use super::snapshot::Parameterized;
use crate::error::{dim_err, Error, Result};
use crate::nn::activation::{sigmoid, sigmoid_backward, tanh_backward};
use crate::nn::conv::{
    conv2d_backward_cols, conv2d_forward_cols, conv_transpose2d_backward_acc,
    conv_transpose2d_forward, Geometry,
};
use crate::nn::convlstm::{convlstm_backward_acc, step_cached, ConvLstmStepCache};
use crate::nn::{
    adam_update, clip_global_norm, init_uniform, mse_loss, AdamState, ConvKernelSet,
    ConvLstmCellParams, ConvTransposeKernelSet, Tensor3,
};

/// Global gradient-norm ceiling applied before every Adam step.
pub const GRAD_CLIP_NORM: f64 = 5.0;

/// Layer widths of the autoencoder. Every spatial conv has stride 2, every
/// transposed conv doubles resolution back.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchDescriptor {
    pub frame_size: usize,
    pub conv_channels: Vec<usize>,
    pub conv_kernel: usize,
    pub encoder_lstm: Vec<usize>,
    pub decoder_lstm: Vec<usize>,
    pub lstm_kernel: usize,
    pub deconv_channels: Vec<usize>,
}

impl Default for ArchDescriptor {
    fn default() -> Self {
        Self {
            frame_size: 32,
            conv_channels: vec![16, 32],
            conv_kernel: 3,
            encoder_lstm: vec![32, 16],
            decoder_lstm: vec![32],
            lstm_kernel: 3,
            deconv_channels: vec![16, 1],
        }
    }
}

impl ArchDescriptor {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(format!("autoencoder descriptor: {m}")));
        if self.conv_channels.is_empty()
            || self.encoder_lstm.is_empty()
            || self.decoder_lstm.is_empty()
        {
            return fail("every stage needs at least one layer");
        }
        if self.deconv_channels.len() != self.conv_channels.len() {
            return fail("transposed convs must undo every strided conv");
        }
        if self.deconv_channels.last() != Some(&1) {
            return fail("decoder must end in one channel");
        }
        let down = 1usize << self.conv_channels.len();
        if self.frame_size == 0 || !self.frame_size.is_multiple_of(down) {
            return fail("frame size must be divisible by the total stride");
        }
        if self.conv_kernel.is_multiple_of(2) || self.lstm_kernel.is_multiple_of(2) {
            return fail("kernel sizes must be odd");
        }
        let encoded = *self.conv_channels.last().unwrap();
        if *self.encoder_lstm.last().unwrap() >= encoded {
            return fail("bottleneck must have fewer channels than the spatial encoder output");
        }
        if [
            &self.conv_channels,
            &self.encoder_lstm,
            &self.decoder_lstm,
            &self.deconv_channels,
        ]
        .iter()
        .any(|v| v.contains(&0))
        {
            return fail("channel counts must be positive");
        }
        Ok(())
    }

    pub fn latent_size(&self) -> usize {
        self.frame_size >> self.conv_channels.len()
    }

    /// Closed-form parameter count of the model this descriptor builds.
    pub fn param_count(&self) -> usize {
        let ck = self.conv_kernel * self.conv_kernel;
        let lk = self.lstm_kernel * self.lstm_kernel;
        let mut total = 0;
        let mut cin = 1;
        for &c in &self.conv_channels {
            total += c * cin * ck + c;
            cin = c;
        }
        for &h in self.encoder_lstm.iter().chain(&self.decoder_lstm) {
            total += 4 * h * (cin + h) * lk + 4 * h;
            cin = h;
        }
        for &c in &self.deconv_channels {
            total += c * cin * ck + c;
            cin = c;
        }
        total
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderModel {
    arch: ArchDescriptor,
    pub(crate) convs: Vec<ConvKernelSet>,
    pub(crate) encoder: Vec<ConvLstmCellParams>,
    pub(crate) decoder: Vec<ConvLstmCellParams>,
    pub(crate) deconvs: Vec<ConvTransposeKernelSet>,
}

struct ConvCache {
    cols: Vec<f64>,
    geometry: Geometry,
    /// Activated output.
    out: Tensor3,
}

struct DeconvCache {
    input: Tensor3,
    out: Tensor3,
}

/// Activations retained from a forward pass over one window.
pub struct ForwardCache {
    convs: Vec<Vec<ConvCache>>,
    lstm: Vec<Vec<ConvLstmStepCache>>,
    deconvs: Vec<Vec<DeconvCache>>,
}

impl AutoencoderModel {
    /// Builds a model with `uniform(±1/√fan_in)` weights drawn from `seed`.
    pub fn build(arch: ArchDescriptor, seed: u64) -> Result<Self> {
        let mut model = Self::zeros(arch)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for k in &mut model.convs {
            let fan = k.fan_in();
            init_uniform(&mut k.weights, fan, &mut rng);
            init_uniform(&mut k.bias, fan, &mut rng);
        }
        for cell in model.encoder.iter_mut().chain(model.decoder.iter_mut()) {
            let fan = cell.kernel.fan_in();
            init_uniform(&mut cell.kernel.weights, fan, &mut rng);
            init_uniform(&mut cell.kernel.bias, fan, &mut rng);
        }
        for k in &mut model.deconvs {
            let fan = k.fan_in();
            init_uniform(&mut k.weights, fan, &mut rng);
            init_uniform(&mut k.bias, fan, &mut rng);
        }
        Ok(model)
    }

    /// All-zero parameters with the descriptor's shapes.
    pub fn zeros(arch: ArchDescriptor) -> Result<Self> {
        arch.validate()?;
        let k = arch.conv_kernel;
        let mut cin = 1;
        let mut convs = Vec::new();
        for &c in &arch.conv_channels {
            convs.push(ConvKernelSet::zeros(c, cin, k, k, 2, k / 2)?);
            cin = c;
        }
        let mut encoder = Vec::new();
        for &h in &arch.encoder_lstm {
            encoder.push(ConvLstmCellParams::zeros(cin, h, arch.lstm_kernel)?);
            cin = h;
        }
        let mut decoder = Vec::new();
        for &h in &arch.decoder_lstm {
            decoder.push(ConvLstmCellParams::zeros(cin, h, arch.lstm_kernel)?);
            cin = h;
        }
        let mut deconvs = Vec::new();
        for &c in &arch.deconv_channels {
            deconvs.push(ConvTransposeKernelSet::zeros(cin, c, k, k, 2, k / 2, 1)?);
            cin = c;
        }
        Ok(Self {
            arch,
            convs,
            encoder,
            decoder,
            deconvs,
        })
    }

    pub fn arch(&self) -> &ArchDescriptor {
        &self.arch
    }

    fn cells(&self) -> impl Iterator<Item = &ConvLstmCellParams> {
        self.encoder.iter().chain(&self.decoder)
    }

    fn param_slices(&self) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = Vec::new();
        for k in &self.convs {
            v.push(&k.weights);
            v.push(&k.bias);
        }
        for c in self.cells() {
            v.push(&c.kernel.weights);
            v.push(&c.kernel.bias);
        }
        for k in &self.deconvs {
            v.push(&k.weights);
            v.push(&k.bias);
        }
        v
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v: Vec<&mut [f64]> = Vec::new();
        for k in &mut self.convs {
            v.push(&mut k.weights);
            v.push(&mut k.bias);
        }
        for c in self.encoder.iter_mut().chain(self.decoder.iter_mut()) {
            v.push(&mut c.kernel.weights);
            v.push(&mut c.kernel.bias);
        }
        for k in &mut self.deconvs {
            v.push(&mut k.weights);
            v.push(&mut k.bias);
        }
        v
    }

    pub fn param_count(&self) -> usize {
        self.param_slices().iter().map(|s| s.len()).sum()
    }

    /// Parameters concatenated layer by layer (weights then bias).
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for s in self.param_slices() {
            out.extend_from_slice(s);
        }
        out
    }

    pub fn load_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(dim_err!(
                "parameter image has {} values, model needs {}",
                flat.len(),
                self.param_count()
            ));
        }
        let mut offset = 0;
        for s in self.param_slices_mut() {
            let n = s.len();
            s.copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    fn check_input(&self, frames: &[Tensor3]) -> Result<()> {
        if frames.len() != WINDOW_LEN {
            return Err(dim_err!(
                "autoencoder consumes {WINDOW_LEN} frames, got {}",
                frames.len()
            ));
        }
        let n = self.arch.frame_size;
        if let Some(f) = frames.iter().find(|f| f.shape() != (1, n, n)) {
            return Err(dim_err!(
                "frame shape {:?}, expected (1, {n}, {n})",
                f.shape()
            ));
        }
        Ok(())
    }

    /// Runs the network over a window, keeping everything backward needs.
    pub fn forward_cached(&self, frames: &[Tensor3]) -> Result<(Vec<Tensor3>, ForwardCache)> {
        self.check_input(frames)?;
        let s = self.arch.latent_size();
        let cells: Vec<&ConvLstmCellParams> = self.cells().collect();
        let mut h: Vec<Tensor3> = cells
            .iter()
            .map(|c| Tensor3::zeros(c.hidden_channels(), s, s))
            .collect();
        let mut c: Vec<Tensor3> = h.clone();
        let mut cache = ForwardCache {
            convs: (0..self.convs.len())
                .map(|_| Vec::with_capacity(WINDOW_LEN))
                .collect(),
            lstm: (0..cells.len())
                .map(|_| Vec::with_capacity(WINDOW_LEN))
                .collect(),
            deconvs: (0..self.deconvs.len())
                .map(|_| Vec::with_capacity(WINDOW_LEN))
                .collect(),
        };
        let mut outputs = Vec::with_capacity(WINDOW_LEN);
        for frame in frames {
            let mut x = frame.clone();
            for (l, k) in self.convs.iter().enumerate() {
                let (z, cols, geometry) = conv2d_forward_cols(&x, k)?;
                let out = z.map(f64::tanh);
                x = out.clone();
                cache.convs[l].push(ConvCache {
                    cols,
                    geometry,
                    out,
                });
            }
            for (l, cell) in cells.iter().enumerate() {
                let (nh, nc, step) = step_cached(&x, &h[l], &c[l], cell)?;
                cache.lstm[l].push(step);
                x = nh.clone();
                h[l] = nh;
                c[l] = nc;
            }
            let last = self.deconvs.len() - 1;
            for (l, k) in self.deconvs.iter().enumerate() {
                let z = conv_transpose2d_forward(&x, k)?;
                let out = if l == last {
                    z.map(sigmoid)
                } else {
                    z.map(f64::tanh)
                };
                cache.deconvs[l].push(DeconvCache {
                    input: x,
                    out: out.clone(),
                });
                x = out;
            }
            outputs.push(x);
        }
        Ok((outputs, cache))
    }

    pub fn forward(&self, frames: &[Tensor3]) -> Result<Vec<Tensor3>> {
        Ok(self.forward_cached(frames)?.0)
    }

    /// Gradient of `Σ_t grad_out[t] ⊙ output[t]` with respect to every
    /// parameter, returned as a model-shaped container.
    pub fn backward(&self, cache: &ForwardCache, grad_out: &[Tensor3]) -> Result<AutoencoderModel> {
        if grad_out.len() != WINDOW_LEN || cache.deconvs.iter().any(|d| d.len() != WINDOW_LEN) {
            return Err(Error::State(
                "backward needs a full forward cache and one gradient per frame".into(),
            ));
        }
        let mut grads = Self::zeros(self.arch.clone())?;
        let last = self.deconvs.len() - 1;
        // Spatial decoder, frame by frame.
        let mut upstream: Vec<Tensor3> = Vec::with_capacity(WINDOW_LEN);
        for (t, g0) in grad_out.iter().enumerate() {
            let mut g = g0.clone();
            for l in (0..self.deconvs.len()).rev() {
                let dc = &cache.deconvs[l][t];
                g.ensure_shape(&dc.out, "decoder gradient")?;
                let dz: Vec<f64> = dc
                    .out
                    .data()
                    .iter()
                    .zip(g.data())
                    .map(|(&y, &d)| {
                        if l == last {
                            sigmoid_backward(y, d)
                        } else {
                            tanh_backward(y, d)
                        }
                    })
                    .collect();
                let dz = Tensor3::from_vec_unchecked(
                    dc.out.channels(),
                    dc.out.height(),
                    dc.out.width(),
                    dz,
                );
                let gk = &mut grads.deconvs[l];
                g = conv_transpose2d_backward_acc(
                    &dc.input,
                    &self.deconvs[l],
                    &dz,
                    &mut gk.weights,
                    &mut gk.bias,
                )?;
            }
            upstream.push(g);
        }
        // Recurrent stack, top to bottom.
        let n_enc = self.encoder.len();
        for l in (0..n_enc + self.decoder.len()).rev() {
            let (cell, gcell) = if l < n_enc {
                (&self.encoder[l], &mut grads.encoder[l])
            } else {
                (&self.decoder[l - n_enc], &mut grads.decoder[l - n_enc])
            };
            let (gin, _, _) = convlstm_backward_acc(
                &cache.lstm[l],
                &upstream,
                cell,
                &mut gcell.kernel.weights,
                &mut gcell.kernel.bias,
            )?;
            upstream = gin;
        }
        // Spatial encoder.
        for g0 in upstream.iter().enumerate() {
            let (t, g) = g0;
            let mut g = g.clone();
            for l in (0..self.convs.len()).rev() {
                let cc = &cache.convs[l][t];
                let dz: Vec<f64> = cc
                    .out
                    .data()
                    .iter()
                    .zip(g.data())
                    .map(|(&y, &d)| tanh_backward(y, d))
                    .collect();
                let gk = &mut grads.convs[l];
                let gin = conv2d_backward_cols(
                    &cc.cols,
                    &cc.geometry,
                    &self.convs[l].weights,
                    self.convs[l].out_channels,
                    &dz,
                    &mut gk.weights,
                    &mut gk.bias,
                    l > 0,
                );
                if let Some(gin) = gin {
                    let (c, hh, ww) = cache.convs[l - 1][t].out.shape();
                    g = Tensor3::from_vec_unchecked(c, hh, ww, gin);
                }
            }
        }
        Ok(grads)
    }

    /// Reconstructs the window; values lie in `(0, 1)` through the output sigmoid.
    pub fn reconstruct(&self, window: &SequenceWindow) -> Result<SequenceWindow> {
        let outputs = self.forward(&window.to_tensors())?;
        let frames = outputs
            .iter()
            .map(Frame::from_tensor)
            .collect::<Result<Vec<_>>>()?;
        SequenceWindow::new(frames, window.start_tick)
    }

    /// Reconstruction MSE of a window without updating anything.
    pub fn loss(&self, window: &SequenceWindow) -> Result<f64> {
        let targets = window.to_tensors();
        let outputs = self.forward(&targets)?;
        Ok(mse_loss(&outputs, &targets)?.0)
    }

    /// Forward, BPTT, global-norm clip and one Adam update. Returns the
    /// pre-update loss.
    pub fn train_step(&mut self, window: &SequenceWindow, adam: &mut AdamState) -> Result<f64> {
        let targets = window.to_tensors();
        let (outputs, cache) = self.forward_cached(&targets)?;
        let (loss, grad_out) = mse_loss(&outputs, &targets)?;
        if !loss.is_finite() {
            return Err(Error::Numeric(format!("training loss is {loss}")));
        }
        let grads = self.backward(&cache, &grad_out)?;
        let mut g = grads.flat_params();
        clip_global_norm(&mut g, GRAD_CLIP_NORM);
        let mut p = self.flat_params();
        adam_update(&mut p, &g, adam)?;
        self.load_flat_params(&p)?;
        Ok(loss)
    }

    pub fn new_optimizer(&self, lr: f64) -> AdamState {
        AdamState::new(self.param_count(), lr)
    }
}

impl Parameterized for AutoencoderModel {
    fn param_count(&self) -> usize {
        AutoencoderModel::param_count(self)
    }

    fn flat_params(&self) -> Vec<f64> {
        AutoencoderModel::flat_params(self)
    }

    fn load_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        AutoencoderModel::load_flat_params(self, flat)
    }
}

impl ArchDescriptor {
    pub fn to_words(&self) -> Vec<u32> {
        let mut w = vec![
            self.frame_size as u32,
            self.conv_kernel as u32,
            self.lstm_kernel as u32,
        ];
        for list in [
            &self.conv_channels,
            &self.encoder_lstm,
            &self.decoder_lstm,
            &self.deconv_channels,
        ] {
            w.push(list.len() as u32);
            w.extend(list.iter().map(|&c| c as u32));
        }
        w
    }

    pub fn from_words(words: &[u32]) -> Result<Self> {
        let bad = || Error::Format("malformed autoencoder descriptor".into());
        let mut it = words.iter().map(|&w| w as usize);
        let mut next = || it.next().ok_or_else(bad);
        let frame_size = next()?;
        let conv_kernel = next()?;
        let lstm_kernel = next()?;
        let mut lists = Vec::with_capacity(4);
        for _ in 0..4 {
            let n = next()?;
            if n > 64 {
                return Err(bad());
            }
            lists.push((0..n).map(|_| next()).collect::<Result<Vec<_>>>()?);
        }
        if next().is_ok() {
            return Err(bad());
        }
        let deconv_channels = lists.pop().unwrap();
        let decoder_lstm = lists.pop().unwrap();
        let encoder_lstm = lists.pop().unwrap();
        let conv_channels = lists.pop().unwrap();
        let arch = Self {
            frame_size,
            conv_channels,
            conv_kernel,
            encoder_lstm,
            decoder_lstm,
            lstm_kernel,
            deconv_channels,
        };
        arch.validate()?;
        Ok(arch)
    }
}

impl Persist for AutoencoderModel {
    const KIND: u8 = 1;

    fn descriptor_words(&self) -> Vec<u32> {
        self.arch.to_words()
    }

    fn from_descriptor(words: &[u32]) -> Result<Self> {
        Self::zeros(ArchDescriptor::from_words(words)?)
    }
}
