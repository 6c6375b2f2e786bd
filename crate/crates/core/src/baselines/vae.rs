//! Convolutional VAE whose per-frame reconstruction error is a curiosity bonus.
//!
//! Encoder: the autoencoder's two strided convs, then full-extent convs to
//! the latent mean and log-variance. Decoder: a full-extent transposed conv
//! back to the feature map and two strided transposed convs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{dim_err, Error, Result};
use crate::memory::persist::Persist;
use crate::memory::snapshot::Parameterized;
use crate::memory::{Frame, SequenceWindow, GRAD_CLIP_NORM};
use crate::nn::activation::{sigmoid, sigmoid_backward, tanh_backward};
use crate::nn::conv::{
    conv2d_backward_cols, conv2d_forward_cols, conv_transpose2d_backward_acc,
    conv_transpose2d_forward,
};
use crate::nn::{
    adam_update, clip_global_norm, init_uniform, AdamState, ConvKernelSet, ConvTransposeKernelSet,
    Tensor3,
};

pub const DEFAULT_LATENT: usize = 32;
pub const DEFAULT_BETA: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct VaeModel {
    frame_size: usize,
    latent: usize,
    pub(crate) convs: Vec<ConvKernelSet>,
    pub(crate) mean_head: ConvKernelSet,
    pub(crate) logvar_head: ConvKernelSet,
    pub(crate) expand: ConvTransposeKernelSet,
    pub(crate) deconvs: Vec<ConvTransposeKernelSet>,
    /// MSE that maps to a bonus of 1; set by [`VaeModel::calibrate_bonus`].
    pub bonus_scale: f64,
    pub beta: f64,
}

/// Output of [`vae_forward`].
#[derive(Debug, Clone, PartialEq)]
pub struct VaeOutput {
    pub reconstruction: Frame,
    pub mean: Vec<f64>,
    pub logvar: Vec<f64>,
    pub z: Vec<f64>,
}

/// Activations kept for backward.
pub struct VaeCache {
    conv_cols: Vec<(Vec<f64>, crate::nn::conv::Geometry, Tensor3)>,
    head_cols: Vec<f64>,
    head_geometry: crate::nn::conv::Geometry,
    noise: Vec<f64>,
    z: Tensor3,
    expanded: Tensor3,
    deconv: Vec<(Tensor3, Tensor3)>,
    out: Tensor3,
}

impl VaeModel {
    pub fn zeros(frame_size: usize, latent: usize) -> Result<Self> {
        if frame_size == 0 || !frame_size.is_multiple_of(4) || latent == 0 {
            return Err(Error::Config(
                "VAE needs a frame size divisible by 4 and a positive latent size".into(),
            ));
        }
        let feat = frame_size / 4;
        Ok(Self {
            frame_size,
            latent,
            convs: vec![
                ConvKernelSet::zeros(16, 1, 3, 3, 2, 1)?,
                ConvKernelSet::zeros(32, 16, 3, 3, 2, 1)?,
            ],
            mean_head: ConvKernelSet::zeros(latent, 32, feat, feat, 1, 0)?,
            logvar_head: ConvKernelSet::zeros(latent, 32, feat, feat, 1, 0)?,
            expand: ConvTransposeKernelSet::zeros(latent, 32, feat, feat, 1, 0, 0)?,
            deconvs: vec![
                ConvTransposeKernelSet::zeros(32, 16, 3, 3, 2, 1, 1)?,
                ConvTransposeKernelSet::zeros(16, 1, 3, 3, 2, 1, 1)?,
            ],
            bonus_scale: 1.0,
            beta: DEFAULT_BETA,
        })
    }

    pub fn build(frame_size: usize, latent: usize, seed: u64) -> Result<Self> {
        let mut m = Self::zeros(frame_size, latent)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for k in m
            .convs
            .iter_mut()
            .chain([&mut m.mean_head, &mut m.logvar_head])
        {
            let fan = k.fan_in();
            init_uniform(&mut k.weights, fan, &mut rng);
            init_uniform(&mut k.bias, fan, &mut rng);
        }
        for k in std::iter::once(&mut m.expand).chain(m.deconvs.iter_mut()) {
            let fan = k.fan_in();
            init_uniform(&mut k.weights, fan, &mut rng);
            init_uniform(&mut k.bias, fan, &mut rng);
        }
        Ok(m)
    }

    pub fn frame_size(&self) -> usize {
        self.frame_size
    }

    pub fn latent_dim(&self) -> usize {
        self.latent
    }

    fn slices(&self) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = Vec::new();
        for k in self
            .convs
            .iter()
            .chain([&self.mean_head, &self.logvar_head])
        {
            v.push(&k.weights);
            v.push(&k.bias);
        }
        for k in std::iter::once(&self.expand).chain(&self.deconvs) {
            v.push(&k.weights);
            v.push(&k.bias);
        }
        v
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v: Vec<&mut [f64]> = Vec::new();
        for k in self
            .convs
            .iter_mut()
            .chain([&mut self.mean_head, &mut self.logvar_head])
        {
            v.push(&mut k.weights);
            v.push(&mut k.bias);
        }
        for k in std::iter::once(&mut self.expand).chain(self.deconvs.iter_mut()) {
            v.push(&mut k.weights);
            v.push(&mut k.bias);
        }
        v
    }

    fn zero_like(&self) -> Self {
        let mut g = self.clone();
        for s in g.slices_mut() {
            s.fill(0.0);
        }
        g
    }

    pub fn forward_cached(&self, frame: &Frame, noise: &[f64]) -> Result<(VaeOutput, VaeCache)> {
        if frame.height() != self.frame_size || frame.width() != self.frame_size {
            return Err(dim_err!("VAE expects {0}×{0} frames", self.frame_size));
        }
        if noise.len() != self.latent {
            return Err(dim_err!(
                "noise length {} != latent size {}",
                noise.len(),
                self.latent
            ));
        }
        let mut x = frame.to_tensor();
        let mut conv_cols = Vec::with_capacity(self.convs.len());
        for k in &self.convs {
            let (pre, cols, g) = conv2d_forward_cols(&x, k)?;
            x = pre.map(f64::tanh);
            conv_cols.push((cols, g, x.clone()));
        }
        let (mean_t, head_cols, head_geometry) = conv2d_forward_cols(&x, &self.mean_head)?;
        let (logvar_t, _, _) = conv2d_forward_cols(&x, &self.logvar_head)?;
        let mean = mean_t.into_vec();
        let logvar = logvar_t.into_vec();
        let z: Vec<f64> = (0..self.latent)
            .map(|i| mean[i] + (logvar[i] / 2.0).exp() * noise[i])
            .collect();
        let z_t = Tensor3::from_vec_unchecked(self.latent, 1, 1, z.clone());
        let expanded = conv_transpose2d_forward(&z_t, &self.expand)?.map(f64::tanh);
        let mut h = expanded.clone();
        let mut deconv = Vec::with_capacity(self.deconvs.len());
        let last = self.deconvs.len() - 1;
        for (l, k) in self.deconvs.iter().enumerate() {
            let pre = conv_transpose2d_forward(&h, k)?;
            let out = if l == last {
                pre.map(sigmoid)
            } else {
                pre.map(f64::tanh)
            };
            deconv.push((h, out.clone()));
            h = out;
        }
        let reconstruction = Frame::from_tensor(&h)?;
        let cache = VaeCache {
            conv_cols,
            head_cols,
            head_geometry,
            noise: noise.to_vec(),
            z: z_t,
            expanded,
            deconv,
            out: h,
        };
        Ok((
            VaeOutput {
                reconstruction,
                mean,
                logvar,
                z,
            },
            cache,
        ))
    }

    /// Parameter gradients given upstream gradients on the reconstruction,
    /// mean and log-variance, accumulated into `grads`.
    pub fn backward_into(
        &self,
        cache: &VaeCache,
        out: &VaeOutput,
        d_recon: &[f64],
        d_mean: &[f64],
        d_logvar: &[f64],
        grads: &mut VaeModel,
    ) -> Result<()> {
        let last = self.deconvs.len() - 1;
        let mut g = Tensor3::from_vec(1, self.frame_size, self.frame_size, d_recon.to_vec())?;
        for l in (0..self.deconvs.len()).rev() {
            let (input, output) = &cache.deconv[l];
            let y = if l == last { &cache.out } else { output };
            let dz: Vec<f64> = y
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
            let dz = Tensor3::from_vec_unchecked(y.channels(), y.height(), y.width(), dz);
            let gk = &mut grads.deconvs[l];
            g = conv_transpose2d_backward_acc(
                input,
                &self.deconvs[l],
                &dz,
                &mut gk.weights,
                &mut gk.bias,
            )?;
        }
        let e = &cache.expanded;
        let dz: Vec<f64> = e
            .data()
            .iter()
            .zip(g.data())
            .map(|(&y, &d)| tanh_backward(y, d))
            .collect();
        let dz = Tensor3::from_vec_unchecked(e.channels(), e.height(), e.width(), dz);
        let gz = conv_transpose2d_backward_acc(
            &cache.z,
            &self.expand,
            &dz,
            &mut grads.expand.weights,
            &mut grads.expand.bias,
        )?;
        let gz = gz.data();
        let mut dm = vec![0.0; self.latent];
        let mut dl = vec![0.0; self.latent];
        for i in 0..self.latent {
            dm[i] = d_mean[i] + gz[i];
            dl[i] = d_logvar[i] + gz[i] * cache.noise[i] * 0.5 * (out.logvar[i] / 2.0).exp();
        }
        let g_mean = conv2d_backward_cols(
            &cache.head_cols,
            &cache.head_geometry,
            &self.mean_head.weights,
            self.latent,
            &dm,
            &mut grads.mean_head.weights,
            &mut grads.mean_head.bias,
            true,
        )
        .expect("requested");
        let g_lv = conv2d_backward_cols(
            &cache.head_cols,
            &cache.head_geometry,
            &self.logvar_head.weights,
            self.latent,
            &dl,
            &mut grads.logvar_head.weights,
            &mut grads.logvar_head.bias,
            true,
        )
        .expect("requested");
        let mut g: Vec<f64> = g_mean.iter().zip(&g_lv).map(|(a, b)| a + b).collect();
        for l in (0..self.convs.len()).rev() {
            let (cols, geom, y) = &cache.conv_cols[l];
            let dz: Vec<f64> = y
                .data()
                .iter()
                .zip(&g)
                .map(|(&y, &d)| tanh_backward(y, d))
                .collect();
            let gk = &mut grads.convs[l];
            match conv2d_backward_cols(
                cols,
                geom,
                &self.convs[l].weights,
                self.convs[l].out_channels,
                &dz,
                &mut gk.weights,
                &mut gk.bias,
                l > 0,
            ) {
                Some(gin) => g = gin,
                None => break,
            }
        }
        Ok(())
    }

    /// Loss of one frame under the given noise.
    pub fn frame_loss(&self, frame: &Frame, noise: &[f64]) -> Result<f64> {
        let (out, _) = self.forward_cached(frame, noise)?;
        Ok(vae_loss(
            &out.reconstruction,
            frame,
            &out.mean,
            &out.logvar,
            self.beta,
        )?
        .loss)
    }

    /// One Adam step on the mean ELBO loss over the window's frames, with
    /// fresh noise per frame. Returns the pre-update loss.
    pub fn train_step(
        &mut self,
        window: &SequenceWindow,
        adam: &mut AdamState,
        rng: &mut impl Rng,
    ) -> Result<f64> {
        let mut grads = self.zero_like();
        let n = window.len() as f64;
        let mut total = 0.0;
        for frame in window.frames() {
            let noise: Vec<f64> = (0..self.latent)
                .map(|_| rng.sample(StandardNormal))
                .collect();
            let (out, cache) = self.forward_cached(frame, &noise)?;
            let l = vae_loss(
                &out.reconstruction,
                frame,
                &out.mean,
                &out.logvar,
                self.beta,
            )?;
            total += l.loss / n;
            let scale = |v: Vec<f64>| v.into_iter().map(|g| g / n).collect::<Vec<_>>();
            self.backward_into(
                &cache,
                &out,
                &scale(l.d_recon),
                &scale(l.d_mean),
                &scale(l.d_logvar),
                &mut grads,
            )?;
        }
        if !total.is_finite() {
            return Err(Error::Numeric(format!("VAE loss is {total}")));
        }
        let mut g = grads.flat_params();
        clip_global_norm(&mut g, GRAD_CLIP_NORM);
        let mut p = self.flat_params();
        adam_update(&mut p, &g, adam)?;
        self.load_flat_params(&p)?;
        Ok(total)
    }

    pub fn new_optimizer(&self, lr: f64) -> AdamState {
        AdamState::new(self.param_count(), lr)
    }

    /// Deterministic (zero-noise) reconstruction MSE of one frame.
    pub fn reconstruction_mse(&self, frame: &Frame) -> Result<f64> {
        let out = vae_forward(self, frame, &vec![0.0; self.latent])?;
        Ok(frame_mse(&out.reconstruction, frame))
    }

    /// Zero-noise reconstruction of every frame in `window`.
    pub fn reconstruct(&self, window: &SequenceWindow) -> Result<SequenceWindow> {
        let zero = vec![0.0; self.latent];
        let frames = window
            .frames()
            .iter()
            .map(|f| vae_forward(self, f, &zero).map(|o| o.reconstruction))
            .collect::<Result<Vec<_>>>()?;
        SequenceWindow::new(frames, window.start_tick)
    }

    /// Sets the bonus scale so the given quantile of `frames`' MSE maps to a
    /// bonus of `gate` (the novelty level where crediting starts).
    pub fn calibrate_bonus<'a>(
        &mut self,
        frames: impl IntoIterator<Item = &'a Frame>,
        quantile: f64,
        gate: f64,
    ) -> Result<f64> {
        let mut mses = frames
            .into_iter()
            .map(|f| self.reconstruction_mse(f))
            .collect::<Result<Vec<_>>>()?;
        if mses.is_empty() {
            return Err(Error::InsufficientData(
                "no frames to calibrate the VAE bonus".into(),
            ));
        }
        mses.sort_by(f64::total_cmp);
        let idx = ((mses.len() - 1) as f64 * quantile.clamp(0.0, 1.0)).round() as usize;
        let q = mses[idx].max(1e-12);
        self.bonus_scale = (q / gate) as f32 as f64;
        Ok(q)
    }
}

fn frame_mse(a: &Frame, b: &Frame) -> f64 {
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        / a.data().len() as f64
}

pub fn vae_forward(model: &VaeModel, frame: &Frame, noise: &[f64]) -> Result<VaeOutput> {
    Ok(model.forward_cached(frame, noise)?.0)
}

/// Loss value and its gradients with respect to the forward outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct VaeLoss {
    pub loss: f64,
    pub mse: f64,
    pub kl: f64,
    pub d_recon: Vec<f64>,
    pub d_mean: Vec<f64>,
    pub d_logvar: Vec<f64>,
}

/// `MSE + β·KL` with `KL = −½ Σ(1 + logvar − mean² − e^logvar) / latent_dim`.
pub fn vae_loss(
    reconstruction: &Frame,
    target: &Frame,
    mean: &[f64],
    logvar: &[f64],
    beta: f64,
) -> Result<VaeLoss> {
    if reconstruction.data().len() != target.data().len() {
        return Err(dim_err!("reconstruction and target differ in size"));
    }
    if mean.len() != logvar.len() || mean.is_empty() {
        return Err(dim_err!(
            "mean and log-variance must be equal, non-empty lengths"
        ));
    }
    let n = target.data().len() as f64;
    let l = mean.len() as f64;
    let mse = frame_mse(reconstruction, target);
    let kl = -0.5
        * mean
            .iter()
            .zip(logvar)
            .map(|(m, v)| 1.0 + v - m * m - v.exp())
            .sum::<f64>()
        / l;
    let loss = mse + beta * kl;
    if !loss.is_finite() {
        return Err(Error::Numeric(format!("VAE loss is {loss}")));
    }
    Ok(VaeLoss {
        loss,
        mse,
        kl,
        d_recon: reconstruction
            .data()
            .iter()
            .zip(target.data())
            .map(|(r, t)| 2.0 * (r - t) / n)
            .collect(),
        d_mean: mean.iter().map(|m| beta * m / l).collect(),
        d_logvar: logvar
            .iter()
            .map(|v| beta * 0.5 * (v.exp() - 1.0) / l)
            .collect(),
    })
}

/// `clamp(MSE / scale, 0, 1)` of the zero-noise reconstruction.
pub fn vae_curiosity_bonus(model: &VaeModel, frame: &Frame) -> Result<f64> {
    Ok((model.reconstruction_mse(frame)? / model.bonus_scale).clamp(0.0, 1.0))
}

/// Mean per-frame bonus over a window; frame order does not matter.
pub fn window_bonus(model: &VaeModel, window: &SequenceWindow) -> Result<f64> {
    let mut s = 0.0;
    for f in window.frames() {
        s += vae_curiosity_bonus(model, f)?;
    }
    Ok(s / window.len() as f64)
}

impl Parameterized for VaeModel {
    fn param_count(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    fn flat_params(&self) -> Vec<f64> {
        self.slices().concat()
    }

    fn load_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        let need = self.param_count();
        if flat.len() != need {
            return Err(dim_err!(
                "parameter image has {} values, VAE needs {need}",
                flat.len()
            ));
        }
        let mut off = 0;
        for s in self.slices_mut() {
            let n = s.len();
            s.copy_from_slice(&flat[off..off + n]);
            off += n;
        }
        Ok(())
    }
}

impl Persist for VaeModel {
    const KIND: u8 = 2;

    /// Frame size, latent size, then the bonus scale and β as `f32` bit patterns.
    fn descriptor_words(&self) -> Vec<u32> {
        vec![
            self.frame_size as u32,
            self.latent as u32,
            (self.bonus_scale as f32).to_bits(),
            (self.beta as f32).to_bits(),
        ]
    }

    fn from_descriptor(words: &[u32]) -> Result<Self> {
        let [fs, lat, scale, beta] = words else {
            return Err(Error::Format("malformed VAE descriptor".into()));
        };
        let mut m = Self::zeros(*fs as usize, *lat as usize)?;
        m.bonus_scale = f32::from_bits(*scale) as f64;
        m.beta = f32::from_bits(*beta) as f64;
        Ok(m)
    }
}
