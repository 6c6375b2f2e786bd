//! Convolutional LSTM cell (no peephole terms) with backpropagation through time.
//!
//! The four gates share one fused kernel. Output channels are gate-major in
//! the order input, forget, output, candidate; input channels hold the
//! input-to-state taps first and the state-to-state taps after them. With
//! "same" padding and stride 1 this is exactly the sum of separate
//! input-to-state and state-to-state convolutions per gate.

use super::activation::sigmoid;
use super::conv::{conv2d_backward_cols, conv2d_forward_cols, ConvKernelSet, Geometry};
use super::tensor::Tensor3;
use crate::error::{dim_err, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Input = 0,
    Forget = 1,
    Output = 2,
    Candidate = 3,
}

impl Gate {
    pub const ALL: [Gate; 4] = [Gate::Input, Gate::Forget, Gate::Output, Gate::Candidate];
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLstmCellParams {
    input_channels: usize,
    hidden_channels: usize,
    /// Fused gate kernel: `4·hidden` outputs over `input + hidden` channels.
    pub kernel: ConvKernelSet,
}

impl ConvLstmCellParams {
    pub fn zeros(
        input_channels: usize,
        hidden_channels: usize,
        kernel_size: usize,
    ) -> Result<Self> {
        if kernel_size.is_multiple_of(2) {
            return Err(Error::Config(
                "ConvLSTM kernels must have odd size for same padding".into(),
            ));
        }
        if hidden_channels == 0 || input_channels == 0 {
            return Err(Error::Config(
                "ConvLSTM channel counts must be non-zero".into(),
            ));
        }
        Ok(Self {
            input_channels,
            hidden_channels,
            kernel: ConvKernelSet::zeros(
                4 * hidden_channels,
                input_channels + hidden_channels,
                kernel_size,
                kernel_size,
                1,
                kernel_size / 2,
            )?,
        })
    }

    #[inline]
    pub fn input_channels(&self) -> usize {
        self.input_channels
    }

    #[inline]
    pub fn hidden_channels(&self) -> usize {
        self.hidden_channels
    }

    #[inline]
    pub fn kernel_size(&self) -> usize {
        self.kernel.kernel_h
    }

    pub fn param_count(&self) -> usize {
        self.kernel.param_count()
    }

    /// Flat index into `kernel.weights` of an input-to-state tap.
    pub fn input_weight_index(
        &self,
        gate: Gate,
        o: usize,
        c: usize,
        dy: usize,
        dx: usize,
    ) -> usize {
        let k = self.kernel_size();
        let row = gate as usize * self.hidden_channels + o;
        ((row * self.kernel.in_channels + c) * k + dy) * k + dx
    }

    /// Flat index into `kernel.weights` of a state-to-state tap.
    pub fn state_weight_index(
        &self,
        gate: Gate,
        o: usize,
        c: usize,
        dy: usize,
        dx: usize,
    ) -> usize {
        self.input_weight_index(gate, o, self.input_channels + c, dy, dx)
    }

    pub fn input_weight(&self, gate: Gate, o: usize, c: usize, dy: usize, dx: usize) -> f64 {
        self.kernel.weights[self.input_weight_index(gate, o, c, dy, dx)]
    }

    pub fn state_weight(&self, gate: Gate, o: usize, c: usize, dy: usize, dx: usize) -> f64 {
        self.kernel.weights[self.state_weight_index(gate, o, c, dy, dx)]
    }

    pub fn bias(&self, gate: Gate, o: usize) -> f64 {
        self.kernel.bias[gate as usize * self.hidden_channels + o]
    }

    pub fn bias_mut(&mut self, gate: Gate, o: usize) -> &mut f64 {
        &mut self.kernel.bias[gate as usize * self.hidden_channels + o]
    }

    fn check(&self, x: &Tensor3, h_prev: &Tensor3, c_prev: &Tensor3) -> Result<()> {
        if x.channels() != self.input_channels {
            return Err(dim_err!(
                "ConvLSTM expects {} input channels, got {}",
                self.input_channels,
                x.channels()
            ));
        }
        if h_prev.channels() != self.hidden_channels {
            return Err(dim_err!(
                "ConvLSTM expects {} hidden channels, got {}",
                self.hidden_channels,
                h_prev.channels()
            ));
        }
        if (x.height(), x.width()) != (h_prev.height(), h_prev.width()) {
            return Err(dim_err!(
                "ConvLSTM input {:?} and state {:?} differ spatially",
                x.shape(),
                h_prev.shape()
            ));
        }
        h_prev.ensure_shape(c_prev, "ConvLSTM cell state")
    }
}

/// Everything one forward step needs to be differentiated later.
#[derive(Debug, Clone)]
pub struct ConvLstmStepCache {
    cols: Vec<f64>,
    geometry: Geometry,
    /// Activated gates, `[i | f | o | g]`, each `hidden·H·W`.
    gates: Vec<f64>,
    c_prev: Vec<f64>,
    tanh_c: Vec<f64>,
    height: usize,
    width: usize,
}

pub(crate) fn step_cached(
    x: &Tensor3,
    h_prev: &Tensor3,
    c_prev: &Tensor3,
    p: &ConvLstmCellParams,
) -> Result<(Tensor3, Tensor3, ConvLstmStepCache)> {
    p.check(x, h_prev, c_prev)?;
    let stacked = x.concat_channels(h_prev)?;
    let (z, cols, geometry) = conv2d_forward_cols(&stacked, &p.kernel)?;
    let n = p.hidden_channels * x.plane_len();
    let mut gates = z.into_vec();
    for v in &mut gates[..3 * n] {
        *v = sigmoid(*v);
    }
    for v in &mut gates[3 * n..] {
        *v = v.tanh();
    }
    let (gi, rest) = gates.split_at(n);
    let (gf, rest) = rest.split_at(n);
    let (go, gg) = rest.split_at(n);
    let mut c = vec![0.0; n];
    let mut tanh_c = vec![0.0; n];
    let mut h = vec![0.0; n];
    for j in 0..n {
        c[j] = gf[j] * c_prev.data()[j] + gi[j] * gg[j];
        tanh_c[j] = c[j].tanh();
        h[j] = go[j] * tanh_c[j];
    }
    let (hc, hh, hw) = h_prev.shape();
    let cache = ConvLstmStepCache {
        cols,
        geometry,
        gates,
        c_prev: c_prev.data().to_vec(),
        tanh_c,
        height: hh,
        width: hw,
    };
    Ok((
        Tensor3::from_vec_unchecked(hc, hh, hw, h),
        Tensor3::from_vec_unchecked(hc, hh, hw, c),
        cache,
    ))
}

/// One ConvLSTM step: returns the new hidden and cell states.
pub fn convlstm_step(
    x: &Tensor3,
    h_prev: &Tensor3,
    c_prev: &Tensor3,
    p: &ConvLstmCellParams,
) -> Result<(Tensor3, Tensor3)> {
    let (h, c, _) = step_cached(x, h_prev, c_prev, p)?;
    Ok((h, c))
}

/// Forward pass over a whole sequence, starting from the given states.
#[derive(Debug, Clone)]
pub struct ConvLstmTrace {
    pub hidden: Vec<Tensor3>,
    pub caches: Vec<ConvLstmStepCache>,
    pub final_cell: Tensor3,
}

pub fn convlstm_forward_sequence(
    inputs: &[Tensor3],
    h0: &Tensor3,
    c0: &Tensor3,
    p: &ConvLstmCellParams,
) -> Result<ConvLstmTrace> {
    let mut h = h0.clone();
    let mut c = c0.clone();
    let mut hidden = Vec::with_capacity(inputs.len());
    let mut caches = Vec::with_capacity(inputs.len());
    for x in inputs {
        let (nh, nc, cache) = step_cached(x, &h, &c, p)?;
        hidden.push(nh.clone());
        caches.push(cache);
        h = nh;
        c = nc;
    }
    Ok(ConvLstmTrace {
        hidden,
        caches,
        final_cell: c,
    })
}

/// Gradients from backpropagation through time over one window.
#[derive(Debug, Clone)]
pub struct ConvLstmGrads {
    pub grad_weights: Vec<f64>,
    pub grad_bias: Vec<f64>,
    /// Gradient with respect to each step's input, oldest first.
    pub grad_inputs: Vec<Tensor3>,
    pub grad_h0: Tensor3,
    pub grad_c0: Tensor3,
}

/// Exact BPTT of `Σ_t grad_h_seq[t] ⊙ h_t` through the cached steps.
pub fn convlstm_backward(
    caches: &[ConvLstmStepCache],
    grad_h_seq: &[Tensor3],
    p: &ConvLstmCellParams,
) -> Result<ConvLstmGrads> {
    let mut grad_weights = vec![0.0; p.kernel.weights.len()];
    let mut grad_bias = vec![0.0; p.kernel.bias.len()];
    let (grad_inputs, grad_h0, grad_c0) =
        convlstm_backward_acc(caches, grad_h_seq, p, &mut grad_weights, &mut grad_bias)?;
    Ok(ConvLstmGrads {
        grad_weights,
        grad_bias,
        grad_inputs,
        grad_h0,
        grad_c0,
    })
}

/// BPTT accumulating parameter gradients into caller buffers.
pub(crate) fn convlstm_backward_acc(
    caches: &[ConvLstmStepCache],
    grad_h_seq: &[Tensor3],
    p: &ConvLstmCellParams,
    grad_w: &mut [f64],
    grad_b: &mut [f64],
) -> Result<(Vec<Tensor3>, Tensor3, Tensor3)> {
    if caches.is_empty() {
        return Err(Error::State(
            "ConvLSTM backward called without cached forward steps".into(),
        ));
    }
    if caches.len() != grad_h_seq.len() {
        return Err(Error::State(format!(
            "{} cached steps but {} upstream gradients",
            caches.len(),
            grad_h_seq.len()
        )));
    }
    let hid = p.hidden_channels;
    let (height, width) = (caches[0].height, caches[0].width);
    let n = hid * height * width;
    for g in grad_h_seq {
        if g.shape() != (hid, height, width) {
            return Err(dim_err!(
                "upstream hidden gradient has shape {:?}",
                g.shape()
            ));
        }
    }
    let mut dh_next = vec![0.0; n];
    let mut dc_next = vec![0.0; n];
    let mut dz = vec![0.0; 4 * n];
    let mut grad_inputs = vec![Tensor3::zeros(0, 0, 0); caches.len()];
    for t in (0..caches.len()).rev() {
        let cache = &caches[t];
        let up = grad_h_seq[t].data();
        let (gi, rest) = cache.gates.split_at(n);
        let (gf, rest) = rest.split_at(n);
        let (go, gg) = rest.split_at(n);
        {
            let (dzi, rest) = dz.split_at_mut(n);
            let (dzf, rest) = rest.split_at_mut(n);
            let (dzo, dzg) = rest.split_at_mut(n);
            for j in 0..n {
                let dh = up[j] + dh_next[j];
                let tc = cache.tanh_c[j];
                let dc = dc_next[j] + dh * go[j] * (1.0 - tc * tc);
                let d_o = dh * tc;
                let d_i = dc * gg[j];
                let d_f = dc * cache.c_prev[j];
                let d_g = dc * gi[j];
                dc_next[j] = dc * gf[j];
                dzi[j] = d_i * gi[j] * (1.0 - gi[j]);
                dzf[j] = d_f * gf[j] * (1.0 - gf[j]);
                dzo[j] = d_o * go[j] * (1.0 - go[j]);
                dzg[j] = d_g * (1.0 - gg[j] * gg[j]);
            }
        }
        let d_stacked = conv2d_backward_cols(
            &cache.cols,
            &cache.geometry,
            &p.kernel.weights,
            p.kernel.out_channels,
            &dz,
            grad_w,
            grad_b,
            true,
        )
        .expect("input gradient requested");
        let split = p.input_channels * height * width;
        grad_inputs[t] = Tensor3::from_vec_unchecked(
            p.input_channels,
            height,
            width,
            d_stacked[..split].to_vec(),
        );
        dh_next.copy_from_slice(&d_stacked[split..]);
    }
    Ok((
        grad_inputs,
        Tensor3::from_vec_unchecked(hid, height, width, dh_next),
        Tensor3::from_vec_unchecked(hid, height, width, dc_next),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{max_rel_error, numeric_grad};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_tensor(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize, scale: f64) -> Tensor3 {
        Tensor3::from_vec(
            c,
            h,
            w,
            (0..c * h * w)
                .map(|_| rng.gen_range(-scale..scale))
                .collect(),
        )
        .unwrap()
    }

    fn rand_cell(rng: &mut ChaCha8Rng, cin: usize, hid: usize) -> ConvLstmCellParams {
        let mut p = ConvLstmCellParams::zeros(cin, hid, 3).unwrap();
        p.kernel
            .weights
            .iter_mut()
            .for_each(|w| *w = rng.gen_range(-0.5..0.5));
        p.kernel
            .bias
            .iter_mut()
            .for_each(|w| *w = rng.gen_range(-0.5..0.5));
        p
    }

    fn sig(v: f64) -> f64 {
        1.0 / (1.0 + (-v).exp())
    }

    /// Per-element definition with separate input-to-state and state-to-state sums.
    fn step_oracle(
        x: &Tensor3,
        h: &Tensor3,
        c: &Tensor3,
        p: &ConvLstmCellParams,
    ) -> (Tensor3, Tensor3) {
        let (hid, ht, wd) = h.shape();
        let k = p.kernel_size();
        let pad = (k / 2) as isize;
        let mut h_out = Tensor3::zeros(hid, ht, wd);
        let mut c_out = Tensor3::zeros(hid, ht, wd);
        for o in 0..hid {
            for y in 0..ht {
                for xx in 0..wd {
                    let mut pre = [0.0; 4];
                    for gate in Gate::ALL {
                        let mut acc = p.bias(gate, o);
                        for dy in 0..k {
                            for dx in 0..k {
                                let iy = y as isize + dy as isize - pad;
                                let ix = xx as isize + dx as isize - pad;
                                if iy < 0 || ix < 0 || iy >= ht as isize || ix >= wd as isize {
                                    continue;
                                }
                                let (iy, ix) = (iy as usize, ix as usize);
                                for ci in 0..x.channels() {
                                    acc += p.input_weight(gate, o, ci, dy, dx) * x.get(ci, iy, ix);
                                }
                                for ch in 0..hid {
                                    acc += p.state_weight(gate, o, ch, dy, dx) * h.get(ch, iy, ix);
                                }
                            }
                        }
                        pre[gate as usize] = acc;
                    }
                    let (i, f, og, g) = (sig(pre[0]), sig(pre[1]), sig(pre[2]), pre[3].tanh());
                    let cn = f * c.get(o, y, xx) + i * g;
                    c_out.set(o, y, xx, cn);
                    h_out.set(o, y, xx, og * cn.tanh());
                }
            }
        }
        (h_out, c_out)
    }

    #[test]
    fn zero_parameters_give_half_gates() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = ConvLstmCellParams::zeros(3, 2, 3).unwrap();
        let x = rand_tensor(&mut rng, 3, 4, 4, 1.0);
        let h = rand_tensor(&mut rng, 2, 4, 4, 1.0);
        let c = rand_tensor(&mut rng, 2, 4, 4, 2.0);
        let (hn, cn) = convlstm_step(&x, &h, &c, &p).unwrap();
        for j in 0..c.len() {
            let want_c = 0.5 * c.data()[j];
            assert!((cn.data()[j] - want_c).abs() < 1e-15);
            assert!((hn.data()[j] - 0.5 * want_c.tanh()).abs() < 1e-15);
        }
    }

    #[test]
    fn forget_gate_irrelevant_when_cell_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut p = rand_cell(&mut rng, 2, 2);
        let x = rand_tensor(&mut rng, 2, 3, 3, 1.0);
        let h = rand_tensor(&mut rng, 2, 3, 3, 1.0);
        let c0 = Tensor3::zeros(2, 3, 3);
        let (_, c_a) = convlstm_step(&x, &h, &c0, &p).unwrap();
        for o in 0..2 {
            *p.bias_mut(Gate::Forget, o) += 3.0;
            for c in 0..4 {
                let idx = p.input_weight_index(Gate::Forget, o, c, 1, 1);
                p.kernel.weights[idx] -= 1.7;
            }
        }
        let (_, c_b) = convlstm_step(&x, &h, &c0, &p).unwrap();
        assert_eq!(c_a, c_b);
    }

    #[test]
    fn matches_per_element_oracle() {
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(10 + seed);
            let p = rand_cell(&mut rng, 3, 2);
            let x = rand_tensor(&mut rng, 3, 3, 3, 1.0);
            let h = rand_tensor(&mut rng, 2, 3, 3, 1.0);
            let c = rand_tensor(&mut rng, 2, 3, 3, 1.0);
            let (h1, c1) = convlstm_step(&x, &h, &c, &p).unwrap();
            let (h2, c2) = step_oracle(&x, &h, &c, &p);
            for j in 0..h1.len() {
                assert!((h1.data()[j] - h2.data()[j]).abs() < 1e-12);
                assert!((c1.data()[j] - c2.data()[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn hidden_state_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut p = rand_cell(&mut rng, 2, 3);
        p.kernel.weights.iter_mut().for_each(|w| *w *= 20.0);
        let xs: Vec<Tensor3> = (0..8)
            .map(|_| rand_tensor(&mut rng, 2, 4, 4, 5.0))
            .collect();
        let trace =
            convlstm_forward_sequence(&xs, &Tensor3::zeros(3, 4, 4), &Tensor3::zeros(3, 4, 4), &p)
                .unwrap();
        for h in &trace.hidden {
            assert!(h.data().iter().all(|v| v.abs() < 1.0));
        }
    }

    #[test]
    fn shape_errors() {
        let p = ConvLstmCellParams::zeros(2, 2, 3).unwrap();
        let z = |c, h, w| Tensor3::zeros(c, h, w);
        assert!(matches!(
            convlstm_step(&z(3, 4, 4), &z(2, 4, 4), &z(2, 4, 4), &p),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            convlstm_step(&z(2, 4, 4), &z(2, 5, 4), &z(2, 5, 4), &p),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            convlstm_step(&z(2, 4, 4), &z(2, 4, 4), &z(2, 3, 4), &p),
            Err(Error::Dimension(_))
        ));
        assert!(ConvLstmCellParams::zeros(2, 2, 4).is_err());
    }

    #[test]
    fn missing_cache_is_state_error() {
        let p = ConvLstmCellParams::zeros(2, 2, 3).unwrap();
        assert!(matches!(
            convlstm_backward(&[], &[], &p),
            Err(Error::State(_))
        ));
        let trace = convlstm_forward_sequence(
            &[Tensor3::zeros(2, 3, 3)],
            &Tensor3::zeros(2, 3, 3),
            &Tensor3::zeros(2, 3, 3),
            &p,
        )
        .unwrap();
        assert!(matches!(
            convlstm_backward(&trace.caches, &[], &p),
            Err(Error::State(_))
        ));
    }

    #[test]
    fn zero_upstream_gives_zero_parameter_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = rand_cell(&mut rng, 2, 2);
        let xs: Vec<Tensor3> = (0..3)
            .map(|_| rand_tensor(&mut rng, 2, 3, 3, 1.0))
            .collect();
        let trace =
            convlstm_forward_sequence(&xs, &Tensor3::zeros(2, 3, 3), &Tensor3::zeros(2, 3, 3), &p)
                .unwrap();
        let zeros = vec![Tensor3::zeros(2, 3, 3); 3];
        let g = convlstm_backward(&trace.caches, &zeros, &p).unwrap();
        assert!(g.grad_weights.iter().chain(&g.grad_bias).all(|&v| v == 0.0));
    }

    fn bptt_check(seed: u64, steps: usize) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (cin, hid, hw) = (2, 2, 3);
        let p = rand_cell(&mut rng, cin, hid);
        let xs: Vec<Tensor3> = (0..steps)
            .map(|_| rand_tensor(&mut rng, cin, hw, hw, 1.0))
            .collect();
        let h0 = rand_tensor(&mut rng, hid, hw, hw, 0.5);
        let c0 = rand_tensor(&mut rng, hid, hw, hw, 0.5);
        let ups: Vec<Tensor3> = (0..steps)
            .map(|_| rand_tensor(&mut rng, hid, hw, hw, 1.0))
            .collect();
        let loss = |p: &ConvLstmCellParams, xs: &[Tensor3], h0: &Tensor3, c0: &Tensor3| -> f64 {
            let tr = convlstm_forward_sequence(xs, h0, c0, p).unwrap();
            tr.hidden
                .iter()
                .zip(&ups)
                .map(|(h, u)| {
                    h.data()
                        .iter()
                        .zip(u.data())
                        .map(|(a, b)| a * b)
                        .sum::<f64>()
                })
                .sum()
        };
        let trace = convlstm_forward_sequence(&xs, &h0, &c0, &p).unwrap();
        let g = convlstm_backward(&trace.caches, &ups, &p).unwrap();

        let nw = numeric_grad(&p.kernel.weights, |w| {
            let mut q = p.clone();
            q.kernel.weights.copy_from_slice(w);
            loss(&q, &xs, &h0, &c0)
        });
        assert!(max_rel_error(&g.grad_weights, &nw) < 1e-5, "weights");
        let nb = numeric_grad(&p.kernel.bias, |b| {
            let mut q = p.clone();
            q.kernel.bias.copy_from_slice(b);
            loss(&q, &xs, &h0, &c0)
        });
        assert!(max_rel_error(&g.grad_bias, &nb) < 1e-5, "bias");
        for t in 0..steps {
            let nx = numeric_grad(xs[t].data(), |v| {
                let mut ys = xs.clone();
                ys[t] = Tensor3::from_vec(cin, hw, hw, v.to_vec()).unwrap();
                loss(&p, &ys, &h0, &c0)
            });
            assert!(
                max_rel_error(g.grad_inputs[t].data(), &nx) < 1e-5,
                "input {t}"
            );
        }
        let nh = numeric_grad(h0.data(), |v| {
            loss(
                &p,
                &xs,
                &Tensor3::from_vec(hid, hw, hw, v.to_vec()).unwrap(),
                &c0,
            )
        });
        assert!(max_rel_error(g.grad_h0.data(), &nh) < 1e-5, "h0");
        let nc = numeric_grad(c0.data(), |v| {
            loss(
                &p,
                &xs,
                &h0,
                &Tensor3::from_vec(hid, hw, hw, v.to_vec()).unwrap(),
            )
        });
        assert!(max_rel_error(g.grad_c0.data(), &nc) < 1e-5, "c0");
    }

    #[test]
    fn single_step_matches_finite_differences() {
        bptt_check(20, 1);
    }

    #[test]
    fn three_step_bptt_matches_finite_differences() {
        for seed in 0..5 {
            bptt_check(30 + seed, 3);
        }
    }
}
