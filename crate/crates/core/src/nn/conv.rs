//! 2-D convolution and transposed convolution via im2col + GEMM.

use super::gemm::{gemm, Op};
use super::tensor::Tensor3;
use crate::error::{dim_err, Error, Result};

/// Weights and geometry of a strided, zero-padded 2-D convolution.
///
/// Weights are laid out `[out][in][kh][kw]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvKernelSet {
    pub out_channels: usize,
    pub in_channels: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride: usize,
    pub padding: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ConvKernelSet {
    pub fn zeros(
        out_channels: usize,
        in_channels: usize,
        kernel_h: usize,
        kernel_w: usize,
        stride: usize,
        padding: usize,
    ) -> Result<Self> {
        let k = Self {
            out_channels,
            in_channels,
            kernel_h,
            kernel_w,
            stride,
            padding,
            weights: vec![0.0; out_channels * in_channels * kernel_h * kernel_w],
            bias: vec![0.0; out_channels],
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if self.stride == 0 {
            return Err(Error::Config(
                "convolution stride must be at least 1".into(),
            ));
        }
        if self.out_channels == 0
            || self.in_channels == 0
            || self.kernel_h == 0
            || self.kernel_w == 0
        {
            return Err(Error::Config(
                "convolution dimensions must be non-zero".into(),
            ));
        }
        let expected = self.out_channels * self.in_channels * self.kernel_h * self.kernel_w;
        if self.weights.len() != expected {
            return Err(dim_err!(
                "kernel needs {expected} weights, has {}",
                self.weights.len()
            ));
        }
        if self.bias.len() != self.out_channels {
            return Err(dim_err!(
                "kernel needs {} biases, has {}",
                self.out_channels,
                self.bias.len()
            ));
        }
        Ok(())
    }

    #[inline]
    pub fn weight(&self, o: usize, c: usize, dy: usize, dx: usize) -> f64 {
        self.weights[((o * self.in_channels + c) * self.kernel_h + dy) * self.kernel_w + dx]
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    /// Fan-in of one output unit.
    pub fn fan_in(&self) -> usize {
        self.in_channels * self.kernel_h * self.kernel_w
    }

    pub fn output_dims(&self, height: usize, width: usize) -> Result<(usize, usize)> {
        let ph = height + 2 * self.padding;
        let pw = width + 2 * self.padding;
        if ph < self.kernel_h || pw < self.kernel_w {
            return Err(dim_err!(
                "input {height}x{width} (padding {}) smaller than kernel {}x{}",
                self.padding,
                self.kernel_h,
                self.kernel_w
            ));
        }
        Ok((
            (ph - self.kernel_h) / self.stride + 1,
            (pw - self.kernel_w) / self.stride + 1,
        ))
    }

    pub(crate) fn geometry(&self, input: &Tensor3) -> Result<Geometry> {
        if input.channels() != self.in_channels {
            return Err(dim_err!(
                "conv expects {} input channels, got {}",
                self.in_channels,
                input.channels()
            ));
        }
        let (out_h, out_w) = self.output_dims(input.height(), input.width())?;
        Ok(Geometry {
            channels: self.in_channels,
            in_h: input.height(),
            in_w: input.width(),
            kh: self.kernel_h,
            kw: self.kernel_w,
            stride: self.stride,
            pad: self.padding,
            out_h,
            out_w,
        })
    }
}

/// Weights and geometry of a transposed convolution (the adjoint of a strided
/// convolution), laid out `[in][out][kh][kw]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvTransposeKernelSet {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride: usize,
    pub padding: usize,
    pub output_padding: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ConvTransposeKernelSet {
    #[allow(clippy::too_many_arguments)]
    pub fn zeros(
        in_channels: usize,
        out_channels: usize,
        kernel_h: usize,
        kernel_w: usize,
        stride: usize,
        padding: usize,
        output_padding: usize,
    ) -> Result<Self> {
        let k = Self {
            in_channels,
            out_channels,
            kernel_h,
            kernel_w,
            stride,
            padding,
            output_padding,
            weights: vec![0.0; out_channels * in_channels * kernel_h * kernel_w],
            bias: vec![0.0; out_channels],
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if self.stride == 0 {
            return Err(Error::Config(
                "transposed convolution stride must be at least 1".into(),
            ));
        }
        if self.output_padding >= self.stride {
            return Err(Error::Config(
                "output padding must be smaller than the stride".into(),
            ));
        }
        let expected = self.out_channels * self.in_channels * self.kernel_h * self.kernel_w;
        if self.weights.len() != expected || self.bias.len() != self.out_channels {
            return Err(dim_err!(
                "transposed kernel parameter arrays have the wrong length"
            ));
        }
        Ok(())
    }

    #[inline]
    pub fn weight(&self, c: usize, o: usize, dy: usize, dx: usize) -> f64 {
        self.weights[((c * self.out_channels + o) * self.kernel_h + dy) * self.kernel_w + dx]
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    /// Fan-in as seen from one output unit of the transposed op.
    pub fn fan_in(&self) -> usize {
        let taps = (self.kernel_h * self.kernel_w)
            .div_ceil(self.stride * self.stride)
            .max(1);
        self.in_channels * taps
    }

    pub fn output_dims(&self, height: usize, width: usize) -> Result<(usize, usize)> {
        let grow = |n: usize, k: usize| -> Option<usize> {
            ((n.checked_sub(1)?) * self.stride + k + self.output_padding)
                .checked_sub(2 * self.padding)
        };
        match (grow(height, self.kernel_h), grow(width, self.kernel_w)) {
            (Some(h), Some(w)) if h > 0 && w > 0 => Ok((h, w)),
            _ => Err(dim_err!(
                "transposed conv output for {height}x{width} is empty"
            )),
        }
    }

    fn geometry(&self, input: &Tensor3) -> Result<Geometry> {
        if input.channels() != self.in_channels {
            return Err(dim_err!(
                "transposed conv expects {} input channels, got {}",
                self.in_channels,
                input.channels()
            ));
        }
        let (out_h, out_w) = self.output_dims(input.height(), input.width())?;
        // The adjoint convolution maps the (out_h, out_w) image back onto the input grid.
        Ok(Geometry {
            channels: self.out_channels,
            in_h: out_h,
            in_w: out_w,
            kh: self.kernel_h,
            kw: self.kernel_w,
            stride: self.stride,
            pad: self.padding,
            out_h: input.height(),
            out_w: input.width(),
        })
    }
}

/// Geometry of the forward convolution an im2col matrix belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Geometry {
    pub channels: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub pad: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl Geometry {
    #[inline]
    pub fn rows(&self) -> usize {
        self.channels * self.kh * self.kw
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.out_h * self.out_w
    }
}

/// Unfolds `input` into a `(C·kh·kw) × (out_h·out_w)` matrix.
pub(crate) fn im2col(input: &[f64], g: &Geometry) -> Vec<f64> {
    let cols = g.cols();
    let mut out = vec![0.0; g.rows() * cols];
    for c in 0..g.channels {
        let plane = &input[c * g.in_h * g.in_w..(c + 1) * g.in_h * g.in_w];
        for dy in 0..g.kh {
            for dx in 0..g.kw {
                let row = (c * g.kh + dy) * g.kw + dx;
                let dst = &mut out[row * cols..(row + 1) * cols];
                for oy in 0..g.out_h {
                    let iy = (oy * g.stride + dy) as isize - g.pad as isize;
                    if iy < 0 || iy >= g.in_h as isize {
                        continue;
                    }
                    let src_row = &plane[iy as usize * g.in_w..(iy as usize + 1) * g.in_w];
                    let dst_row = &mut dst[oy * g.out_w..(oy + 1) * g.out_w];
                    for (ox, d) in dst_row.iter_mut().enumerate() {
                        let ix = (ox * g.stride + dx) as isize - g.pad as isize;
                        if ix >= 0 && ix < g.in_w as isize {
                            *d = src_row[ix as usize];
                        }
                    }
                }
            }
        }
    }
    out
}

/// Adjoint of [`im2col`]: scatters columns back and accumulates into `out`.
pub(crate) fn col2im(cols_mat: &[f64], g: &Geometry, out: &mut [f64]) {
    let cols = g.cols();
    for c in 0..g.channels {
        let plane = &mut out[c * g.in_h * g.in_w..(c + 1) * g.in_h * g.in_w];
        for dy in 0..g.kh {
            for dx in 0..g.kw {
                let row = (c * g.kh + dy) * g.kw + dx;
                let src = &cols_mat[row * cols..(row + 1) * cols];
                for oy in 0..g.out_h {
                    let iy = (oy * g.stride + dy) as isize - g.pad as isize;
                    if iy < 0 || iy >= g.in_h as isize {
                        continue;
                    }
                    let base = iy as usize * g.in_w;
                    for ox in 0..g.out_w {
                        let ix = (ox * g.stride + dx) as isize - g.pad as isize;
                        if ix >= 0 && ix < g.in_w as isize {
                            plane[base + ix as usize] += src[oy * g.out_w + ox];
                        }
                    }
                }
            }
        }
    }
}

/// Gradients produced by a convolution backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads {
    pub grad_input: Tensor3,
    pub grad_weights: Vec<f64>,
    pub grad_bias: Vec<f64>,
}

/// Forward pass that also returns the unfolded input for reuse in backward.
pub(crate) fn conv2d_forward_cols(
    input: &Tensor3,
    k: &ConvKernelSet,
) -> Result<(Tensor3, Vec<f64>, Geometry)> {
    let g = k.geometry(input)?;
    let cols = im2col(input.data(), &g);
    let n = g.cols();
    let mut out = vec![0.0; k.out_channels * n];
    for (o, chunk) in out.chunks_mut(n).enumerate() {
        chunk.fill(k.bias[o]);
    }
    gemm(
        k.out_channels,
        g.rows(),
        n,
        &k.weights,
        Op::N,
        &cols,
        Op::N,
        1.0,
        &mut out,
    );
    Ok((
        Tensor3::from_vec_unchecked(k.out_channels, g.out_h, g.out_w, out),
        cols,
        g,
    ))
}

/// Backward pass from cached columns; weight and bias gradients are accumulated
/// into `grad_w` / `grad_b`. Returns the input gradient when requested.
pub(crate) fn conv2d_backward_cols(
    cols: &[f64],
    g: &Geometry,
    weights: &[f64],
    out_channels: usize,
    grad_out: &[f64],
    grad_w: &mut [f64],
    grad_b: &mut [f64],
    want_input: bool,
) -> Option<Vec<f64>> {
    let n = g.cols();
    let rows = g.rows();
    gemm(
        out_channels,
        n,
        rows,
        grad_out,
        Op::N,
        cols,
        Op::T,
        1.0,
        grad_w,
    );
    for (o, chunk) in grad_out.chunks(n).enumerate() {
        grad_b[o] += chunk.iter().sum::<f64>();
    }
    if !want_input {
        return None;
    }
    let mut grad_cols = vec![0.0; rows * n];
    gemm(
        rows,
        out_channels,
        n,
        weights,
        Op::T,
        grad_out,
        Op::N,
        0.0,
        &mut grad_cols,
    );
    let mut grad_in = vec![0.0; g.channels * g.in_h * g.in_w];
    col2im(&grad_cols, g, &mut grad_in);
    Some(grad_in)
}

pub fn conv2d_forward(input: &Tensor3, k: &ConvKernelSet) -> Result<Tensor3> {
    Ok(conv2d_forward_cols(input, k)?.0)
}

/// Gradients of `Σ grad_out ⊙ conv2d_forward(input, k)` with respect to the
/// input, weights and bias.
pub fn conv2d_backward(
    input: &Tensor3,
    k: &ConvKernelSet,
    grad_out: &Tensor3,
) -> Result<ConvGrads> {
    let g = k.geometry(input)?;
    if grad_out.shape() != (k.out_channels, g.out_h, g.out_w) {
        return Err(dim_err!(
            "conv grad_out shape {:?} != output shape {:?}",
            grad_out.shape(),
            (k.out_channels, g.out_h, g.out_w)
        ));
    }
    let cols = im2col(input.data(), &g);
    let mut grad_weights = vec![0.0; k.weights.len()];
    let mut grad_bias = vec![0.0; k.out_channels];
    let grad_in = conv2d_backward_cols(
        &cols,
        &g,
        &k.weights,
        k.out_channels,
        grad_out.data(),
        &mut grad_weights,
        &mut grad_bias,
        true,
    )
    .expect("input gradient requested");
    Ok(ConvGrads {
        grad_input: Tensor3::from_vec_unchecked(
            input.channels(),
            input.height(),
            input.width(),
            grad_in,
        ),
        grad_weights,
        grad_bias,
    })
}

pub fn conv_transpose2d_forward(input: &Tensor3, k: &ConvTransposeKernelSet) -> Result<Tensor3> {
    let g = k.geometry(input)?;
    let n = g.cols();
    let rows = g.rows();
    let mut cols = vec![0.0; rows * n];
    gemm(
        rows,
        k.in_channels,
        n,
        &k.weights,
        Op::T,
        input.data(),
        Op::N,
        0.0,
        &mut cols,
    );
    let mut out = vec![0.0; k.out_channels * g.in_h * g.in_w];
    for (o, plane) in out.chunks_mut(g.in_h * g.in_w).enumerate() {
        plane.fill(k.bias[o]);
    }
    col2im(&cols, &g, &mut out);
    Ok(Tensor3::from_vec_unchecked(
        k.out_channels,
        g.in_h,
        g.in_w,
        out,
    ))
}

/// Backward of the transposed convolution, accumulating into `grad_w` / `grad_b`.
pub(crate) fn conv_transpose2d_backward_acc(
    input: &Tensor3,
    k: &ConvTransposeKernelSet,
    grad_out: &Tensor3,
    grad_w: &mut [f64],
    grad_b: &mut [f64],
) -> Result<Tensor3> {
    let g = k.geometry(input)?;
    if grad_out.shape() != (k.out_channels, g.in_h, g.in_w) {
        return Err(dim_err!(
            "transposed conv grad_out shape {:?} != output shape {:?}",
            grad_out.shape(),
            (k.out_channels, g.in_h, g.in_w)
        ));
    }
    let n = g.cols();
    let rows = g.rows();
    let grad_cols = im2col(grad_out.data(), &g);
    let mut grad_in = vec![0.0; k.in_channels * n];
    gemm(
        k.in_channels,
        rows,
        n,
        &k.weights,
        Op::N,
        &grad_cols,
        Op::N,
        0.0,
        &mut grad_in,
    );
    gemm(
        k.in_channels,
        n,
        rows,
        input.data(),
        Op::N,
        &grad_cols,
        Op::T,
        1.0,
        grad_w,
    );
    for (o, plane) in grad_out.data().chunks(g.in_h * g.in_w).enumerate() {
        grad_b[o] += plane.iter().sum::<f64>();
    }
    Ok(Tensor3::from_vec_unchecked(
        k.in_channels,
        input.height(),
        input.width(),
        grad_in,
    ))
}

pub fn conv_transpose2d_backward(
    input: &Tensor3,
    k: &ConvTransposeKernelSet,
    grad_out: &Tensor3,
) -> Result<ConvGrads> {
    let mut grad_weights = vec![0.0; k.weights.len()];
    let mut grad_bias = vec![0.0; k.out_channels];
    let grad_input =
        conv_transpose2d_backward_acc(input, k, grad_out, &mut grad_weights, &mut grad_bias)?;
    Ok(ConvGrads {
        grad_input,
        grad_weights,
        grad_bias,
    })
}
