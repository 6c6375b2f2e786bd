//! Structural similarity between windows, frames and frame sequences.
//!
//! The luminance denominator is the canonical `μx² + μy² + c1`. A product
//! `μx²·μy² + c1` would not give `ssim(x, x) = 1`, see
//! `product_denominator_breaks_identity` below.

use crate::error::{dim_err, Error, Result};
use crate::memory::{Frame, SequenceWindow};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimConfig {
    /// Side of the square comparison window, in pixels.
    pub window: usize,
    pub stride: usize,
    pub c1: f64,
    pub c2: f64,
    pub dynamic_range: f64,
}

impl Default for SsimConfig {
    fn default() -> Self {
        Self::with_range(1.0)
    }
}

impl SsimConfig {
    /// 8×8 windows at stride 4 with `c1 = (0.01·L)²`, `c2 = (0.03·L)²`.
    pub fn with_range(dynamic_range: f64) -> Self {
        Self {
            window: 8,
            stride: 4,
            c1: (0.01 * dynamic_range).powi(2),
            c2: (0.03 * dynamic_range).powi(2),
            dynamic_range,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window < 2
            || self.stride < 1
            || self.c1 <= 0.0
            || self.c2 <= 0.0
            || self.dynamic_range <= 0.0
        {
            return Err(Error::Config(format!(
                "invalid SSIM configuration {self:?}"
            )));
        }
        Ok(())
    }
}

/// Population means, variances and covariance of two equally sized samples.
fn moments(x: impl Iterator<Item = (f64, f64)> + Clone, n: f64) -> (f64, f64, f64, f64, f64) {
    let (sx, sy) = x.clone().fold((0.0, 0.0), |(a, b), (u, v)| (a + u, b + v));
    let (mx, my) = (sx / n, sy / n);
    let (vx, vy, cxy) = x.fold((0.0, 0.0, 0.0), |(a, b, c), (u, v)| {
        let (du, dv) = (u - mx, v - my);
        (a + du * du, b + dv * dv, c + du * dv)
    });
    (mx, my, vx / n, vy / n, cxy / n)
}

fn ssim_from_moments(mx: f64, my: f64, vx: f64, vy: f64, cxy: f64, cfg: &SsimConfig) -> f64 {
    ((2.0 * mx * my + cfg.c1) * (2.0 * cxy + cfg.c2))
        / ((mx * mx + my * my + cfg.c1) * (vx + vy + cfg.c2))
}

/// SSIM of two pixel windows given as flat slices of equal length.
pub fn ssim_window(x: &[f64], y: &[f64], cfg: &SsimConfig) -> Result<f64> {
    if x.len() != y.len() || x.is_empty() {
        return Err(dim_err!(
            "SSIM windows of {} and {} pixels",
            x.len(),
            y.len()
        ));
    }
    let (mx, my, vx, vy, cxy) = moments(x.iter().copied().zip(y.iter().copied()), x.len() as f64);
    Ok(ssim_from_moments(mx, my, vx, vy, cxy, cfg))
}

/// Mean windowed SSIM over all window positions at the configured stride.
pub fn ssim_frame(x: &Frame, y: &Frame, cfg: &SsimConfig) -> Result<f64> {
    cfg.validate()?;
    if (x.height(), x.width()) != (y.height(), y.width()) {
        return Err(dim_err!(
            "SSIM frames {}x{} and {}x{}",
            x.height(),
            x.width(),
            y.height(),
            y.width()
        ));
    }
    let (h, w) = (x.height(), x.width());
    if h < cfg.window || w < cfg.window {
        return Err(dim_err!(
            "frame {h}x{w} smaller than SSIM window {}",
            cfg.window
        ));
    }
    let win = cfg.window;
    let n = (win * win) as f64;
    let (xd, yd) = (x.data(), y.data());
    let mut total = 0.0;
    let mut count = 0usize;
    for top in (0..=h - win).step_by(cfg.stride) {
        for left in (0..=w - win).step_by(cfg.stride) {
            let pixels = (top..top + win).flat_map(|r| (left..left + win).map(move |c| r * w + c));
            let (mx, my, vx, vy, cxy) = moments(pixels.map(|i| (xd[i], yd[i])), n);
            total += ssim_from_moments(mx, my, vx, vy, cxy, cfg);
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// Mean frame SSIM over the aligned frames of two windows.
pub fn ssim_sequence(a: &SequenceWindow, b: &SequenceWindow, cfg: &SsimConfig) -> Result<f64> {
    if a.len() != b.len() {
        return Err(dim_err!(
            "SSIM over windows of {} and {} frames",
            a.len(),
            b.len()
        ));
    }
    let mut total = 0.0;
    for (x, y) in a.frames().iter().zip(b.frames()) {
        total += ssim_frame(x, y, cfg)?;
    }
    Ok(total / a.len() as f64)
}
