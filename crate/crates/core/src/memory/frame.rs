use std::io::Write;
use std::path::Path;

use crate::error::{dim_err, Error, Result};
use crate::nn::Tensor3;

/// Frames per autoencoder window.
pub const WINDOW_LEN: usize = 10;

/// Default camera resolution (square).
pub const FRAME_SIZE: usize = 32;

/// Single-channel grayscale image with values in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Frame {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width {
            return Err(dim_err!(
                "frame {height}x{width} needs {} pixels, got {}",
                height * width,
                data.len()
            ));
        }
        if let Some(i) = data.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Numeric(format!(
                "pixel {i} = {} outside [0, 1]",
                data[i]
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        Self {
            height,
            width,
            data: vec![value.clamp(0.0, 1.0); height * width],
        }
    }

    /// Clamps every value into `[0, 1]`.
    pub fn from_clamped(height: usize, width: usize, mut data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width {
            return Err(dim_err!(
                "frame {height}x{width} needs {} pixels, got {}",
                height * width,
                data.len()
            ));
        }
        data.iter_mut()
            .for_each(|v| *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) });
        Ok(Self {
            height,
            width,
            data,
        })
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn to_tensor(&self) -> Tensor3 {
        Tensor3::from_vec_unchecked(1, self.height, self.width, self.data.clone())
    }

    pub fn from_tensor(t: &Tensor3) -> Result<Self> {
        if t.channels() != 1 {
            return Err(dim_err!(
                "frames have one channel, tensor has {}",
                t.channels()
            ));
        }
        Self::from_clamped(t.height(), t.width(), t.data().to_vec())
    }

    /// Binary PGM (P5), 8-bit.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.data.iter().map(|v| (v * 255.0).round() as u8));
        out
    }

    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_pgm())?;
        Ok(())
    }
}

/// Exactly [`WINDOW_LEN`] consecutive frames, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceWindow {
    frames: Vec<Frame>,
    pub start_tick: u64,
}

impl SequenceWindow {
    pub fn new(frames: Vec<Frame>, start_tick: u64) -> Result<Self> {
        if frames.len() != WINDOW_LEN {
            return Err(dim_err!(
                "windows hold {WINDOW_LEN} frames, got {}",
                frames.len()
            ));
        }
        let (h, w) = (frames[0].height, frames[0].width);
        if frames.iter().any(|f| f.height != h || f.width != w) {
            return Err(dim_err!("frames in a window must share dimensions"));
        }
        Ok(Self { frames, start_tick })
    }

    #[inline]
    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frame_dims(&self) -> (usize, usize) {
        (self.frames[0].height, self.frames[0].width)
    }

    pub fn to_tensors(&self) -> Vec<Tensor3> {
        self.frames.iter().map(Frame::to_tensor).collect()
    }

    /// Writes `<tick>_<slot>.pgm` for every frame into `dir`.
    pub fn dump_pgm(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (slot, f) in self.frames.iter().enumerate() {
            f.write_pgm(&dir.join(format!("{}_{slot}.pgm", self.start_tick + slot as u64)))?;
        }
        Ok(())
    }
}
