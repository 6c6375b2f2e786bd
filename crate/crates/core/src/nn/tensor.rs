use crate::error::{dim_err, Result};

/// Dense `[channels][height][width]` feature map in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: f64) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![value; channels * height * width],
        }
    }

    pub fn from_vec(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(dim_err!(
                "tensor {channels}x{height}x{width} needs {} values, got {}",
                channels * height * width,
                data.len()
            ));
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(crate::error::Error::Numeric(format!(
                "non-finite tensor value at index {bad}"
            )));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub(crate) fn from_vec_unchecked(
        channels: usize,
        height: usize,
        width: usize,
        data: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(data.len(), channels * height * width);
        Self {
            channels,
            height,
            width,
            data,
        }
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
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
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    #[inline]
    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, value: f64) {
        self.data[(c * self.height + y) * self.width + x] = value;
    }

    pub fn same_shape(&self, other: &Tensor3) -> bool {
        self.shape() == other.shape()
    }

    pub fn ensure_shape(&self, other: &Tensor3, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(dim_err!(
                "{what}: shape {:?} does not match {:?}",
                self.shape(),
                other.shape()
            ))
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor3 {
        Tensor3::from_vec_unchecked(
            self.channels,
            self.height,
            self.width,
            self.data.iter().map(|&v| f(v)).collect(),
        )
    }

    pub fn add_assign(&mut self, other: &Tensor3) {
        debug_assert!(self.same_shape(other));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    /// Stacks `self` and `other` along the channel axis.
    pub fn concat_channels(&self, other: &Tensor3) -> Result<Tensor3> {
        if self.height != other.height || self.width != other.width {
            return Err(dim_err!(
                "cannot concatenate {:?} with {:?}",
                self.shape(),
                other.shape()
            ));
        }
        let mut data = Vec::with_capacity(self.len() + other.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Ok(Tensor3::from_vec_unchecked(
            self.channels + other.channels,
            self.height,
            self.width,
            data,
        ))
    }

    /// Splits off the first `channels` channels; inverse of [`Tensor3::concat_channels`].
    pub fn split_channels(&self, channels: usize) -> (Tensor3, Tensor3) {
        assert!(channels <= self.channels);
        let cut = channels * self.plane_len();
        (
            Tensor3::from_vec_unchecked(
                channels,
                self.height,
                self.width,
                self.data[..cut].to_vec(),
            ),
            Tensor3::from_vec_unchecked(
                self.channels - channels,
                self.height,
                self.width,
                self.data[cut..].to_vec(),
            ),
        )
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
