//! Dense 4-D tensor in (batch, height, width, channels) layout.
//!
//! The data is one contiguous row-major buffer over the dims in that order,
//! so a (y, x..x+k, all channels) strip is contiguous — the im2col fast path
//! relies on this.

use crate::error::{NnError, Result};
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims4 {
    pub batch: usize,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl Dims4 {
    pub fn new(batch: usize, height: usize, width: usize, channels: usize) -> Self {
        Self {
            batch,
            height,
            width,
            channels,
        }
    }

    pub fn count(&self) -> usize {
        self.batch * self.height * self.width * self.channels
    }
}

impl std::fmt::Display for Dims4 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "({},{},{},{})",
            self.batch, self.height, self.width, self.channels
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4<R: Real> {
    dims: Dims4,
    data: Vec<R>,
}

impl<R: Real> Tensor4<R> {
    pub fn zeros(dims: Dims4) -> Self {
        Self {
            dims,
            data: vec![R::ZERO; dims.count()],
        }
    }

    pub fn from_vec(dims: Dims4, data: Vec<R>) -> Result<Self> {
        if data.len() != dims.count() {
            return Err(NnError::ShapeMismatch {
                layer: "tensor".into(),
                expected: format!("{} values for dims {}", dims.count(), dims),
                got: format!("{} values", data.len()),
            });
        }
        Ok(Self { dims, data })
    }

    /// Single-image tensor from row-major (height, width) pixels, one channel.
    pub fn from_image(height: usize, width: usize, pixels: &[R]) -> Result<Self> {
        Self::from_vec(Dims4::new(1, height, width, 1), pixels.to_vec())
    }

    pub fn dims(&self) -> Dims4 {
        self.dims
    }

    pub fn data(&self) -> &[R] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [R] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<R> {
        self.data
    }

    #[inline]
    pub fn offset(&self, b: usize, y: usize, x: usize, c: usize) -> usize {
        ((b * self.dims.height + y) * self.dims.width + x) * self.dims.channels + c
    }

    #[inline]
    pub fn at(&self, b: usize, y: usize, x: usize, c: usize) -> R {
        self.data[self.offset(b, y, x, c)]
    }

    #[inline]
    pub fn at_mut(&mut self, b: usize, y: usize, x: usize, c: usize) -> &mut R {
        let i = self.offset(b, y, x, c);
        &mut self.data[i]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn check_finite(&self, context: &str) -> Result<()> {
        if self.all_finite() {
            Ok(())
        } else {
            Err(NnError::NonFinite {
                context: context.to_string(),
            })
        }
    }

    /// Reinterpret with new dims of identical element count.
    pub fn reshaped(mut self, dims: Dims4) -> Result<Self> {
        if dims.count() != self.dims.count() {
            return Err(NnError::ShapeMismatch {
                layer: "reshape".into(),
                expected: format!("{}", self.dims),
                got: format!("{dims}"),
            });
        }
        self.dims = dims;
        Ok(self)
    }

    pub fn map(&self, f: impl Fn(R) -> R) -> Self {
        Self {
            dims: self.dims,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Converts element type (used to lift f32 models into f64 for checking).
    pub fn cast<S: Real>(&self) -> Tensor4<S> {
        Tensor4 {
            dims: self.dims,
            data: self.data.iter().map(|v| S::from_f64(v.to_f64())).collect(),
        }
    }
}
