//! Parameter ranges the generator and mutator draw from.

use serde::{Deserialize, Serialize};

use crate::shape::InputDims;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamBounds {
    pub kernel_min: usize,
    pub kernel_max: usize,
    pub channels_min: usize,
    pub channels_max: usize,
    pub stride_min: usize,
    pub stride_max: usize,
    pub pool_min: usize,
    pub pool_max: usize,
    pub pool_stride_min: usize,
    pub pool_stride_max: usize,
    pub dropout_min: f64,
    pub dropout_max: f64,
    /// Probability a drawn conv carries batch normalization / dropout.
    pub batchnorm_prob: f64,
    pub dropout_prob: f64,
    pub input_height: usize,
    pub input_width: usize,
    pub input_channels: usize,
}

impl ParamBounds {
    pub fn input(&self) -> InputDims {
        InputDims {
            height: self.input_height,
            width: self.input_width,
            channels: self.input_channels,
        }
    }

    /// Narrow variant for fast smoke searches: small kernels and channel
    /// counts keep candidate training cheap.
    pub fn compact() -> Self {
        Self {
            kernel_max: 7,
            channels_min: 4,
            channels_max: 32,
            stride_max: 4,
            ..Self::default()
        }
    }
}

impl Default for ParamBounds {
    /// Wide enough to contain every value used by the reference
    /// architectures.
    fn default() -> Self {
        Self {
            kernel_min: 1,
            kernel_max: 15,
            channels_min: 8,
            channels_max: 1024,
            stride_min: 1,
            stride_max: 14,
            pool_min: 2,
            pool_max: 4,
            pool_stride_min: 1,
            pool_stride_max: 4,
            dropout_min: 0.1,
            dropout_max: 0.7,
            batchnorm_prob: 0.5,
            dropout_prob: 0.25,
            input_height: 60,
            input_width: 30,
            input_channels: 1,
        }
    }
}
