//! Valid (no-padding) convolution via im2col + GEMM.
//!
//! With the (batch, height, width, channels) layout every (ky) strip of a
//! receptive field is one contiguous run of `kernel_w * channels` values, so
//! im2col is a sequence of memcpys and the weight tensor (kh, kw, cin, cout)
//! is already the right-hand matrix of the product with no reordering.

use crate::error::{NnError, Result};
use crate::real::Real;
use crate::tensor::{Dims4, Tensor4};

/// floor((input - kernel) / stride) + 1, or None on underflow.
pub fn conv_out_dim(input: usize, kernel: usize, stride: usize) -> Option<usize> {
    if kernel == 0 || stride == 0 || input < kernel {
        None
    } else {
        Some((input - kernel) / stride + 1)
    }
}

pub(crate) struct ConvGeometry {
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride_h: usize,
    pub stride_w: usize,
    pub in_dims: Dims4,
    pub out_h: usize,
    pub out_w: usize,
    pub out_channels: usize,
}

impl ConvGeometry {
    pub fn resolve(
        layer: &str,
        in_dims: Dims4,
        kernel_h: usize,
        kernel_w: usize,
        stride_h: usize,
        stride_w: usize,
        out_channels: usize,
    ) -> Result<Self> {
        let out_h = conv_out_dim(in_dims.height, kernel_h, stride_h).ok_or_else(|| {
            NnError::SpatialUnderflow {
                layer: layer.to_string(),
                axis: "height",
                input: in_dims.height,
                kernel: kernel_h,
            }
        })?;
        let out_w = conv_out_dim(in_dims.width, kernel_w, stride_w).ok_or_else(|| {
            NnError::SpatialUnderflow {
                layer: layer.to_string(),
                axis: "width",
                input: in_dims.width,
                kernel: kernel_w,
            }
        })?;
        Ok(Self {
            kernel_h,
            kernel_w,
            stride_h,
            stride_w,
            in_dims,
            out_h,
            out_w,
            out_channels,
        })
    }

    pub fn out_dims(&self) -> Dims4 {
        Dims4::new(self.in_dims.batch, self.out_h, self.out_w, self.out_channels)
    }

    /// Rows of the im2col matrix: one per output pixel.
    pub fn rows(&self) -> usize {
        self.in_dims.batch * self.out_h * self.out_w
    }

    /// Columns of the im2col matrix: one per receptive-field value.
    pub fn cols(&self) -> usize {
        self.kernel_h * self.kernel_w * self.in_dims.channels
    }
}

pub(crate) fn im2col<R: Real>(input: &Tensor4<R>, geo: &ConvGeometry) -> Vec<R> {
    let d = geo.in_dims;
    let strip = geo.kernel_w * d.channels;
    let k = geo.cols();
    let mut col = vec![R::ZERO; geo.rows() * k];
    let src = input.data();
    for b in 0..d.batch {
        for oy in 0..geo.out_h {
            for ox in 0..geo.out_w {
                let row = ((b * geo.out_h + oy) * geo.out_w + ox) * k;
                let iy = oy * geo.stride_h;
                let ix = ox * geo.stride_w;
                for ky in 0..geo.kernel_h {
                    let s = ((b * d.height + iy + ky) * d.width + ix) * d.channels;
                    let t = row + ky * strip;
                    col[t..t + strip].copy_from_slice(&src[s..s + strip]);
                }
            }
        }
    }
    col
}

/// Scatter-add of an im2col-shaped gradient back onto the input grid.
pub(crate) fn col2im<R: Real>(grad_col: &[R], geo: &ConvGeometry) -> Tensor4<R> {
    let d = geo.in_dims;
    let strip = geo.kernel_w * d.channels;
    let k = geo.cols();
    let mut grad_input = Tensor4::zeros(d);
    let dst = grad_input.data_mut();
    for b in 0..d.batch {
        for oy in 0..geo.out_h {
            for ox in 0..geo.out_w {
                let row = ((b * geo.out_h + oy) * geo.out_w + ox) * k;
                let iy = oy * geo.stride_h;
                let ix = ox * geo.stride_w;
                for ky in 0..geo.kernel_h {
                    let t = ((b * d.height + iy + ky) * d.width + ix) * d.channels;
                    let s = row + ky * strip;
                    for j in 0..strip {
                        dst[t + j] += grad_col[s + j];
                    }
                }
            }
        }
    }
    grad_input
}

/// out[row, c] = sum_k col[row, k] * weights[k, c] + bias[c]
pub(crate) fn conv_apply<R: Real>(
    col: &[R],
    weights: &[R],
    bias: &[R],
    geo: &ConvGeometry,
) -> Tensor4<R> {
    let m = geo.rows();
    let k = geo.cols();
    let n = geo.out_channels;
    let mut out = vec![R::ZERO; m * n];
    R::gemm_acc(m, k, n, col, false, weights, false, &mut out);
    for row in 0..m {
        let base = row * n;
        for c in 0..n {
            out[base + c] += bias[c];
        }
    }
    Tensor4::from_vec(geo.out_dims(), out).expect("conv output dims consistent")
}

pub(crate) struct ConvGrads<R: Real> {
    pub grad_weights: Vec<R>,
    pub grad_bias: Vec<R>,
    pub grad_input: Tensor4<R>,
}

pub(crate) fn conv_backward<R: Real>(
    col: &[R],
    weights: &[R],
    grad_out: &[R],
    geo: &ConvGeometry,
) -> ConvGrads<R> {
    let m = geo.rows();
    let k = geo.cols();
    let n = geo.out_channels;

    let mut grad_weights = vec![R::ZERO; k * n];
    R::gemm_acc(k, m, n, col, true, grad_out, false, &mut grad_weights);

    let mut grad_bias = vec![R::ZERO; n];
    for row in 0..m {
        let base = row * n;
        for c in 0..n {
            grad_bias[c] += grad_out[base + c];
        }
    }

    let mut grad_col = vec![R::ZERO; m * k];
    R::gemm_acc(m, n, k, grad_out, false, weights, true, &mut grad_col);

    ConvGrads {
        grad_weights,
        grad_bias,
        grad_input: col2im(&grad_col, geo),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn out_dim_formula() {
        assert_eq!(conv_out_dim(60, 5, 1), Some(56));
        assert_eq!(conv_out_dim(30, 7, 2), Some(12));
        assert_eq!(conv_out_dim(3, 4, 1), None);
        assert_eq!(conv_out_dim(7, 7, 14), Some(1));
    }

    #[test]
    fn im2col_single_patch_is_identity_copy() {
        // 1x2x2x1 input, 2x2 kernel: col is the whole image flattened.
        let input =
            Tensor4::from_vec(Dims4::new(1, 2, 2, 1), vec![1.0f64, 2.0, 3.0, 4.0]).unwrap();
        let geo = ConvGeometry::resolve("t", input.dims(), 2, 2, 1, 1, 1).unwrap();
        assert_eq!(im2col(&input, &geo), vec![1.0, 2.0, 3.0, 4.0]);
    }
}
