//! Max and average pooling over spatial windows, per channel.

use crate::conv::ConvGeometry;
use crate::error::Result;
use crate::real::Real;
use crate::tensor::{Dims4, Tensor4};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoolSpec {
    pub pool_h: usize,
    pub pool_w: usize,
    pub stride_h: usize,
    pub stride_w: usize,
}

pub(crate) fn pool_geometry(layer: &str, in_dims: Dims4, spec: &PoolSpec) -> Result<ConvGeometry> {
    ConvGeometry::resolve(
        layer,
        in_dims,
        spec.pool_h,
        spec.pool_w,
        spec.stride_h,
        spec.stride_w,
        in_dims.channels,
    )
}

pub(crate) struct MaxPoolResult<R: Real> {
    pub output: Tensor4<R>,
    /// Flat input offset of the winning element per output value.
    pub argmax: Vec<u32>,
}

pub(crate) fn maxpool_forward<R: Real>(input: &Tensor4<R>, geo: &ConvGeometry) -> MaxPoolResult<R> {
    let d = geo.in_dims;
    let out_dims = geo.out_dims();
    let mut output = Tensor4::zeros(out_dims);
    let mut argmax = vec![0u32; out_dims.count()];
    let src = input.data();
    let dst = output.data_mut();
    let mut o = 0usize;
    for b in 0..d.batch {
        for oy in 0..geo.out_h {
            for ox in 0..geo.out_w {
                let iy = oy * geo.stride_h;
                let ix = ox * geo.stride_w;
                for c in 0..d.channels {
                    let mut best = src[((b * d.height + iy) * d.width + ix) * d.channels + c];
                    let mut best_at = ((b * d.height + iy) * d.width + ix) * d.channels + c;
                    for ky in 0..geo.kernel_h {
                        for kx in 0..geo.kernel_w {
                            let at = ((b * d.height + iy + ky) * d.width + ix + kx) * d.channels + c;
                            if src[at] > src[best_at] {
                                best = src[at];
                                best_at = at;
                            }
                        }
                    }
                    dst[o] = best;
                    argmax[o] = best_at as u32;
                    o += 1;
                }
            }
        }
    }
    MaxPoolResult { output, argmax }
}

pub(crate) fn maxpool_backward<R: Real>(
    argmax: &[u32],
    grad_out: &Tensor4<R>,
    in_dims: Dims4,
) -> Tensor4<R> {
    let mut grad_input = Tensor4::zeros(in_dims);
    let dst = grad_input.data_mut();
    for (g, &at) in grad_out.data().iter().zip(argmax.iter()) {
        dst[at as usize] += *g;
    }
    grad_input
}

pub(crate) fn avgpool_forward<R: Real>(input: &Tensor4<R>, geo: &ConvGeometry) -> Tensor4<R> {
    let d = geo.in_dims;
    let mut output = Tensor4::zeros(geo.out_dims());
    let inv = R::from_f64(1.0 / (geo.kernel_h * geo.kernel_w) as f64);
    let src = input.data();
    let dst = output.data_mut();
    let mut o = 0usize;
    for b in 0..d.batch {
        for oy in 0..geo.out_h {
            for ox in 0..geo.out_w {
                let iy = oy * geo.stride_h;
                let ix = ox * geo.stride_w;
                for c in 0..d.channels {
                    let mut acc = R::ZERO;
                    for ky in 0..geo.kernel_h {
                        for kx in 0..geo.kernel_w {
                            acc += src[((b * d.height + iy + ky) * d.width + ix + kx) * d.channels + c];
                        }
                    }
                    dst[o] = acc * inv;
                    o += 1;
                }
            }
        }
    }
    output
}

pub(crate) fn avgpool_backward<R: Real>(
    grad_out: &Tensor4<R>,
    geo: &ConvGeometry,
) -> Tensor4<R> {
    let d = geo.in_dims;
    let inv = R::from_f64(1.0 / (geo.kernel_h * geo.kernel_w) as f64);
    let mut grad_input = Tensor4::zeros(d);
    let dst = grad_input.data_mut();
    let g = grad_out.data();
    let mut o = 0usize;
    for b in 0..d.batch {
        for oy in 0..geo.out_h {
            for ox in 0..geo.out_w {
                let iy = oy * geo.stride_h;
                let ix = ox * geo.stride_w;
                for c in 0..d.channels {
                    let spread = g[o] * inv;
                    for ky in 0..geo.kernel_h {
                        for kx in 0..geo.kernel_w {
                            dst[((b * d.height + iy + ky) * d.width + ix + kx) * d.channels + c] +=
                                spread;
                        }
                    }
                    o += 1;
                }
            }
        }
    }
    grad_input
}
