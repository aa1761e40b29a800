//! The layer vocabulary a genome can express, with exact forward/backward.
//!
//! A Conv layer is the unit the architecture search manipulates: convolution,
//! then optional batch normalization, then optional dropout, in that order.
//! Activations (ReLU and the two poolings) and the terminal Softmax are
//! parameter-free layers.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::conv::{conv_apply, conv_backward, im2col, ConvGeometry};
use crate::error::{NnError, Result};
use crate::norm::{apply_running_update, bn_backward, bn_forward, BatchNormParams, BnCache};
use crate::pool::{
    avgpool_backward, avgpool_forward, maxpool_backward, maxpool_forward, pool_geometry, PoolSpec,
};
use crate::real::Real;
use crate::tensor::{Dims4, Tensor4};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvSpec {
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub out_channels: usize,
    pub stride_h: usize,
    pub stride_w: usize,
    pub use_batchnorm: bool,
    pub dropout_rate: Option<f64>,
}

impl ConvSpec {
    pub fn plain(
        kernel_h: usize,
        kernel_w: usize,
        out_channels: usize,
        stride_h: usize,
        stride_w: usize,
    ) -> Self {
        Self {
            kernel_h,
            kernel_w,
            out_channels,
            stride_h,
            stride_w,
            use_batchnorm: false,
            dropout_rate: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel_h == 0 || self.kernel_w == 0 || self.stride_h == 0 || self.stride_w == 0 {
            return Err(NnError::InvalidParameter {
                context: format!("conv kernel/stride must be >= 1, got {self:?}"),
            });
        }
        if self.out_channels == 0 {
            return Err(NnError::InvalidParameter {
                context: "conv out_channels must be >= 1".into(),
            });
        }
        if let Some(p) = self.dropout_rate {
            if !(p > 0.0 && p < 1.0) {
                return Err(NnError::InvalidParameter {
                    context: format!("dropout_rate must lie strictly inside (0,1), got {p}"),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LayerKind {
    Conv(ConvSpec),
    Relu,
    MaxPool(PoolSpec),
    AvgPool(PoolSpec),
    Softmax,
}

impl LayerKind {
    pub fn name(&self) -> &'static str {
        match self {
            LayerKind::Conv(_) => "conv",
            LayerKind::Relu => "relu",
            LayerKind::MaxPool(_) => "maxpool",
            LayerKind::AvgPool(_) => "avgpool",
            LayerKind::Softmax => "softmax",
        }
    }

    /// Output dims under valid convolution/pooling arithmetic.
    pub fn out_dims(&self, layer: &str, in_dims: Dims4) -> Result<Dims4> {
        match self {
            LayerKind::Conv(spec) => Ok(ConvGeometry::resolve(
                layer,
                in_dims,
                spec.kernel_h,
                spec.kernel_w,
                spec.stride_h,
                spec.stride_w,
                spec.out_channels,
            )?
            .out_dims()),
            LayerKind::MaxPool(spec) | LayerKind::AvgPool(spec) => {
                Ok(pool_geometry(layer, in_dims, spec)?.out_dims())
            }
            LayerKind::Relu | LayerKind::Softmax => Ok(in_dims),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Parameters of one Conv layer; the weight tensor layout is
/// (kernel_h, kernel_w, in_channels, out_channels).
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<R: Real> {
    pub weights: Tensor4<R>,
    pub bias: Vec<R>,
    pub batchnorm: Option<BatchNormParams<R>>,
}

impl<R: Real> LayerParams<R> {
    /// Fan-in-scaled uniform weights, zero bias, identity batchnorm.
    pub fn init(spec: &ConvSpec, in_channels: usize, rng: &mut ChaCha8Rng) -> Self {
        let fan_in = spec.kernel_h * spec.kernel_w * in_channels;
        let dims = Dims4::new(spec.kernel_h, spec.kernel_w, in_channels, spec.out_channels);
        let weights = Tensor4::from_vec(
            dims,
            crate::init::fan_in_uniform(dims.count(), fan_in, rng),
        )
        .expect("weight dims consistent");
        Self {
            weights,
            bias: vec![R::ZERO; spec.out_channels],
            batchnorm: spec
                .use_batchnorm
                .then(|| BatchNormParams::identity(spec.out_channels)),
        }
    }

    pub fn in_channels(&self) -> usize {
        self.weights.dims().width
    }

    pub fn out_channels(&self) -> usize {
        self.weights.dims().channels
    }

    pub fn cast<S: Real>(&self) -> LayerParams<S> {
        LayerParams {
            weights: self.weights.cast(),
            bias: self.bias.iter().map(|v| S::from_f64(v.to_f64())).collect(),
            batchnorm: self.batchnorm.as_ref().map(|b| b.cast()),
        }
    }
}

/// Gradients mirroring `LayerParams`.
#[derive(Debug, Clone)]
pub struct LayerGrads<R: Real> {
    pub weights: Vec<R>,
    pub bias: Vec<R>,
    pub bn_scale: Option<Vec<R>>,
    pub bn_shift: Option<Vec<R>>,
}

pub struct ConvCache<R: Real> {
    geo: ConvGeometry,
    col: Vec<R>,
    bn: Option<BnCache<R>>,
    /// Inverted-dropout multipliers (0 or 1/(1-p)).
    dropout: Option<Vec<R>>,
}

/// Opaque forward record consumed by `layer_backward`.
pub struct ForwardCache<R: Real>(pub(crate) CacheInner<R>);

impl<R: Real> std::fmt::Debug for ForwardCache<R> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ForwardCache({})", self.kind_name())
    }
}

pub(crate) enum CacheInner<R: Real> {
    Conv(ConvCache<R>),
    Relu { active: Vec<bool> },
    MaxPool { argmax: Vec<u32>, in_dims: Dims4, out_dims: Dims4 },
    AvgPool { geo: ConvGeometry },
    Softmax { output: Tensor4<R> },
}

impl<R: Real> ForwardCache<R> {
    fn kind_name(&self) -> &'static str {
        match &self.0 {
            CacheInner::Conv(_) => "conv",
            CacheInner::Relu { .. } => "relu",
            CacheInner::MaxPool { .. } => "maxpool",
            CacheInner::AvgPool { .. } => "avgpool",
            CacheInner::Softmax { .. } => "softmax",
        }
    }
}

/// Runs one layer forward. Dropout draws its mask from `rng` (train mode
/// only); eval mode never touches the generator, so eval is deterministic.
pub fn layer_forward<R: Real>(
    kind: &LayerKind,
    params: Option<&LayerParams<R>>,
    input: &Tensor4<R>,
    mode: Mode,
    rng: &mut ChaCha8Rng,
) -> Result<(Tensor4<R>, ForwardCache<R>)> {
    input.check_finite(kind.name())?;
    match kind {
        LayerKind::Conv(spec) => {
            spec.validate()?;
            let params = params.ok_or_else(|| NnError::InvalidParameter {
                context: "conv layer requires parameters".into(),
            })?;
            if params.in_channels() != input.dims().channels {
                return Err(NnError::ShapeMismatch {
                    layer: "conv".into(),
                    expected: format!("{} input channels", params.in_channels()),
                    got: format!("{} channels", input.dims().channels),
                });
            }
            let geo = ConvGeometry::resolve(
                "conv",
                input.dims(),
                spec.kernel_h,
                spec.kernel_w,
                spec.stride_h,
                spec.stride_w,
                spec.out_channels,
            )?;
            let col = im2col(input, &geo);
            let mut out = conv_apply(&col, params.weights.data(), &params.bias, &geo);

            let bn = if spec.use_batchnorm {
                let bn_params = params.batchnorm.as_ref().ok_or_else(|| {
                    NnError::InvalidParameter {
                        context: "conv declares batchnorm but has no batchnorm parameters".into(),
                    }
                })?;
                Some(bn_forward(&mut out, bn_params, mode == Mode::Train))
            } else {
                None
            };

            let dropout = match (spec.dropout_rate, mode) {
                (Some(p), Mode::Train) => {
                    let keep = 1.0 - p;
                    let scale = R::from_f64(1.0 / keep);
                    let mask: Vec<R> = (0..out.dims().count())
                        .map(|_| {
                            if rng.random::<f64>() < p {
                                R::ZERO
                            } else {
                                scale
                            }
                        })
                        .collect();
                    for (v, m) in out.data_mut().iter_mut().zip(&mask) {
                        *v *= *m;
                    }
                    Some(mask)
                }
                _ => None,
            };

            Ok((out, ForwardCache(CacheInner::Conv(ConvCache { geo, col, bn, dropout }))))
        }
        LayerKind::Relu => {
            let active: Vec<bool> = input.data().iter().map(|&v| v > R::ZERO).collect();
            let out = input.map(|v| v.maximum(R::ZERO));
            Ok((out, ForwardCache(CacheInner::Relu { active })))
        }
        LayerKind::MaxPool(spec) => {
            let geo = pool_geometry("maxpool", input.dims(), spec)?;
            let res = maxpool_forward(input, &geo);
            Ok((
                res.output,
                ForwardCache(CacheInner::MaxPool {
                    argmax: res.argmax,
                    in_dims: input.dims(),
                    out_dims: geo.out_dims(),
                }),
            ))
        }
        LayerKind::AvgPool(spec) => {
            let geo = pool_geometry("avgpool", input.dims(), spec)?;
            let out = avgpool_forward(input, &geo);
            Ok((out, ForwardCache(CacheInner::AvgPool { geo })))
        }
        LayerKind::Softmax => {
            let out = softmax_channels(input);
            Ok((
                out.clone(),
                ForwardCache(CacheInner::Softmax { output: out }),
            ))
        }
    }
}

/// Exact analytic gradients of the forward map recorded in `cache`.
pub fn layer_backward<R: Real>(
    kind: &LayerKind,
    params: Option<&LayerParams<R>>,
    cache: &ForwardCache<R>,
    grad_output: &Tensor4<R>,
) -> Result<(Tensor4<R>, Option<LayerGrads<R>>)> {
    match (kind, &cache.0) {
        (LayerKind::Conv(_), CacheInner::Conv(c)) => {
            if grad_output.dims() != c.geo.out_dims() {
                return Err(NnError::ShapeMismatch {
                    layer: "conv backward".into(),
                    expected: format!("{}", c.geo.out_dims()),
                    got: format!("{}", grad_output.dims()),
                });
            }
            let params = params.ok_or_else(|| NnError::InvalidParameter {
                context: "conv backward requires parameters".into(),
            })?;
            let mut grad = grad_output.clone();

            if let Some(mask) = &c.dropout {
                for (g, m) in grad.data_mut().iter_mut().zip(mask) {
                    *g *= *m;
                }
            }

            let bn_grads = match (&c.bn, &params.batchnorm) {
                (Some(bn_cache), Some(bn_params)) => {
                    Some(bn_backward(&mut grad, bn_cache, bn_params))
                }
                _ => None,
            };

            let grads = conv_backward(&c.col, params.weights.data(), grad.data(), &c.geo);
            Ok((
                grads.grad_input,
                Some(LayerGrads {
                    weights: grads.grad_weights,
                    bias: grads.grad_bias,
                    bn_scale: bn_grads.as_ref().map(|b| b.grad_scale.clone()),
                    bn_shift: bn_grads.map(|b| b.grad_shift),
                }),
            ))
        }
        (LayerKind::Relu, CacheInner::Relu { active }) => {
            if grad_output.dims().count() != active.len() {
                return Err(NnError::ShapeMismatch {
                    layer: "relu backward".into(),
                    expected: format!("{} values", active.len()),
                    got: format!("{}", grad_output.dims()),
                });
            }
            let mut grad = grad_output.clone();
            for (g, &a) in grad.data_mut().iter_mut().zip(active) {
                if !a {
                    *g = R::ZERO;
                }
            }
            Ok((grad, None))
        }
        (LayerKind::MaxPool(_), CacheInner::MaxPool { argmax, in_dims, out_dims }) => {
            if grad_output.dims() != *out_dims {
                return Err(NnError::ShapeMismatch {
                    layer: "maxpool backward".into(),
                    expected: format!("{out_dims}"),
                    got: format!("{}", grad_output.dims()),
                });
            }
            Ok((maxpool_backward(argmax, grad_output, *in_dims), None))
        }
        (LayerKind::AvgPool(_), CacheInner::AvgPool { geo }) => {
            if grad_output.dims() != geo.out_dims() {
                return Err(NnError::ShapeMismatch {
                    layer: "avgpool backward".into(),
                    expected: format!("{}", geo.out_dims()),
                    got: format!("{}", grad_output.dims()),
                });
            }
            Ok((avgpool_backward(grad_output, geo), None))
        }
        (LayerKind::Softmax, CacheInner::Softmax { output }) => {
            if grad_output.dims() != output.dims() {
                return Err(NnError::ShapeMismatch {
                    layer: "softmax backward".into(),
                    expected: format!("{}", output.dims()),
                    got: format!("{}", grad_output.dims()),
                });
            }
            // dx_i = y_i * (g_i - sum_j g_j y_j), per channel row.
            let channels = output.dims().channels;
            let mut grad = grad_output.clone();
            for (gc, yc) in grad
                .data_mut()
                .chunks_exact_mut(channels)
                .zip(output.data().chunks_exact(channels))
            {
                let mut dot = R::ZERO;
                for c in 0..channels {
                    dot += gc[c] * yc[c];
                }
                for c in 0..channels {
                    gc[c] = yc[c] * (gc[c] - dot);
                }
            }
            Ok((grad, None))
        }
        _ => Err(NnError::ShapeMismatch {
            layer: kind.name().into(),
            expected: "cache produced by matching forward".into(),
            got: format!("{} cache", cache.kind_name()),
        }),
    }
}

/// Fold train-mode batch statistics into running estimates after a step.
pub fn commit_batchnorm<R: Real>(params: &mut LayerParams<R>, cache: &ForwardCache<R>) {
    if let (Some(bn_params), CacheInner::Conv(c)) = (&mut params.batchnorm, &cache.0) {
        if let Some(bn_cache) = &c.bn {
            apply_running_update(bn_params, bn_cache);
        }
    }
}

/// Softmax over the channel axis at every (batch, y, x) position.
pub fn softmax_channels<R: Real>(input: &Tensor4<R>) -> Tensor4<R> {
    let channels = input.dims().channels;
    let mut out = input.clone();
    for row in out.data_mut().chunks_exact_mut(channels) {
        let mut m = row[0];
        for &v in row.iter() {
            m = m.maximum(v);
        }
        let mut sum = R::ZERO;
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}
