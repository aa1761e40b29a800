//! Per-channel batch normalization in the channels-last layout.

use crate::real::Real;
use crate::tensor::Tensor4;

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.9;

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormParams<R: Real> {
    pub scale: Vec<R>,
    pub shift: Vec<R>,
    pub running_mean: Vec<R>,
    pub running_var: Vec<R>,
}

impl<R: Real> BatchNormParams<R> {
    pub fn identity(channels: usize) -> Self {
        Self {
            scale: vec![R::ONE; channels],
            shift: vec![R::ZERO; channels],
            running_mean: vec![R::ZERO; channels],
            running_var: vec![R::ONE; channels],
        }
    }

    pub fn cast<S: Real>(&self) -> BatchNormParams<S> {
        let lift = |v: &[R]| v.iter().map(|x| S::from_f64(x.to_f64())).collect();
        BatchNormParams {
            scale: lift(&self.scale),
            shift: lift(&self.shift),
            running_mean: lift(&self.running_mean),
            running_var: lift(&self.running_var),
        }
    }
}

pub(crate) struct BnCache<R: Real> {
    /// Normalized values before scale/shift.
    pub xhat: Vec<R>,
    pub inv_std: Vec<R>,
    /// Batch statistics (train mode) for the deferred running-stat update.
    pub batch_mean: Option<Vec<R>>,
    pub batch_var: Option<Vec<R>>,
    pub train: bool,
}

/// Forward is pure: running statistics are NOT mutated here. Train mode
/// records the batch statistics in the cache; the training loop applies them
/// through `apply_running_update`.
pub(crate) fn bn_forward<R: Real>(
    input: &mut Tensor4<R>,
    params: &BatchNormParams<R>,
    train: bool,
) -> BnCache<R> {
    let channels = input.dims().channels;
    let n = input.dims().count() / channels;
    let eps = R::from_f64(BN_EPS);
    let data = input.data_mut();

    let (mean, var) = if train {
        let mut mean = vec![R::ZERO; channels];
        for chunk in data.chunks_exact(channels) {
            for (m, &v) in mean.iter_mut().zip(chunk) {
                *m += v;
            }
        }
        let inv_n = R::from_f64(1.0 / n as f64);
        for m in mean.iter_mut() {
            *m *= inv_n;
        }
        let mut var = vec![R::ZERO; channels];
        for chunk in data.chunks_exact(channels) {
            for (c, (v, &x)) in var.iter_mut().zip(chunk).enumerate() {
                let d = x - mean[c];
                *v += d * d;
            }
        }
        for v in var.iter_mut() {
            *v *= inv_n;
        }
        (mean, var)
    } else {
        (params.running_mean.clone(), params.running_var.clone())
    };

    let inv_std: Vec<R> = var.iter().map(|&v| R::ONE / (v + eps).sqrt()).collect();

    let mut xhat = vec![R::ZERO; data.len()];
    for (chunk, xh) in data
        .chunks_exact_mut(channels)
        .zip(xhat.chunks_exact_mut(channels))
    {
        for c in 0..channels {
            let h = (chunk[c] - mean[c]) * inv_std[c];
            xh[c] = h;
            chunk[c] = params.scale[c] * h + params.shift[c];
        }
    }

    BnCache {
        xhat,
        inv_std,
        batch_mean: train.then(|| mean),
        batch_var: train.then(|| var),
        train,
    }
}

pub(crate) struct BnGrads<R: Real> {
    pub grad_scale: Vec<R>,
    pub grad_shift: Vec<R>,
}

/// In-place: `grad` enters as dL/dy and leaves as dL/dx.
pub(crate) fn bn_backward<R: Real>(
    grad: &mut Tensor4<R>,
    cache: &BnCache<R>,
    params: &BatchNormParams<R>,
) -> BnGrads<R> {
    let channels = grad.dims().channels;
    let n = grad.dims().count() / channels;

    let mut grad_shift = vec![R::ZERO; channels];
    let mut grad_scale = vec![R::ZERO; channels];
    for (gc, xc) in grad
        .data()
        .chunks_exact(channels)
        .zip(cache.xhat.chunks_exact(channels))
    {
        for c in 0..channels {
            grad_shift[c] += gc[c];
            grad_scale[c] += gc[c] * xc[c];
        }
    }

    let data = grad.data_mut();
    if cache.train {
        // dx = scale*inv_std * (dy - mean(dy) - xhat * mean(dy*xhat))
        let inv_n = R::from_f64(1.0 / n as f64);
        for (gc, xc) in data
            .chunks_exact_mut(channels)
            .zip(cache.xhat.chunks_exact(channels))
        {
            for c in 0..channels {
                let centered =
                    gc[c] - grad_shift[c] * inv_n - xc[c] * grad_scale[c] * inv_n;
                gc[c] = params.scale[c] * cache.inv_std[c] * centered;
            }
        }
    } else {
        // Eval normalization is an affine map per channel.
        for gc in data.chunks_exact_mut(channels) {
            for c in 0..channels {
                gc[c] = gc[c] * params.scale[c] * cache.inv_std[c];
            }
        }
    }

    BnGrads {
        grad_scale,
        grad_shift,
    }
}

/// Fold the batch statistics recorded during a train-mode forward into the
/// running estimates: running = momentum*running + (1-momentum)*batch.
pub(crate) fn apply_running_update<R: Real>(params: &mut BatchNormParams<R>, cache: &BnCache<R>) {
    let (Some(mean), Some(var)) = (&cache.batch_mean, &cache.batch_var) else {
        return;
    };
    let m = R::from_f64(BN_MOMENTUM);
    let one_m = R::ONE - m;
    for (r, &b) in params.running_mean.iter_mut().zip(mean) {
        *r = m * *r + one_m * b;
    }
    for (r, &b) in params.running_var.iter_mut().zip(var) {
        *r = m * *r + one_m * b;
    }
}
