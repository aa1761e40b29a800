//! Classic momentum SGD.

use crate::error::{NnError, Result};
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub momentum: f64,
}

impl SgdConfig {
    pub fn new(learning_rate: f64, momentum: f64) -> Result<Self> {
        if !(learning_rate > 0.0) {
            return Err(NnError::InvalidParameter {
                context: format!("learning_rate must be > 0, got {learning_rate}"),
            });
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(NnError::InvalidParameter {
                context: format!("momentum must lie in [0,1), got {momentum}"),
            });
        }
        Ok(Self {
            learning_rate,
            momentum,
        })
    }
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            momentum: 0.9,
        }
    }
}

/// v <- momentum*v + grad ; p <- p - lr*v, elementwise. Training aborts on
/// non-finite gradients rather than silently poisoning the parameters.
pub fn sgd_update<R: Real>(
    params: &mut [R],
    grads: &[R],
    velocity: &mut [R],
    cfg: &SgdConfig,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != velocity.len() {
        return Err(NnError::ShapeMismatch {
            layer: "sgd_update".into(),
            expected: format!("{} values", params.len()),
            got: format!("{} grads / {} velocity", grads.len(), velocity.len()),
        });
    }
    let lr = R::from_f64(cfg.learning_rate);
    let m = R::from_f64(cfg.momentum);
    for ((p, &g), v) in params.iter_mut().zip(grads).zip(velocity.iter_mut()) {
        if !g.is_finite() {
            return Err(NnError::NonFinite {
                context: "gradient passed to sgd_update".into(),
            });
        }
        *v = m * *v + g;
        *p -= lr * *v;
    }
    Ok(())
}
