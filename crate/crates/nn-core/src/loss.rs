//! Softmax cross-entropy over class logits.

use crate::error::{NnError, Result};
use crate::real::Real;
use crate::tensor::Tensor4;

pub struct LossOutput<R: Real> {
    /// Mean negative log-likelihood over the batch.
    pub loss: R,
    /// Row-stochastic probabilities, one vector per sample.
    pub probabilities: Vec<Vec<R>>,
    /// d loss / d logits = (p - onehot) / batch.
    pub grad_logits: Tensor4<R>,
}

/// Logits must be (batch, 1, 1, classes); labels index into the class axis.
pub fn softmax_cross_entropy<R: Real>(
    logits: &Tensor4<R>,
    labels: &[usize],
) -> Result<LossOutput<R>> {
    let dims = logits.dims();
    if dims.height != 1 || dims.width != 1 {
        return Err(NnError::ShapeMismatch {
            layer: "softmax_cross_entropy".into(),
            expected: "(batch,1,1,classes)".into(),
            got: format!("{dims}"),
        });
    }
    if labels.len() != dims.batch {
        return Err(NnError::ShapeMismatch {
            layer: "softmax_cross_entropy".into(),
            expected: format!("{} labels", dims.batch),
            got: format!("{} labels", labels.len()),
        });
    }
    let classes = dims.channels;
    for &l in labels {
        if l >= classes {
            return Err(NnError::LabelOutOfRange { label: l, classes });
        }
    }

    let batch = dims.batch;
    let inv_batch = R::from_f64(1.0 / batch as f64);
    let mut probabilities = Vec::with_capacity(batch);
    let mut grad = Tensor4::zeros(dims);
    let mut loss = R::ZERO;

    for (b, &label) in labels.iter().enumerate() {
        let row = &logits.data()[b * classes..(b + 1) * classes];
        let mut m = row[0];
        for &v in row {
            m = m.maximum(v);
        }
        let mut sum = R::ZERO;
        let mut p: Vec<R> = row.iter().map(|&v| (v - m).exp()).collect();
        for &v in &p {
            sum += v;
        }
        for v in p.iter_mut() {
            *v /= sum;
        }
        // log p_label computed in the shifted domain for stability
        loss -= (row[label] - m) - sum.ln();

        let g = &mut grad.data_mut()[b * classes..(b + 1) * classes];
        for c in 0..classes {
            g[c] = (p[c] - if c == label { R::ONE } else { R::ZERO }) * inv_batch;
        }
        probabilities.push(p);
    }
    loss *= inv_batch;

    if !loss.is_finite() {
        return Err(NnError::NonFinite {
            context: "softmax_cross_entropy loss".into(),
        });
    }

    Ok(LossOutput {
        loss,
        probabilities,
        grad_logits: grad,
    })
}
