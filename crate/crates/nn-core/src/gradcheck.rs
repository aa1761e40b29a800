//! Central finite-difference gradient verification.
//!
//! The numeric side only ever calls the forward pass, so it stays independent
//! of every backward implementation it is checking.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::layer::{layer_backward, layer_forward, ForwardCache, LayerGrads, LayerKind, LayerParams, Mode};
use crate::loss::softmax_cross_entropy;
use crate::lstm::{lstm_backward, lstm_forward, LstmParams, GATE_COUNT};

use crate::tensor::Tensor4;

/// Default central-difference step in double precision.
pub const FD_STEP: f64 = 1e-4;

/// Anything whose parameters (and inputs) can be perturbed coordinate-wise
/// and whose scalar objective and analytic gradients can be evaluated.
pub trait GradCheckTarget {
    fn tensor_count(&self) -> usize;
    fn tensor_len(&self, idx: usize) -> usize;
    fn read(&self, idx: usize, offset: usize) -> f64;
    fn write(&mut self, idx: usize, offset: usize, value: f64);
    fn objective(&mut self) -> f64;
    /// Analytic d objective / d tensor, aligned with the tensor indices.
    fn gradients(&mut self) -> Vec<Vec<f64>>;
}

#[derive(Debug, Clone, Copy)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub pass: bool,
    pub coords_checked: usize,
    pub worst_tensor: usize,
    pub worst_offset: usize,
}

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let diff = (analytic - numeric).abs();
    let denom = analytic.abs().max(numeric.abs());
    if denom > 1e-8 {
        diff / denom
    } else {
        diff
    }
}

/// Compares analytic gradients against central finite differences.
///
/// Every parameter tensor is visited; within a tensor, all coordinates are
/// checked unless `coords_per_tensor` caps them, in which case a seeded
/// sample is taken (large layers would otherwise need millions of forward
/// passes).
pub fn gradient_check(
    target: &mut dyn GradCheckTarget,
    tolerance: f64,
    step: f64,
    coords_per_tensor: Option<usize>,
    seed: u64,
) -> GradCheckReport {
    let analytic = target.gradients();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        pass: true,
        coords_checked: 0,
        worst_tensor: 0,
        worst_offset: 0,
    };

    for t in 0..target.tensor_count() {
        let len = target.tensor_len(t);
        if len == 0 {
            continue;
        }
        let offsets: Vec<usize> = match coords_per_tensor {
            Some(cap) if cap < len => sample(&mut rng, len, cap).into_vec(),
            _ => (0..len).collect(),
        };
        for off in offsets {
            let orig = target.read(t, off);
            target.write(t, off, orig + step);
            let plus = target.objective();
            target.write(t, off, orig - step);
            let minus = target.objective();
            target.write(t, off, orig);

            let numeric = (plus - minus) / (2.0 * step);
            let err = relative_error(analytic[t][off], numeric);
            report.coords_checked += 1;
            if err > report.max_relative_error {
                report.max_relative_error = err;
                report.worst_tensor = t;
                report.worst_offset = off;
            }
        }
    }

    report.pass = report.max_relative_error < tolerance;
    report
}

/// Checks one layer: the objective is the forward output contracted against
/// a fixed projection, so gradients flow to the input and every parameter.
/// Tensor 0 is the input; parameters follow.
pub struct LayerCheck {
    pub kind: LayerKind,
    pub params: Option<LayerParams<f64>>,
    pub input: Tensor4<f64>,
    pub mode: Mode,
    projection: Vec<f64>,
    rng_seed: u64,
    /// Multiply analytic backward by this factor to emulate a broken
    /// implementation (negative-control tests).
    pub grad_scale: f64,
}

impl LayerCheck {
    pub fn new(
        kind: LayerKind,
        params: Option<LayerParams<f64>>,
        input: Tensor4<f64>,
        mode: Mode,
        seed: u64,
    ) -> Self {
        let mut probe = Self {
            kind,
            params,
            input,
            mode,
            projection: Vec::new(),
            rng_seed: seed,
            grad_scale: 1.0,
        };
        let (out, _) = probe.forward();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e3779b97f4a7c15);
        probe.projection = (0..out.dims().count())
            .map(|_| {
                use rand::Rng;
                rng.random::<f64>() * 2.0 - 1.0
            })
            .collect();
        probe
    }

    fn forward(&self) -> (Tensor4<f64>, ForwardCache<f64>) {
        // A fresh generator per call keeps train-mode dropout masks identical
        // across the repeated objective evaluations of finite differencing.
        let mut rng = ChaCha8Rng::seed_from_u64(self.rng_seed);
        layer_forward(&self.kind, self.params.as_ref(), &self.input, self.mode, &mut rng)
            .expect("layer check forward must succeed")
    }

    fn tensor_slices(&self) -> Vec<usize> {
        let mut lens = vec![self.input.dims().count()];
        if let Some(p) = &self.params {
            lens.push(p.weights.dims().count());
            lens.push(p.bias.len());
            if let Some(bn) = &p.batchnorm {
                lens.push(bn.scale.len());
                lens.push(bn.shift.len());
            }
        }
        lens
    }
}

impl GradCheckTarget for LayerCheck {
    fn tensor_count(&self) -> usize {
        self.tensor_slices().len()
    }

    fn tensor_len(&self, idx: usize) -> usize {
        self.tensor_slices()[idx]
    }

    fn read(&self, idx: usize, offset: usize) -> f64 {
        match idx {
            0 => self.input.data()[offset],
            1 => self.params.as_ref().unwrap().weights.data()[offset],
            2 => self.params.as_ref().unwrap().bias[offset],
            3 => self.params.as_ref().unwrap().batchnorm.as_ref().unwrap().scale[offset],
            4 => self.params.as_ref().unwrap().batchnorm.as_ref().unwrap().shift[offset],
            _ => unreachable!("layer check has at most 5 tensors"),
        }
    }

    fn write(&mut self, idx: usize, offset: usize, value: f64) {
        match idx {
            0 => self.input.data_mut()[offset] = value,
            1 => self.params.as_mut().unwrap().weights.data_mut()[offset] = value,
            2 => self.params.as_mut().unwrap().bias[offset] = value,
            3 => self.params.as_mut().unwrap().batchnorm.as_mut().unwrap().scale[offset] = value,
            4 => self.params.as_mut().unwrap().batchnorm.as_mut().unwrap().shift[offset] = value,
            _ => unreachable!("layer check has at most 5 tensors"),
        }
    }

    fn objective(&mut self) -> f64 {
        let (out, _) = self.forward();
        out.data()
            .iter()
            .zip(&self.projection)
            .map(|(&o, &p)| o * p)
            .sum()
    }

    fn gradients(&mut self) -> Vec<Vec<f64>> {
        let (out, cache) = self.forward();
        let grad_out = Tensor4::from_vec(out.dims(), self.projection.clone()).unwrap();
        let (grad_input, grad_params): (Tensor4<f64>, Option<LayerGrads<f64>>) =
            layer_backward(&self.kind, self.params.as_ref(), &cache, &grad_out)
                .expect("layer check backward must succeed");

        let s = self.grad_scale;
        let scale = |v: Vec<f64>| -> Vec<f64> { v.into_iter().map(|x| x * s).collect() };
        let mut grads = vec![scale(grad_input.into_data())];
        if let Some(g) = grad_params {
            grads.push(scale(g.weights));
            grads.push(scale(g.bias));
            if let Some(bs) = g.bn_scale {
                grads.push(scale(bs));
            }
            if let Some(bh) = g.bn_shift {
                grads.push(scale(bh));
            }
        }
        grads
    }
}

/// Checks softmax cross-entropy: the objective is the loss itself and the
/// analytic gradient is the one the loss hands back.
pub struct SoftmaxCeCheck {
    pub logits: Tensor4<f64>,
    pub labels: Vec<usize>,
}

impl GradCheckTarget for SoftmaxCeCheck {
    fn tensor_count(&self) -> usize {
        1
    }
    fn tensor_len(&self, _idx: usize) -> usize {
        self.logits.dims().count()
    }
    fn read(&self, _idx: usize, offset: usize) -> f64 {
        self.logits.data()[offset]
    }
    fn write(&mut self, _idx: usize, offset: usize, value: f64) {
        self.logits.data_mut()[offset] = value;
    }
    fn objective(&mut self) -> f64 {
        softmax_cross_entropy(&self.logits, &self.labels).unwrap().loss
    }
    fn gradients(&mut self) -> Vec<Vec<f64>> {
        vec![softmax_cross_entropy(&self.logits, &self.labels)
            .unwrap()
            .grad_logits
            .into_data()]
    }
}

/// Checks the LSTM through a projection of the full hidden sequence.
/// Tensor 0 is the window; then (w, u, b) per gate in gate order.
pub struct LstmCheck {
    pub params: LstmParams<f64>,
    pub window: Vec<f64>,
    projection: Vec<f64>,
}

impl LstmCheck {
    pub fn new(params: LstmParams<f64>, window: Vec<f64>, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let len = params.window_len * params.hidden_dim;
        let projection = (0..len)
            .map(|_| {
                use rand::Rng;
                rng.random::<f64>() * 2.0 - 1.0
            })
            .collect();
        Self {
            params,
            window,
            projection,
        }
    }

    fn slot(&self, idx: usize) -> (usize, usize) {
        // (gate, 0=w 1=u 2=b)
        let i = idx - 1;
        (i / 3, i % 3)
    }
}

impl GradCheckTarget for LstmCheck {
    fn tensor_count(&self) -> usize {
        1 + GATE_COUNT * 3
    }

    fn tensor_len(&self, idx: usize) -> usize {
        if idx == 0 {
            return self.window.len();
        }
        let (g, part) = self.slot(idx);
        match part {
            0 => self.params.gates[g].w.len(),
            1 => self.params.gates[g].u.len(),
            _ => self.params.gates[g].b.len(),
        }
    }

    fn read(&self, idx: usize, offset: usize) -> f64 {
        if idx == 0 {
            return self.window[offset];
        }
        let (g, part) = self.slot(idx);
        match part {
            0 => self.params.gates[g].w[offset],
            1 => self.params.gates[g].u[offset],
            _ => self.params.gates[g].b[offset],
        }
    }

    fn write(&mut self, idx: usize, offset: usize, value: f64) {
        if idx == 0 {
            self.window[offset] = value;
            return;
        }
        let (g, part) = self.slot(idx);
        match part {
            0 => self.params.gates[g].w[offset] = value,
            1 => self.params.gates[g].u[offset] = value,
            _ => self.params.gates[g].b[offset] = value,
        }
    }

    fn objective(&mut self) -> f64 {
        let (hidden, _) = lstm_forward(&self.params, &self.window).unwrap();
        hidden.iter().zip(&self.projection).map(|(&h, &p)| h * p).sum()
    }

    fn gradients(&mut self) -> Vec<Vec<f64>> {
        let (_, cache) = lstm_forward(&self.params, &self.window).unwrap();
        let (grad_window, grads) =
            lstm_backward(&self.params, &cache, &self.projection).unwrap();
        let mut out = vec![grad_window];
        for g in 0..GATE_COUNT {
            out.push(grads.gates[g].w.clone());
            out.push(grads.gates[g].u.clone());
            out.push(grads.gates[g].b.clone());
        }
        out
    }
}
