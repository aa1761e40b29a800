//! LSTM over fixed-length windows with full backpropagation through time.
//!
//! One window holds `window_len` probability vectors; the recurrence starts
//! from zero hidden and cell state on every window.

use rand_chacha::ChaCha8Rng;

use crate::error::{NnError, Result};
use crate::init::fan_in_uniform;
use crate::real::Real;

pub const GATE_COUNT: usize = 4;

/// Gate order used throughout: input, forget, output, candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Input = 0,
    Forget = 1,
    Output = 2,
    Candidate = 3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateParams<R: Real> {
    /// input_dim x hidden_dim, row-major.
    pub w: Vec<R>,
    /// hidden_dim x hidden_dim, row-major.
    pub u: Vec<R>,
    pub b: Vec<R>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams<R: Real> {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub window_len: usize,
    pub gates: [GateParams<R>; GATE_COUNT],
}

impl<R: Real> LstmParams<R> {
    pub fn init(
        input_dim: usize,
        hidden_dim: usize,
        window_len: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let fan_in = input_dim + hidden_dim;
        let gate = |rng: &mut ChaCha8Rng| GateParams {
            w: fan_in_uniform(input_dim * hidden_dim, fan_in, rng),
            u: fan_in_uniform(hidden_dim * hidden_dim, fan_in, rng),
            b: vec![R::ZERO; hidden_dim],
        };
        Self {
            input_dim,
            hidden_dim,
            window_len,
            gates: [gate(rng), gate(rng), gate(rng), gate(rng)],
        }
    }

    pub fn zeros(input_dim: usize, hidden_dim: usize, window_len: usize) -> Self {
        let gate = || GateParams {
            w: vec![R::ZERO; input_dim * hidden_dim],
            u: vec![R::ZERO; hidden_dim * hidden_dim],
            b: vec![R::ZERO; hidden_dim],
        };
        Self {
            input_dim,
            hidden_dim,
            window_len,
            gates: [gate(), gate(), gate(), gate()],
        }
    }

    pub fn cast<S: Real>(&self) -> LstmParams<S> {
        let lift = |v: &[R]| -> Vec<S> { v.iter().map(|x| S::from_f64(x.to_f64())).collect() };
        LstmParams {
            input_dim: self.input_dim,
            hidden_dim: self.hidden_dim,
            window_len: self.window_len,
            gates: std::array::from_fn(|g| GateParams {
                w: lift(&self.gates[g].w),
                u: lift(&self.gates[g].u),
                b: lift(&self.gates[g].b),
            }),
        }
    }

    pub fn param_count(&self) -> usize {
        GATE_COUNT * (self.input_dim * self.hidden_dim + self.hidden_dim * self.hidden_dim + self.hidden_dim)
    }
}

pub struct LstmCache<R: Real> {
    window: Vec<R>,
    /// Per step: gate activations i, f, o and candidate g.
    acts: Vec<[Vec<R>; GATE_COUNT]>,
    cells: Vec<Vec<R>>,
    cell_tanh: Vec<Vec<R>>,
    hidden: Vec<Vec<R>>,
}

/// `window` is window_len x input_dim row-major. Returns the hidden sequence
/// (window_len x hidden_dim) and the cache for backward.
pub fn lstm_forward<R: Real>(
    params: &LstmParams<R>,
    window: &[R],
) -> Result<(Vec<R>, LstmCache<R>)> {
    let t_len = params.window_len;
    let in_dim = params.input_dim;
    let hid = params.hidden_dim;
    if window.len() != t_len * in_dim {
        return Err(NnError::ShapeMismatch {
            layer: "lstm".into(),
            expected: format!("{} values ({} x {})", t_len * in_dim, t_len, in_dim),
            got: format!("{} values", window.len()),
        });
    }

    let mut cache = LstmCache {
        window: window.to_vec(),
        acts: Vec::with_capacity(t_len),
        cells: Vec::with_capacity(t_len),
        cell_tanh: Vec::with_capacity(t_len),
        hidden: Vec::with_capacity(t_len),
    };
    let mut hidden_seq = vec![R::ZERO; t_len * hid];

    let mut h_prev = vec![R::ZERO; hid];
    let mut c_prev = vec![R::ZERO; hid];

    for t in 0..t_len {
        let x = &window[t * in_dim..(t + 1) * in_dim];
        let mut pre: [Vec<R>; GATE_COUNT] = std::array::from_fn(|g| params.gates[g].b.clone());
        for g in 0..GATE_COUNT {
            R::gemm_acc(1, in_dim, hid, x, false, &params.gates[g].w, false, &mut pre[g]);
            R::gemm_acc(1, hid, hid, &h_prev, false, &params.gates[g].u, false, &mut pre[g]);
        }

        let i: Vec<R> = pre[Gate::Input as usize].iter().map(|&v| v.sigmoid()).collect();
        let f: Vec<R> = pre[Gate::Forget as usize].iter().map(|&v| v.sigmoid()).collect();
        let o: Vec<R> = pre[Gate::Output as usize].iter().map(|&v| v.sigmoid()).collect();
        let g: Vec<R> = pre[Gate::Candidate as usize].iter().map(|&v| v.tanh()).collect();

        let mut c = vec![R::ZERO; hid];
        for j in 0..hid {
            c[j] = f[j] * c_prev[j] + i[j] * g[j];
        }
        let tc: Vec<R> = c.iter().map(|&v| v.tanh()).collect();
        let mut h = vec![R::ZERO; hid];
        for j in 0..hid {
            h[j] = o[j] * tc[j];
        }

        hidden_seq[t * hid..(t + 1) * hid].copy_from_slice(&h);
        cache.acts.push([i, f, o, g]);
        cache.cells.push(c.clone());
        cache.cell_tanh.push(tc);
        cache.hidden.push(h.clone());
        h_prev = h;
        c_prev = c;
    }

    Ok((hidden_seq, cache))
}

pub struct LstmGrads<R: Real> {
    pub gates: [GateParams<R>; GATE_COUNT],
}

/// Backpropagation through time over the whole window.
pub fn lstm_backward<R: Real>(
    params: &LstmParams<R>,
    cache: &LstmCache<R>,
    grad_hidden_seq: &[R],
) -> Result<(Vec<R>, LstmGrads<R>)> {
    let t_len = params.window_len;
    let in_dim = params.input_dim;
    let hid = params.hidden_dim;
    if grad_hidden_seq.len() != t_len * hid {
        return Err(NnError::ShapeMismatch {
            layer: "lstm backward".into(),
            expected: format!("{} values", t_len * hid),
            got: format!("{} values", grad_hidden_seq.len()),
        });
    }

    let mut grads = LstmGrads {
        gates: std::array::from_fn(|_| GateParams {
            w: vec![R::ZERO; in_dim * hid],
            u: vec![R::ZERO; hid * hid],
            b: vec![R::ZERO; hid],
        }),
    };
    let mut grad_window = vec![R::ZERO; t_len * in_dim];
    let mut dh_next = vec![R::ZERO; hid];
    let mut dc_next = vec![R::ZERO; hid];

    for t in (0..t_len).rev() {
        let [i, f, o, g] = &cache.acts[t];
        let tc = &cache.cell_tanh[t];
        let x = &cache.window[t * in_dim..(t + 1) * in_dim];

        let mut dpre: [Vec<R>; GATE_COUNT] = std::array::from_fn(|_| vec![R::ZERO; hid]);
        for j in 0..hid {
            let dh = grad_hidden_seq[t * hid + j] + dh_next[j];
            let do_ = dh * tc[j];
            let dtc = dh * o[j];
            let dc = dtc * (R::ONE - tc[j] * tc[j]) + dc_next[j];
            let c_prev = if t == 0 { R::ZERO } else { cache.cells[t - 1][j] };

            let di = dc * g[j];
            let df = dc * c_prev;
            let dg = dc * i[j];
            dc_next[j] = dc * f[j];

            dpre[Gate::Input as usize][j] = di * i[j] * (R::ONE - i[j]);
            dpre[Gate::Forget as usize][j] = df * f[j] * (R::ONE - f[j]);
            dpre[Gate::Output as usize][j] = do_ * o[j] * (R::ONE - o[j]);
            dpre[Gate::Candidate as usize][j] = dg * (R::ONE - g[j] * g[j]);
        }

        let h_prev: &[R] = if t == 0 { &[] } else { &cache.hidden[t - 1] };
        let dx = &mut grad_window[t * in_dim..(t + 1) * in_dim];
        for j in dh_next.iter_mut() {
            *j = R::ZERO;
        }
        for gate in 0..GATE_COUNT {
            // dW += x^T dpre ; dU += h_prev^T dpre ; db += dpre
            R::gemm_acc(in_dim, 1, hid, x, false, &dpre[gate], false, &mut grads.gates[gate].w);
            if t > 0 {
                R::gemm_acc(hid, 1, hid, h_prev, false, &dpre[gate], false, &mut grads.gates[gate].u);
            }
            for j in 0..hid {
                grads.gates[gate].b[j] += dpre[gate][j];
            }
            // dx += dpre W^T ; dh_prev += dpre U^T
            R::gemm_acc(1, hid, in_dim, &dpre[gate], false, &params.gates[gate].w, true, dx);
            R::gemm_acc(1, hid, hid, &dpre[gate], false, &params.gates[gate].u, true, &mut dh_next);
        }
    }

    Ok((grad_window, grads))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_fix_hidden_at_origin() {
        // gates sit at sigmoid(0)=0.5, candidate at tanh(0)=0, so the cell
        // never leaves zero and neither does the hidden state.
        let params = LstmParams::<f64>::zeros(56, 128, 20);
        let window = vec![0.25f64; 20 * 56];
        let (hidden, _) = lstm_forward(&params, &window).unwrap();
        assert_eq!(hidden.len(), 20 * 128);
        assert!(hidden.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hidden_sequence_dims_match_window_and_hidden_size() {
        let mut rng = rand::SeedableRng::seed_from_u64(11);
        let params = LstmParams::<f32>::init(56, 128, 20, &mut rng);
        let window = vec![1.0f32 / 56.0; 20 * 56];
        let (hidden, _) = lstm_forward(&params, &window).unwrap();
        assert_eq!(hidden.len(), 20 * 128);
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_grads() {
        let mut rng = rand::SeedableRng::seed_from_u64(3);
        let params = LstmParams::<f64>::init(4, 5, 3, &mut rng);
        let window: Vec<f64> = (0..12).map(|i| (i as f64 * 0.31).sin()).collect();
        let (_, cache) = lstm_forward(&params, &window).unwrap();
        let (grad_window, grads) = lstm_backward(&params, &cache, &vec![0.0; 15]).unwrap();
        assert!(grad_window.iter().all(|&v| v == 0.0));
        for gate in &grads.gates {
            assert!(gate.w.iter().all(|&v| v == 0.0));
            assert!(gate.u.iter().all(|&v| v == 0.0));
            assert!(gate.b.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn grad_window_dims_equal_window_dims() {
        let mut rng = rand::SeedableRng::seed_from_u64(4);
        let params = LstmParams::<f64>::init(4, 5, 3, &mut rng);
        let window: Vec<f64> = (0..12).map(|i| (i as f64 * 0.17).cos()).collect();
        let (hidden, cache) = lstm_forward(&params, &window).unwrap();
        let (grad_window, _) = lstm_backward(&params, &cache, &hidden).unwrap();
        assert_eq!(grad_window.len(), window.len());
    }

    #[test]
    fn wrong_window_length_rejected() {
        let params = LstmParams::<f32>::zeros(4, 5, 3);
        assert!(lstm_forward(&params, &vec![0.0; 11]).is_err());
    }
}
