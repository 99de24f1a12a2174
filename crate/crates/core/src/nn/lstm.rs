use rand::Rng;

use super::linear::Linear;
use super::param::{ParamTensor, Parameterized};
use crate::error::{check_len, Result};

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Hidden and cell vectors of an LSTM.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }
}

/// Gated recurrent cell with input, forget, candidate and output gates.
///
/// Gate pre-activations are `input·x + b + recurrent·h`, stacked in the
/// order `[i, f, g, o]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCell {
    pub input: Linear,
    pub recurrent: ParamTensor,
    hidden: usize,
}

/// Everything the backward pass needs from one step.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
}

impl LstmCell {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            input: Linear::zeros(input, 4 * hidden),
            recurrent: ParamTensor::zeros(4 * hidden, hidden),
            hidden,
        }
    }

    /// Uniform `±1/sqrt(hidden)` weights; the forget-gate bias starts at 1.
    pub fn new<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (hidden.max(1) as f64).sqrt();
        let mut cell = Self::zeros(input, hidden);
        for w in cell
            .input
            .weight
            .values
            .iter_mut()
            .chain(cell.recurrent.values.iter_mut())
        {
            *w = rng.random_range(-bound..bound);
        }
        for b in &mut cell.input.bias.values[hidden..2 * hidden] {
            *b = 1.0;
        }
        cell
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden
    }

    pub fn input_size(&self) -> usize {
        self.input.input_dim()
    }

    pub fn step(&self, x: &[f64], state: &LstmState) -> Result<(LstmState, LstmCache)> {
        check_len("recurrent input", self.input_size(), x.len())?;
        check_len("recurrent hidden", self.hidden, state.h.len())?;
        check_len("recurrent cell", self.hidden, state.c.len())?;
        Ok(self.step_unchecked(x, state))
    }

    pub(crate) fn step_unchecked(&self, x: &[f64], state: &LstmState) -> (LstmState, LstmCache) {
        let hs = self.hidden;
        let mut gates = vec![0.0; 4 * hs];
        self.input.forward_into(x, &mut gates);
        for (g, row) in gates.iter_mut().zip(self.recurrent.values.chunks_exact(hs)) {
            *g += row.iter().zip(&state.h).map(|(w, h)| w * h).sum::<f64>();
        }
        for (k, g) in gates.iter_mut().enumerate() {
            *g = if (2 * hs..3 * hs).contains(&k) {
                g.tanh()
            } else {
                sigmoid(*g)
            };
        }
        let mut c = vec![0.0; hs];
        let mut h = vec![0.0; hs];
        let mut tanh_c = vec![0.0; hs];
        for j in 0..hs {
            let (i, f, g, o) = (gates[j], gates[hs + j], gates[2 * hs + j], gates[3 * hs + j]);
            c[j] = f * state.c[j] + i * g;
            tanh_c[j] = c[j].tanh();
            h[j] = o * tanh_c[j];
        }
        let cache = LstmCache {
            x: x.to_vec(),
            h_prev: state.h.clone(),
            c_prev: state.c.clone(),
            gates,
            tanh_c,
        };
        (LstmState { h, c }, cache)
    }

    /// Backpropagates `(dh, dc)` at the step output; returns `(dx, dh_prev, dc_prev)`.
    pub fn backward(
        &mut self,
        cache: &LstmCache,
        dh: &[f64],
        dc: &[f64],
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let hs = self.hidden;
        let g = &cache.gates;
        let mut dpre = vec![0.0; 4 * hs];
        let mut dc_prev = vec![0.0; hs];
        for j in 0..hs {
            let (i, f, gg, o) = (g[j], g[hs + j], g[2 * hs + j], g[3 * hs + j]);
            let tc = cache.tanh_c[j];
            let dcj = dc[j] + dh[j] * o * (1.0 - tc * tc);
            let d_o = dh[j] * tc;
            let d_i = dcj * gg;
            let d_f = dcj * cache.c_prev[j];
            let d_g = dcj * i;
            dc_prev[j] = dcj * f;
            dpre[j] = d_i * i * (1.0 - i);
            dpre[hs + j] = d_f * f * (1.0 - f);
            dpre[2 * hs + j] = d_g * (1.0 - gg * gg);
            dpre[3 * hs + j] = d_o * o * (1.0 - o);
        }
        let mut dx = vec![0.0; cache.x.len()];
        self.input.backward(&cache.x, &dpre, Some(&mut dx));
        let mut dh_prev = vec![0.0; hs];
        for ((grow, wrow), &d) in self
            .recurrent
            .grads
            .chunks_exact_mut(hs)
            .zip(self.recurrent.values.chunks_exact(hs))
            .zip(&dpre)
        {
            if d == 0.0 {
                continue;
            }
            for j in 0..hs {
                grow[j] += d * cache.h_prev[j];
                dh_prev[j] += d * wrow[j];
            }
        }
        (dx, dh_prev, dc_prev)
    }
}

impl Parameterized for LstmCell {
    fn visit_params(&self, f: &mut dyn FnMut(&ParamTensor)) {
        self.input.visit_params(f);
        f(&self.recurrent);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut ParamTensor)) {
        self.input.visit_params_mut(f);
        f(&mut self.recurrent);
    }
}

/// Free-function form of [`LstmCell::step`] that drops the cache.
pub fn recurrent_step(cell: &LstmCell, x: &[f64], hidden: &LstmState) -> Result<LstmState> {
    cell.step(x, hidden).map(|(s, _)| s)
}
