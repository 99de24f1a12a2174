use rand::Rng;

use super::linear::Linear;
use super::param::{ParamTensor, Parameterized};
use crate::error::{check_len, Result};

/// Stack of affine layers with `tanh` between them and a linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

/// Layer inputs recorded during a forward pass; `inputs[0]` is the network input.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpCache {
    inputs: Vec<Vec<f64>>,
}

impl MlpCache {
    pub fn input(&self) -> &[f64] {
        &self.inputs[0]
    }
}

impl Mlp {
    /// `sizes = [input, hidden..., output]`.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs at least input and output sizes");
        let layers = sizes
            .windows(2)
            .map(|w| Linear::new(w[0], w[1], rng))
            .collect();
        Self { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(Linear::output_dim).unwrap_or(0)
    }

    pub fn output_layer_mut(&mut self) -> &mut Linear {
        self.layers.last_mut().expect("non-empty network")
    }

    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, MlpCache)> {
        check_len("mlp input", self.input_dim(), x.len())?;
        Ok(self.forward_unchecked(x))
    }

    pub(crate) fn forward_unchecked(&self, x: &[f64]) -> (Vec<f64>, MlpCache) {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut current = x.to_vec();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut out = vec![0.0; layer.output_dim()];
            layer.forward_into(&current, &mut out);
            if l < last {
                out.iter_mut().for_each(|v| *v = v.tanh());
            }
            inputs.push(current);
            current = out;
        }
        (current, MlpCache { inputs })
    }

    /// Forward pass without keeping intermediate activations.
    pub fn predict(&self, x: &[f64]) -> Vec<f64> {
        let last = self.layers.len() - 1;
        let mut current = x.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut out = vec![0.0; layer.output_dim()];
            layer.forward_into(&current, &mut out);
            if l < last {
                out.iter_mut().for_each(|v| *v = v.tanh());
            }
            current = out;
        }
        current
    }

    /// Accumulates parameter gradients and returns the gradient w.r.t. the input.
    pub fn backward(&mut self, cache: &MlpCache, dout: &[f64]) -> Vec<f64> {
        let mut delta = dout.to_vec();
        for l in (0..self.layers.len()).rev() {
            let input = &cache.inputs[l];
            let mut dx = vec![0.0; input.len()];
            self.layers[l].backward(input, &delta, Some(&mut dx));
            if l > 0 {
                // input to layer l is tanh of the previous pre-activation
                for (d, a) in dx.iter_mut().zip(input) {
                    *d *= 1.0 - a * a;
                }
            }
            delta = dx;
        }
        delta
    }
}

impl Parameterized for Mlp {
    fn visit_params(&self, f: &mut dyn FnMut(&ParamTensor)) {
        for layer in &self.layers {
            layer.visit_params(f);
        }
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut ParamTensor)) {
        for layer in &mut self.layers {
            layer.visit_params_mut(f);
        }
    }
}
