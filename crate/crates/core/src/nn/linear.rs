use rand::Rng;

use super::param::{ParamTensor, Parameterized};
use crate::error::{check_len, Result};

/// Affine map `W·x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: ParamTensor,
    pub bias: ParamTensor,
}

impl Linear {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            weight: ParamTensor::zeros(output, input),
            bias: ParamTensor::zeros(output, 1),
        }
    }

    /// Uniform `±1/sqrt(input)` initialization for weights and biases.
    pub fn new<R: Rng + ?Sized>(input: usize, output: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (input.max(1) as f64).sqrt();
        let mut layer = Self::zeros(input, output);
        for w in layer.weight.values.iter_mut() {
            *w = rng.random_range(-bound..bound);
        }
        for b in layer.bias.values.iter_mut() {
            *b = rng.random_range(-bound..bound);
        }
        layer
    }

    pub fn input_dim(&self) -> usize {
        self.weight.shape().1
    }

    pub fn output_dim(&self) -> usize {
        self.weight.shape().0
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("affine input", self.input_dim(), x.len())?;
        let mut out = vec![0.0; self.output_dim()];
        self.forward_into(x, &mut out);
        Ok(out)
    }

    pub(crate) fn forward_into(&self, x: &[f64], out: &mut [f64]) {
        let n_in = self.input_dim();
        debug_assert_eq!(x.len(), n_in);
        for (o, (row, b)) in out
            .iter_mut()
            .zip(self.weight.values.chunks_exact(n_in).zip(&self.bias.values))
        {
            *o = b + row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>();
        }
    }

    /// Accumulates parameter gradients for `dout` and adds the input gradient into `dx`.
    pub fn backward(&mut self, x: &[f64], dout: &[f64], dx: Option<&mut [f64]>) {
        let n_in = self.input_dim();
        for ((grow, gb), &d) in self
            .weight
            .grads
            .chunks_exact_mut(n_in)
            .zip(self.bias.grads.iter_mut())
            .zip(dout)
        {
            if d == 0.0 {
                continue;
            }
            *gb += d;
            for (g, xi) in grow.iter_mut().zip(x) {
                *g += d * xi;
            }
        }
        if let Some(dx) = dx {
            for (row, &d) in self.weight.values.chunks_exact(n_in).zip(dout) {
                if d == 0.0 {
                    continue;
                }
                for (dxi, w) in dx.iter_mut().zip(row) {
                    *dxi += d * w;
                }
            }
        }
    }
}

impl Parameterized for Linear {
    fn visit_params(&self, f: &mut dyn FnMut(&ParamTensor)) {
        f(&self.weight);
        f(&self.bias);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut ParamTensor)) {
        f(&mut self.weight);
        f(&mut self.bias);
    }
}

/// Free-function form of [`Linear::forward`].
pub fn affine_forward(layer: &Linear, x: &[f64]) -> Result<Vec<f64>> {
    layer.forward(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_and_zero_weight_cases() {
        let mut id = Linear::zeros(2, 2);
        id.weight.values = vec![1.0, 0.0, 0.0, 1.0];
        assert_eq!(id.forward(&[1.0, 2.0]).unwrap(), vec![1.0, 2.0]);

        let mut z = Linear::zeros(3, 1);
        z.bias.values = vec![3.0];
        assert_eq!(z.forward(&[7.0, -1.0, 0.5]).unwrap(), vec![3.0]);
    }

    #[test]
    fn matches_naive_matrix_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let layer = Linear::new(5, 4, &mut rng);
        let x: Vec<f64> = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
        let got = layer.forward(&x).unwrap();
        // triple loop over (row, col, k) with a 1-column right operand
        let (rows, cols) = layer.weight.shape();
        let mut want = vec![0.0; rows];
        for (r, w) in want.iter_mut().enumerate() {
            for k in 0..1 {
                let mut acc = 0.0;
                for c in 0..cols {
                    acc += layer.weight.values[r * cols + c] * x[c + k];
                }
                *w = acc + layer.bias.values[r];
            }
        }
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let layer = Linear::zeros(3, 2);
        assert!(layer.forward(&[1.0]).is_err());
    }
}
