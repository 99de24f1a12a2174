/// A dense parameter block with an accumulated gradient of the same shape.
///
/// Matrices are stored row-major as `(rows, cols)`; vectors use `cols == 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamTensor {
    rows: usize,
    cols: usize,
    pub values: Vec<f64>,
    pub grads: Vec<f64>,
}

impl ParamTensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            values: vec![0.0; rows * cols],
            grads: vec![0.0; rows * cols],
        }
    }

    pub fn from_values(rows: usize, cols: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), rows * cols, "parameter shape mismatch");
        Self {
            rows,
            cols,
            grads: vec![0.0; values.len()],
            values,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grads.iter_mut().for_each(|g| *g = 0.0);
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Anything that owns parameter tensors.
///
/// Visiting order must be stable: optimizers and checkpoints rely on it.
pub trait Parameterized {
    fn visit_params(&self, f: &mut dyn FnMut(&ParamTensor));
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut ParamTensor));

    fn zero_grad(&mut self) {
        self.visit_params_mut(&mut |p| p.zero_grad());
    }

    fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit_params(&mut |p| n += p.len());
        n
    }

    fn flat_values(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.visit_params(&mut |p| out.extend_from_slice(&p.values));
        out
    }

    fn flat_grads(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.visit_params(&mut |p| out.extend_from_slice(&p.grads));
        out
    }

    fn set_flat_values(&mut self, flat: &[f64]) {
        let mut offset = 0;
        self.visit_params_mut(&mut |p| {
            let n = p.len();
            p.values.copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        });
        assert_eq!(offset, flat.len(), "flat parameter length mismatch");
    }

    fn shapes(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        self.visit_params(&mut |p| out.push(p.shape()));
        out
    }
}
