use super::param::Parameterized;
use crate::error::{Error, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Whether an optimizer step changed the parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Applied,
    /// A non-finite gradient was found; parameters and moments were left alone.
    Skipped,
}

/// Adaptive-moment optimizer over the flattened parameters of one model.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    steps: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: BETA1,
            beta2: BETA2,
            eps: EPSILON,
            steps: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.steps
    }

    /// Applies one update from the gradients accumulated in `model`.
    ///
    /// Gradients are consumed: they are zeroed whether or not the step is applied.
    pub fn step<M: Parameterized + ?Sized>(&mut self, model: &mut M) -> Result<StepOutcome> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidConfig(format!("learning rate {} must be >= 0", self.lr)));
        }
        let mut finite = true;
        model.visit_params(&mut |p| finite &= p.grads.iter().all(|g| g.is_finite()));
        if !finite {
            log::warn!("non-finite gradient; skipping optimizer step");
            model.zero_grad();
            return Ok(StepOutcome::Skipped);
        }
        let n = model.param_count();
        if self.m.len() != n {
            self.m = vec![0.0; n];
            self.v = vec![0.0; n];
            self.steps = 0;
        }
        self.steps += 1;
        let t = self.steps as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, eps, lr) = (self.beta1, self.beta2, self.eps, self.lr);
        let (m, v) = (&mut self.m, &mut self.v);
        let mut offset = 0;
        model.visit_params_mut(&mut |p| {
            for (k, (w, g)) in p.values.iter_mut().zip(p.grads.iter_mut()).enumerate() {
                let i = offset + k;
                m[i] = b1 * m[i] + (1.0 - b1) * *g;
                v[i] = b2 * v[i] + (1.0 - b2) * *g * *g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                *w -= lr * m_hat / (v_hat.sqrt() + eps);
                *g = 0.0;
            }
            offset += p.len();
        });
        Ok(StepOutcome::Applied)
    }
}

/// Free-function form of [`Adam::step`].
pub fn adam_update<M: Parameterized + ?Sized>(model: &mut M, optimizer: &mut Adam) -> Result<StepOutcome> {
    optimizer.step(model)
}
