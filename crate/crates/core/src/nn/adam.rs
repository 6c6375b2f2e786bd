use crate::error::{Error, Result};

/// Moment estimates and hyper-parameters of the Adam optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub const DEFAULT_LR: f64 = 1e-4;

    pub fn new(param_count: usize, lr: f64) -> Self {
        Self::with_hyper(param_count, lr, 0.9, 0.999, 1e-8)
    }

    pub fn with_hyper(param_count: usize, lr: f64, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Self {
            first_moment: vec![0.0; param_count],
            second_moment: vec![0.0; param_count],
            step_count: 0,
            lr,
            beta1,
            beta2,
            epsilon,
        }
    }

    fn validate(&self, params: usize) -> Result<()> {
        if !(0.0 < self.beta1 && self.beta1 < 1.0 && 0.0 < self.beta2 && self.beta2 < 1.0) {
            return Err(Error::Config("Adam betas must lie in (0, 1)".into()));
        }
        if self.first_moment.len() != params || self.second_moment.len() != params {
            return Err(Error::Dimension(format!(
                "Adam moments sized {} for {params} parameters",
                self.first_moment.len()
            )));
        }
        Ok(())
    }
}

/// One bias-corrected Adam step, in place. Gradients are checked for
/// finiteness before anything is modified.
pub fn adam_update(params: &mut [f64], grads: &[f64], state: &mut AdamState) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::Dimension(format!(
            "{} parameters but {} gradients",
            params.len(),
            grads.len()
        )));
    }
    state.validate(params.len())?;
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::Numeric(format!(
            "non-finite gradient at parameter {i}"
        )));
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    let (b1, b2) = (state.beta1, state.beta2);
    for (((p, &g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(state.first_moment.iter_mut())
        .zip(state.second_moment.iter_mut())
    {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= state.lr * m_hat / (v_hat.sqrt() + state.epsilon);
    }
    Ok(())
}

/// Rescales `grads` so their global L2 norm is at most `max_norm`; returns the
/// norm before clipping.
pub fn clip_global_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm.is_finite() {
        let scale = max_norm / norm;
        grads.iter_mut().for_each(|g| *g *= scale);
    }
    norm
}
