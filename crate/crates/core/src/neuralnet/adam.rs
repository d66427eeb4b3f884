//! Adam optimizer over a flat parameter vector.

use crate::error::{Error, Result};

/// Adam state: first/second moment estimates plus the step counter. One
/// state instance drives one model's flat parameter vector.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    /// Defaults: lr 1e-3, β1 0.9, β2 0.999, ε 1e-8.
    pub fn new(param_count: usize) -> Self {
        AdamState::with_learning_rate(param_count, 1e-3)
    }

    pub fn with_learning_rate(param_count: usize, learning_rate: f64) -> Self {
        AdamState {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One Adam update with bias correction. `blocks` maps flat offsets to
    /// named parameter groups so a non-finite gradient can be reported
    /// usefully.
    pub fn step(
        &mut self,
        params: &mut [f64],
        grads: &[f64],
        blocks: &[(String, usize)],
    ) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::DimensionMismatch {
                expected: self.m.len(),
                actual: params.len().max(grads.len()),
                context: "optimizer state vs parameter vector".into(),
            });
        }
        if let Some(bad) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::Training {
                epoch: 0,
                message: format!(
                    "non-finite gradient in parameter block '{}'",
                    block_name(blocks, bad)
                ),
            });
        }
        self.step += 1;
        let t = self.step as i32;
        let bias1 = 1.0 - self.beta1.powi(t);
        let bias2 = 1.0 - self.beta2.powi(t);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bias1;
            let v_hat = self.v[i] / bias2;
            params[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }
}

/// Name of the block containing flat parameter index `idx`.
pub fn block_name(blocks: &[(String, usize)], idx: usize) -> String {
    let mut offset = 0;
    for (name, len) in blocks {
        if idx < offset + len {
            return name.clone();
        }
        offset += len;
    }
    format!("parameter {idx}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_blocks() -> Vec<(String, usize)> {
        vec![("all".into(), 8)]
    }

    #[test]
    fn zero_gradients_leave_parameters_unchanged() {
        let mut state = AdamState::new(3);
        let mut params = vec![1.0, -2.0, 0.5];
        let before = params.clone();
        for _ in 0..10 {
            state
                .step(&mut params, &[0.0, 0.0, 0.0], &no_blocks())
                .unwrap();
        }
        assert_eq!(params, before);
        assert_eq!(state.step_count(), 10);
    }

    #[test]
    fn first_step_magnitude_is_learning_rate() {
        // With a constant unit gradient, bias correction makes the first
        // update exactly -lr * g/|g| (up to the epsilon in the denominator).
        let mut state = AdamState::new(1);
        let mut params = vec![0.0];
        state.step(&mut params, &[1.0], &no_blocks()).unwrap();
        assert!((params[0] + 1e-3).abs() < 1e-8, "got {}", params[0]);
    }

    #[test]
    fn descends_a_convex_quadratic() {
        // f(p) = (p - 3)^2, gradient 2(p - 3).
        let mut state = AdamState::with_learning_rate(1, 1e-2);
        let mut params = vec![10.0];
        let f = |p: f64| (p - 3.0) * (p - 3.0);
        let initial = f(params[0]);
        for _ in 0..100 {
            let g = 2.0 * (params[0] - 3.0);
            state.step(&mut params, &[g], &no_blocks()).unwrap();
        }
        assert!(f(params[0]) < initial);
    }

    #[test]
    fn non_finite_gradient_names_the_block() {
        let mut state = AdamState::new(4);
        let mut params = vec![0.0; 4];
        let blocks = vec![("layer0.weights".into(), 2), ("layer0.bias".into(), 2)];
        let err = state
            .step(&mut params, &[0.0, 0.0, f64::NAN, 0.0], &blocks)
            .unwrap_err();
        assert!(err.to_string().contains("layer0.bias"), "{err}");
    }
}
