//! Adam optimizer, one independent state per parameter block.

/// Adam moment accumulators for one parameter block.
///
/// Defaults: beta1 0.9, beta2 0.999, eps 1e-8, learning rate 0.01. The update
/// uses explicit bias correction: `param -= lr · m̂ / (√v̂ + eps)`.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(len: usize, lr: f64) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// Apply one Adam step in place; panics if the block shapes disagree.
    pub fn step(&mut self, param: &mut [f64], grad: &[f64]) {
        assert_eq!(
            param.len(),
            self.m.len(),
            "adam state length {} does not match parameter block length {}",
            self.m.len(),
            param.len()
        );
        assert_eq!(
            grad.len(),
            param.len(),
            "gradient block length {} does not match parameter block length {}",
            grad.len(),
            param.len()
        );
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..param.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            param[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut state = AdamState::new(3, 0.01);
        let mut param = vec![1.0, -2.0, 0.5];
        state.step(&mut param, &[0.0, 0.0, 0.0]);
        assert_eq!(param, vec![1.0, -2.0, 0.5]);
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn constant_gradient_update_magnitude_approaches_lr() {
        // With a constant gradient m̂ -> g and v̂ -> g², so the per-step update
        // tends to lr in magnitude.
        let lr = 0.01;
        let mut state = AdamState::new(1, lr);
        let mut param = vec![0.0];
        let mut prev = param[0];
        let mut last_update = 0.0;
        for _ in 0..10_000 {
            state.step(&mut param, &[3.7]);
            last_update = (param[0] - prev).abs();
            prev = param[0];
        }
        assert!(
            (last_update - lr).abs() / lr < 0.01,
            "update magnitude {last_update} not within 1% of lr"
        );
    }

    #[test]
    fn identical_blocks_evolve_identically() {
        let mut a = AdamState::new(2, 0.01);
        let mut b = AdamState::new(2, 0.01);
        let mut pa = vec![0.3, -0.4];
        let mut pb = vec![0.3, -0.4];
        for k in 0..50 {
            let g = [0.1 * (k as f64 + 1.0), -0.05];
            a.step(&mut pa, &g);
            b.step(&mut pb, &g);
        }
        assert_eq!(pa, pb);
    }

    #[test]
    #[should_panic(expected = "does not match parameter block length")]
    fn shape_mismatch_panics() {
        let mut state = AdamState::new(2, 0.01);
        let mut param = vec![0.0, 0.0, 0.0];
        state.step(&mut param, &[1.0, 1.0, 1.0]);
    }
}
