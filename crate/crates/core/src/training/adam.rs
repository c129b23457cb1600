use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

/// Bias-corrected Adam moments over a flat parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }

    /// One update of `params` in place. A non-finite gradient leaves both
    /// the parameters and the moments untouched and returns a numerical error.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], hyper: &AdamHyper) -> Result<()> {
        ensure!(
            params.len() == self.m.len() && grads.len() == self.m.len(),
            Argument,
            "adam state has {} entries, got {} parameters and {} gradients",
            self.m.len(),
            params.len(),
            grads.len()
        );
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(crate::Error::Numerical(format!(
                "non-finite gradient at parameter {i} (step {})",
                self.step + 1
            )));
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - hyper.beta1.powi(t);
        let c2 = 1.0 - hyper.beta2.powi(t);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = hyper.beta1 * self.m[i] + (1.0 - hyper.beta1) * g;
            self.v[i] = hyper.beta2 * self.v[i] + (1.0 - hyper.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= hyper.learning_rate * m_hat / (v_hat.sqrt() + hyper.epsilon);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = vec![0.3, -1.2];
        let mut s = AdamState::new(2);
        s.step(&mut p, &[0.0, 0.0], &AdamHyper::default()).unwrap();
        assert_eq!(p, vec![0.3, -1.2]);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = vec![0.0];
        let mut s = AdamState::new(1);
        s.step(&mut p, &[1.0], &AdamHyper::default()).unwrap();
        // m̂ = v̂ = 1 → Δ = lr / (1 + ε)
        assert!((p[0] + 1e-3 / (1.0 + 1e-8)).abs() < 1e-18);
    }

    #[test]
    fn non_finite_gradient_aborts_without_update() {
        let mut p = vec![1.0, 2.0];
        let mut s = AdamState::new(2);
        let err = s.step(&mut p, &[0.5, f64::NAN], &AdamHyper::default()).unwrap_err();
        assert!(matches!(err, crate::Error::Numerical(_)));
        assert_eq!(p, vec![1.0, 2.0]);
        assert_eq!(s.step, 0);
    }
}
