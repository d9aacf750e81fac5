use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// L2 coefficient added to the gradient before the moment updates.
    pub weight_decay: f64,
}

impl AdamConfig {
    pub fn new(learning_rate: f64, weight_decay: f64) -> Self {
        AdamConfig {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && self.learning_rate.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0
            && self.weight_decay >= 0.0
            && self.weight_decay.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid Adam settings {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
    step_count: u64,
}

impl AdamState {
    /// One moment buffer per parameter tensor, sized by `shapes`.
    pub fn new(config: AdamConfig, shapes: &[usize]) -> Result<Self> {
        config.validate()?;
        Ok(AdamState {
            config,
            first_moment: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            second_moment: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            step_count: 0,
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn first_moment(&self) -> &[Vec<f64>] {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &[Vec<f64>] {
        &self.second_moment
    }

    /// Applies one bias-corrected Adam update in place. A non-finite gradient
    /// leaves both the parameters and the state untouched.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        if params.len() != self.first_moment.len() || grads.len() != params.len() {
            return Err(Error::Dimension {
                context: "adam_step tensors",
                expected: self.first_moment.len(),
                actual: params.len().min(grads.len()),
            });
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.first_moment) {
            if p.len() != m.len() || g.len() != m.len() {
                return Err(Error::Dimension {
                    context: "adam_step tensor length",
                    expected: m.len(),
                    actual: if p.len() != m.len() { p.len() } else { g.len() },
                });
            }
        }
        if grads.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
            return Err(Error::Diverged("non-finite gradient".into()));
        }

        let c = self.config;
        self.step_count += 1;
        let t = self.step_count as i32;
        let bias1 = 1.0 - c.beta1.powi(t);
        let bias2 = 1.0 - c.beta2.powi(t);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
        {
            for i in 0..p.len() {
                let gi = g[i] + c.weight_decay * p[i];
                m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * gi;
                v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * gi * gi;
                let m_hat = m[i] / bias1;
                let v_hat = v[i] / bias2;
                p[i] -= c.learning_rate * m_hat / (v_hat.sqrt() + c.epsilon);
            }
        }
        Ok(())
    }
}

pub fn adam_step(params: &mut [&mut [f64]], grads: &[&[f64]], state: &mut AdamState) -> Result<()> {
    state.step(params, grads)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_without_decay_is_a_no_op() {
        let mut state = AdamState::new(AdamConfig::new(0.01, 0.0), &[3]).unwrap();
        let mut p = vec![1.0, -2.0, 0.5];
        let g = vec![0.0; 3];
        for _ in 0..5 {
            state.step(&mut [&mut p], &[&g]).unwrap();
        }
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
        assert_eq!(state.step_count(), 5);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // m̂ = 1, v̂ = 1, so the step is lr / (1 + ε).
        let mut state = AdamState::new(AdamConfig::new(0.001, 0.0), &[1]).unwrap();
        let mut p = vec![0.0];
        state.step(&mut [&mut p], &[&[1.0]]).unwrap();
        let expected = -0.001 / (1.0 + 1e-8);
        assert!((p[0] - expected).abs() < 1e-18);
    }

    #[test]
    fn non_finite_gradient_is_rejected_without_mutation() {
        let mut state = AdamState::new(AdamConfig::new(0.01, 0.0), &[2]).unwrap();
        let mut p = vec![1.0, 1.0];
        let err = state.step(&mut [&mut p], &[&[f64::NAN, 0.0]]).unwrap_err();
        assert!(matches!(err, Error::Diverged(_)));
        assert_eq!(p, vec![1.0, 1.0]);
        assert_eq!(state.step_count(), 0);
    }

    #[test]
    fn shape_mismatch() {
        let mut state = AdamState::new(AdamConfig::new(0.01, 0.0), &[2]).unwrap();
        let mut p = vec![1.0];
        assert!(state.step(&mut [&mut p], &[&[0.0]]).is_err());
    }

    #[test]
    fn invalid_config() {
        assert!(AdamState::new(AdamConfig::new(0.0, 0.0), &[1]).is_err());
        assert!(AdamState::new(AdamConfig::new(0.1, -1.0), &[1]).is_err());
    }
}
