use serde::{Deserialize, Serialize};

use super::ParamStore;
use crate::error::{Error, Result};

/// Moment estimates and hyperparameters for the Adam optimizer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl AdamState {
    /// Zero moments sized after `params`, with the usual β₁ = 0.9,
    /// β₂ = 0.999 and ε = 1e-7.
    pub fn new(params: &ParamStore, learning_rate: f64) -> Self {
        let zeros: Vec<Vec<f64>> = params.iter().map(|(_, _, t)| vec![0.0; t.len()]).collect();
        AdamState {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self, index: usize) -> &[f64] {
        &self.first[index]
    }

    pub fn second_moment(&self, index: usize) -> &[f64] {
        &self.second[index]
    }
}

/// One bias-corrected Adam update over every parameter in `params`.
/// Gradients are consumed: every parameter's buffer is cleared afterwards.
pub fn adam_step(params: &mut ParamStore, state: &mut AdamState) -> Result<()> {
    if state.first.len() != params.len() {
        return Err(Error::Config(format!(
            "optimizer state covers {} parameters, store has {}",
            state.first.len(),
            params.len()
        )));
    }
    for (id, name, t) in params.iter() {
        if t.grad().is_none() {
            return Err(Error::UninitializedGradient(name.to_string()));
        }
        if state.first[id.0].len() != t.len() {
            return Err(Error::Dimension {
                op: "adam_step",
                left: t.shape().to_vec(),
                right: vec![state.first[id.0].len()],
            });
        }
    }

    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    let lr = state.learning_rate;
    let eps = state.epsilon;

    for id in params.ids().collect::<Vec<_>>() {
        let tensor = params.get_mut(id);
        let grad = tensor.grad().expect("checked above").to_vec();
        let m = &mut state.first[id.0];
        let v = &mut state.second[id.0];
        for (i, w) in tensor.data_mut().iter_mut().enumerate() {
            let g = grad[i];
            m[i] = b1 * m[i] + (1.0 - b1) * g;
            v[i] = b2 * v[i] + (1.0 - b2) * g * g;
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            *w -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        tensor.clear_grad();
    }
    Ok(())
}
