//! Bias-corrected Adam with per-tensor state.

use crate::error::TrainError;
use std::collections::BTreeMap;

#[derive(Clone, Debug)]
pub struct AdamState {
    pub m: Vec<f32>,
    pub v: Vec<f32>,
}

impl AdamState {
    pub fn zeros(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Optimizer state for the two update groups: encoder/generator/recognizer
/// jointly, discriminator separately. `step_*` counts applied updates per
/// group (Adam's t).
#[derive(Clone, Debug, Default)]
pub struct AdamGroups {
    pub states: BTreeMap<String, AdamState>,
    pub step_egr: u64,
    pub step_d: u64,
}

/// One bias-corrected update. `t` is the 1-based step count for this group.
/// Rejects non-finite gradients without touching the parameters.
pub fn adam_step(
    param: &mut [f32],
    grad: &[f32],
    state: &mut AdamState,
    t: u64,
    lr: f64,
    hyper: &AdamHyper,
) -> Result<(), TrainError> {
    assert_eq!(param.len(), grad.len());
    assert_eq!(param.len(), state.m.len());
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(TrainError::NonFiniteGradient {
            tensor: String::new(),
            iter: t,
        });
    }
    let b1 = hyper.beta1 as f32;
    let b2 = hyper.beta2 as f32;
    let bc1 = 1.0 - (hyper.beta1).powi(t as i32);
    let bc2 = 1.0 - (hyper.beta2).powi(t as i32);
    let lr = lr as f32;
    let eps = hyper.eps as f32;
    for ((p, &g), (m, v)) in param
        .iter_mut()
        .zip(grad)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let mhat = *m / bc1 as f32;
        let vhat = *v / bc2 as f32;
        *p -= lr * mhat / (vhat.sqrt() + eps);
    }
    Ok(())
}
