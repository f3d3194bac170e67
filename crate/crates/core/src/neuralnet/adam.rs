use serde::{Deserialize, Serialize};

use super::params::ParamSet;
use crate::error::{shape_err, Error, Result};

/// First/second moment estimates for Adam, flattened in [`ParamSet`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn new(num_params: usize) -> Self {
        Self::with_betas(num_params, 0.9, 0.999, 1e-8)
    }

    pub fn with_betas(num_params: usize, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            beta1,
            beta2,
            eps,
            step: 0,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
        }
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step<P: ParamSet>(params: &mut P, grads: &P, state: &mut AdamState, lr: f64) -> Result<()> {
    if !(lr > 0.0) || !lr.is_finite() {
        return Err(Error::Config(format!("learning rate must be > 0, got {lr}")));
    }
    let g = grads.flatten();
    if g.len() != state.m.len() || g.len() != params.num_params() {
        return Err(shape_err("adam_step", state.m.len(), g.len()));
    }
    state.step += 1;
    let (b1, b2) = (state.beta1, state.beta2);
    let bc1 = 1.0 - b1.powi(state.step as i32);
    let bc2 = 1.0 - b2.powi(state.step as i32);
    for ((m, v), &gi) in state.m.iter_mut().zip(state.v.iter_mut()).zip(&g) {
        *m = b1 * *m + (1.0 - b1) * gi;
        *v = b2 * *v + (1.0 - b2) * gi * gi;
    }
    let (m, v, eps) = (&state.m, &state.v, state.eps);
    let mut off = 0;
    params.visit_mut(&mut |d| {
        for (j, x) in d.iter_mut().enumerate() {
            let m_hat = m[off + j] / bc1;
            let v_hat = v[off + j] / bc2;
            *x -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        off += d.len();
    });
    Ok(())
}
