use serde::{Deserialize, Serialize};

use super::head::HeadParams;
use super::{Result, TrainerError};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Anything exposing its parameters as an ordered list of flat buffers.
pub trait ParamSet {
    fn tensors(&self) -> Vec<&[f64]>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;
}

impl ParamSet for HeadParams {
    fn tensors(&self) -> Vec<&[f64]> {
        HeadParams::tensors(self)
    }
    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        HeadParams::tensors_mut(self)
    }
}

impl ParamSet for Vec<f64> {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![self.as_slice()]
    }
    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.as_mut_slice()]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new<P: ParamSet + ?Sized>(params: &P) -> Self {
        let shapes: Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
        Self {
            t: 0,
            beta1: BETA1,
            beta2: BETA2,
            epsilon: EPSILON,
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn first_moments(&self) -> &[Vec<f64>] {
        &self.m
    }

    pub fn second_moments(&self) -> &[Vec<f64>] {
        &self.v
    }
}

/// One Adam step with bias correction. Weight decay is decoupled and applied
/// first: `p ← p·(1 − lr·wd)`, then `p ← p − lr·m̂/(√v̂ + ε)`.
pub fn adam_step<P: ParamSet + ?Sized>(
    params: &mut P,
    grads: &P,
    state: &mut AdamState,
    lr: f64,
    wd: f64,
) -> Result<()> {
    let gs = grads.tensors();
    let mut ps = params.tensors_mut();
    let aligned = ps.len() == gs.len()
        && ps.len() == state.m.len()
        && ps
            .iter()
            .zip(&gs)
            .zip(&state.m)
            .all(|((p, g), m)| p.len() == g.len() && p.len() == m.len());
    if !aligned {
        return Err(TrainerError::Shape(
            "parameters, gradients and optimizer state differ in shape".into(),
        ));
    }
    state.t += 1;
    let bc1 = 1.0 - state.beta1.powi(state.t as i32);
    let bc2 = 1.0 - state.beta2.powi(state.t as i32);
    let decay = 1.0 - lr * wd;
    for (((p, g), m), v) in ps.iter_mut().zip(&gs).zip(&mut state.m).zip(&mut state.v) {
        for i in 0..p.len() {
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            p[i] = p[i] * decay - lr * m_hat / (v_hat.sqrt() + state.epsilon);
        }
    }
    Ok(())
}
