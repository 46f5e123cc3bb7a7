use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{Gradients, Group, Parameters};

#[derive(Debug, Error, PartialEq)]
pub enum AdamError {
    #[error("non-finite gradient in {tensor} at step {step}")]
    NonFinite { step: u64, tensor: String },
    #[error("gradient shapes do not match parameters")]
    ShapeMismatch,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamSettings {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamSettings {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Decoupled weight decay per parameter group.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct WeightDecay {
    pub backbone: f64,
    pub neck: f64,
    pub head: f64,
}

impl WeightDecay {
    /// Decay on the fully connected head only.
    pub fn head_only(head: f64) -> Self {
        Self {
            head,
            ..Self::default()
        }
    }

    fn for_group(&self, g: Group) -> f64 {
        match g {
            Group::Backbone => self.backbone,
            Group::Neck => self.neck,
            Group::Head => self.head,
        }
    }
}

/// First and second moments plus the step counter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(params: &Parameters) -> Self {
        Self {
            step: 0,
            m: params.tensors.iter().map(|t| vec![0.0; t.len()]).collect(),
            v: params.tensors.iter().map(|t| vec![0.0; t.len()]).collect(),
        }
    }
}

/// One bias-corrected Adam update followed by decoupled decay
/// `p -= lr · wd · p`. Updated values are rounded to `f32`, the storage
/// precision of parameters.
pub fn adam_step(
    params: &mut Parameters,
    grads: &Gradients,
    state: &mut AdamState,
    lr: f64,
    settings: &AdamSettings,
    decay: &WeightDecay,
) -> Result<(), AdamError> {
    if grads.tensors.len() != params.tensors.len()
        || grads.tensors.iter().zip(&params.tensors).any(|(g, p)| g.len() != p.len())
    {
        return Err(AdamError::ShapeMismatch);
    }
    let step = state.step + 1;
    if let Some((i, _)) = grads.tensors.iter().enumerate().find(|(_, g)| g.iter().any(|v| !v.is_finite())) {
        return Err(AdamError::NonFinite {
            step,
            tensor: params.tensors[i].name.clone(),
        });
    }
    state.step = step;
    let AdamSettings { beta1, beta2, eps } = *settings;
    let c1 = 1.0 - beta1.powi(step as i32);
    let c2 = 1.0 - beta2.powi(step as i32);
    for (i, tensor) in params.tensors.iter_mut().enumerate() {
        let wd = decay.for_group(tensor.group);
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        for (j, p) in tensor.data.iter_mut().enumerate() {
            let g = grads.tensors[i][j];
            m[j] = beta1 * m[j] + (1.0 - beta1) * g;
            v[j] = beta2 * v[j] + (1.0 - beta2) * g * g;
            let update = lr * (m[j] / c1) / ((v[j] / c2).sqrt() + eps);
            let decayed = *p - lr * wd * *p;
            *p = (decayed - update) as f32 as f64;
        }
    }
    Ok(())
}
