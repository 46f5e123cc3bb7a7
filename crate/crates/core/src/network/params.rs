use serde::{Deserialize, Serialize};

/// Optimizer grouping of parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    Backbone,
    Neck,
    Head,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub group: Group,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Every trainable tensor of a network, in a fixed order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Parameters {
    pub tensors: Vec<Tensor>,
}

impl Parameters {
    pub(crate) fn push(&mut self, name: String, shape: Vec<usize>, group: Group, data: Vec<f64>) -> usize {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        self.tensors.push(Tensor {
            name,
            shape,
            group,
            data,
        });
        self.tensors.len() - 1
    }

    pub fn count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    /// Rounds every value to the nearest `f32`, the checkpoint storage type.
    pub fn round_to_f32(&mut self) {
        for t in &mut self.tensors {
            t.data.iter_mut().for_each(|v| *v = *v as f32 as f64);
        }
    }

    pub fn zeros_like(&self) -> Gradients {
        Gradients {
            tensors: self.tensors.iter().map(|t| vec![0.0; t.len()]).collect(),
        }
    }
}

/// Gradients aligned tensor-by-tensor with [`Parameters`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for t in &mut self.tensors {
            t.iter_mut().for_each(|v| *v *= factor);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.tensors.iter().all(|t| t.iter().all(|&v| v == 0.0))
    }

    pub fn has_non_finite(&self) -> bool {
        self.tensors.iter().any(|t| t.iter().any(|v| !v.is_finite()))
    }

    pub fn l2_norm(&self) -> f64 {
        self.tensors.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }
}
