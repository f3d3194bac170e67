use serde::{Deserialize, Serialize};

/// Logistic sigmoid `1 / (1 + e^-x)`.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// In-place numerically stable softmax over one row.
pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

pub fn softmax(row: &[f64]) -> Vec<f64> {
    let mut out = row.to_vec();
    softmax_in_place(&mut out);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
    Sigmoid,
    Softmax,
    Tanh,
}

impl Activation {
    /// Applies the activation to one row of pre-activations.
    pub fn apply_row(self, row: &mut [f64]) {
        match self {
            Activation::Identity => {}
            Activation::Relu => row.iter_mut().for_each(|v| *v = v.max(0.0)),
            Activation::Sigmoid => row.iter_mut().for_each(|v| *v = sigmoid(*v)),
            Activation::Tanh => row.iter_mut().for_each(|v| *v = v.tanh()),
            Activation::Softmax => softmax_in_place(row),
        }
    }

    /// Maps an upstream gradient on the activation output to a gradient on
    /// the pre-activation, given the activation output `y` for the same row.
    pub fn backprop_row(self, y: &[f64], dy: &[f64], out: &mut [f64]) {
        match self {
            Activation::Identity => out.copy_from_slice(dy),
            Activation::Relu => {
                for ((o, &yv), &g) in out.iter_mut().zip(y).zip(dy) {
                    *o = if yv > 0.0 { g } else { 0.0 };
                }
            }
            Activation::Sigmoid => {
                for ((o, &yv), &g) in out.iter_mut().zip(y).zip(dy) {
                    *o = g * yv * (1.0 - yv);
                }
            }
            Activation::Tanh => {
                for ((o, &yv), &g) in out.iter_mut().zip(y).zip(dy) {
                    *o = g * (1.0 - yv * yv);
                }
            }
            Activation::Softmax => {
                let dot: f64 = y.iter().zip(dy).map(|(a, b)| a * b).sum();
                for ((o, &yv), &g) in out.iter_mut().zip(y).zip(dy) {
                    *o = yv * (g - dot);
                }
            }
        }
    }
}
