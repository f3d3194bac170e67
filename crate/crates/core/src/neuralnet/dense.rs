use serde::{Deserialize, Serialize};

use super::activation::Activation;
use super::params::{fill_uniform, qualify, ParamRng, ParamSet};
use super::tensor::{gemm, Op, Tensor2};
use crate::error::{shape_err, Result};

/// Fully-connected layer `act(W x + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseParams {
    pub w: Tensor2,
    pub b: Vec<f64>,
    pub activation: Activation,
}

impl DenseParams {
    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            w: Tensor2::zeros(out_dim, in_dim),
            b: vec![0.0; out_dim],
            activation,
        }
    }

    /// Uniform `±1/√in_dim` weights, zero bias.
    pub fn init(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut ParamRng) -> Self {
        let mut p = Self::zeros(in_dim, out_dim, activation);
        if in_dim > 0 {
            fill_uniform(p.w.as_mut_slice(), 1.0 / (in_dim as f64).sqrt(), rng);
        }
        p
    }

    pub fn in_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.w.rows()
    }
}

impl ParamSet for DenseParams {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(String, &[usize], &[f64])) {
        f(qualify(prefix, "w"), &[self.w.rows(), self.w.cols()], self.w.as_slice());
        f(qualify(prefix, "b"), &[self.b.len()], &self.b);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        f(self.w.as_mut_slice());
        f(&mut self.b);
    }
}

/// Batched forward: `x` is `B × in_dim`, output `B × out_dim`.
pub fn dense_forward_batch(x: &Tensor2, p: &DenseParams) -> Result<Tensor2> {
    if x.cols() != p.in_dim() {
        return Err(shape_err("dense_forward input", p.in_dim(), x.cols()));
    }
    let (batch, out) = (x.rows(), p.out_dim());
    let mut y = Tensor2::zeros(batch, out);
    gemm(batch, p.in_dim(), out, x.as_slice(), Op::N, p.w.as_slice(), Op::T, y.as_mut_slice(), false);
    for r in 0..batch {
        let row = y.row_mut(r);
        for (v, b) in row.iter_mut().zip(&p.b) {
            *v += b;
        }
        p.activation.apply_row(row);
    }
    Ok(y)
}

/// Batched backward. `y` is the forward output and `dy` the upstream gradient.
/// Returns parameter gradients (summed over the batch) and `dx`.
pub fn dense_backward_batch(
    x: &Tensor2,
    y: &Tensor2,
    dy: &Tensor2,
    p: &DenseParams,
) -> Result<(DenseParams, Tensor2)> {
    if dy.shape() != y.shape() || x.rows() != y.rows() || y.cols() != p.out_dim() {
        return Err(shape_err(
            "dense_backward",
            format!("{}x{}", x.rows(), p.out_dim()),
            format!("{}x{}", dy.rows(), dy.cols()),
        ));
    }
    let mut da = Tensor2::zeros(x.rows(), p.out_dim());
    for r in 0..x.rows() {
        p.activation.backprop_row(y.row(r), dy.row(r), da.row_mut(r));
    }
    dense_backward_preactivation(x, &da, p)
}

/// Backward from a gradient on the pre-activation `W x + b`.
pub fn dense_backward_preactivation(x: &Tensor2, da: &Tensor2, p: &DenseParams) -> Result<(DenseParams, Tensor2)> {
    if da.shape() != (x.rows(), p.out_dim()) || x.cols() != p.in_dim() {
        return Err(shape_err(
            "dense_backward_preactivation",
            format!("{}x{}", x.rows(), p.out_dim()),
            format!("{}x{}", da.rows(), da.cols()),
        ));
    }
    let (batch, out, inp) = (x.rows(), p.out_dim(), p.in_dim());
    let mut grads = DenseParams::zeros(inp, out, p.activation);
    gemm(out, batch, inp, da.as_slice(), Op::T, x.as_slice(), Op::N, grads.w.as_mut_slice(), false);
    for r in 0..batch {
        for (g, v) in grads.b.iter_mut().zip(da.row(r)) {
            *g += v;
        }
    }
    let mut dx = Tensor2::zeros(batch, inp);
    gemm(batch, out, inp, da.as_slice(), Op::N, p.w.as_slice(), Op::N, dx.as_mut_slice(), false);
    Ok((grads, dx))
}

pub fn dense_forward(x: &[f64], p: &DenseParams) -> Result<Vec<f64>> {
    let xt = Tensor2::from_vec(1, x.len(), x.to_vec())?;
    Ok(dense_forward_batch(&xt, p)?.into_vec())
}

/// Single-vector backward; see [`dense_backward_batch`].
pub fn dense_backward(x: &[f64], y: &[f64], dy: &[f64], p: &DenseParams) -> Result<(DenseParams, Vec<f64>)> {
    let xt = Tensor2::from_vec(1, x.len(), x.to_vec())?;
    let yt = Tensor2::from_vec(1, y.len(), y.to_vec())?;
    let dyt = Tensor2::from_vec(1, dy.len(), dy.to_vec())?;
    let (g, dx) = dense_backward_batch(&xt, &yt, &dyt, p)?;
    Ok((g, dx.into_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_layer_passes_input_through() {
        let p = DenseParams {
            w: Tensor2::identity(3),
            b: vec![0.0; 3],
            activation: Activation::Identity,
        };
        assert_eq!(dense_forward(&[1.0, -2.0, 3.5], &p).unwrap(), vec![1.0, -2.0, 3.5]);
    }

    #[test]
    fn softmax_layer_of_zeros_is_uniform() {
        let p = DenseParams::zeros(2, 3, Activation::Softmax);
        for v in dense_forward(&[4.0, 5.0], &p).unwrap() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn sigmoid_closed_form() {
        let p = DenseParams {
            w: Tensor2::from_vec(1, 2, vec![1.0, 1.0]).unwrap(),
            b: vec![1.0],
            activation: Activation::Sigmoid,
        };
        let y = dense_forward(&[1.0, 1.0], &p).unwrap();
        // σ(3)
        assert!((y[0] - 0.952_574_126_822_433_2).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch_is_error() {
        let p = DenseParams::zeros(2, 3, Activation::Relu);
        assert!(dense_forward(&[1.0], &p).is_err());
    }
}
