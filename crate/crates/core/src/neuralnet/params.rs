//! Uniform access to the tensors of a parameter set.
//!
//! Gradients reuse the parameter types themselves: a gradient bundle for `P`
//! is a `P` whose tensors hold partial derivatives, so shape congruence is
//! structural.

use rand::RngExt;
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{shape_err, Result};

/// Deterministic generator used for initialization and shuffling.
pub type ParamRng = Xoshiro256PlusPlus;

pub trait ParamSet: Clone {
    /// Visits every tensor in a fixed order with its qualified name and shape.
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(String, &[usize], &[f64]));

    /// Visits every tensor mutably, in the same order as [`ParamSet::visit`].
    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64]));

    fn num_params(&self) -> usize {
        let mut n = 0;
        self.visit("", &mut |_, _, d| n += d.len());
        n
    }

    fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.visit_mut(&mut |d| d.fill(0.0));
        z
    }

    fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        self.visit("", &mut |_, _, d| out.extend_from_slice(d));
        out
    }

    fn assign_flat(&mut self, flat: &[f64]) -> Result<()> {
        let n = self.num_params();
        if flat.len() != n {
            return Err(shape_err("ParamSet::assign_flat", n, flat.len()));
        }
        let mut off = 0;
        self.visit_mut(&mut |d| {
            d.copy_from_slice(&flat[off..off + d.len()]);
            off += d.len();
        });
        Ok(())
    }

    /// `self += scale * other`, element-wise.
    fn add_scaled(&mut self, other: &Self, scale: f64) {
        let flat = other.flatten();
        let mut off = 0;
        self.visit_mut(&mut |d| {
            let n = d.len();
            for (x, g) in d.iter_mut().zip(&flat[off..off + n]) {
                *x += scale * g;
            }
            off += n;
        });
    }

    fn all_finite(&self) -> bool {
        let mut ok = true;
        self.visit("", &mut |_, _, d| ok &= d.iter().all(|v| v.is_finite()));
        ok
    }
}

pub(crate) fn qualify(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

/// Fills `data` uniformly in `[-bound, bound]`.
pub(crate) fn fill_uniform(data: &mut [f64], bound: f64, rng: &mut ParamRng) {
    for v in data.iter_mut() {
        *v = rng.random_range(-bound..=bound);
    }
}
