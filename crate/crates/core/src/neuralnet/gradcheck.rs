//! Central finite-difference verification of analytic gradients.

use super::params::ParamSet;
use crate::error::Result;

/// Gradients smaller than this are compared in absolute rather than relative terms.
pub const GRADCHECK_ABS_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Qualified tensor name and flat offset of the worst coordinate.
    pub worst: Option<(String, usize)>,
    pub analytic: f64,
    pub numeric: f64,
    pub coordinates: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error <= tol
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(GRADCHECK_ABS_FLOOR)
}

/// Compares the analytic gradient returned by `f` at `params` against
/// `(f(θ + ε) − f(θ − ε)) / 2ε` for every coordinate.
pub fn gradient_check<P, F>(f: F, params: &P, eps: f64) -> Result<GradCheckReport>
where
    P: ParamSet,
    F: Fn(&P) -> Result<(f64, P)>,
{
    let (_, analytic) = f(params)?;
    let analytic = analytic.flatten();
    let mut names = Vec::new();
    params.visit("", &mut |name, _, d| names.push((name, d.len())));

    let theta = params.flatten();
    let mut probe = params.clone();
    let mut shifted = theta.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        analytic: 0.0,
        numeric: 0.0,
        coordinates: theta.len(),
    };
    let (mut tensor, mut tensor_start) = (0usize, 0usize);
    for j in 0..theta.len() {
        while j >= tensor_start + names[tensor].1 {
            tensor_start += names[tensor].1;
            tensor += 1;
        }
        shifted[j] = theta[j] + eps;
        probe.assign_flat(&shifted)?;
        let plus = f(&probe)?.0;
        shifted[j] = theta[j] - eps;
        probe.assign_flat(&shifted)?;
        let minus = f(&probe)?.0;
        shifted[j] = theta[j];

        let numeric = (plus - minus) / (2.0 * eps);
        let err = relative_error(analytic[j], numeric);
        if err > report.max_rel_error || report.worst.is_none() {
            report.max_rel_error = err;
            report.worst = Some((names[tensor].0.clone(), j - tensor_start));
            report.analytic = analytic[j];
            report.numeric = numeric;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuralnet::params::qualify;

    #[derive(Clone, Debug)]
    struct V(Vec<f64>);

    impl ParamSet for V {
        fn visit(&self, prefix: &str, f: &mut dyn FnMut(String, &[usize], &[f64])) {
            f(qualify(prefix, "theta"), &[self.0.len()], &self.0);
        }
        fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
            f(&mut self.0);
        }
    }

    #[test]
    fn linear_function_is_exact() {
        let a = [3.0, -2.0, 0.5];
        let f = |p: &V| -> Result<(f64, V)> {
            let v = p.0.iter().zip(&a).map(|(x, c)| x * c).sum();
            Ok((v, V(a.to_vec())))
        };
        let r = gradient_check(f, &V(vec![1.0, 2.0, 3.0]), 1e-5).unwrap();
        assert!(r.max_rel_error <= 1e-10, "{r:?}");
    }

    #[test]
    fn corrupted_gradient_is_detected() {
        let f = |p: &V| -> Result<(f64, V)> {
            let v = p.0.iter().map(|x| x * x).sum();
            Ok((v, V(p.0.iter().map(|x| 2.0 * x * 1.1).collect())))
        };
        let r = gradient_check(f, &V(vec![0.7, -1.3]), 1e-5).unwrap();
        assert!(r.max_rel_error >= 0.05, "{r:?}");
    }
}
