//! Regression and distribution losses.

use super::activation::softmax_in_place;
use super::tensor::Tensor2;
use crate::error::{shape_err, Error, Result};

/// Floor applied to predicted probabilities before taking logarithms.
pub const KL_FLOOR: f64 = 1e-8;

const ROW_SUM_TOL: f64 = 1e-9;

fn check_same_shape(context: &'static str, a: &Tensor2, b: &Tensor2) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(shape_err(
            context,
            format!("{}x{}", a.rows(), a.cols()),
            format!("{}x{}", b.rows(), b.cols()),
        ));
    }
    if a.rows() == 0 || a.cols() == 0 {
        return Err(Error::InvalidInput(format!("{context}: empty matrix")));
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::Config(format!("MMSE alpha must be >= 0, got {alpha}")));
    }
    Ok(())
}

#[inline]
fn mmse_weight(y: f64, alpha: f64) -> f64 {
    (-alpha * (1.0 - y)).exp()
}

/// Plain mean squared error over all entries.
pub fn mse(y: &Tensor2, y_hat: &Tensor2) -> Result<f64> {
    check_same_shape("mse", y, y_hat)?;
    let n = y.as_slice().len() as f64;
    Ok(y.as_slice()
        .iter()
        .zip(y_hat.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n)
}

/// `1/(K n) Σ exp(-α (1 - y)) (y - ŷ)²` for `n × K` targets in `[0, 1]`.
pub fn mmse_loss(y: &Tensor2, y_hat: &Tensor2, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    check_same_shape("mmse_loss", y, y_hat)?;
    let n = y.as_slice().len() as f64;
    let total: f64 = y
        .as_slice()
        .iter()
        .zip(y_hat.as_slice())
        .map(|(&t, &p)| mmse_weight(t, alpha) * (t - p) * (t - p))
        .sum();
    Ok(total / n)
}

/// `∂L/∂ŷ` of [`mmse_loss`].
pub fn mmse_gradient(y: &Tensor2, y_hat: &Tensor2, alpha: f64) -> Result<Tensor2> {
    check_alpha(alpha)?;
    check_same_shape("mmse_gradient", y, y_hat)?;
    let n = y.as_slice().len() as f64;
    let data = y
        .as_slice()
        .iter()
        .zip(y_hat.as_slice())
        .map(|(&t, &p)| -2.0 * mmse_weight(t, alpha) * (t - p) / n)
        .collect();
    Tensor2::from_vec(y.rows(), y.cols(), data)
}

fn check_histograms(context: &'static str, m: &Tensor2) -> Result<()> {
    for r in 0..m.rows() {
        let row = m.row(r);
        if let Some(v) = row.iter().find(|v| !(**v >= 0.0)) {
            return Err(Error::InvalidInput(format!("{context}: row {r} has negative or NaN entry {v}")));
        }
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::InvalidInput(format!("{context}: row {r} sums to {s}, not 1")));
        }
    }
    Ok(())
}

/// Per-row KL divergence `D(p‖q)` with `q` floored at [`KL_FLOOR`] and renormalized.
fn kl_row(p: &[f64], q: &[f64]) -> f64 {
    let s: f64 = q.iter().map(|v| v.max(KL_FLOOR)).sum();
    p.iter()
        .zip(q)
        .filter(|(pv, _)| **pv > 0.0)
        .map(|(&pv, &qv)| pv * (pv.ln() - (qv.max(KL_FLOOR) / s).ln()))
        .sum()
}

/// Mean over rows of `D(P‖Q) = -Σ p log q + Σ p log p`.
pub fn kl_loss(p: &Tensor2, q: &Tensor2) -> Result<f64> {
    check_same_shape("kl_loss", p, q)?;
    check_histograms("kl_loss P", p)?;
    check_histograms("kl_loss Q", q)?;
    let n = p.rows() as f64;
    Ok((0..p.rows()).map(|r| kl_row(p.row(r), q.row(r))).sum::<f64>() / n)
}

/// KL loss of `softmax(logits)` against `P`, with the gradient on the logits.
pub fn kl_logit_gradient(p: &Tensor2, logits: &Tensor2) -> Result<(f64, Tensor2)> {
    check_same_shape("kl_logit_gradient", p, logits)?;
    check_histograms("kl_logit_gradient P", p)?;
    let mut q = logits.clone();
    for r in 0..q.rows() {
        softmax_in_place(q.row_mut(r));
    }
    let (loss, grad) = kl_softmax_gradient(p, &q)?;
    Ok((loss, grad))
}

/// Same as [`kl_logit_gradient`] but taking the softmax output `Q` directly.
pub fn kl_softmax_gradient(p: &Tensor2, q: &Tensor2) -> Result<(f64, Tensor2)> {
    check_same_shape("kl_softmax_gradient", p, q)?;
    let n = p.rows() as f64;
    let mut grad = Tensor2::zeros(p.rows(), p.cols());
    let mut loss = 0.0;
    let mut dq = vec![0.0; p.cols()];
    for r in 0..p.rows() {
        let (pr, qr) = (p.row(r), q.row(r));
        loss += kl_row(pr, qr);
        let s: f64 = qr.iter().map(|v| v.max(KL_FLOOR)).sum();
        let psum: f64 = pr.iter().sum();
        // L = -Σ p log(m/S), m = max(q, ε):  ∂L/∂q = (-p/m + Σp/S) · [q > ε]
        for ((d, &pv), &qv) in dq.iter_mut().zip(pr).zip(qr) {
            *d = if qv > KL_FLOOR {
                -pv / qv + psum / s
            } else {
                0.0
            };
        }
        let dot: f64 = qr.iter().zip(&dq).map(|(a, b)| a * b).sum();
        for ((g, &qv), &d) in grad.row_mut(r).iter_mut().zip(qr).zip(&dq) {
            *g = qv * (d - dot) / n;
        }
    }
    Ok((loss / n, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t(rows: usize, cols: usize, v: &[f64]) -> Tensor2 {
        Tensor2::from_vec(rows, cols, v.to_vec()).unwrap()
    }

    #[test]
    fn mmse_zero_when_exact() {
        let y = t(2, 2, &[0.1, 0.9, 0.4, 0.5]);
        assert_eq!(mmse_loss(&y, &y, 4.0).unwrap(), 0.0);
    }

    #[test]
    fn mmse_worked_example() {
        let l = mmse_loss(&t(1, 1, &[0.5]), &t(1, 1, &[0.7]), 4.0).unwrap();
        // e^{-2} · 0.04
        assert!((l - 0.005_413_411_329_464_508).abs() < 1e-12);
    }

    #[test]
    fn mmse_rejects_negative_alpha_and_bad_shapes() {
        let y = t(1, 2, &[0.1, 0.2]);
        assert!(matches!(mmse_loss(&y, &y, -1.0), Err(Error::Config(_))));
        assert!(mmse_loss(&y, &t(2, 1, &[0.1, 0.2]), 1.0).is_err());
    }

    #[test]
    fn mmse_gradient_matches_formula() {
        let y = t(1, 2, &[0.5, 0.9]);
        let yh = t(1, 2, &[0.7, 0.1]);
        let g = mmse_gradient(&y, &yh, 4.0).unwrap();
        let want0 = -2.0 * (-2.0f64).exp() * (0.5 - 0.7) / 2.0;
        assert!((g.get(0, 0) - want0).abs() < 1e-15);
    }

    #[test]
    fn kl_worked_examples() {
        let l = kl_loss(&t(1, 2, &[1.0, 0.0]), &t(1, 2, &[0.5, 0.5])).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-12);
        let l = kl_loss(&t(1, 2, &[0.5, 0.5]), &t(1, 2, &[0.9, 0.1])).unwrap();
        assert!((l - 0.510_825_623_765_990_7).abs() < 1e-12);
    }

    #[test]
    fn kl_one_hot_vs_uniform_35() {
        let mut p = vec![0.0; 35];
        p[10] = 1.0;
        let q = vec![1.0 / 35.0; 35];
        let l = kl_loss(&t(1, 35, &p), &t(1, 35, &q)).unwrap();
        assert!((l - 35f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn kl_rejects_unnormalized_and_negative_rows() {
        let good = t(1, 2, &[0.5, 0.5]);
        assert!(kl_loss(&t(1, 2, &[0.5, 0.6]), &good).is_err());
        assert!(kl_loss(&t(1, 2, &[1.5, -0.5]), &good).is_err());
    }

    #[test]
    fn kl_handles_zero_predicted_bins() {
        let l = kl_loss(&t(1, 2, &[0.5, 0.5]), &t(1, 2, &[1.0, 0.0])).unwrap();
        assert!(l.is_finite() && l > 0.0);
    }

    #[test]
    fn kl_logit_gradient_is_q_minus_p_without_flooring() {
        let p = t(1, 3, &[0.2, 0.3, 0.5]);
        let logits = t(1, 3, &[0.1, -0.4, 0.7]);
        let (_, g) = kl_logit_gradient(&p, &logits).unwrap();
        let mut q = logits.clone();
        softmax_in_place(q.row_mut(0));
        for k in 0..3 {
            assert!((g.get(0, k) - (q.get(0, k) - p.get(0, k))).abs() < 1e-14);
        }
    }

    fn normalized(v: Vec<f64>) -> Vec<f64> {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    }

    proptest! {
        #[test]
        fn mmse_alpha_zero_is_mse(v in proptest::collection::vec((0.0f64..1.0, -1.0f64..2.0), 1..50)) {
            let n = v.len();
            let y = t(n, 1, &v.iter().map(|p| p.0).collect::<Vec<_>>());
            let yh = t(n, 1, &v.iter().map(|p| p.1).collect::<Vec<_>>());
            prop_assert!((mmse_loss(&y, &yh, 0.0).unwrap() - mse(&y, &yh).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn mmse_nonnegative_and_zero_only_when_equal(
            v in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..30),
            alpha in 0.0f64..8.0,
        ) {
            let n = v.len();
            let y = t(n, 1, &v.iter().map(|p| p.0).collect::<Vec<_>>());
            let yh = t(n, 1, &v.iter().map(|p| p.1).collect::<Vec<_>>());
            let l = mmse_loss(&y, &yh, alpha).unwrap();
            prop_assert!(l >= 0.0);
            if y != yh { prop_assert!(l > 0.0); }
        }

        #[test]
        fn mmse_weight_nondecreasing_in_target(
            y1 in 0.0f64..1.0, y2 in 0.0f64..1.0, r in -1.0f64..1.0, alpha in 0.0f64..10.0,
        ) {
            let (lo, hi) = if y1 <= y2 { (y1, y2) } else { (y2, y1) };
            let c = |y: f64| mmse_loss(&t(1, 1, &[y]), &t(1, 1, &[y - r]), alpha).unwrap();
            prop_assert!(c(hi) >= c(lo));
        }

    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn kl_is_nonnegative(
            p in proptest::collection::vec(0.0f64..1.0, 35),
            q in proptest::collection::vec(0.0f64..1.0, 35),
        ) {
            prop_assume!(p.iter().sum::<f64>() > 1e-3 && q.iter().sum::<f64>() > 1e-3);
            let (p, q) = (normalized(p), normalized(q));
            let l = kl_loss(&t(1, 35, &p), &t(1, 35, &q)).unwrap();
            prop_assert!(l >= -1e-15);
            prop_assert!(kl_loss(&t(1, 35, &p), &t(1, 35, &p)).unwrap().abs() < 1e-9);
        }
    }
}
