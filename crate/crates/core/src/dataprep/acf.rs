use crate::error::{Error, Result};

/// Sample autocorrelation `ρ(k) = Σ(x_t − x̄)(x_{t+k} − x̄) / Σ(x_t − x̄)²` for `k = 0..=max_lag`.
pub fn autocorrelation(x: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if x.len() <= max_lag {
        return Err(Error::InsufficientData(format!(
            "series length {} must exceed max_lag {max_lag}",
            x.len()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("autocorrelation input has non-finite values".into()));
    }
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let d: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let denom: f64 = d.iter().map(|v| v * v).sum();
    if denom <= 0.0 {
        return Err(Error::InvalidInput("autocorrelation of a zero-variance series".into()));
    }
    Ok((0..=max_lag)
        .map(|k| d[..n - k].iter().zip(&d[k..]).map(|(a, b)| a * b).sum::<f64>() / denom)
        .collect())
}
