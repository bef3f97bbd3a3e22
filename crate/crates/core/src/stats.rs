//! Summary statistics over seeds.

use crate::{Error, Result};

/// Arithmetic mean; `None` for an empty slice.
pub fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Sample standard deviation (divisor `k - 1`); `None` below two values.
pub fn sample_std(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs)?;
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    Some(crate::math::sqrt(ss / (xs.len() - 1) as f64))
}

/// Mean and half-width of the normal-approximation 95% interval,
/// `1.96 * s / sqrt(k)`.
pub fn confidence_interval(xs: &[f64]) -> Result<(f64, f64)> {
    let s = sample_std(xs).ok_or(Error::Config("a confidence interval needs at least two values"))?;
    let m = mean(xs).expect("non-empty");
    Ok((m, 1.96 * s / crate::math::sqrt(xs.len() as f64)))
}
