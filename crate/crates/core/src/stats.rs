//! Small-sample descriptive statistics shared by the estimation and
//! bootstrap code paths.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Percentile by linear interpolation between closest order statistics.
///
/// Position `h = (n-1) * p / 100` on the sorted vector; the result is
/// `v[floor(h)] + frac(h) * (v[ceil(h)] - v[floor(h)])`. `p = 0` is the
/// minimum, `p = 100` the maximum.
pub fn percentile<F: Scalar>(values: &[F], p: f64) -> Result<F> {
    if values.is_empty() {
        return Err(Error::EmptyInput("percentile of empty vector"));
    }
    if !(0.0..=100.0).contains(&p) {
        return Err(Error::InvalidArgument(format!(
            "percentile p must be in [0, 100], got {p}"
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-NaN values"));
    Ok(percentile_sorted(&sorted, p))
}

/// Percentile of an already-sorted (ascending) nonempty vector.
pub fn percentile_sorted<F: Scalar>(sorted: &[F], p: f64) -> F {
    let n = sorted.len();
    let h = (n as f64 - 1.0) * p / 100.0;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        return sorted[lo];
    }
    let frac = F::from_f64_lossy(h - lo as f64);
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

pub fn mean<F: Scalar>(values: &[F]) -> Result<F> {
    if values.is_empty() {
        return Err(Error::EmptyInput("mean of empty vector"));
    }
    Ok(values.iter().copied().sum::<F>() / F::from_count(values.len()))
}

/// Sample standard deviation (n-1 denominator); `None` for fewer than two values.
pub fn sample_sd<F: Scalar>(values: &[F]) -> Option<F> {
    let n = values.len();
    if n < 2 {
        return None;
    }
    let m = values.iter().copied().sum::<F>() / F::from_count(n);
    let ss = values.iter().map(|&v| (v - m) * (v - m)).sum::<F>();
    Some((ss / F::from_count(n - 1)).sqrt())
}

/// Median; even-length samples average the two central order statistics.
pub fn median<F: Scalar>(values: &[F]) -> Result<F> {
    percentile(values, 50.0)
}
