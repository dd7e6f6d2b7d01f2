//! Scalar abstraction for the numeric core.
//!
//! Estimation code is generic over [`Scalar`] so the same engine runs on
//! `f32` and `f64`. The crate root exports `f64` aliases for the common case.

use num_traits::{Float, FromPrimitive, ToPrimitive};
use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating-point scalar: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum<Self> + Debug + Display + Send + Sync + 'static
{
    /// Lossy conversion from `f64`, for constants and tolerances.
    fn from_f64_lossy(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant representable in scalar type")
    }

    /// Conversion from a count.
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    /// Widening conversion to `f64` for reporting and p-value lookups.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }
}

impl<T> Scalar for T where
    T: Float + FromPrimitive + ToPrimitive + Sum<T> + Debug + Display + Send + Sync + 'static
{
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_of<F: Scalar>(values: &[F]) -> F {
        values.iter().copied().sum::<F>() / F::from_count(values.len())
    }

    #[test]
    fn generic_over_f32_and_f64() {
        assert_eq!(mean_of(&[1.0f32, 2.0, 3.0]), 2.0f32);
        assert_eq!(mean_of(&[1.0f64, 2.0, 3.0]), 2.0f64);
    }
}
