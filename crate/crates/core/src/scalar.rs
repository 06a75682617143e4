//! Floating-point abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar the model algebra is written against; implemented for `f32` and `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Converts an `f64` literal into the scalar type.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Lower bound applied to latent-factor and noise variances.
pub const VARIANCE_FLOOR: f64 = 1e-6;

/// `ln(2π)`.
pub(crate) fn ln_two_pi<F: Scalar>() -> F {
    F::lit(std::f64::consts::TAU.ln())
}

/// Numerically stable `ln Σ exp(x)`.
pub(crate) fn log_sum_exp<F: Scalar>(values: &[F]) -> F {
    let max = values.iter().copied().fold(F::neg_infinity(), F::max);
    if !max.is_finite() {
        return max;
    }
    let total: F = values.iter().map(|&v| (v - max).exp()).sum();
    max + total.ln()
}
