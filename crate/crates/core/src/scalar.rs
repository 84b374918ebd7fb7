//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point scalar: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Default + Debug + Display + Send + Sync + Serialize + DeserializeOwned + 'static
{
    /// Tolerance for matrix and group-axiom comparisons.
    fn mat_tol() -> Self {
        (Self::epsilon() * Self::lit(256.0)).max(Self::lit(1e-12))
    }

    /// Tolerance for weight normalization.
    fn weight_tol() -> Self {
        (Self::epsilon() * Self::lit(1024.0)).max(Self::lit(1e-9))
    }

    /// Converts an `f64` literal. Panics only if the value is unrepresentable,
    /// which cannot happen for finite `f64` inputs into `f32`/`f64`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 literal")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize fits in a float")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("float converts to f64")
    }

    fn two_pi() -> Self {
        Self::lit(std::f64::consts::TAU)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Compensated (Neumaier) summation.
pub fn stable_sum<T: Scalar, I: IntoIterator<Item = T>>(values: I) -> T {
    let mut sum = T::zero();
    let mut comp = T::zero();
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp = comp + ((sum - t) + v);
        } else {
            comp = comp + ((v - t) + sum);
        }
        sum = t;
    }
    sum + comp
}

/// Sine and cosine of the angle `2π·j/k`, exact at multiples of a quarter turn.
pub fn sin_cos_turn<T: Scalar>(j: usize, k: usize) -> (T, T) {
    let j = j % k;
    if (4 * j) % k == 0 {
        match 4 * j / k {
            0 => (T::zero(), T::one()),
            1 => (T::one(), T::zero()),
            2 => (T::zero(), -T::one()),
            _ => (-T::one(), T::zero()),
        }
    } else {
        let angle = T::two_pi() * T::from_usize_lossy(j) / T::from_usize_lossy(k);
        angle.sin_cos()
    }
}
