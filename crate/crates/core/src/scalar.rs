//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real field the toolkit computes over: `f32` or `f64`.
///
/// Tolerances are written as `f64` literals and converted with [`Real::tol`],
/// which never returns less than a small multiple of machine epsilon, so the
/// same code runs in single precision with correspondingly looser checks.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + for<'a> Sum<&'a Self>
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Exact conversion of a literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    /// A tolerance of `x`, floored at `64·ε` of the scalar type.
    fn tol(x: f64) -> Self {
        let floor = Self::epsilon() * Self::lit(64.0);
        Self::lit(x).max(floor)
    }

    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// `log2`, with `log2(0) = -inf`.
    fn log2_ext(self) -> Self {
        if self <= Self::zero() {
            Self::neg_infinity()
        } else {
            self.log2()
        }
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `x log2 x` with the `0 log 0 = 0` convention.
pub fn xlog2x<T: Real>(x: T) -> T {
    if x <= T::zero() {
        T::zero()
    } else {
        x * x.log2()
    }
}

/// Largest absolute entrywise difference of two equally long slices.
pub fn max_abs_diff<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |m, (&x, &y)| m.max((x - y).abs()))
}

/// Fixed-order sum, used where reductions must be bit-reproducible.
pub fn ordered_sum<T: Real>(xs: impl IntoIterator<Item = T>) -> T {
    let mut acc = T::zero();
    for x in xs {
        acc += x;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerance_floor_depends_on_precision() {
        assert_eq!(<f64 as Real>::tol(1e-12), 1e-12);
        assert!(<f32 as Real>::tol(1e-12) > 1e-6);
    }

    #[test]
    fn xlogx_zero_convention() {
        assert_eq!(xlog2x(0.0f64), 0.0);
        assert!((xlog2x(0.5f64) + 0.5).abs() < 1e-15);
    }
}
