//! Scalar abstraction for the numeric core.
//!
//! Everything numeric in this crate is generic over [`Real`], which is only
//! implemented for `f32` and `f64`. Concrete aliases for the common types
//! live at the crate root.

use std::iter::Sum;
use std::str::FromStr;

use ndarray::NdFloat;
use num_traits::FromPrimitive;
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point scalar: `f32` or `f64`.
pub trait Real:
    NdFloat + FromPrimitive + Sum + FromStr + Default + Serialize + DeserializeOwned + 'static
{
    /// Lossless widening to `f64` (`f32 -> f64` is exact).
    fn to_f64_lossless(self) -> f64;
}

impl Real for f32 {
    fn to_f64_lossless(self) -> f64 {
        f64::from(self)
    }
}

impl Real for f64 {
    fn to_f64_lossless(self) -> f64 {
        self
    }
}

/// Shorthand for `F::from_f64(v).unwrap()` on literals known to fit.
pub(crate) fn real<F: Real>(v: f64) -> F {
    F::from_f64(v).expect("literal representable in any Real")
}
