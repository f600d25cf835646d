use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point type the numerical routines are written against.
///
/// The associated tolerances are the precision targets for iterative and
/// factorization routines. They are fixed per type because the meaningful
/// thresholds for `f32` are several orders of magnitude looser than for `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Relative tolerance for power iteration.
    const POWER_TOL: f64;
    /// Relative symmetry tolerance accepted by the Cholesky factorization.
    const SYMMETRY_TOL: f64;
    /// Pivots at or below this fraction of the largest diagonal entry are rejected.
    const PIVOT_TOL: f64;

    /// Converts an `f64` literal. Panics only for values that are not representable at all.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    const POWER_TOL: f64 = 1e-10;
    const SYMMETRY_TOL: f64 = 1e-12;
    const PIVOT_TOL: f64 = 1e-14;
}

impl Scalar for f32 {
    const POWER_TOL: f64 = 1e-5;
    const SYMMETRY_TOL: f64 = 1e-5;
    const PIVOT_TOL: f64 = 1e-6;
}
