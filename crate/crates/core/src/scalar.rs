//! Floating-point abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar the engine is generic over (`f32` or `f64`).
///
/// Besides the arithmetic bounds, each implementation carries the tolerances
/// that make sense at its precision, so invariants such as "unit norm" are
/// checked at a level the type can actually represent.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + LinalgScalar
    + ScalarOperand
    + Sum
    + Display
    + Debug
    + FromStr
    + Default
    + Send
    + Sync
    + 'static
{
    /// Allowed deviation of a normalized vector's norm from 1.
    const UNIT_NORM_TOL: f64;
    /// Allowed deviation of a probability row's sum from 1.
    const SIMPLEX_TOL: f64;
    /// Allowed deviation of an assignment row's sum from 1.
    const ASSIGNMENT_TOL: f64;
    /// Floor applied to probabilities before taking logarithms.
    const LOG_CLAMP: f64;

    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn log_clamp() -> Self {
        Self::lit(Self::LOG_CLAMP)
    }
}

impl Scalar for f32 {
    const UNIT_NORM_TOL: f64 = 1e-5;
    const SIMPLEX_TOL: f64 = 1e-5;
    const ASSIGNMENT_TOL: f64 = 1e-5;
    const LOG_CLAMP: f64 = 1e-37;
}

impl Scalar for f64 {
    const UNIT_NORM_TOL: f64 = 1e-9;
    const SIMPLEX_TOL: f64 = 1e-9;
    const ASSIGNMENT_TOL: f64 = 1e-12;
    const LOG_CLAMP: f64 = 1e-300;
}
