//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating-point scalar used throughout the solver and the interval code.
///
/// Implemented for `f32` and `f64`. Tolerances that depend on the precision
/// live here so generic code never hard-codes an `f64` constant.
pub trait Real:
    Float + FromPrimitive + NumAssign + Sum<Self> + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal; panics only for values unrepresentable in `Self`.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    /// Converts a count or index.
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Relative duality-gap target for the interior-point solver.
    fn solver_tolerance() -> Self;

    /// Slack below which a Lipschitz constraint is treated as binding, relative
    /// to the scale of the solution.
    fn binding_tolerance() -> Self;
}

impl Real for f32 {
    fn solver_tolerance() -> Self {
        2e-6
    }
    fn binding_tolerance() -> Self {
        1e-3
    }
}

impl Real for f64 {
    fn solver_tolerance() -> Self {
        1e-11
    }
    fn binding_tolerance() -> Self {
        1e-6
    }
}

/// Euclidean distance between two equal-length rows.
pub fn euclidean<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .map(|(&p, &q)| (p - q) * (p - q))
        .sum::<T>()
        .sqrt()
}
