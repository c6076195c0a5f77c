use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar the optimization core is generic over.
///
/// The tolerances are per-precision: every boundary comparison in the
/// crate (regime classification, σ ties, feasibility) goes through
/// [`Scalar::TOL`], so closed form and oracle always classify a boundary
/// configuration the same way.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Absolute tolerance for "≤ 1" tests, threshold ties and feasibility.
    const TOL: Self;
    /// Two constraint coefficients closer than this are treated as parallel.
    const DEGENERATE_TOL: Self;
    /// Allowed drift of Σ y_t away from 1 in a [`TypeAllocation`](crate::TypeAllocation).
    const SUM_TOL: Self;

    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("usize is representable in every float type")
    }

    fn of_f64(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal is representable")
    }

    /// `t^exp` for a positive integer base, via `exp(exp·ln t)`; `1^exp` is exactly 1.
    fn int_pow(t: usize, exp: Self) -> Self {
        if t == 1 {
            Self::one()
        } else {
            (exp * Self::of_usize(t).ln()).exp()
        }
    }
}

impl Scalar for f64 {
    const TOL: f64 = 1e-9;
    const DEGENERATE_TOL: f64 = 1e-12;
    const SUM_TOL: f64 = 1e-12;
}

impl Scalar for f32 {
    const TOL: f32 = 1e-5;
    const DEGENERATE_TOL: f32 = 1e-6;
    const SUM_TOL: f32 = 1e-5;
}
