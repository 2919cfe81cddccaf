use num_traits::{Float, NumAssignOps, NumCast};

/// Floating-point scalar the solver is generic over: `f32` or `f64`.
///
/// Everything numeric in this crate is written against this trait so that
/// callers can pick the precision; in practice interior-point iterations
/// want `f64` and the tolerances in [`SolverConfig`](crate::SolverConfig)
/// default accordingly.
pub trait Scalar:
    Float + NumAssignOps + NumCast + std::fmt::Debug + std::fmt::Display + Send + Sync + 'static
{
    /// Lossy conversion from any primitive number, for literals and counters.
    fn cast<T: NumCast>(value: T) -> Self {
        NumCast::from(value).expect("numeric cast must not fail for primitive values")
    }

    /// 0.5, used all over the cone algebra.
    fn half() -> Self {
        Self::cast(0.5)
    }

    /// 2.0.
    fn two() -> Self {
        Self::cast(2.0)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
