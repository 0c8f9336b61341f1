use std::fmt::{Debug, Display};
use std::iter::Sum;

use nalgebra::{ClosedAddAssign, ClosedMulAssign};
use num_traits::{Float, FromPrimitive, NumAssignOps};

/// Floating-point scalar used on the data path.
///
/// Implemented for `f32` and `f64`. Eigen- and singular-value decompositions
/// are carried out in `f64` regardless of the storage type.
pub trait Scalar:
    Float
    + FromPrimitive
    + NumAssignOps
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + nalgebra::Scalar
    + ClosedAddAssign
    + ClosedMulAssign
    + 'static
{
    /// Lossy cast from `f64`.
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 is representable")
    }

    fn as_f64(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).expect("finite cast to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
