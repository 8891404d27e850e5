use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar used by every numeric kernel in this crate.
///
/// All math is written once against this trait; `f32` is the production
/// element type (stores and checkpoints hold `f32` on disk) and `f64` is used
/// for training and for test oracles.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + std::fmt::Debug + std::fmt::Display + Send + Sync + 'static
{
    fn of_f64(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("f64 conversion")
    }

    fn of_usize(v: usize) -> Self {
        <Self as FromPrimitive>::from_usize(v).expect("usize conversion")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("conversion to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
