//! Floating-point scalar abstraction: the whole math stack is generic
//! over `Scalar`, instantiated as f32 or f64.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Default + Debug + Display + Sum + Send + Sync + 'static
{
    /// Converts an f64 constant; floats always succeed.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant converts to any float scalar")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
