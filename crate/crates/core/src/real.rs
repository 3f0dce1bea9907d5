//! Scalar abstraction: all geometry and spectral code is generic over
//! `f32`/`f64` through this trait.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, NumAssign};

pub trait Real: Float + NumAssign + Sum + Debug + Display + Send + Sync + 'static {}

impl Real for f32 {}
impl Real for f64 {}

/// Shorthand for converting an `f64` literal into the working scalar.
#[inline]
pub fn real<T: Real>(x: f64) -> T {
    T::from(x).expect("f64 literal representable in scalar type")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literal_conversion_roundtrips() {
        let x: f32 = real(0.25);
        assert_eq!(x, 0.25f32);
        let y: f64 = real(1e-9);
        assert_eq!(y, 1e-9);
    }
}
