//! Scalar abstraction for the evolutionary core.
//!
//! Genome weights, biases and network values are generic over [`Scalar`] so
//! the same code paths run in `f32` or `f64`. The concrete aliases exported
//! from the crate root (`Genome`, `Species`, ...) pin `f64`, which is also
//! the precision of the canonical wire encoding.

use rand::distr::uniform::SampleUniform;
use rand::Rng;
use rand_distr::StandardNormal;

/// Floating-point scalar usable for genome weights and network math.
pub trait Scalar:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + SampleUniform
    + PartialOrd
    + Copy
    + Send
    + Sync
    + std::fmt::Debug
    + std::fmt::Display
    + serde::Serialize
    + serde::de::DeserializeOwned
    + 'static
{
    /// Lossless-enough conversion from an `f64` configuration value.
    fn from_config(v: f64) -> Self {
        Self::from_f64(v).expect("config value not representable in scalar type")
    }

    /// Widen to `f64` for serialization and reporting.
    fn widen(self) -> f64 {
        self.to_f64().expect("scalar not representable as f64")
    }

    /// One draw from the standard normal distribution.
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;
}

impl Scalar for f32 {
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }
}

impl Scalar for f64 {
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }
}
