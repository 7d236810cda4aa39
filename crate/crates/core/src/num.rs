//! Scalar abstraction shared by the numeric kernels.
//!
//! Link curves, outage algebra, planar geometry and the SINR expression are
//! written against [`Real`] so they can be evaluated in `f32` or `f64`. The
//! Monte Carlo drivers fix the scalar to [`crate::Scalar`].

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, NumCast, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + NumCast + Debug + Display + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite conversion to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Decibels to a linear power ratio.
#[inline]
pub fn db_to_linear<T: Real>(db: T) -> T {
    T::lit(10.0).powf(db / T::lit(10.0))
}

/// Linear power ratio to decibels. Zero maps to negative infinity.
#[inline]
pub fn linear_to_db<T: Real>(linear: T) -> T {
    T::lit(10.0) * linear.log10()
}

/// Serde adapter for rates that may be unbounded: infinity is written as the
/// string `"inf"`, which JSON cannot represent as a number.
pub mod serde_rate {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if *v == f64::INFINITY {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Str(s) if matches!(s.as_str(), "inf" | "+inf" | "infinity") => Ok(f64::INFINITY),
            Raw::Str(s) => Err(serde::de::Error::custom(format!(
                "expected a number or \"inf\", got `{s}`"
            ))),
        }
    }
}
