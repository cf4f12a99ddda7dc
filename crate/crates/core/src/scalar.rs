//! Scalar abstraction shared by the geometry and graph layers.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point type usable by the geometric core: `f32` or `f64`.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    /// Lossy widening to `f64`.
    fn to_f64_lossy(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    /// Default absolute tolerance for angle comparisons.
    fn angle_tol() -> Self;

    /// Tolerance used to decide that two candidate distances tie.
    fn tie_tol() -> Self {
        Self::epsilon() * Self::lit(1.0e3)
    }
}

impl Scalar for f32 {
    fn angle_tol() -> Self {
        1.0e-4
    }
}

impl Scalar for f64 {
    fn angle_tol() -> Self {
        1.0e-9
    }
}

/// `x mod m` mapped into `[0, m)`.
pub fn wrap<F: Scalar>(x: F, m: F) -> F {
    let r = x % m;
    let r = if r < F::zero() { r + m } else { r };
    // `r + m` may round up to exactly `m` for tiny negative `r`.
    if r >= m {
        F::zero()
    } else {
        r
    }
}

/// Distance from `x` to the nearest multiple of `m`, in `[0, m/2]`.
pub fn residue<F: Scalar>(x: F, m: F) -> F {
    let r = wrap(x, m);
    r.min(m - r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_maps_into_half_open_range() {
        assert_eq!(wrap(-1.0_f64, 4.0), 3.0);
        assert_eq!(wrap(4.0_f64, 4.0), 0.0);
        assert_eq!(wrap(9.5_f64, 4.0), 1.5);
        assert!(wrap(-1e-20_f64, 1.0) < 1.0);
    }

    #[test]
    fn residue_is_symmetric() {
        let pi = std::f64::consts::PI;
        assert!(residue(-pi, pi) < 1e-15);
        assert!((residue(0.25 * pi, pi) - 0.25 * pi).abs() < 1e-15);
        assert!((residue(0.75 * pi, pi) - 0.25 * pi).abs() < 1e-15);
    }
}
