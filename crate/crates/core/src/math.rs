//! Float helpers backed by `libm` so the crate builds without `std`.

pub use libm::{cos, exp, floor, round, sin, sqrt};

#[inline]
pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

#[inline]
pub fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}
