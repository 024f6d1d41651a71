//! Float helpers backed by `libm`, so results do not depend on whether the
//! platform's `std` is linked.

pub(crate) use libm::{ceil, exp, fabs, floor, fma, hypot, log as ln, pow, round, sincos, sqrt};

/// `x` modulo `m`, in `[0, m)`.
#[inline]
pub(crate) fn rem_euclid(x: f64, m: f64) -> f64 {
    let r = libm::fmod(x, m);
    if r < 0.0 { r + m } else { r }
}
