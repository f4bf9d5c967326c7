//! Concrete map families: linear toral endomorphisms, the 1-D multiplier
//! family with an optional local bump, and the perturbed 2-D example with a
//! pitchfork site inside `U_0` and complex-rotation sites outside.

mod doubling;
mod linear;
mod perturbed;

pub use doubling::{Bump1d, DoublingFamilyMap};
pub use linear::LinearToralMap;
pub use perturbed::{min_abs_det_on_grid, PerturbedExampleMap, PerturbedExampleParams, QSite};

/// Shared C^2 bump profile `rho(s) = (1 - s^2)^3` on `[0, 1]`, zero outside.
/// Polynomial, so derivatives are exact.
#[inline]
pub(crate) fn bump_profile(s2: f64) -> f64 {
    if s2 >= 1.0 {
        0.0
    } else {
        let t = 1.0 - s2;
        t * t * t
    }
}

/// Derivative of the profile with respect to `s^2`.
#[inline]
pub(crate) fn bump_profile_ds2(s2: f64) -> f64 {
    if s2 >= 1.0 {
        0.0
    } else {
        let t = 1.0 - s2;
        -3.0 * t * t
    }
}
