//! The 1-D multiplier family `x -> m x (mod 1)`, optionally with one local
//! bump perturbation. The pure doubling map (`m = 2`) is the exact oracle
//! map for the whole pipeline; the bumped variants provide derived-from-
//! expanding behavior with a neutral-ish region.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{bump_profile, bump_profile_ds2};
use crate::error::MapError;
use crate::map::{newton_preimage, validate_branches, TorusMap};
use crate::torus::{wrap_signed, wrap_unit, TorusPoint};

/// Local perturbation `x -> x + strength * rho(|u|/radius) * u` with
/// `u = x - site` wrapped; support `(site - radius, site + radius)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct Bump1d {
    pub site: f64,
    pub radius: f64,
    pub strength: f64,
}

impl Bump1d {
    fn displacement(&self, x: f64) -> f64 {
        wrap_signed(x - self.site)
    }

    /// Perturbation value at `x`.
    fn value(&self, x: f64) -> f64 {
        let u = self.displacement(x);
        let s2 = (u / self.radius) * (u / self.radius);
        self.strength * bump_profile(s2) * u
    }

    /// d/dx of the perturbation.
    fn derivative(&self, x: f64) -> f64 {
        let u = self.displacement(x);
        let s2 = (u / self.radius) * (u / self.radius);
        // d/du [rho(s2) u] = rho + u * rho'(s2) * 2u/r^2
        self.strength
            * (bump_profile(s2) + 2.0 * s2 * bump_profile_ds2(s2))
    }
}

/// `x -> m x + bump (mod 1)` with integer multiplier `m >= 2`. Degree `m`;
/// the constructor verifies the lift derivative stays positive so the map
/// remains a local diffeomorphism with exactly `m` branches.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DoublingFamilyMap {
    multiplier: i64,
    perturbation: Option<Bump1d>,
}

impl DoublingFamilyMap {
    pub fn new(multiplier: i64, perturbation: Option<Bump1d>) -> Result<Self, MapError> {
        if multiplier < 2 {
            return Err(MapError::InvalidParameter(format!(
                "multiplier must be >= 2, got {multiplier}"
            )));
        }
        if let Some(b) = &perturbation {
            if !(b.radius > 0.0 && b.radius < 0.5) {
                return Err(MapError::InvalidParameter(format!(
                    "bump radius must lie in (0, 1/2), got {}",
                    b.radius
                )));
            }
            // min over u of m + strength * d/du[rho u]; the profile factor
            // ranges over [-32/49, 1]
            let min_deriv = if b.strength >= 0.0 {
                multiplier as f64 - 32.0 / 49.0 * b.strength
            } else {
                multiplier as f64 + b.strength
            };
            if min_deriv <= 0.0 {
                return Err(MapError::NotLocalDiffeo(format!(
                    "lift derivative reaches {min_deriv}; perturbation too strong"
                )));
            }
        }
        Ok(Self {
            multiplier,
            perturbation,
        })
    }

    /// Unperturbed multiplier map.
    pub fn pure(multiplier: i64) -> Result<Self, MapError> {
        Self::new(multiplier, None)
    }

    pub fn multiplier(&self) -> i64 {
        self.multiplier
    }

    pub fn perturbation(&self) -> Option<&Bump1d> {
        self.perturbation.as_ref()
    }

    fn lift_eval(&self, x: f64) -> f64 {
        let mut v = self.multiplier as f64 * x;
        if let Some(b) = &self.perturbation {
            v += b.value(wrap_unit(x));
        }
        v
    }

    fn lift_derivative(&self, x: f64) -> f64 {
        let mut d = self.multiplier as f64;
        if let Some(b) = &self.perturbation {
            d += b.derivative(wrap_unit(x));
        }
        d
    }
}

impl TorusMap for DoublingFamilyMap {
    fn dimension(&self) -> usize {
        1
    }

    fn degree(&self) -> usize {
        self.multiplier as usize
    }

    fn eval(&self, x: &TorusPoint) -> TorusPoint {
        TorusPoint::circle(self.lift_eval(x.coords()[0]))
    }

    fn derivative(&self, x: &TorusPoint) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, self.lift_derivative(x.coords()[0]))
    }

    fn inverse_branches(&self, y: &TorusPoint) -> Result<Vec<TorusPoint>, MapError> {
        let m = self.multiplier as f64;
        let y0 = y.coords()[0];
        let mut out = Vec::with_capacity(self.degree());
        for j in 0..self.multiplier {
            let seed = TorusPoint::circle((y0 + j as f64) / m);
            let w = if self.perturbation.is_some() {
                newton_preimage(self, y, &seed)?
            } else {
                seed
            };
            out.push(w);
        }
        // branch j seeds are ascending in [0,1); Newton stays in-branch, so
        // the list is already sorted
        validate_branches(self, y, &out)?;
        Ok(out)
    }

    fn family_name(&self) -> &'static str {
        "doubling"
    }
}
