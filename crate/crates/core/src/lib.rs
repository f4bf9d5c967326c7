//! Numerical toolkit for non-invertible local diffeomorphisms of the n-torus.
//!
//! The crate builds, at desk scale, the constructive pipeline
//!
//! ```text
//! map family -> periodic sources -> zooming data -> induced Markov map
//!            -> Bernoulli tower measures -> Lyapunov / correlation statistics
//! ```
//!
//! for expanding-type endomorphisms of `T^n`: certified zooming times along
//! orbits, first-zooming-return induced maps `F(x) = f^{l R(x)}(x)` on a small
//! base around a periodic source, the family of Bernoulli measures on the
//! return partition together with their projected invariant measures, and
//! empirical measurements of Lyapunov exponents and correlation decay.
//!
//! Module map:
//!
//! * [`torus`] — flat-torus points, vectors, balls, distances and the dyadic
//!   covering grids used by every density certificate.
//! * [`map`] / [`maps`] — the map abstraction (evaluation, derivative, inverse
//!   branches) plus the concrete families: linear toral endomorphisms, the
//!   1-D multiplier family, and the perturbed 2-D example with a pitchfork
//!   site and complex-rotation sites.
//! * [`orbits`] — forward-orbit and pre-orbit density certificates, periodic
//!   point search, and the expansion / internal-radius-growth verifiers.
//! * [`zooming`] — zooming contractions, certified zooming times, zooming
//!   frequency, and source zooming data (block length, radius, contraction).
//! * [`induced`] — the induced first-zooming-return Markov map on a base ball
//!   around the source, with Markov and expansion certificates.
//! * [`measures`] — Bernoulli weights on the return partition, cylinder
//!   measures, and sampling / integration against the projected measure.
//! * [`stats`] — QR-cocycle Lyapunov exponents, correlation-decay curves with
//!   exponential fits, and return-time tail fits.
//! * [`families`] — serde-friendly map descriptors (the JSON interface used
//!   by the CLI).
//! * [`exec`] — deterministic parallel helpers (rayon behind the `parallel`
//!   feature, with a sequential fallback) and seed derivation.
//!
//! All stochastic operations take explicit seeds and derive per-item child
//! seeds by index, so results are byte-identical across thread counts.

pub mod error;
pub mod exec;
pub mod families;
pub mod induced;
pub mod map;
pub mod maps;
pub mod measures;
pub mod numeric;
pub mod orbits;
pub mod stats;
pub mod tolerances;
pub mod torus;
pub mod zooming;

pub use error::{InducedError, MapError, MeasureError, OrbitError, StatsError, ZoomingError};
pub use map::TorusMap;
pub use torus::{Ball, TorusPoint, TorusVector};
