//! Central numeric tolerances with their origin.
//!
//! Every certificate in the crate uses a named constant from this module, so
//! the margins that appear in reports can be traced to one place.

/// Acceptance tolerance for inverse-branch round trips: each branch point `w`
/// returned for a target `y` must satisfy `dist(f(w), y) < BRANCH_TOL`.
pub const BRANCH_TOL: f64 = 1e-10;

/// Two branch points closer than `10 * BRANCH_TOL` are treated as a collision
/// (the Newton solves converged to the same root).
pub const BRANCH_COLLISION_TOL: f64 = 10.0 * BRANCH_TOL;

/// Newton iterations stop once the lifted residual drops below this.
pub const NEWTON_TOL: f64 = 1e-12;

/// Maximum Newton iterations for branch solves and periodic-point solves.
pub const MAX_NEWTON_ITERS: usize = 50;

/// A point is accepted as periodic of period `k` when `dist(f^k(x), x)` is
/// below this value.
pub const PERIODIC_TOL: f64 = 1e-10;

/// Eigenvalue moduli within `HYPER_MARGIN` of 1 classify an orbit as
/// nonhyperbolic. Far above Newton tolerance, far below any genuine gap in
/// the shipped examples.
pub const HYPER_MARGIN: f64 = 1e-6;

/// Periodic candidates closer than this are deduplicated.
pub const PERIODIC_DEDUPE: f64 = 1e-7;

/// Slack added to sampled zooming-contraction inequalities; shipped examples
/// certify with margins well above `10 * SAMPLE_TOL`.
pub const SAMPLE_TOL: f64 = 1e-8;

/// Bisection floor for the zooming radius delta. Below this, grid
/// certificates elsewhere become meaningless at desk scale.
pub const DELTA_FLOOR: f64 = 1e-6;

/// Per-block forward residual allowed in Markov certificates: every pulled
/// back sample must map forward onto its target within this distance at each
/// induced-map block.
pub const MARKOV_TOL: f64 = 1e-9;

/// Relative shrink applied to the base radius when testing that a candidate
/// cell lies strictly inside the base.
pub const STRICT_INTERIOR_MARGIN: f64 = 1e-9;

/// Expansion margin: "expanding" means the smallest singular value exceeds
/// `1 + EXPANSION_MARGIN` on the verification grid.
pub const EXPANSION_MARGIN: f64 = 1e-6;
