//! Forward orbits, pre-orbit trees, density certificates, periodic-orbit
//! search with hyperbolicity classification, and the grid-based hypothesis
//! verifiers (expansion off `U_0`, internal radius growth).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{GeomError, OrbitError};
use crate::exec;
use crate::map::{derivative_cocycle, nearest_branch, orbit, TorusMap};
use crate::numeric;
use crate::tolerances::{
    EXPANSION_MARGIN, HYPER_MARGIN, MAX_NEWTON_ITERS, PERIODIC_DEDUPE, PERIODIC_TOL,
};
use crate::torus::{
    sphere_directions, torus_distance, wrap_signed, Ball, CoverageTracker, TorusPoint,
};

// ---------------------------------------------------------------------------
// periodic orbits
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Source,
    Sink,
    Saddle,
    Nonhyperbolic,
}

/// A certified periodic point with its multiplier data.
#[derive(Debug, Clone)]
pub struct PeriodicOrbit {
    pub point: TorusPoint,
    pub period: usize,
    /// `Df^k` at the point.
    pub multiplier: DMatrix<f64>,
    /// Eigenvalue moduli of the multiplier, descending.
    pub eigenvalue_moduli: Vec<f64>,
    pub classification: Classification,
}

/// Classify by eigenvalue moduli: any modulus within `HYPER_MARGIN` of 1 is
/// nonhyperbolic; otherwise all above 1 is a source, all below a sink, and a
/// mix is a saddle.
pub fn classify(moduli: &[f64]) -> Classification {
    if moduli.iter().any(|m| (m - 1.0).abs() <= HYPER_MARGIN) {
        Classification::Nonhyperbolic
    } else if moduli.iter().all(|m| *m > 1.0) {
        Classification::Source
    } else if moduli.iter().all(|m| *m < 1.0) {
        Classification::Sink
    } else {
        Classification::Saddle
    }
}

/// Outcome of a periodic-point sweep; non-convergent seeds are dropped and
/// counted rather than reported as errors.
#[derive(Debug, Clone)]
pub struct PeriodicSearch {
    pub orbits: Vec<PeriodicOrbit>,
    pub seeds_total: usize,
    pub seeds_converged: usize,
}

/// Newton iteration on `f^k(x) - x` (lifted) from every point of a uniform
/// seed grid; deduplicates within `PERIODIC_DEDUPE` and classifies each point
/// via the eigenvalues of the derivative cocycle.
pub fn find_periodic_points(
    f: &dyn TorusMap,
    period: usize,
    seed_grid_resolution: usize,
) -> PeriodicSearch {
    let dim = f.dimension();
    let total = seed_grid_resolution.pow(dim as u32);
    let candidates: Vec<Option<TorusPoint>> = exec::map_indexed(total, |idx| {
        let mut rem = idx;
        let mut coords = vec![0.0; dim];
        for c in coords.iter_mut() {
            *c = (rem % seed_grid_resolution) as f64 / seed_grid_resolution as f64;
            rem /= seed_grid_resolution;
        }
        newton_periodic(f, &TorusPoint::new(coords), period)
    });

    let seeds_converged = candidates.iter().filter(|c| c.is_some()).count();
    let mut points: Vec<TorusPoint> = candidates.into_iter().flatten().collect();
    crate::map::sort_lexicographic(&mut points);

    let mut kept: Vec<TorusPoint> = Vec::new();
    for p in points {
        if kept
            .iter()
            .all(|q| torus_distance(q, &p) >= PERIODIC_DEDUPE)
        {
            kept.push(p);
        }
    }

    let orbits = kept
        .into_iter()
        .map(|point| {
            let cocycle = derivative_cocycle(f, &point, period);
            let moduli = cocycle.eigenvalue_moduli();
            let classification = classify(&moduli);
            PeriodicOrbit {
                point,
                period,
                multiplier: cocycle.into_matrix(),
                eigenvalue_moduli: moduli,
                classification,
            }
        })
        .collect();

    PeriodicSearch {
        orbits,
        seeds_total: total,
        seeds_converged,
    }
}

fn newton_periodic(f: &dyn TorusMap, seed: &TorusPoint, k: usize) -> Option<TorusPoint> {
    let dim = f.dimension();
    let mut x = seed.clone();
    for _ in 0..MAX_NEWTON_ITERS {
        let fx = crate::map::iterate(f, &x, k);
        let residual: Vec<f64> = fx
            .coords()
            .iter()
            .zip(x.coords())
            .map(|(a, b)| wrap_signed(a - b))
            .collect();
        let rnorm = residual.iter().map(|r| r.abs()).fold(0.0, f64::max);
        if rnorm < PERIODIC_TOL {
            // independent re-verification by plain iteration
            let check = crate::map::iterate(f, &x, k);
            if torus_distance(&check, &x) < PERIODIC_TOL {
                return Some(x);
            }
            return None;
        }
        let jac = derivative_cocycle(f, &x, k);
        if jac.log_scale != 0.0 {
            return None; // runaway product; seed hopeless
        }
        let j = jac.matrix - DMatrix::identity(dim, dim);
        let rhs = nalgebra::DVector::from_column_slice(&residual);
        let step = j.lu().solve(&rhs)?;
        if step.norm() > 0.5 {
            // keep Newton local: long jumps leave the basin
            let scaled = &step * (0.5 / step.norm());
            x = TorusPoint::new(
                (0..dim).map(|i| x.coords()[i] - scaled[i]).collect(),
            );
        } else {
            x = TorusPoint::new((0..dim).map(|i| x.coords()[i] - step[i]).collect());
        }
    }
    None
}

// ---------------------------------------------------------------------------
// forward-orbit density
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrbitDensity {
    pub dense: bool,
    /// Smallest prefix length achieving the certificate, when it exists.
    pub first_n: Option<usize>,
}

/// Is the orbit segment `x, f(x), ..., f^{n_max}(x)` eps-dense, and what is
/// the smallest prefix achieving it?
pub fn forward_orbit_density(
    f: &dyn TorusMap,
    x: &TorusPoint,
    n_max: usize,
    eps: f64,
) -> Result<OrbitDensity, GeomError> {
    let mut tracker = CoverageTracker::new(f.dimension(), eps)?;
    let mut p = x.clone();
    for n in 0..=n_max {
        tracker.insert(&p);
        if tracker.is_complete() {
            return Ok(OrbitDensity {
                dense: true,
                first_n: Some(n),
            });
        }
        p = f.eval(&p);
    }
    Ok(OrbitDensity {
        dense: false,
        first_n: None,
    })
}

// ---------------------------------------------------------------------------
// pre-orbit trees and density certificates
// ---------------------------------------------------------------------------

/// Complete pre-image tree of a root point: level `j` holds all `degree^j`
/// solutions of `f^j(w) = root`.
#[derive(Debug, Clone)]
pub struct PreOrbitTree {
    pub root: TorusPoint,
    pub levels: Vec<Vec<TorusPoint>>,
}

impl PreOrbitTree {
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// Root plus every level, flattened.
    pub fn all_points(&self) -> Vec<TorusPoint> {
        let mut out = vec![self.root.clone()];
        for level in &self.levels {
            out.extend(level.iter().cloned());
        }
        out
    }
}

/// Exhaustive pre-orbit tree to `depth_max`. Fails upfront when
/// `degree^depth_max` exceeds the node budget, reporting the largest
/// feasible depth.
pub fn build_preorbit_tree(
    f: &dyn TorusMap,
    x: &TorusPoint,
    depth_max: usize,
    node_budget: usize,
) -> Result<PreOrbitTree, OrbitError> {
    let degree = f.degree() as u128;
    let needed = degree.checked_pow(depth_max as u32);
    let feasible = |budget: usize| -> usize {
        let mut d = 0usize;
        let mut n: u128 = 1;
        loop {
            match n.checked_mul(degree) {
                Some(next) if next <= budget as u128 => {
                    n = next;
                    d += 1;
                }
                _ => return d,
            }
        }
    };
    match needed {
        Some(n) if n <= node_budget as u128 => {}
        _ => {
            return Err(OrbitError::BudgetExceeded {
                requested: depth_max,
                needed: needed.unwrap_or(u128::MAX),
                budget: node_budget,
                feasible: feasible(node_budget),
            })
        }
    }

    let mut levels: Vec<Vec<TorusPoint>> = Vec::with_capacity(depth_max);
    let mut frontier = vec![x.clone()];
    for _ in 0..depth_max {
        let expanded: Vec<Result<Vec<TorusPoint>, crate::error::MapError>> =
            exec::map_indexed(frontier.len(), |i| f.inverse_branches(&frontier[i]));
        let mut level = Vec::with_capacity(frontier.len() * f.degree());
        for branch_set in expanded {
            level.extend(branch_set?);
        }
        frontier = level.clone();
        levels.push(level);
    }
    Ok(PreOrbitTree {
        root: x.clone(),
        levels,
    })
}

/// Outcome of a pruned-frontier pre-orbit density run. `certified == false`
/// with `budget_exhausted` distinguishes an inconclusive run from a clean
/// negative at full depth.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PreorbitCertificate {
    pub certified: bool,
    pub depth_used: Option<usize>,
    pub depth_reached: usize,
    pub nodes_expanded: usize,
    pub covered_fraction: f64,
    pub budget_exhausted: bool,
}

/// Density certificate for the pre-orbit of `x`: expands pre-image levels,
/// keeping only one frontier representative per covering-grid cell, so
/// memory is bounded by the grid size rather than `degree^depth`.
pub fn preorbit_density_certificate(
    f: &dyn TorusMap,
    x: &TorusPoint,
    eps: f64,
    depth_max: usize,
    node_budget: usize,
) -> Result<PreorbitCertificate, OrbitError> {
    let mut tracker = CoverageTracker::new(f.dimension(), eps)
        .map_err(|e| OrbitError::InvalidParameter(e.to_string()))?;
    let prune_grid = tracker.grid().clone();

    let mut nodes_expanded = 0usize;
    let mut frontier = vec![x.clone()];
    tracker.insert(x);
    if tracker.is_complete() {
        return Ok(PreorbitCertificate {
            certified: true,
            depth_used: Some(0),
            depth_reached: 0,
            nodes_expanded: 0,
            covered_fraction: 1.0,
            budget_exhausted: false,
        });
    }

    for depth in 1..=depth_max {
        if nodes_expanded + frontier.len() * f.degree() > node_budget {
            return Ok(PreorbitCertificate {
                certified: false,
                depth_used: None,
                depth_reached: depth - 1,
                nodes_expanded,
                covered_fraction: tracker.covered_fraction(),
                budget_exhausted: true,
            });
        }
        let expanded: Vec<Result<Vec<TorusPoint>, crate::error::MapError>> =
            exec::map_indexed(frontier.len(), |i| f.inverse_branches(&frontier[i]));
        nodes_expanded += frontier.len() * f.degree();

        let mut next: Vec<TorusPoint> = Vec::new();
        let mut claimed = std::collections::BTreeSet::new();
        for branch_set in expanded {
            for w in branch_set? {
                tracker.insert(&w);
                let cell = prune_grid.cell_index(&w);
                if claimed.insert(cell) {
                    next.push(w);
                }
            }
        }
        if tracker.is_complete() {
            return Ok(PreorbitCertificate {
                certified: true,
                depth_used: Some(depth),
                depth_reached: depth,
                nodes_expanded,
                covered_fraction: 1.0,
                budget_exhausted: false,
            });
        }
        frontier = next;
    }
    Ok(PreorbitCertificate {
        certified: false,
        depth_used: None,
        depth_reached: depth_max,
        nodes_expanded,
        covered_fraction: tracker.covered_fraction(),
        budget_exhausted: false,
    })
}

// ---------------------------------------------------------------------------
// hypothesis verifiers
// ---------------------------------------------------------------------------

/// Grid scan of the smallest singular value of `Df` outside `u0`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpansionScan {
    pub expanding: bool,
    pub min_singular_value: f64,
    pub argmin: TorusPoint,
    pub points_checked: usize,
}

/// `f` is expanding off `u0` when the smallest singular value of `Df`
/// exceeds `1 + EXPANSION_MARGIN` at every grid point outside `u0`.
pub fn verify_expanding_off_u0(
    f: &dyn TorusMap,
    u0: Option<&Ball>,
    grid_resolution: usize,
) -> ExpansionScan {
    let dim = f.dimension();
    let total = grid_resolution.pow(dim as u32);
    let results: Vec<Option<(f64, usize)>> = exec::map_indexed(total, |idx| {
        let mut rem = idx;
        let mut coords = vec![0.0; dim];
        for c in coords.iter_mut() {
            *c = (rem % grid_resolution) as f64 / grid_resolution as f64;
            rem /= grid_resolution;
        }
        let x = TorusPoint::new(coords);
        if let Some(ball) = u0 {
            if ball.contains(&x) {
                return None;
            }
        }
        Some((numeric::min_singular_value(&f.derivative(&x)), idx))
    });

    let mut min_sv = f64::INFINITY;
    let mut arg_idx = 0usize;
    let mut checked = 0usize;
    for r in results.into_iter().flatten() {
        checked += 1;
        if r.0 < min_sv {
            min_sv = r.0;
            arg_idx = r.1;
        }
    }
    let mut rem = arg_idx;
    let mut coords = vec![0.0; dim];
    for c in coords.iter_mut() {
        *c = (rem % grid_resolution) as f64 / grid_resolution as f64;
        rem /= grid_resolution;
    }
    ExpansionScan {
        expanding: min_sv > 1.0 + EXPANSION_MARGIN,
        min_singular_value: min_sv,
        argmin: TorusPoint::new(coords),
        points_checked: checked,
    }
}

/// Internal-radius-growth certificate: for some `N <= n_steps` the image of
/// the eps-ball around `x` under `f^N` contains the `r_target`-ball around
/// `f^N(x)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IrgCertificate {
    pub verified: bool,
    pub n_certified: Option<usize>,
    /// `eps` minus the farthest pull-back distance at the certified time.
    pub margin: f64,
}

/// Containment is tested through the inverse-branch representation: boundary
/// and interior samples of the target ball are pulled back along the orbit
/// branch and must land strictly inside the eps-ball around `x`.
pub fn verify_irg(
    f: &dyn TorusMap,
    x: &TorusPoint,
    u0: Option<&Ball>,
    n_steps: usize,
    eps: f64,
    r_target: f64,
) -> Result<IrgCertificate, OrbitError> {
    if !(eps > 0.0 && r_target > 0.0) {
        return Err(OrbitError::InvalidParameter(
            "eps and r_target must be positive".into(),
        ));
    }
    let orbit_points = orbit(f, x, n_steps);
    if let Some(ball) = u0 {
        for (step, p) in orbit_points.iter().enumerate() {
            if ball.contains(p) {
                return Err(OrbitError::OrbitEntersU0 { step });
            }
        }
    }

    let dim = f.dimension();
    let boundary = sphere_directions(dim, 64 * dim);
    let interior = sphere_directions(dim, 16 * dim);

    for n in 1..=n_steps {
        let center = &orbit_points[n];
        let mut samples: Vec<TorusPoint> = boundary
            .iter()
            .map(|d| center.translate(&d.scale(r_target)))
            .collect();
        samples.extend(
            interior
                .iter()
                .map(|d| center.translate(&d.scale(r_target * 0.5))),
        );
        samples.push(center.clone());

        let pulled: Vec<Option<f64>> = exec::map_indexed(samples.len(), |i| {
            pull_back_along_orbit(f, &orbit_points, n, &samples[i])
                .map(|w| torus_distance(&w, x))
        });
        if pulled.iter().all(|d| matches!(d, Some(d) if *d < eps)) {
            let worst = pulled.iter().flatten().cloned().fold(0.0, f64::max);
            return Ok(IrgCertificate {
                verified: true,
                n_certified: Some(n),
                margin: eps - worst,
            });
        }
    }
    Ok(IrgCertificate {
        verified: false,
        n_certified: None,
        margin: 0.0,
    })
}

/// Sampled falsifier for the arc-escape hypothesis: every arc in the
/// complement of `u0` with diameter above `delta0` should contain a point
/// whose whole forward orbit stays outside `u1`.
///
/// The hypothesis quantifies over all arcs and all future times; no finite
/// certificate exists, so a passing run is evidence, not proof. Arcs are
/// random straight segments avoiding `u0`; on each, a greedy refinement
/// follows a parameter subinterval whose images stay outside `u1`, and the
/// surviving midpoint is re-verified by direct iteration over the horizon.
/// Expansion shrinks the surviving parameter window geometrically, so the
/// horizon must stay within what f64 parameter resolution supports
/// (roughly `52 / log2(expansion)` steps).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArcEscapeReport {
    pub arcs_tested: usize,
    pub arcs_with_escape_point: usize,
    pub horizon: usize,
    pub passed: bool,
}

pub fn sampled_arc_escape(
    f: &dyn TorusMap,
    u0: &Ball,
    u1: &Ball,
    delta0: f64,
    n_arcs: usize,
    horizon: usize,
    seed: u64,
) -> ArcEscapeReport {
    use rand::Rng;
    let dim = f.dimension();
    const PROBES: usize = 65;

    let escapes: Vec<bool> = exec::map_indexed(n_arcs, |i| {
        let mut rng = exec::rng_for(seed, i as u64);
        'arcs: for _ in 0..200 {
            // rejection-sample an anchor and direction keeping the whole
            // segment outside u0
            let anchor = TorusPoint::new((0..dim).map(|_| rng.gen::<f64>()).collect());
            let dir_raw: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>() - 0.5).collect();
            let norm = dir_raw.iter().map(|c| c * c).sum::<f64>().sqrt();
            if norm < 1e-9 {
                continue;
            }
            let length = delta0 * 1.05;
            let dir: Vec<f64> = dir_raw.iter().map(|c| c / norm * length).collect();
            let at = |t: f64| -> TorusPoint {
                anchor.translate(&crate::torus::TorusVector::new(
                    dir.iter().map(|c| c * t).collect(),
                ))
            };
            for p in 0..PROBES {
                if u0.contains(&at(p as f64 / (PROBES - 1) as f64)) {
                    continue 'arcs;
                }
            }

            // greedy refinement: each probe checks its whole orbit prefix,
            // so surviving probes are genuine finite-horizon witnesses and
            // the kept window always contains at least one
            let survives = |t: f64, k: usize| -> bool {
                let mut x = at(t);
                for _ in 1..=k {
                    x = f.eval(&x);
                    if u1.contains(&x) {
                        return false;
                    }
                }
                true
            };
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            for k in 1..=horizon {
                let mut best: Option<(usize, usize)> = None;
                let mut run_start: Option<usize> = None;
                for p in 0..PROBES {
                    let t = lo + (hi - lo) * p as f64 / (PROBES - 1) as f64;
                    match (survives(t, k), run_start) {
                        (true, None) => run_start = Some(p),
                        (false, Some(s)) => {
                            if best.is_none_or(|(bs, be)| be - bs < p - 1 - s) {
                                best = Some((s, p - 1));
                            }
                            run_start = None;
                        }
                        _ => {}
                    }
                }
                if let Some(s) = run_start {
                    if best.is_none_or(|(bs, be)| be - bs < PROBES - 1 - s) {
                        best = Some((s, PROBES - 1));
                    }
                }
                let Some((s, e)) = best else {
                    return false; // no surviving parameter at this step
                };
                let width = hi - lo;
                let new_lo = lo + width * s as f64 / (PROBES - 1) as f64;
                let new_hi = lo + width * e as f64 / (PROBES - 1) as f64;
                lo = new_lo;
                hi = new_hi.max(new_lo);
            }
            // at least one probe of the final window verified the full
            // horizon; confirm once more on the best-run left endpoint
            return survives(lo, horizon);
        }
        false
    });
    let arcs_with_escape_point = escapes.iter().filter(|e| **e).count();
    ArcEscapeReport {
        arcs_tested: n_arcs,
        arcs_with_escape_point,
        horizon,
        passed: arcs_with_escape_point == n_arcs,
    }
}

/// Pull `target` (near `orbit_points[n]`) back `n` steps along the orbit,
/// choosing at each step the inverse branch nearest to the orbit point.
/// Returns `None` when branch tracking becomes ambiguous.
pub(crate) fn pull_back_along_orbit(
    f: &dyn TorusMap,
    orbit_points: &[TorusPoint],
    n: usize,
    target: &TorusPoint,
) -> Option<TorusPoint> {
    let mut w = target.clone();
    for j in (0..n).rev() {
        let branches = f.inverse_branches(&w).ok()?;
        let (idx, best, second) = nearest_branch(&branches, &orbit_points[j]);
        if best > 0.3 || (second.is_finite() && best > 0.5 * second) {
            return None;
        }
        w = branches[idx].clone();
    }
    Some(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::{DoublingFamilyMap, LinearToralMap};

    fn doubling() -> DoublingFamilyMap {
        DoublingFamilyMap::pure(2).unwrap()
    }

    #[test]
    fn doubling_fixed_point_is_a_source() {
        let f = doubling();
        let search = find_periodic_points(&f, 1, 16);
        assert_eq!(search.orbits.len(), 1);
        let orb = &search.orbits[0];
        assert!(orb.point.coords()[0].abs() < 1e-9);
        assert!((orb.multiplier[(0, 0)] - 2.0).abs() < 1e-9);
        assert_eq!(orb.classification, Classification::Source);
    }

    #[test]
    fn doubling_period_two_points() {
        let f = doubling();
        let search = find_periodic_points(&f, 2, 64);
        // fixed points of f^2: 0, 1/3, 2/3
        assert_eq!(search.orbits.len(), 3);
        let mut xs: Vec<f64> = search.orbits.iter().map(|o| o.point.coords()[0]).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(xs[0].abs() < 1e-9);
        assert!((xs[1] - 1.0 / 3.0).abs() < 1e-9);
        assert!((xs[2] - 2.0 / 3.0).abs() < 1e-9);
        for o in &search.orbits {
            assert_eq!(o.classification, Classification::Source);
            assert!((o.multiplier[(0, 0)] - 4.0).abs() < 1e-8);
        }
    }

    #[test]
    fn periodic_count_matches_analytic_formula() {
        // #Fix(f^k) = 2^k - 1 for the doubling map
        let f = doubling();
        for k in 1..=10 {
            let expected = (1usize << k) - 1;
            let res = 4 * (1 << k);
            let search = find_periodic_points(&f, k, res.min(4096));
            assert_eq!(search.orbits.len(), expected, "period {k}");
        }
    }

    #[test]
    fn reported_orbits_reverify_under_iteration() {
        let f = doubling();
        for o in find_periodic_points(&f, 6, 512).orbits {
            let back = crate::map::iterate(&f, &o.point, 6);
            assert!(torus_distance(&back, &o.point) < 1e-9);
        }
    }

    #[test]
    fn fixed_point_orbit_is_not_dense() {
        let f = doubling();
        let d = forward_orbit_density(&f, &TorusPoint::circle(0.0), 100, 0.4).unwrap();
        assert!(!d.dense);
    }

    #[test]
    fn any_point_is_dense_beyond_diameter() {
        let f = doubling();
        let d = forward_orbit_density(&f, &TorusPoint::circle(0.3), 10, 0.51).unwrap();
        assert!(d.dense);
        assert_eq!(d.first_n, Some(0));
    }

    #[test]
    fn preorbit_tree_of_doubling_origin() {
        let f = doubling();
        let tree = build_preorbit_tree(&f, &TorusPoint::circle(0.0), 3, 100).unwrap();
        assert_eq!(tree.levels[0].len(), 2);
        assert_eq!(tree.levels[1].len(), 4);
        assert_eq!(tree.levels[2].len(), 8);
        // level 3 should be the dyadics k/8
        let mut xs: Vec<f64> = tree.levels[2].iter().map(|p| p.coords()[0]).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (k, x) in xs.iter().enumerate() {
            assert!((x - k as f64 / 8.0).abs() < 1e-12);
        }
    }

    #[test]
    fn preorbit_tree_of_one_third() {
        // exhaustive 2w = y (mod 1) solving gives known levels
        let f = doubling();
        let tree = build_preorbit_tree(&f, &TorusPoint::circle(1.0 / 3.0), 2, 100).unwrap();
        let mut l1: Vec<f64> = tree.levels[0].iter().map(|p| p.coords()[0]).collect();
        l1.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((l1[0] - 1.0 / 6.0).abs() < 1e-12);
        assert!((l1[1] - 2.0 / 3.0).abs() < 1e-12);
        let mut l2: Vec<f64> = tree.levels[1].iter().map(|p| p.coords()[0]).collect();
        l2.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (got, want) in l2.iter().zip([1.0 / 12.0, 1.0 / 3.0, 7.0 / 12.0, 5.0 / 6.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn preorbit_tree_budget_arithmetic() {
        let f = LinearToralMap::homothety(2, 4).unwrap(); // degree 16
        let err = build_preorbit_tree(&f, &TorusPoint::origin(2), 5, 1_000_000).unwrap_err();
        match err {
            OrbitError::BudgetExceeded {
                needed, feasible, ..
            } => {
                assert_eq!(needed, 16u128.pow(5));
                assert_eq!(feasible, 4);
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn applying_map_to_tree_level_recovers_previous() {
        let f = doubling();
        let tree = build_preorbit_tree(&f, &TorusPoint::circle(0.37), 4, 100).unwrap();
        for j in 1..tree.depth() {
            for w in &tree.levels[j] {
                let up = f.eval(w);
                let hit = tree.levels[j - 1]
                    .iter()
                    .any(|v| torus_distance(v, &up) < 1e-10);
                assert!(hit);
            }
        }
    }

    #[test]
    fn doubling_preorbit_certificate_at_dyadic_scales() {
        let f = doubling();
        let zero = TorusPoint::circle(0.0);
        let cert =
            preorbit_density_certificate(&f, &zero, 2f64.powi(-9), 10, 100_000).unwrap();
        assert!(cert.certified);
        // depth-9 dyadics already sit within 2^-10 < 2^-9 of every grid point
        assert_eq!(cert.depth_used, Some(9));

        let finer =
            preorbit_density_certificate(&f, &zero, 2f64.powi(-11), 10, 100_000).unwrap();
        assert!(!finer.certified);
        assert_eq!(finer.depth_reached, 10);
    }

    #[test]
    fn preorbit_certificate_monotone_in_eps() {
        let f = doubling();
        let x = TorusPoint::circle(0.37);
        let tight = preorbit_density_certificate(&f, &x, 0.01, 12, 1 << 20).unwrap();
        let loose = preorbit_density_certificate(&f, &x, 0.05, 12, 1 << 20).unwrap();
        assert!(tight.certified && loose.certified);
        assert!(loose.depth_used.unwrap() <= tight.depth_used.unwrap());
    }

    #[test]
    fn expanding_scan_on_linear_map() {
        let f = LinearToralMap::homothety(2, 2).unwrap();
        let scan = verify_expanding_off_u0(&f, None, 32);
        assert!(scan.expanding);
        assert_eq!(scan.min_singular_value, 2.0);
        assert_eq!(scan.points_checked, 32 * 32);
    }

    #[test]
    fn irg_certificate_on_doubling_period_two_point() {
        let f = doubling();
        let x = TorusPoint::circle(1.0 / 3.0);
        let cert = verify_irg(&f, &x, None, 10, 0.01, 0.2).unwrap();
        assert!(cert.verified);
        // exact image radius is 2^N * 0.01; containment of the 0.2-ball
        // first holds at N = 5
        assert_eq!(cert.n_certified, Some(5));
    }

    #[test]
    fn irg_rejects_orbits_entering_u0() {
        let f = doubling();
        let u0 = Ball::new(TorusPoint::circle(2.0 / 3.0), 0.05).unwrap();
        let err = verify_irg(&f, &TorusPoint::circle(1.0 / 3.0), Some(&u0), 10, 0.01, 0.2)
            .unwrap_err();
        assert!(matches!(err, OrbitError::OrbitEntersU0 { step: 1 }));
    }

    #[test]
    fn arc_escape_evidence_on_doubling() {
        let f = doubling();
        let u0 = Ball::new(TorusPoint::circle(0.9), 0.01).unwrap();
        let u1 = Ball::new(TorusPoint::circle(0.9), 0.02).unwrap();
        let report = sampled_arc_escape(&f, &u0, &u1, 0.1, 16, 30, 3);
        assert_eq!(report.arcs_tested, 16);
        assert!(report.passed, "{report:?}");
    }

    #[test]
    fn irg_linear_growth_bound() {
        let f = LinearToralMap::homothety(1, 3).unwrap();
        let cert = verify_irg(&f, &TorusPoint::circle(0.21), None, 8, 0.01, 0.1).unwrap();
        assert!(cert.verified);
        // 3^N * 0.01 >= 0.1 first at N = 3 (3^2 = 9 short of 10)
        assert_eq!(cert.n_certified, Some(3));
    }
}
