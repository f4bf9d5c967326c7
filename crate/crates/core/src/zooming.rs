//! Zooming contractions, certified zooming times along orbits, zooming
//! frequency, and the source zooming data (block length, radius, and the
//! measured block contraction) that seeds the induced-map construction.

use serde::{Deserialize, Serialize};

use crate::error::ZoomingError;
use crate::map::{derivative_cocycle, nearest_branch, orbit, TorusMap};
use crate::tolerances::{DELTA_FLOOR, SAMPLE_TOL};
use crate::torus::{sphere_directions, torus_distance, TorusPoint};

/// The exponential zooming-contraction family `alpha_n(r) = lambda^n r`.
///
/// The constructor accepts any positive rate so the axiom checker can
/// exhibit violations for degenerate rates (`lambda >= 1`).
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct ZoomingContraction {
    pub lambda: f64,
}

impl ZoomingContraction {
    pub fn new(lambda: f64) -> Self {
        Self { lambda }
    }

    /// `alpha_n(r) = lambda^n r`.
    pub fn alpha(&self, n: usize, r: f64) -> f64 {
        self.lambda.powi(n as i32) * r
    }

    /// Closed form of `sum_{n>=1} alpha_n(r)` for `lambda < 1`:
    /// `r * lambda / (1 - lambda)`.
    pub fn series_sum(&self, r: f64) -> f64 {
        r * self.lambda / (1.0 - self.lambda)
    }
}

/// Margins from a passing axiom check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AxiomReport {
    pub lambda: f64,
    /// min of `r - alpha_n(r)` over the grid.
    pub strict_contraction_margin: f64,
    /// min of `alpha_n(r') - alpha_n(r)` over `r <= r'` grid pairs.
    pub monotonicity_margin: f64,
    /// min of `alpha_{n+m}(r) - alpha_n(alpha_m(r))` over the grid.
    pub submultiplicativity_margin: f64,
    /// sup over `r <= 1` of the partial series (500 terms).
    pub series_sup: f64,
    pub grid_points: usize,
}

/// Verify the four zooming-contraction axioms on a deterministic `(r, n, m)`
/// grid with `r_count * n_count^2` combinations.
pub fn check_zooming_axioms(
    alpha: &ZoomingContraction,
    r_count: usize,
    n_count: usize,
) -> Result<AxiomReport, ZoomingError> {
    if alpha.lambda.is_nan() || alpha.lambda <= 0.0 {
        return Err(ZoomingError::InvalidParameter(format!(
            "lambda must be positive, got {}",
            alpha.lambda
        )));
    }
    let rs: Vec<f64> = (1..=r_count).map(|i| i as f64 / r_count as f64).collect();
    let ns: Vec<usize> = (1..=n_count).collect();

    let mut strict = f64::INFINITY;
    let mut mono = f64::INFINITY;
    let mut submult = f64::INFINITY;

    for &r in &rs {
        for &n in &ns {
            let a = alpha.alpha(n, r);
            let margin = r - a;
            if margin <= 0.0 {
                return Err(ZoomingError::AxiomViolation {
                    axiom: "alpha_n(r) < r".into(),
                    witness: format!("r = {r}, n = {n}, alpha = {a}"),
                });
            }
            strict = strict.min(margin);
            for &m in &ns {
                let lhs = alpha.alpha(n, alpha.alpha(m, r));
                let rhs = alpha.alpha(n + m, r);
                let sm = rhs - lhs;
                if sm < -1e-15 {
                    return Err(ZoomingError::AxiomViolation {
                        axiom: "alpha_n(alpha_m(r)) <= alpha_{n+m}(r)".into(),
                        witness: format!("r = {r}, n = {n}, m = {m}"),
                    });
                }
                submult = submult.min(sm);
            }
        }
    }
    // monotonicity over consecutive grid radii
    for &n in &ns {
        for w in rs.windows(2) {
            let d = alpha.alpha(n, w[1]) - alpha.alpha(n, w[0]);
            if d < 0.0 {
                return Err(ZoomingError::AxiomViolation {
                    axiom: "alpha_n monotone in r".into(),
                    witness: format!("n = {n}, r = {} vs {}", w[0], w[1]),
                });
            }
            mono = mono.min(d);
        }
    }
    // summability: partial sums must stabilize for every grid radius
    let mut series_sup = 0.0f64;
    for &r in &rs {
        let mut sum = 0.0;
        for n in 1..=500usize {
            sum += alpha.alpha(n, r);
        }
        let tail = alpha.alpha(501, r);
        if !sum.is_finite() || tail > 1e-6 * sum.max(1e-300) {
            return Err(ZoomingError::AxiomViolation {
                axiom: "sum_n alpha_n(r) < infinity".into(),
                witness: format!("r = {r}, partial sum {sum}, term 501 = {tail}"),
            });
        }
        series_sup = series_sup.max(sum);
    }

    Ok(AxiomReport {
        lambda: alpha.lambda,
        strict_contraction_margin: strict,
        monotonicity_margin: mono,
        submultiplicativity_margin: submult,
        series_sup,
        grid_points: rs.len() * ns.len() * ns.len(),
    })
}

/// A certified zooming time: the inverse branch of `f^n` along the orbit of
/// `point` is defined on the delta-ball around `f^n(point)` and satisfies
/// the sampled contraction inequality at every intermediate step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ZoomingCertificate {
    pub point: TorusPoint,
    pub time: usize,
    pub delta: f64,
    /// Smallest observed `alpha_{n-j}(dist_n) - dist_j` over all sampled
    /// pairs and intermediate steps (0 for exactly self-similar maps).
    pub contraction_margin: f64,
    /// Largest pull-back distance from `point` (size of the zooming
    /// pre-ball).
    pub preball_radius: f64,
    pub pairs_checked: usize,
}

/// Pull `target` back along `orbit_points[0..=n]`, returning the whole chain
/// (`chain[j]` maps forward to `chain[j+1]`, `chain[n] = target`).
pub(crate) fn pull_back_chain(
    f: &dyn TorusMap,
    orbit_points: &[TorusPoint],
    n: usize,
    target: &TorusPoint,
) -> Result<Vec<TorusPoint>, ZoomingError> {
    let mut chain = vec![TorusPoint::origin(f.dimension()); n + 1];
    chain[n] = target.clone();
    for j in (0..n).rev() {
        let branches = f.inverse_branches(&chain[j + 1])?;
        let (idx, best, second) = nearest_branch(&branches, &orbit_points[j]);
        if best > 0.3 {
            return Err(ZoomingError::BranchUndefined {
                step: j,
                reason: format!("nearest branch is {best:.4} from the orbit point"),
            });
        }
        if second.is_finite() && best > 0.5 * second {
            return Err(ZoomingError::BranchUndefined {
                step: j,
                reason: format!(
                    "ambiguous branch selection (nearest {best:.4}, runner-up {second:.4})"
                ),
            });
        }
        chain[j] = branches[idx].clone();
    }
    Ok(chain)
}

/// Deterministic sample pairs in the closed delta-ball around `center`:
/// antipodal boundary pairs, center-to-boundary pairs, and skewed interior
/// pairs, `count` in total.
fn sample_pairs(
    center: &TorusPoint,
    delta: f64,
    count: usize,
) -> Vec<(TorusPoint, TorusPoint)> {
    let dim = center.dim();
    let dirs = sphere_directions(dim, count.max(4));
    let radii = [1.0, 0.5, 0.75, 0.25];
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let d1 = &dirs[i % dirs.len()];
        let d2 = &dirs[(i * 7 + 3) % dirs.len()];
        let (a, b) = match i % 4 {
            0 => (
                center.translate(&d1.scale(delta)),
                center.translate(&d1.scale(-delta)),
            ),
            1 => (center.clone(), center.translate(&d1.scale(delta))),
            _ => (
                center.translate(&d1.scale(delta * radii[i % radii.len()])),
                center.translate(&d2.scale(delta * radii[(i + 1) % radii.len()])),
            ),
        };
        out.push((a, b));
    }
    out
}

/// Certify `n` as an `(alpha, delta)`-zooming time for `x`: constructs the
/// inverse branch of `f^n` along the orbit on the delta-ball at `f^n(x)` and
/// checks `dist(f^j u, f^j v) <= alpha_{n-j}(dist(f^n u, f^n v))` on `32 n`
/// sampled pairs.
pub fn is_zooming_time(
    f: &dyn TorusMap,
    x: &TorusPoint,
    n: usize,
    alpha: &ZoomingContraction,
    delta: f64,
) -> Result<ZoomingCertificate, ZoomingError> {
    if n == 0 {
        return Err(ZoomingError::InvalidParameter("n must be >= 1".into()));
    }
    let orbit_points = orbit(f, x, n);
    let center = &orbit_points[n];
    let pairs = sample_pairs(center, delta, 32 * n);

    type ChainPair = (Vec<TorusPoint>, Vec<TorusPoint>);
    let chains: Vec<Result<ChainPair, ZoomingError>> =
        crate::exec::map_indexed(pairs.len(), |i| {
            let (a, b) = &pairs[i];
            Ok((
                pull_back_chain(f, &orbit_points, n, a)?,
                pull_back_chain(f, &orbit_points, n, b)?,
            ))
        });

    let mut margin = f64::INFINITY;
    let mut preball_radius = 0.0f64;
    for chain_pair in chains {
        let (ca, cb) = chain_pair?;
        let dist_n = torus_distance(&ca[n], &cb[n]);
        preball_radius = preball_radius
            .max(torus_distance(&ca[0], x))
            .max(torus_distance(&cb[0], x));
        for j in 0..n {
            let d = torus_distance(&ca[j], &cb[j]);
            let bound = alpha.alpha(n - j, dist_n);
            if d > bound + SAMPLE_TOL {
                return Err(ZoomingError::ContractionFailed {
                    step: j,
                    dist: d,
                    bound,
                });
            }
            margin = margin.min(bound - d);
        }
    }
    Ok(ZoomingCertificate {
        point: x.clone(),
        time: n,
        delta,
        contraction_margin: margin,
        preball_radius,
        pairs_checked: pairs.len(),
    })
}

/// Fraction of times `j <= n_max` certified as zooming times, with the
/// prefix sequence for limsup estimation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ZoomingFrequency {
    pub certified: Vec<bool>,
    pub prefix_frequencies: Vec<f64>,
    pub frequency: f64,
}

pub fn zooming_frequency(
    f: &dyn TorusMap,
    x: &TorusPoint,
    alpha: &ZoomingContraction,
    delta: f64,
    n_max: usize,
) -> ZoomingFrequency {
    let certified: Vec<bool> = crate::exec::map_indexed(n_max, |i| {
        is_zooming_time(f, x, i + 1, alpha, delta).is_ok()
    });
    let mut prefix = Vec::with_capacity(n_max);
    let mut count = 0usize;
    for (i, c) in certified.iter().enumerate() {
        if *c {
            count += 1;
        }
        prefix.push(count as f64 / (i + 1) as f64);
    }
    let frequency = *prefix.last().unwrap_or(&0.0);
    ZoomingFrequency {
        certified,
        prefix_frequencies: prefix,
        frequency,
    }
}

/// Data extracted from a periodic source: the block length `ell = n0 *
/// period` past which the inverse blocks contract by at least 1/16, the
/// admissible radius `delta`, and the measured block contraction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SourceZoomingData {
    pub source_point: TorusPoint,
    pub period: usize,
    pub n0: usize,
    pub ell: usize,
    pub delta: f64,
    /// Measured worst contraction ratio of the ell-step inverse branch on
    /// the delta-ball boundary (must be <= 1/16).
    pub contraction_factor: f64,
    /// log 16: the block contraction exponent.
    pub lambda0: f64,
    /// log 8: the per-block rate used downstream.
    pub lambda1: f64,
    /// min over the orbit of `log sigma_min(Df^{n0*period}) - log 32`.
    pub log32_margin: f64,
}

/// Find the smallest `n0` with `log(||(Df^{n*period}(q))^{-1}||^{-1}) >
/// log 32` along the whole orbit (checked on a window beyond `n0`), then the
/// largest `delta <= delta_search` for which every ell-step inverse branch
/// fixing the orbit is a 1/16-contraction on the delta-ball.
pub fn compute_source_zooming_data(
    f: &dyn TorusMap,
    source: &crate::orbits::PeriodicOrbit,
    delta_search: f64,
) -> Result<SourceZoomingData, ZoomingError> {
    if source.classification != crate::orbits::Classification::Source {
        return Err(ZoomingError::NotASource(format!(
            "{:?}",
            source.classification
        )));
    }
    let gamma = source.period;
    let orbit_points = orbit(f, &source.point, gamma.saturating_sub(1));

    const N_CAP: usize = 64;
    const WINDOW: usize = 8;
    let log32 = 32f64.ln();
    let mut n0 = None;
    'search: for n in 1..=N_CAP {
        for m in n..=(n + WINDOW).min(N_CAP + WINDOW) {
            for q in &orbit_points {
                let c = derivative_cocycle(f, q, m * gamma);
                if c.log_min_singular_value() <= log32 {
                    continue 'search;
                }
            }
        }
        n0 = Some(n);
        break;
    }
    let n0 = n0.ok_or_else(|| {
        ZoomingError::InvalidParameter(format!(
            "no block length below {N_CAP} reaches the log 32 expansion bound"
        ))
    })?;
    let ell = n0 * gamma;
    let log32_margin = orbit_points
        .iter()
        .map(|q| derivative_cocycle(f, q, ell).log_min_singular_value() - log32)
        .fold(f64::INFINITY, f64::min);

    // contraction predicate for the bisection
    let measure = |delta: f64| -> Option<f64> {
        let mut worst: f64 = 0.0;
        for q in &orbit_points {
            let block_orbit = orbit(f, q, ell);
            let dirs = sphere_directions(f.dimension(), 16 * f.dimension());
            for dir in &dirs {
                for scale in [1.0, 0.5] {
                    let target = q.translate(&dir.scale(delta * scale));
                    let chain = pull_back_chain(f, &block_orbit, ell, &target).ok()?;
                    let ratio = torus_distance(&chain[0], q)
                        / torus_distance(&target, q).max(1e-300);
                    worst = worst.max(ratio);
                }
            }
        }
        Some(worst)
    };
    let ok = |delta: f64| -> bool {
        matches!(measure(delta), Some(w) if w <= 1.0 / 16.0 + SAMPLE_TOL)
    };

    let delta = if ok(delta_search) {
        delta_search
    } else {
        if !ok(DELTA_FLOOR) {
            return Err(ZoomingError::DeltaNotFound { floor: DELTA_FLOOR });
        }
        let mut lo = DELTA_FLOOR;
        let mut hi = delta_search;
        for _ in 0..50 {
            let mid = 0.5 * (lo + hi);
            if ok(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    let contraction_factor = measure(delta).ok_or(ZoomingError::DeltaNotFound {
        floor: DELTA_FLOOR,
    })?;

    Ok(SourceZoomingData {
        source_point: source.point.clone(),
        period: gamma,
        n0,
        ell,
        delta,
        contraction_factor,
        lambda0: 16f64.ln(),
        lambda1: 8f64.ln(),
        log32_margin,
    })
}
