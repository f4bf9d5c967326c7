//! The map abstraction: evaluation, derivative, topological degree, and
//! enumeration of local inverse branches.
//!
//! Everything downstream (orbits, zooming certificates, induced maps) talks
//! to a `dyn TorusMap`; the concrete families live in [`crate::maps`].

use nalgebra::DMatrix;

use crate::error::MapError;
use crate::tolerances::{BRANCH_COLLISION_TOL, BRANCH_TOL, MAX_NEWTON_ITERS, NEWTON_TOL};
use crate::torus::{torus_distance, wrap_signed, TorusPoint};

/// A local diffeomorphism of the n-torus without critical points.
///
/// Implementations must be immutable value objects: evaluation, derivative
/// and branch enumeration are pure, so they are freely parallelizable.
pub trait TorusMap: Send + Sync {
    fn dimension(&self) -> usize;

    /// Topological degree: number of pre-images of a regular value; equals
    /// `|det L|` for the linear part `L` of the lift.
    fn degree(&self) -> usize;

    fn eval(&self, x: &TorusPoint) -> TorusPoint;

    /// Derivative matrix at `x` (the lift's Jacobian; the torus is flat).
    fn derivative(&self, x: &TorusPoint) -> DMatrix<f64>;

    /// All `degree()` solutions of `f(w) = y`, sorted lexicographically by
    /// coordinates so branch indices are stable.
    fn inverse_branches(&self, y: &TorusPoint) -> Result<Vec<TorusPoint>, MapError>;

    /// Short human-readable family tag for reports.
    fn family_name(&self) -> &'static str;
}

/// `f^n(x)`.
pub fn iterate(f: &dyn TorusMap, x: &TorusPoint, n: usize) -> TorusPoint {
    let mut p = x.clone();
    for _ in 0..n {
        p = f.eval(&p);
    }
    p
}

/// `[x, f(x), ..., f^n(x)]` (n+1 points).
pub fn orbit(f: &dyn TorusMap, x: &TorusPoint, n: usize) -> Vec<TorusPoint> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(x.clone());
    for i in 0..n {
        let next = f.eval(&out[i]);
        out.push(next);
    }
    out
}

/// A derivative-cocycle product held as `matrix * exp(log_scale)`. Rescaling
/// kicks in once entries exceed a threshold, so long products cannot
/// overflow.
#[derive(Debug, Clone)]
pub struct ScaledMatrix {
    pub matrix: DMatrix<f64>,
    pub log_scale: f64,
}

impl ScaledMatrix {
    const RESCALE_THRESHOLD: f64 = 1e150;

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: DMatrix::identity(dim, dim),
            log_scale: 0.0,
        }
    }

    fn left_multiply(&mut self, a: &DMatrix<f64>) {
        self.matrix = a * &self.matrix;
        let max = self.matrix.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if max > Self::RESCALE_THRESHOLD {
            self.matrix /= max;
            self.log_scale += max.ln();
        }
    }

    /// Plain matrix when no rescaling happened (the usual desk-scale case).
    pub fn into_matrix(self) -> DMatrix<f64> {
        if self.log_scale == 0.0 {
            self.matrix
        } else {
            self.matrix * self.log_scale.exp()
        }
    }

    /// Moduli of the eigenvalues of the represented product, scale applied
    /// in log space, descending.
    pub fn eigenvalue_moduli(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .matrix
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm() * self.log_scale.exp())
            .collect();
        out.sort_by(|a, b| b.partial_cmp(a).unwrap());
        out
    }

    /// `log(sigma_min)` of the represented product.
    pub fn log_min_singular_value(&self) -> f64 {
        crate::numeric::min_singular_value(&self.matrix).ln() + self.log_scale
    }
}

/// Cocycle product `Df(f^{k-1}x) ... Df(x)`. For linear maps this equals
/// `E^k` exactly.
pub fn derivative_cocycle(f: &dyn TorusMap, x: &TorusPoint, k: usize) -> ScaledMatrix {
    let mut acc = ScaledMatrix::identity(f.dimension());
    let mut p = x.clone();
    for _ in 0..k {
        acc.left_multiply(&f.derivative(&p));
        p = f.eval(&p);
    }
    acc
}

/// Solve `f(w) = y (mod 1)` by Newton iteration on the lift from `seed`.
pub(crate) fn newton_preimage(
    f: &dyn TorusMap,
    y: &TorusPoint,
    seed: &TorusPoint,
) -> Result<TorusPoint, MapError> {
    let dim = f.dimension();
    let mut w = seed.clone();
    for _ in 0..MAX_NEWTON_ITERS {
        let fw = f.eval(&w);
        let residual: Vec<f64> = fw
            .coords()
            .iter()
            .zip(y.coords())
            .map(|(a, b)| wrap_signed(a - b))
            .collect();
        let rnorm = residual.iter().map(|r| r * r).sum::<f64>().sqrt();
        if rnorm < NEWTON_TOL {
            return Ok(w);
        }
        let jac = f.derivative(&w);
        let rhs = nalgebra::DVector::from_column_slice(&residual);
        let step = jac.lu().solve(&rhs).ok_or_else(|| {
            MapError::NotLocalDiffeo(format!("singular derivative near {:?}", w.coords()))
        })?;
        let coords: Vec<f64> = (0..dim).map(|i| w.coords()[i] - step[i]).collect();
        w = TorusPoint::new(coords);
    }
    let fw = f.eval(&w);
    Err(MapError::NewtonDivergence {
        seed: seed.coords().to_vec(),
        iters: MAX_NEWTON_ITERS,
        residual: torus_distance(&fw, y),
    })
}

/// Validate a freshly enumerated branch list: right count, round trips within
/// `BRANCH_TOL`, and pairwise separation above the collision threshold.
pub(crate) fn validate_branches(
    f: &dyn TorusMap,
    y: &TorusPoint,
    branches: &[TorusPoint],
) -> Result<(), MapError> {
    if branches.len() != f.degree() {
        return Err(MapError::BranchEnumeration {
            found: branches.len(),
            expected: f.degree(),
        });
    }
    for w in branches {
        let err = torus_distance(&f.eval(w), y);
        if err >= BRANCH_TOL {
            return Err(MapError::NewtonDivergence {
                seed: w.coords().to_vec(),
                iters: MAX_NEWTON_ITERS,
                residual: err,
            });
        }
    }
    for i in 0..branches.len() {
        for j in (i + 1)..branches.len() {
            let sep = torus_distance(&branches[i], &branches[j]);
            if sep < BRANCH_COLLISION_TOL {
                return Err(MapError::BranchCollision {
                    point: branches[i].coords().to_vec(),
                    separation: sep,
                });
            }
        }
    }
    Ok(())
}

/// Sort points lexicographically by coordinates (stable branch order).
pub(crate) fn sort_lexicographic(points: &mut [TorusPoint]) {
    points.sort_by(|a, b| {
        for (x, y) in a.coords().iter().zip(b.coords()) {
            match x.partial_cmp(y).unwrap() {
                std::cmp::Ordering::Equal => continue,
                ord => return ord,
            }
        }
        std::cmp::Ordering::Equal
    });
}

/// The iterate `f^power` viewed as a map in its own right. Branch
/// enumeration expands the full pre-image tree, so keep `degree^power`
/// small when calling `inverse_branches`.
pub struct IteratedMap<'a> {
    inner: &'a dyn TorusMap,
    power: usize,
}

impl<'a> IteratedMap<'a> {
    pub fn new(inner: &'a dyn TorusMap, power: usize) -> Self {
        assert!(power >= 1, "power must be at least 1");
        Self { inner, power }
    }

    pub fn power(&self) -> usize {
        self.power
    }
}

impl TorusMap for IteratedMap<'_> {
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    fn degree(&self) -> usize {
        self.inner.degree().pow(self.power as u32)
    }

    fn eval(&self, x: &TorusPoint) -> TorusPoint {
        iterate(self.inner, x, self.power)
    }

    fn derivative(&self, x: &TorusPoint) -> DMatrix<f64> {
        derivative_cocycle(self.inner, x, self.power).into_matrix()
    }

    fn inverse_branches(&self, y: &TorusPoint) -> Result<Vec<TorusPoint>, MapError> {
        if self.degree() > 1 << 20 {
            return Err(MapError::InvalidParameter(format!(
                "refusing to enumerate {} branches of an iterated map",
                self.degree()
            )));
        }
        let mut level = vec![y.clone()];
        for _ in 0..self.power {
            let mut next = Vec::with_capacity(level.len() * self.inner.degree());
            for p in &level {
                next.extend(self.inner.inverse_branches(p)?);
            }
            level = next;
        }
        sort_lexicographic(&mut level);
        validate_branches(self, y, &level)?;
        Ok(level)
    }

    fn family_name(&self) -> &'static str {
        "iterated"
    }
}

/// Among `branches`, the one nearest to `near` together with the runner-up
/// distance; the caller uses the gap to detect ambiguous branch tracking.
pub fn nearest_branch(
    branches: &[TorusPoint],
    near: &TorusPoint,
) -> (usize, f64, f64) {
    let mut best = (0usize, f64::INFINITY);
    let mut second = f64::INFINITY;
    for (i, b) in branches.iter().enumerate() {
        let d = torus_distance(b, near);
        if d < best.1 {
            second = best.1;
            best = (i, d);
        } else if d < second {
            second = d;
        }
    }
    (best.0, best.1, second)
}
