//! Flat-torus arithmetic: points, vectors, balls, distances, and the dyadic
//! covering grids behind every density certificate.
//!
//! Coordinates are stored reduced to `[0, 1)`; lifts are materialized only
//! transiently inside distance and derivative computations, so long orbits do
//! not drift.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::GeomError;

/// Reduce a real number to `[0, 1)`.
#[inline]
pub fn wrap_unit(x: f64) -> f64 {
    let r = x.rem_euclid(1.0);
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Signed representative of `d` modulo 1 in `[-1/2, 1/2]`.
#[inline]
pub fn wrap_signed(d: f64) -> f64 {
    d - d.round()
}

/// A point on the flat n-torus, every coordinate in `[0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    coords: Vec<f64>,
}

impl TorusPoint {
    /// Build a point, reducing each coordinate mod 1. Reduction is
    /// idempotent: `new(p.coords())` returns `p` bit for bit.
    pub fn new(coords: Vec<f64>) -> Self {
        Self {
            coords: coords.into_iter().map(wrap_unit).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Convenience constructor for the circle.
    pub fn circle(x: f64) -> Self {
        Self::new(vec![x])
    }

    /// The origin of `T^n`.
    pub fn origin(dim: usize) -> Self {
        Self {
            coords: vec![0.0; dim],
        }
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.coords)
    }

    /// Shortest displacement from `self` to `other`, one signed representative
    /// per coordinate.
    pub fn displacement_to(&self, other: &TorusPoint) -> TorusVector {
        TorusVector::new(
            self.coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| wrap_signed(b - a))
                .collect(),
        )
    }

    /// Translate by a tangent vector and reduce.
    pub fn translate(&self, v: &TorusVector) -> TorusPoint {
        TorusPoint::new(
            self.coords
                .iter()
                .zip(v.components())
                .map(|(a, d)| a + d)
                .collect(),
        )
    }
}

/// A tangent displacement on the flat torus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusVector {
    components: Vec<f64>,
}

impl TorusVector {
    pub fn new(components: Vec<f64>) -> Self {
        Self { components }
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            components: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }

    pub fn norm(&self) -> f64 {
        self.components.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn scale(&self, s: f64) -> TorusVector {
        TorusVector::new(self.components.iter().map(|c| c * s).collect())
    }
}

/// Flat-torus distance: minimum over integer translates of the Euclidean
/// distance between lifts. Bounded by `sqrt(n)/2`.
pub fn torus_distance(x: &TorusPoint, y: &TorusPoint) -> f64 {
    debug_assert_eq!(x.dim(), y.dim());
    x.coords()
        .iter()
        .zip(y.coords())
        .map(|(a, b)| {
            let d = wrap_signed(a - b);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// A metric ball with radius below 1/2, so it is isometric to a Euclidean
/// ball and membership is unambiguous.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: TorusPoint,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: TorusPoint, radius: f64) -> Result<Self, GeomError> {
        if !(radius > 0.0 && radius < 0.5) {
            return Err(GeomError::BadRadius(radius));
        }
        Ok(Self { center, radius })
    }

    pub fn contains(&self, p: &TorusPoint) -> bool {
        torus_distance(&self.center, p) < self.radius
    }

    /// Deterministic sample points on the boundary sphere. On the circle this
    /// alternates the two endpoints; in higher dimension it sweeps great
    /// circles through the coordinate planes.
    pub fn boundary_samples(&self, count: usize) -> Vec<TorusPoint> {
        sphere_directions(self.center.dim(), count)
            .into_iter()
            .map(|dir| self.center.translate(&dir.scale(self.radius)))
            .collect()
    }
}

/// Deterministic unit directions in `R^n`: signs on the line, equally spaced
/// angles in the plane, and a spherical spiral beyond.
pub fn sphere_directions(dim: usize, count: usize) -> Vec<TorusVector> {
    let count = count.max(2);
    match dim {
        1 => (0..count)
            .map(|i| TorusVector::new(vec![if i % 2 == 0 { 1.0 } else { -1.0 }]))
            .collect(),
        2 => (0..count)
            .map(|i| {
                let theta = 2.0 * std::f64::consts::PI * (i as f64) / (count as f64);
                TorusVector::new(vec![theta.cos(), theta.sin()])
            })
            .collect(),
        _ => (0..count)
            .map(|i| {
                // Fibonacci-style spiral on S^{n-1} restricted to the first
                // three coordinates; adequate for the desk-scale dimensions.
                let t = (i as f64 + 0.5) / count as f64;
                let phi = (1.0 - 2.0 * t).acos();
                let theta = std::f64::consts::PI * (1.0 + 5f64.sqrt()) * i as f64;
                let mut c = vec![0.0; dim];
                c[0] = phi.sin() * theta.cos();
                c[1] = phi.sin() * theta.sin();
                c[2] = phi.cos();
                TorusVector::new(c)
            })
            .collect(),
    }
}

/// Dyadic covering grid of `T^n` used by the density certificates: `m = 2^k`
/// points per axis with `1/m <= eps/2`. Power-of-two meshes nest, which makes
/// every certificate monotone in `eps`.
#[derive(Debug, Clone)]
pub struct CoverGrid {
    dim: usize,
    per_axis: usize,
}

impl CoverGrid {
    /// Grid adapted to tolerance `eps`: the finest dyadic mesh `1/2^k` that is
    /// at most `eps/2`.
    pub fn for_epsilon(dim: usize, eps: f64) -> Result<Self, GeomError> {
        if eps.is_nan() || eps <= 0.0 {
            return Err(GeomError::NonPositiveEpsilon(eps));
        }
        let k = (2.0 / eps).log2().ceil().max(0.0) as u32;
        let per_axis = 1usize << k.min(26);
        Ok(Self { dim, per_axis })
    }

    /// Explicit mesh, mostly for pruning frontiers.
    pub fn with_mesh_power(dim: usize, k: u32) -> Self {
        Self {
            dim,
            per_axis: 1usize << k,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn per_axis(&self) -> usize {
        self.per_axis
    }

    pub fn mesh(&self) -> f64 {
        1.0 / self.per_axis as f64
    }

    pub fn len(&self) -> usize {
        self.per_axis.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Grid point for a flat index.
    pub fn point(&self, index: usize) -> TorusPoint {
        let mut rem = index;
        let mut coords = vec![0.0; self.dim];
        for c in coords.iter_mut() {
            *c = (rem % self.per_axis) as f64 / self.per_axis as f64;
            rem /= self.per_axis;
        }
        TorusPoint::new(coords)
    }

    /// Flat index of the cell containing `p`.
    pub fn cell_index(&self, p: &TorusPoint) -> usize {
        let mut idx = 0usize;
        for c in p.coords().iter().rev() {
            let mut i = (c * self.per_axis as f64).floor() as usize;
            if i >= self.per_axis {
                i = self.per_axis - 1;
            }
            idx = idx * self.per_axis + i;
        }
        idx
    }
}

/// Incremental coverage tracker: marks which grid points have already seen a
/// set point strictly within `eps`, so orbit-density checks can report the
/// first prefix length that covers.
pub struct CoverageTracker {
    grid: CoverGrid,
    eps: f64,
    covered: Vec<bool>,
    remaining: usize,
}

impl CoverageTracker {
    pub fn new(dim: usize, eps: f64) -> Result<Self, GeomError> {
        let grid = CoverGrid::for_epsilon(dim, eps)?;
        let n = grid.len();
        Ok(Self {
            grid,
            eps,
            covered: vec![false; n],
            remaining: n,
        })
    }

    pub fn grid(&self) -> &CoverGrid {
        &self.grid
    }

    pub fn is_complete(&self) -> bool {
        self.remaining == 0
    }

    pub fn covered_fraction(&self) -> f64 {
        1.0 - self.remaining as f64 / self.covered.len() as f64
    }

    /// Mark all grid points strictly within `eps` of `p`. Only the box of
    /// cells within radius `eps` is visited.
    pub fn insert(&mut self, p: &TorusPoint) {
        let m = self.grid.per_axis();
        let reach = (self.eps * m as f64).ceil() as i64 + 1;
        let dim = self.grid.dim();
        let base: Vec<i64> = p
            .coords()
            .iter()
            .map(|c| (c * m as f64).round() as i64)
            .collect();
        let mut offset = vec![-reach; dim];
        loop {
            let mut idx = 0usize;
            for d in (0..dim).rev() {
                let i = (base[d] + offset[d]).rem_euclid(m as i64) as usize;
                idx = idx * m + i;
            }
            if !self.covered[idx] {
                let g = self.grid.point(idx);
                if torus_distance(&g, p) < self.eps {
                    self.covered[idx] = true;
                    self.remaining -= 1;
                }
            }
            // advance the odometer
            let mut d = 0;
            loop {
                if d == dim {
                    return;
                }
                offset[d] += 1;
                if offset[d] <= reach {
                    break;
                }
                offset[d] = -reach;
                d += 1;
            }
        }
    }
}

/// Grid certificate for `eps`-density of a finite set: passes when every
/// point of the dyadic covering grid lies strictly within `eps` of the set.
///
/// A passing check implies every torus point is within `eps + h*sqrt(n)/2`
/// of the set (`h <= eps/2` the mesh), and any genuinely `eps/2`-covering set
/// passes. Because the dyadic meshes nest, a pass at `eps` implies a pass at
/// every larger tolerance.
pub fn is_epsilon_dense(points: &[TorusPoint], eps: f64) -> Result<bool, GeomError> {
    if points.is_empty() {
        return Err(GeomError::EmptySet);
    }
    let mut tracker = CoverageTracker::new(points[0].dim(), eps)?;
    for p in points {
        tracker.insert(p);
        if tracker.is_complete() {
            return Ok(true);
        }
    }
    Ok(tracker.is_complete())
}
