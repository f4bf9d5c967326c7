//! The perturbed 2-D example: a linear expanding endomorphism deformed by a
//! smooth isotopy supported on a ball `U_0` around a fixed point `p` (where
//! the map acquires a pitchfork local form: saddle at `p`, two repellers
//! beside it) and on small balls around fixed points `q_i` outside `U_0`
//! (where two expanding eigenvalues are mixed into a complex pair by a
//! cut-off rotation). Outside the supports the map equals the linear base.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{bump_profile, bump_profile_ds2, LinearToralMap};
use crate::error::MapError;
use crate::map::{newton_preimage, sort_lexicographic, validate_branches, TorusMap};
use crate::numeric;
use crate::torus::{torus_distance, Ball, TorusPoint};

/// A complex-rotation site: inside the ball of `radius` around `center`
/// (a fixed point of the base), the map is pre-composed with a rotation by
/// `angle * rho` in the coordinate plane `plane`, cut off smoothly.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct QSite {
    pub center: Vec<f64>,
    pub radius: f64,
    pub angle: f64,
    #[serde(default = "default_plane")]
    pub plane: (usize, usize),
}

fn default_plane() -> (usize, usize) {
    (0, 1)
}

/// Parameters for [`PerturbedExampleMap::build`]. `reference()` is the
/// shipped desk-scale parameter set on `T^2`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PerturbedExampleParams {
    /// Integer matrix of the linear expanding base.
    pub matrix: Vec<Vec<i64>>,
    /// Pitchfork site; must be a fixed point of the base inside `U_0`.
    pub p: Vec<f64>,
    /// Radius of the non-expanding region `U_0` (centered at `p`).
    pub u0_radius: f64,
    /// Radius of the pitchfork bump; support must stay inside `U_0`.
    pub bump_radius: f64,
    /// Contracted linear rate at `p` along the chosen axis (the saddle's
    /// weak eigenvalue); must lie in (0, 1).
    pub lambda_w: f64,
    /// Cubic coefficient of the pitchfork normal form.
    pub pitchfork_strength: f64,
    /// Unit eigenvector of the base along which the pitchfork acts.
    pub axis: Vec<f64>,
    /// Complex-rotation sites outside `U_0`.
    pub q_sites: Vec<QSite>,
    /// Per-axis resolution of the volume-expansion check at build time.
    #[serde(default = "default_check_resolution")]
    pub check_resolution: usize,
}

fn default_check_resolution() -> usize {
    128
}

impl PerturbedExampleParams {
    /// Reference parameters: `E = 4*Id` on `T^2` (degree 16), pitchfork at
    /// `p = (1/3, 1/3)` with weak rate 1/2, one rotation site at
    /// `q = (2/3, 2/3)` with angle `pi/7`.
    pub fn reference() -> Self {
        Self {
            matrix: vec![vec![4, 0], vec![0, 4]],
            p: vec![1.0 / 3.0, 1.0 / 3.0],
            u0_radius: 0.15,
            bump_radius: 0.12,
            lambda_w: 0.5,
            pitchfork_strength: 200.0,
            axis: vec![1.0, 0.0],
            q_sites: vec![QSite {
                center: vec![2.0 / 3.0, 2.0 / 3.0],
                radius: 0.1,
                angle: std::f64::consts::PI / 7.0,
                plane: (0, 1),
            }],
            check_resolution: 128,
        }
    }
}

/// The deformed map itself. Immutable after construction.
#[derive(Debug, Clone)]
pub struct PerturbedExampleMap {
    base: LinearToralMap,
    p: TorusPoint,
    u0: Ball,
    bump_radius: f64,
    lambda_w: f64,
    strength: f64,
    axis: DVector<f64>,
    /// Base eigenvalue along `axis`.
    lambda_axis: f64,
    q_sites: Vec<QSite>,
    /// Minimum of |det Df| found on the build-time verification grid.
    sigma: f64,
}

impl PerturbedExampleMap {
    pub fn build(params: PerturbedExampleParams) -> Result<Self, MapError> {
        let base = LinearToralMap::expanding(params.matrix.clone())?;
        let n = base.dimension();
        if params.p.len() != n || params.axis.len() != n {
            return Err(MapError::InvalidParameter(
                "p and axis must match the matrix dimension".into(),
            ));
        }
        let p = TorusPoint::new(params.p.clone());
        check_fixed_point(&base, &p, "p")?;

        let u0 = Ball::new(p.clone(), params.u0_radius).map_err(|e| {
            MapError::ConstraintViolation(format!("U0 radius: {e}"))
        })?;
        if params.bump_radius <= 0.0 || params.bump_radius > params.u0_radius {
            return Err(MapError::ConstraintViolation(format!(
                "pitchfork bump radius {} must lie in (0, u0_radius = {}]",
                params.bump_radius, params.u0_radius
            )));
        }
        if !(params.lambda_w > 0.0 && params.lambda_w < 1.0) {
            return Err(MapError::ConstraintViolation(format!(
                "lambda_w must lie in (0,1), got {}",
                params.lambda_w
            )));
        }

        // axis must be a unit eigenvector of the base
        let mut axis = DVector::from_column_slice(&params.axis);
        let norm = axis.norm();
        if norm == 0.0 {
            return Err(MapError::InvalidParameter("axis must be nonzero".into()));
        }
        axis /= norm;
        let image = base.float_matrix() * &axis;
        let lambda_axis = axis.dot(&image);
        if (&image - lambda_axis * &axis).norm() > 1e-9 {
            return Err(MapError::ConstraintViolation(
                "axis is not an eigenvector of the base matrix".into(),
            ));
        }

        // disjointness of supports
        for (i, q) in params.q_sites.iter().enumerate() {
            if q.center.len() != n {
                return Err(MapError::InvalidParameter(format!(
                    "q_sites[{i}] center has wrong dimension"
                )));
            }
            let qc = TorusPoint::new(q.center.clone());
            check_fixed_point(&base, &qc, &format!("q_sites[{i}]"))?;
            if !(q.radius > 0.0 && q.radius < 0.5) {
                return Err(MapError::ConstraintViolation(format!(
                    "q_sites[{i}] radius {} out of range",
                    q.radius
                )));
            }
            let d = torus_distance(&qc, &p);
            if d <= params.u0_radius + q.radius {
                return Err(MapError::ConstraintViolation(format!(
                    "q_sites[{i}] ball intersects U0 (dist {d:.4})"
                )));
            }
            if q.plane.0 >= n || q.plane.1 >= n || q.plane.0 == q.plane.1 {
                return Err(MapError::InvalidParameter(format!(
                    "q_sites[{i}] rotation plane indices invalid"
                )));
            }
            for (j, other) in params.q_sites.iter().enumerate().take(i) {
                let oc = TorusPoint::new(other.center.clone());
                if torus_distance(&qc, &oc) <= q.radius + other.radius {
                    return Err(MapError::ConstraintViolation(format!(
                        "q_sites[{i}] and q_sites[{j}] balls intersect"
                    )));
                }
            }
        }

        let mut map = Self {
            base,
            p,
            u0,
            bump_radius: params.bump_radius,
            lambda_w: params.lambda_w,
            strength: params.pitchfork_strength,
            axis,
            lambda_axis,
            q_sites: params.q_sites,
            sigma: f64::NAN,
        };

        // volume-expansion grid check; also guards against accidental
        // critical points introduced by the bumps
        let res = params.check_resolution.max(16);
        let sigma = min_abs_det_on_grid(&map, res);
        if sigma.is_nan() || sigma <= 1.0 {
            return Err(MapError::ConstraintViolation(format!(
                "volume expansion fails: min |det Df| = {sigma:.6} on {res}x{res} grid"
            )));
        }
        map.sigma = sigma;
        Ok(map)
    }

    pub fn base(&self) -> &LinearToralMap {
        &self.base
    }

    pub fn pitchfork_site(&self) -> &TorusPoint {
        &self.p
    }

    pub fn u0(&self) -> &Ball {
        &self.u0
    }

    pub fn q_sites(&self) -> &[QSite] {
        &self.q_sites
    }

    /// Volume-expansion constant from the build-time grid check.
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Pitchfork correction along the axis: value added to `E x`. A zero
    /// `pitchfork_strength` disables the deformation entirely, so the map
    /// coincides with its base near `p`.
    fn pitchfork_term(&self, u: &DVector<f64>) -> Option<(f64, f64, f64)> {
        if self.strength == 0.0 {
            return None;
        }
        let r2 = self.bump_radius * self.bump_radius;
        let s2 = u.norm_squared() / r2;
        if s2 >= 1.0 {
            return None;
        }
        let t = self.axis.dot(u);
        let rho = bump_profile(s2);
        let h = (self.lambda_w - self.lambda_axis) * t + self.strength * t * t * t;
        Some((rho, h, t))
    }
}

fn check_fixed_point(base: &LinearToralMap, x: &TorusPoint, label: &str) -> Result<(), MapError> {
    let fx = base.eval(x);
    let d = torus_distance(&fx, x);
    if d > 1e-12 {
        return Err(MapError::ConstraintViolation(format!(
            "{label} is not a fixed point of the base (moved by {d:.3e})"
        )));
    }
    Ok(())
}

/// Rotation by `phi` in coordinate plane `(i, j)` of `R^n`.
fn rotation(n: usize, plane: (usize, usize), phi: f64) -> DMatrix<f64> {
    let mut m = DMatrix::identity(n, n);
    let (c, s) = (phi.cos(), phi.sin());
    m[(plane.0, plane.0)] = c;
    m[(plane.0, plane.1)] = -s;
    m[(plane.1, plane.0)] = s;
    m[(plane.1, plane.1)] = c;
    m
}

/// d/dphi of the rotation.
fn rotation_derivative(n: usize, plane: (usize, usize), phi: f64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    let (c, s) = (phi.cos(), phi.sin());
    m[(plane.0, plane.0)] = -s;
    m[(plane.0, plane.1)] = -c;
    m[(plane.1, plane.0)] = c;
    m[(plane.1, plane.1)] = -s;
    m
}

/// Minimum of |det Df| over a uniform grid, data-parallel.
pub fn min_abs_det_on_grid(map: &dyn TorusMap, res: usize) -> f64 {
    let n = map.dimension();
    let total = res.pow(n as u32);
    let dets = crate::exec::map_indexed(total, |idx| {
        let mut rem = idx;
        let mut coords = vec![0.0; n];
        for c in coords.iter_mut() {
            *c = (rem % res) as f64 / res as f64;
            rem /= res;
        }
        let x = TorusPoint::new(coords);
        numeric::det(&map.derivative(&x)).abs()
    });
    dets.into_iter().fold(f64::INFINITY, f64::min)
}

impl TorusMap for PerturbedExampleMap {
    fn dimension(&self) -> usize {
        self.base.dimension()
    }

    fn degree(&self) -> usize {
        self.base.degree()
    }

    fn eval(&self, x: &TorusPoint) -> TorusPoint {
        let mut y = self.base.float_matrix() * x.to_vector();

        let up = self.p.displacement_to(x);
        let up_v = DVector::from_column_slice(up.components());
        if let Some((rho, h, _t)) = self.pitchfork_term(&up_v) {
            y += rho * h * &self.axis;
        } else {
            for q in &self.q_sites {
                let qc = TorusPoint::new(q.center.clone());
                let u = qc.displacement_to(x);
                let u_v = DVector::from_column_slice(u.components());
                let s2 = u_v.norm_squared() / (q.radius * q.radius);
                if s2 < 1.0 {
                    let rho = bump_profile(s2);
                    let rot = rotation(self.dimension(), q.plane, q.angle * rho);
                    let corr = self.base.float_matrix() * ((rot * &u_v) - &u_v);
                    y += corr;
                    break; // supports are disjoint
                }
            }
        }
        TorusPoint::new(y.iter().cloned().collect())
    }

    fn derivative(&self, x: &TorusPoint) -> DMatrix<f64> {
        let n = self.dimension();
        let mut d = self.base.float_matrix().clone();

        let up = self.p.displacement_to(x);
        let u_v = DVector::from_column_slice(up.components());
        if let Some((rho, h, t)) = self.pitchfork_term(&u_v) {
            // Df = E + a (h grad_rho + rho h' a)^T
            let r2 = self.bump_radius * self.bump_radius;
            let s2 = u_v.norm_squared() / r2;
            let grad_rho = bump_profile_ds2(s2) * (2.0 / r2) * &u_v;
            let h_prime = (self.lambda_w - self.lambda_axis) + 3.0 * self.strength * t * t;
            let row = h * grad_rho + rho * h_prime * &self.axis;
            d += &self.axis * row.transpose();
            return d;
        }
        for q in &self.q_sites {
            let qc = TorusPoint::new(q.center.clone());
            let u = qc.displacement_to(x);
            let u_v = DVector::from_column_slice(u.components());
            let r2 = q.radius * q.radius;
            let s2 = u_v.norm_squared() / r2;
            if s2 < 1.0 {
                let rho = bump_profile(s2);
                let grad_rho = bump_profile_ds2(s2) * (2.0 / r2) * &u_v;
                let phi = q.angle * rho;
                let rot = rotation(n, q.plane, phi);
                let rot_d = rotation_derivative(n, q.plane, phi);
                // Df = E (R(phi) + angle * R'(phi) u grad_rho^T)
                let inner = rot + q.angle * (rot_d * &u_v) * grad_rho.transpose();
                return self.base.float_matrix() * inner;
            }
        }
        d
    }

    fn inverse_branches(&self, y: &TorusPoint) -> Result<Vec<TorusPoint>, MapError> {
        let seeds = self.base.inverse_branches(y)?;
        let mut out = Vec::with_capacity(seeds.len());
        for seed in &seeds {
            out.push(newton_preimage(self, y, seed)?);
        }
        sort_lexicographic(&mut out);
        validate_branches(self, y, &out)?;
        Ok(out)
    }

    fn family_name(&self) -> &'static str {
        "perturbed-example"
    }
}
