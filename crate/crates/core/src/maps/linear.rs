//! Linear toral endomorphisms `x -> E x (mod 1)` for an integer matrix `E`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::MapError;
use crate::map::{sort_lexicographic, validate_branches, TorusMap};
use crate::torus::TorusPoint;

/// `x -> E x (mod 1)` with `det E != 0`. Use [`LinearToralMap::expanding`]
/// when all eigenvalue moduli must exceed 1.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearToralMap {
    matrix: Vec<Vec<i64>>,
    #[serde(skip)]
    mat_f: DMatrix<f64>,
    #[serde(skip)]
    inv_f: DMatrix<f64>,
    degree: usize,
}

impl LinearToralMap {
    /// Any integer matrix with nonzero determinant (degree `|det E|`, which
    /// may be 1, e.g. the identity; useful as a degenerate test map).
    pub fn new(matrix: Vec<Vec<i64>>) -> Result<Self, MapError> {
        let n = matrix.len();
        if n == 0 || matrix.iter().any(|row| row.len() != n) {
            return Err(MapError::InvalidParameter(
                "matrix must be square and non-empty".into(),
            ));
        }
        let mat_f = DMatrix::from_fn(n, n, |i, j| matrix[i][j] as f64);
        let det = crate::numeric::det(&mat_f);
        let degree = det.abs().round();
        if degree < 1.0 || (det.abs() - degree).abs() > 1e-6 {
            return Err(MapError::NotLocalDiffeo(format!(
                "integer matrix determinant {det} is not a nonzero integer"
            )));
        }
        let inv_f = mat_f.clone().try_inverse().ok_or_else(|| {
            MapError::NotLocalDiffeo("matrix is not invertible".into())
        })?;
        Ok(Self {
            matrix,
            mat_f,
            inv_f,
            degree: degree as usize,
        })
    }

    /// Expanding endomorphism: `|det E| >= 2` and every eigenvalue modulus
    /// strictly above 1.
    pub fn expanding(matrix: Vec<Vec<i64>>) -> Result<Self, MapError> {
        let map = Self::new(matrix)?;
        if map.degree < 2 {
            return Err(MapError::NotLocalDiffeo(format!(
                "expanding map needs |det| >= 2, got {}",
                map.degree
            )));
        }
        let min_modulus = map
            .mat_f
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(f64::INFINITY, f64::min);
        if min_modulus <= 1.0 + 1e-9 {
            return Err(MapError::NotLocalDiffeo(format!(
                "smallest eigenvalue modulus {min_modulus} is not above 1"
            )));
        }
        Ok(map)
    }

    /// Scalar multiple of the identity, `m * Id` on `T^dim`.
    pub fn homothety(dim: usize, m: i64) -> Result<Self, MapError> {
        let matrix = (0..dim)
            .map(|i| (0..dim).map(|j| if i == j { m } else { 0 }).collect())
            .collect();
        Self::expanding(matrix)
    }

    pub fn identity(dim: usize) -> Self {
        let matrix = (0..dim)
            .map(|i| (0..dim).map(|j| i64::from(i == j)).collect())
            .collect();
        Self::new(matrix).expect("identity is invertible")
    }

    pub fn integer_matrix(&self) -> &[Vec<i64>] {
        &self.matrix
    }

    pub fn float_matrix(&self) -> &DMatrix<f64> {
        &self.mat_f
    }

    pub fn inverse_matrix(&self) -> &DMatrix<f64> {
        &self.inv_f
    }

    /// Rebuild the skipped float caches after deserialization.
    pub fn rehydrate(matrix: Vec<Vec<i64>>) -> Result<Self, MapError> {
        Self::new(matrix)
    }

    /// All `degree` pre-images of `y`: `E^{-1}(y + k)` for the integer
    /// vectors `k` with `y + k` inside `E([0,1)^n)`.
    fn linear_preimages(&self, y: &TorusPoint) -> Vec<TorusPoint> {
        let n = self.dimension();
        // bounding box of E([0,1]^n) from the images of the corners
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![f64::NEG_INFINITY; n];
        for corner in 0..(1usize << n) {
            let v = nalgebra::DVector::from_fn(n, |i, _| ((corner >> i) & 1) as f64);
            let img = &self.mat_f * v;
            for i in 0..n {
                lo[i] = lo[i].min(img[i]);
                hi[i] = hi[i].max(img[i]);
            }
        }
        let ranges: Vec<(i64, i64)> = (0..n)
            .map(|i| {
                let a = (lo[i] - y.coords()[i]).floor() as i64 - 1;
                let b = (hi[i] - y.coords()[i]).ceil() as i64 + 1;
                (a, b)
            })
            .collect();
        let mut out: Vec<TorusPoint> = Vec::with_capacity(self.degree);
        let mut k: Vec<i64> = ranges.iter().map(|r| r.0).collect();
        'outer: loop {
            let shifted = nalgebra::DVector::from_fn(n, |i, _| y.coords()[i] + k[i] as f64);
            let w = &self.inv_f * shifted;
            let eps = 1e-12;
            if (0..n).all(|i| w[i] >= -eps && w[i] < 1.0 - eps || (w[i] - 0.0).abs() <= eps) {
                let cand = TorusPoint::new(w.iter().cloned().collect());
                if !out
                    .iter()
                    .any(|p| crate::torus::torus_distance(p, &cand) < 1e-10)
                {
                    out.push(cand);
                }
            }
            // odometer over the k-box
            for i in 0..n {
                k[i] += 1;
                if k[i] <= ranges[i].1 {
                    continue 'outer;
                }
                k[i] = ranges[i].0;
            }
            break;
        }
        out
    }
}

impl TorusMap for LinearToralMap {
    fn dimension(&self) -> usize {
        self.matrix.len()
    }

    fn degree(&self) -> usize {
        self.degree
    }

    fn eval(&self, x: &TorusPoint) -> TorusPoint {
        let v = &self.mat_f * x.to_vector();
        TorusPoint::new(v.iter().cloned().collect())
    }

    fn derivative(&self, _x: &TorusPoint) -> DMatrix<f64> {
        self.mat_f.clone()
    }

    fn inverse_branches(&self, y: &TorusPoint) -> Result<Vec<TorusPoint>, MapError> {
        let mut out = self.linear_preimages(y);
        sort_lexicographic(&mut out);
        validate_branches(self, y, &out)?;
        Ok(out)
    }

    fn family_name(&self) -> &'static str {
        "linear"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::{derivative_cocycle, iterate};
    use crate::torus::torus_distance;

    #[test]
    fn integer_matrix_action_mod_one() {
        let f = LinearToralMap::new(vec![vec![2, 1], vec![1, 1]]).unwrap();
        let y = f.eval(&TorusPoint::new(vec![0.5, 0.5]));
        assert!((y.coords()[0] - 0.5).abs() < 1e-15);
        assert!(y.coords()[1].abs() < 1e-15);
    }

    #[test]
    fn expanding_rejects_cat_map_style_saddles() {
        // [[2,1],[1,1]] has an eigenvalue below 1 in modulus
        assert!(LinearToralMap::expanding(vec![vec![2, 1], vec![1, 1]]).is_err());
        assert!(LinearToralMap::homothety(2, 4).is_ok());
    }

    #[test]
    fn homothety_cocycle_is_exact_power() {
        let f = LinearToralMap::homothety(2, 2).unwrap();
        let c = derivative_cocycle(&f, &TorusPoint::new(vec![0.1, 0.2]), 3);
        let m = c.into_matrix();
        assert_eq!(m[(0, 0)], 8.0);
        assert_eq!(m[(1, 1)], 8.0);
        assert_eq!(m[(0, 1)], 0.0);
    }

    #[test]
    fn branch_count_and_round_trip() {
        let f = LinearToralMap::homothety(2, 4).unwrap();
        let y = TorusPoint::new(vec![0.37, 0.81]);
        let branches = f.inverse_branches(&y).unwrap();
        assert_eq!(branches.len(), 16);
        for w in &branches {
            assert!(torus_distance(&f.eval(w), &y) < 1e-12);
        }
    }

    #[test]
    fn branches_of_nontrivial_lattice_matrix() {
        // degree |det| = 3 with off-diagonal entries
        let f = LinearToralMap::new(vec![vec![2, 1], vec![1, 2]]).unwrap();
        assert_eq!(f.degree(), 3);
        let y = TorusPoint::new(vec![0.2, 0.7]);
        let branches = f.inverse_branches(&y).unwrap();
        assert_eq!(branches.len(), 3);
        for w in &branches {
            assert!(torus_distance(&f.eval(w), &y) < 1e-12);
        }
    }

    #[test]
    fn identity_map_has_degree_one() {
        let f = LinearToralMap::identity(1);
        assert_eq!(f.degree(), 1);
        let y = TorusPoint::circle(0.3);
        let b = f.inverse_branches(&y).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!(iterate(&f, &y, 5), y);
    }
}
