//! Small numeric kernels shared across modules: fixed-order summation,
//! least-squares fitting, singular values of small matrices, and the
//! chi-squared tail used by the Kac consistency test.

use nalgebra::DMatrix;

/// Pairwise (tree) summation. Fixed evaluation order, so reductions over
/// parallel-produced vectors are deterministic and the error grows like
/// `O(log n)` instead of `O(n)`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn mean(xs: &[f64]) -> f64 {
    pairwise_sum(xs) / xs.len() as f64
}

/// Sample standard deviation (n-1 normalization) via fixed-order sums.
pub fn std_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let sq: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    (pairwise_sum(&sq) / (xs.len().saturating_sub(1).max(1)) as f64).sqrt()
}

/// Standard error of the mean.
pub fn std_error(xs: &[f64]) -> f64 {
    std_dev(xs) / (xs.len() as f64).sqrt()
}

/// Ordinary least squares fit `y = slope * x + intercept`.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let mx = mean(xs);
    let my = mean(ys);
    let sxx: f64 = pairwise_sum(&xs.iter().map(|x| (x - mx) * (x - mx)).collect::<Vec<_>>());
    let sxy: f64 = pairwise_sum(
        &xs.iter()
            .zip(ys)
            .map(|(x, y)| (x - mx) * (y - my))
            .collect::<Vec<_>>(),
    );
    let syy: f64 = pairwise_sum(&ys.iter().map(|y| (y - my) * (y - my)).collect::<Vec<_>>());
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pairwise_sum(
        &xs.iter()
            .zip(ys)
            .map(|(x, y)| {
                let r = y - (slope * x + intercept);
                r * r
            })
            .collect::<Vec<_>>(),
    );
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        1.0 - ss_res / syy
    };
    Some(LinearFit {
        slope,
        intercept,
        r_squared,
    })
}

/// Smallest singular value: closed form for 1x1 and 2x2, SVD otherwise.
pub fn min_singular_value(m: &DMatrix<f64>) -> f64 {
    match m.nrows() {
        1 => m[(0, 0)].abs(),
        2 => {
            let a = m[(0, 0)];
            let b = m[(0, 1)];
            let c = m[(1, 0)];
            let d = m[(1, 1)];
            // eigenvalues of M^T M
            let p = a * a + b * b + c * c + d * d;
            let det = a * d - b * c;
            let disc = (p * p - 4.0 * det * det).max(0.0).sqrt();
            (0.5 * (p - disc)).max(0.0).sqrt()
        }
        _ => m
            .clone()
            .svd(false, false)
            .singular_values
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min),
    }
}

/// Determinant, with the 2x2 shortcut.
pub fn det(m: &DMatrix<f64>) -> f64 {
    match m.nrows() {
        1 => m[(0, 0)],
        2 => m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
        _ => m.determinant(),
    }
}

/// Regularized lower incomplete gamma P(a, x), series + continued fraction.
fn reg_lower_gamma(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let ln_gamma_a = ln_gamma(a);
    if x < a + 1.0 {
        // series representation
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..500 {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * 1e-15 {
                break;
            }
        }
        sum * (-x + a * x.ln() - ln_gamma_a).exp()
    } else {
        // continued fraction for Q(a, x)
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-15 {
                break;
            }
        }
        let q = (-x + a * x.ln() - ln_gamma_a).exp() * h;
        1.0 - q
    }
}

/// Lanczos log-gamma.
fn ln_gamma(x: f64) -> f64 {
    const G: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = G[0];
    let t = x + 7.5;
    for (i, &g) in G.iter().enumerate().skip(1) {
        a += g / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Survival function of the chi-squared distribution with `dof` degrees of
/// freedom: `P(X > x)`.
pub fn chi_squared_sf(x: f64, dof: usize) -> f64 {
    (1.0 - reg_lower_gamma(dof as f64 / 2.0, x / 2.0)).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn pairwise_sum_matches_naive_on_small_input() {
        let xs: Vec<f64> = (0..100).map(|i| i as f64 * 0.1).collect();
        let naive: f64 = xs.iter().sum();
        assert!((pairwise_sum(&xs) - naive).abs() < 1e-9);
    }

    #[test]
    fn linear_fit_recovers_exact_line() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 2.0).collect();
        let fit = linear_fit(&xs, &ys).unwrap();
        assert!((fit.slope - 3.0).abs() < 1e-12);
        assert!((fit.intercept + 2.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn min_singular_value_2x2_matches_svd() {
        let m = dmatrix![3.0, 1.0; 0.5, 2.0];
        let closed = min_singular_value(&m);
        let svd = m
            .clone()
            .svd(false, false)
            .singular_values
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        assert!((closed - svd).abs() < 1e-12);
    }

    #[test]
    fn chi_squared_reference_values() {
        // chi2 critical values: P(X > 3.841) = 0.05 at dof 1,
        // P(X > 14.067) = 0.05 at dof 7
        assert!((chi_squared_sf(3.841, 1) - 0.05).abs() < 2e-4);
        assert!((chi_squared_sf(14.067, 7) - 0.05).abs() < 2e-4);
        assert!((chi_squared_sf(0.0, 3) - 1.0).abs() < 1e-12);
    }
}
