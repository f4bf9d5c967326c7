//! Ergodic statistics: QR-cocycle Lyapunov exponents, empirical correlation
//! decay with exponential fits, and return-time tail fits.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::StatsError;
use crate::exec;
use crate::induced::{return_time_tail, InducedMarkovMap};
use crate::map::TorusMap;
use crate::measures::{BernoulliWeights, TowerMeasure};
use crate::numeric::{self, LinearFit};
use crate::torus::TorusPoint;

/// Observable library with known Lipschitz constants; the decay definition
/// needs a Hölder class only through the constant, which is never estimated,
/// so declared regularity is all we track.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Observable {
    One,
    /// `cos(2 pi x_axis)`.
    Cos { axis: usize },
    /// `sin(2 pi x_axis)`.
    Sin { axis: usize },
    /// `x_axis - 1/2` (the centered sawtooth coordinate).
    CenteredCoord { axis: usize },
}

impl Observable {
    pub fn eval(&self, p: &TorusPoint) -> f64 {
        match self {
            Observable::One => 1.0,
            Observable::Cos { axis } => {
                (2.0 * std::f64::consts::PI * p.coords()[*axis]).cos()
            }
            Observable::Sin { axis } => {
                (2.0 * std::f64::consts::PI * p.coords()[*axis]).sin()
            }
            Observable::CenteredCoord { axis } => p.coords()[*axis] - 0.5,
        }
    }

    pub fn lipschitz_constant(&self) -> f64 {
        match self {
            Observable::One => 0.0,
            Observable::Cos { .. } | Observable::Sin { .. } => 2.0 * std::f64::consts::PI,
            // as a function on the circle the sawtooth is only piecewise
            // Lipschitz; constant 1 away from the cut
            Observable::CenteredCoord { .. } => 1.0,
        }
    }

    pub fn name(&self) -> String {
        match self {
            Observable::One => "one".into(),
            Observable::Cos { axis } => format!("cos[{axis}]"),
            Observable::Sin { axis } => format!("sin[{axis}]"),
            Observable::CenteredCoord { axis } => format!("saw[{axis}]"),
        }
    }
}

/// Initial-point samplers for orbit ensembles.
pub enum Sampler<'a> {
    /// Uniform (Lebesgue) on the torus.
    Lebesgue,
    /// The projected tower measure.
    Tower {
        measure: &'a TowerMeasure,
        cascade_depth: usize,
    },
    /// A fixed list, cycled by index.
    FixedPoints(&'a [TorusPoint]),
}

impl Sampler<'_> {
    pub fn draw(&self, f: &dyn TorusMap, index: usize, rng: &mut ChaCha8Rng) -> TorusPoint {
        match self {
            Sampler::Lebesgue => {
                TorusPoint::new((0..f.dimension()).map(|_| rng.gen::<f64>()).collect())
            }
            Sampler::Tower {
                measure,
                cascade_depth,
            } => measure.draw(f, *cascade_depth, rng),
            Sampler::FixedPoints(pts) => pts[index % pts.len()].clone(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Sampler::Lebesgue => "lebesgue",
            Sampler::Tower { .. } => "tower",
            Sampler::FixedPoints(_) => "fixed",
        }
    }
}

/// Lyapunov spectrum estimate (nats per iterate of `f`), exponents sorted
/// descending with per-exponent standard errors across the sample ensemble.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    pub exponents: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub n_iterates: usize,
    pub n_samples: usize,
}

/// QR-reorthogonalized cocycle accumulation along `n_iterates` steps,
/// averaged over `n_samples` initial points.
pub fn lyapunov_exponents(
    f: &dyn TorusMap,
    sampler: &Sampler,
    n_iterates: usize,
    n_samples: usize,
    seed: u64,
) -> Result<LyapunovEstimate, StatsError> {
    if n_iterates < 100 {
        return Err(StatsError::InvalidParameter(
            "n_iterates must be at least 100".into(),
        ));
    }
    if n_samples == 0 {
        return Err(StatsError::InvalidParameter("n_samples must be positive".into()));
    }
    let dim = f.dimension();
    let per_sample: Vec<Vec<f64>> = exec::map_indexed(n_samples, |i| {
        let mut rng = exec::rng_for(seed, i as u64);
        let mut x = sampler.draw(f, i, &mut rng);
        let mut acc = vec![0.0f64; dim];
        if dim == 1 {
            for _ in 0..n_iterates {
                acc[0] += f.derivative(&x)[(0, 0)].abs().ln();
                x = f.eval(&x);
            }
        } else {
            let mut q = nalgebra::DMatrix::<f64>::identity(dim, dim);
            for _ in 0..n_iterates {
                let m = f.derivative(&x) * &q;
                let qr = m.qr();
                let r = qr.r();
                for (d, a) in acc.iter_mut().enumerate() {
                    *a += r[(d, d)].abs().ln();
                }
                q = qr.q();
                x = f.eval(&x);
            }
        }
        acc.iter().map(|a| a / n_iterates as f64).collect()
    });

    // average per position, then sort positions by mean (descending)
    let mut stats: Vec<(f64, f64)> = (0..dim)
        .map(|d| {
            let col: Vec<f64> = per_sample.iter().map(|s| s[d]).collect();
            (numeric::mean(&col), numeric::std_error(&col))
        })
        .collect();
    stats.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    Ok(LyapunovEstimate {
        exponents: stats.iter().map(|s| s.0).collect(),
        std_errors: stats.iter().map(|s| s.1).collect(),
        n_iterates,
        n_samples,
    })
}

/// Correlation curve `C(k) = E[psi (phi o f^k)] - E[psi] E[phi]` with a
/// log-linear fit over the lags that clear the noise floor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrelationCurve {
    pub psi: String,
    pub phi: String,
    pub lags: Vec<usize>,
    pub correlations: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// Lags used by the fit: `|C(k)| > 3 * std_error(k)`, k >= 1.
    pub usable_lags: Vec<usize>,
    pub fit: LinearFit,
}

/// Estimate correlations from `n_samples` fresh orbits of length `max_lag`
/// (the same orbit ensemble serves every lag). Orbits are deliberately
/// short: the centered products `(psi(x) - m)(phi(f^k x) - m_k)` need only
/// `max_lag` forward steps, which keeps piecewise-dyadic maps away from
/// their f64 bit-depletion horizon.
pub fn correlation_decay(
    f: &dyn TorusMap,
    sampler: &Sampler,
    psi: Observable,
    phi: Observable,
    max_lag: usize,
    n_samples: usize,
    seed: u64,
) -> Result<CorrelationCurve, StatsError> {
    if max_lag < 8 {
        return Err(StatsError::InvalidParameter("max_lag must be >= 8".into()));
    }
    if n_samples < 2 {
        return Err(StatsError::InvalidParameter(
            "need at least 2 sample orbits".into(),
        ));
    }

    // psi at time zero and phi along the orbit, one row per sample
    let rows: Vec<(f64, Vec<f64>)> = exec::map_indexed(n_samples, |i| {
        let mut rng = exec::rng_for(seed, i as u64);
        let mut x = sampler.draw(f, i, &mut rng);
        let psi0 = psi.eval(&x);
        let mut phis = Vec::with_capacity(max_lag + 1);
        phis.push(phi.eval(&x));
        for _ in 0..max_lag {
            x = f.eval(&x);
            phis.push(phi.eval(&x));
        }
        (psi0, phis)
    });

    let psi0: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let mean_psi = numeric::mean(&psi0);
    let mut correlations = Vec::with_capacity(max_lag + 1);
    let mut std_errors = Vec::with_capacity(max_lag + 1);
    for k in 0..=max_lag {
        let phik: Vec<f64> = rows.iter().map(|r| r.1[k]).collect();
        let mean_phik = numeric::mean(&phik);
        let centered: Vec<f64> = psi0
            .iter()
            .zip(&phik)
            .map(|(a, b)| (a - mean_psi) * (b - mean_phik))
            .collect();
        correlations.push(numeric::mean(&centered));
        std_errors.push(numeric::std_error(&centered));
    }

    let usable: Vec<usize> = (1..=max_lag)
        .filter(|&k| correlations[k].abs() > 3.0 * std_errors[k])
        .collect();
    if usable.len() < 4 {
        return Err(StatsError::SignalBelowNoise {
            usable: usable.len(),
            needed: 4,
        });
    }
    let xs: Vec<f64> = usable.iter().map(|&k| k as f64).collect();
    let ys: Vec<f64> = usable.iter().map(|&k| correlations[k].abs().ln()).collect();
    let fit = numeric::linear_fit(&xs, &ys).ok_or(StatsError::SignalBelowNoise {
        usable: usable.len(),
        needed: 4,
    })?;

    Ok(CorrelationCurve {
        psi: psi.name(),
        phi: phi.name(),
        lags: (0..=max_lag).collect(),
        correlations,
        std_errors,
        usable_lags: usable,
        fit,
    })
}

/// Log-linear fit of the return-time tail `nu_a(R >= n)` over
/// `1 <= n <= n_max`. Degenerate partitions (a single distinct return time)
/// report no R².
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TailFit {
    pub slope: f64,
    pub r_squared: Option<f64>,
    pub points: Vec<(usize, f64)>,
    pub degenerate: bool,
}

pub fn tail_decay_fit(
    map: &InducedMarkovMap,
    weights: &BernoulliWeights,
    n_max: usize,
) -> TailFit {
    let points: Vec<(usize, f64)> = (1..=n_max)
        .map(|n| (n, return_time_tail(map, Some(&weights.weights), n)))
        .filter(|(_, t)| *t > 0.0)
        .collect();
    let distinct_returns: std::collections::BTreeSet<usize> =
        map.cells.iter().map(|c| c.return_time).collect();
    if distinct_returns.len() < 2 || points.len() < 2 {
        return TailFit {
            slope: 0.0,
            r_squared: None,
            points,
            degenerate: true,
        };
    }
    let xs: Vec<f64> = points.iter().map(|(n, _)| *n as f64).collect();
    let ys: Vec<f64> = points.iter().map(|(_, t)| t.ln()).collect();
    match numeric::linear_fit(&xs, &ys) {
        Some(fit) => TailFit {
            slope: fit.slope,
            r_squared: Some(fit.r_squared),
            points,
            degenerate: false,
        },
        None => TailFit {
            slope: 0.0,
            r_squared: None,
            points,
            degenerate: true,
        },
    }
}
