//! Bernoulli weight families on the return partition, cylinder measures, and
//! sampling / integration against the projected invariant measure.
//!
//! A weight vector `a = (a_P)` with `0 < a_P < 1`, `sum a_P = 1` and finite
//! `sum a_P R(P)` induces the product measure on itineraries; spreading it
//! along return blocks and averaging over the `ell` sub-steps projects it to
//! an invariant measure of `f`. Sampling realizes the cell conditional by
//! pulling a uniform draw on the base back through the cell branch, with a
//! finite cylinder-correction cascade whose error decays at rate 1/8 per
//! level.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::MeasureError;
use crate::exec;
use crate::induced::InducedMarkovMap;
use crate::map::{iterate, TorusMap};
use crate::numeric;
use crate::torus::{torus_distance, TorusPoint, TorusVector};

/// Weight family descriptors. The geometric family assigns mass
/// `(1 - theta) theta^{k-1}` to return time `k`, split evenly among the
/// cells found at that return time.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum WeightFamily {
    Geometric { theta: f64 },
    Uniform,
}

/// Normalized weights over the found cells, plus the truncation accounting
/// every downstream estimate inherits as a systematic-error field.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BernoulliWeights {
    /// Weight per cell id; sums to 1.
    pub weights: Vec<f64>,
    pub family: WeightFamily,
    /// Summability obligation of the untruncated family.
    pub summability_note: String,
    /// Mass of the untruncated family carried by the return times that are
    /// present (1 for the uniform family, which has no untruncated
    /// reference).
    pub ideal_coverage: f64,
    /// `1 - ideal_coverage`.
    pub discarded_tail_mass: f64,
    /// `sum a_P R(P)`.
    pub mean_return: f64,
}

/// Attach weights to an induced map.
pub fn make_weights(
    map: &InducedMarkovMap,
    family: WeightFamily,
) -> Result<BernoulliWeights, MeasureError> {
    if map.cells.is_empty() {
        return Err(MeasureError::EmptyPartition);
    }
    let max_r = map.truncation.max_return;
    let mut counts = vec![0usize; max_r + 1];
    for c in &map.cells {
        counts[c.return_time] += 1;
    }

    let (raw, ideal_coverage, note) = match family {
        WeightFamily::Geometric { theta } => {
            if !(theta > 0.0 && theta < 1.0) {
                return Err(MeasureError::BadParam(format!(
                    "geometric theta must lie in (0,1), got {theta}"
                )));
            }
            let level_mass = |k: usize| (1.0 - theta) * theta.powi(k as i32 - 1);
            let covered: Vec<f64> = (1..=max_r)
                .filter(|k| counts[*k] > 0)
                .map(level_mass)
                .collect();
            let ideal = numeric::pairwise_sum(&covered);
            let raw: Vec<f64> = map
                .cells
                .iter()
                .map(|c| level_mass(c.return_time) / counts[c.return_time] as f64)
                .collect();
            let note = format!(
                "untruncated family: sum over cells with R = k of a_P = (1-theta) theta^(k-1) \
                 with theta = {theta} < 1, geometric hence summable with finite mean return"
            );
            (raw, ideal, note)
        }
        WeightFamily::Uniform => {
            let n = map.cells.len() as f64;
            (
                vec![1.0 / n; map.cells.len()],
                1.0,
                "uniform on the truncated partition; no untruncated reference family".to_string(),
            )
        }
    };

    let total = numeric::pairwise_sum(&raw);
    let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let mean_terms: Vec<f64> = map
        .cells
        .iter()
        .map(|c| weights[c.id] * c.return_time as f64)
        .collect();
    Ok(BernoulliWeights {
        weights,
        family,
        summability_note: note,
        ideal_coverage,
        discarded_tail_mass: 1.0 - ideal_coverage,
        mean_return: numeric::pairwise_sum(&mean_terms),
    })
}

/// Product measure of a cylinder: `prod_j a_{P_j}`. The empty cylinder has
/// mass 1.
pub fn cylinder_measure(
    weights: &BernoulliWeights,
    itinerary: &[usize],
) -> Result<f64, MeasureError> {
    let mut mass = 1.0;
    for &id in itinerary {
        let w = weights
            .weights
            .get(id)
            .ok_or(MeasureError::UnknownCell(id))?;
        mass *= w;
    }
    Ok(mass)
}

/// The tower measure: weights plus the induced map they live on, with the
/// cumulative tables used by the samplers.
#[derive(Debug, Clone)]
pub struct TowerMeasure {
    pub induced: Arc<InducedMarkovMap>,
    pub weights: BernoulliWeights,
    /// Cumulative `a_P R(P) / mean_return` (the Kac cell marginal).
    kac_cumulative: Vec<f64>,
    /// Cumulative `a_P` (the plain Bernoulli marginal).
    plain_cumulative: Vec<f64>,
}

impl TowerMeasure {
    pub fn new(induced: Arc<InducedMarkovMap>, weights: BernoulliWeights) -> Self {
        let kac: Vec<f64> = induced
            .cells
            .iter()
            .map(|c| weights.weights[c.id] * c.return_time as f64 / weights.mean_return)
            .collect();
        let mut kac_cumulative = Vec::with_capacity(kac.len());
        let mut acc = 0.0;
        for k in &kac {
            acc += k;
            kac_cumulative.push(acc);
        }
        let mut plain_cumulative = Vec::with_capacity(kac.len());
        let mut acc2 = 0.0;
        for w in &weights.weights {
            acc2 += w;
            plain_cumulative.push(acc2);
        }
        Self {
            induced,
            weights,
            kac_cumulative,
            plain_cumulative,
        }
    }

    pub fn ell(&self) -> usize {
        self.induced.base.ell
    }

    pub fn mean_return(&self) -> f64 {
        self.weights.mean_return
    }

    /// Kac cell marginal `a_P R(P) / sum a_Q R(Q)` per cell id.
    pub fn kac_probabilities(&self) -> Vec<f64> {
        self.induced
            .cells
            .iter()
            .map(|c| {
                self.weights.weights[c.id] * c.return_time as f64 / self.weights.mean_return
            })
            .collect()
    }

    /// Draw a cell index from the Kac marginal.
    pub fn sample_cell_kac(&self, rng: &mut ChaCha8Rng) -> usize {
        let u: f64 = rng.gen();
        match self
            .kac_cumulative
            .binary_search_by(|c| c.partial_cmp(&u).unwrap())
        {
            Ok(i) | Err(i) => i.min(self.kac_cumulative.len() - 1),
        }
    }

    /// Draw a cell index from the plain Bernoulli marginal.
    pub fn sample_cell_plain(&self, rng: &mut ChaCha8Rng) -> usize {
        let u: f64 = rng.gen();
        match self
            .plain_cumulative
            .binary_search_by(|c| c.partial_cmp(&u).unwrap())
        {
            Ok(i) | Err(i) => i.min(self.plain_cumulative.len() - 1),
        }
    }

    /// Uniform draw in the base ball (rejection from the bounding box).
    fn uniform_in_base(&self, rng: &mut ChaCha8Rng) -> TorusPoint {
        let base = &self.induced.base;
        let dim = base.center.dim();
        loop {
            let v: Vec<f64> = (0..dim)
                .map(|_| (rng.gen::<f64>() * 2.0 - 1.0) * base.radius)
                .collect();
            if v.iter().map(|c| c * c).sum::<f64>().sqrt() < base.radius {
                return base.center.translate(&TorusVector::new(v));
            }
        }
    }

    /// Realize the cell conditional: a uniform base draw pulled back through
    /// `cascade_depth` branch levels, the first being `cell_id` and the rest
    /// drawn from the Bernoulli marginal.
    pub fn conditional_point(
        &self,
        f: &dyn TorusMap,
        cell_id: usize,
        cascade_depth: usize,
        rng: &mut ChaCha8Rng,
    ) -> TorusPoint {
        let mut ids = Vec::with_capacity(cascade_depth.max(1));
        ids.push(cell_id);
        for _ in 1..cascade_depth.max(1) {
            ids.push(self.sample_cell_plain(rng));
        }
        let mut y = self.uniform_in_base(rng);
        for &id in ids.iter().rev() {
            let cell = &self.induced.cells[id];
            match self.induced.pull_back(f, cell, &y) {
                Ok(chain) => y = chain.into_iter().next().unwrap(),
                // pull-back can only fail on pathological inputs; fall back
                // to the cell center rather than abort a sampling run
                Err(_) => y = cell.center().clone(),
            }
        }
        y
    }

    /// One draw from the projected measure: Kac cell, conditional point,
    /// block offset, sub-block offset.
    pub fn draw(
        &self,
        f: &dyn TorusMap,
        cascade_depth: usize,
        rng: &mut ChaCha8Rng,
    ) -> TorusPoint {
        let cell_id = self.sample_cell_kac(rng);
        let x = self.conditional_point(f, cell_id, cascade_depth, rng);
        let r = self.induced.cells[cell_id].return_time;
        let block = rng.gen_range(0..r);
        let sub = rng.gen_range(0..self.ell());
        iterate(f, &x, block * self.ell() + sub)
    }
}

/// Default cylinder-correction cascade depth.
pub const DEFAULT_CASCADE_DEPTH: usize = 3;

/// Seeded, reproducible sample of the projected measure. Workers derive one
/// child seed per sample index, so the output is identical at any thread
/// count.
pub fn sample_mu_a(
    f: &dyn TorusMap,
    measure: &TowerMeasure,
    n_samples: usize,
    seed: u64,
    cascade_depth: usize,
) -> Vec<TorusPoint> {
    exec::map_indexed(n_samples, |i| {
        let mut rng = exec::rng_for(seed, i as u64);
        measure.draw(f, cascade_depth, &mut rng)
    })
}

/// Monte Carlo estimate with a bootstrap standard error.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntegralEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub n_samples: usize,
    /// Truncation systematic error inherited from the weights.
    pub discarded_tail_mass: f64,
}

pub fn integrate<O>(
    f: &dyn TorusMap,
    measure: &TowerMeasure,
    observable: O,
    n_samples: usize,
    seed: u64,
    cascade_depth: usize,
) -> IntegralEstimate
where
    O: Fn(&TorusPoint) -> f64 + Sync + Send,
{
    let values: Vec<f64> = exec::map_indexed(n_samples, |i| {
        let mut rng = exec::rng_for(seed, i as u64);
        observable(&measure.draw(f, cascade_depth, &mut rng))
    });
    let estimate = numeric::mean(&values);
    let std_error = bootstrap_std_error(&values, seed);
    IntegralEstimate {
        estimate,
        std_error,
        n_samples,
        discarded_tail_mass: measure.weights.discarded_tail_mass,
    }
}

/// Bootstrap standard error of the mean: 64 seeded resamples.
pub fn bootstrap_std_error(values: &[f64], seed: u64) -> f64 {
    const RESAMPLES: usize = 64;
    if values.len() < 2 {
        return 0.0;
    }
    let means: Vec<f64> = exec::map_indexed(RESAMPLES, |b| {
        let mut rng = exec::rng_for(seed ^ 0xB007_57A9_D00D_F00D, b as u64);
        let n = values.len();
        let mut acc = 0.0;
        for _ in 0..n {
            acc += values[rng.gen_range(0..n)];
        }
        acc / n as f64
    });
    numeric::std_dev(&means)
}

/// Sampled support check: fraction of occupied histogram bins per axis.
pub fn support_histogram(samples: &[TorusPoint], bins: usize) -> Vec<usize> {
    let mut counts = vec![0usize; bins];
    for s in samples {
        let b = ((s.coords()[0] * bins as f64).floor() as usize).min(bins - 1);
        counts[b] += 1;
    }
    counts
}

/// Check the sampler against a single known point (diagnostics for the
/// single-cell degenerate case).
pub fn max_distance_to(samples: &[TorusPoint], target: &TorusPoint) -> f64 {
    samples
        .iter()
        .map(|s| torus_distance(s, target))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::induced::{build_base, build_induced_map, InducedBuildOptions};
    use crate::maps::DoublingFamilyMap;
    use crate::orbits::find_periodic_points;
    use crate::zooming::{compute_source_zooming_data, ZoomingContraction};

    fn doubling_tower(max_return: usize) -> (DoublingFamilyMap, TowerMeasure) {
        let f = DoublingFamilyMap::pure(2).unwrap();
        let source = find_periodic_points(&f, 1, 16).orbits.remove(0);
        let data = compute_source_zooming_data(&f, &source, 0.125).unwrap();
        let base = build_base(&data, data.delta / 8.0).unwrap();
        let opts = InducedBuildOptions {
            max_return,
            cell_budget: 4096,
            frontier_budget: 8192,
            ..Default::default()
        };
        let alpha = ZoomingContraction::new(0.125);
        let induced = build_induced_map(&f, &base, &alpha, &opts).unwrap();
        let weights = make_weights(&induced, WeightFamily::Geometric { theta: 0.5 }).unwrap();
        let measure = TowerMeasure::new(Arc::new(induced), weights);
        (f, measure)
    }

    #[test]
    fn single_cell_weight_is_forced_to_one() {
        let (_, measure) = doubling_tower(1);
        assert_eq!(measure.weights.weights.len(), 1);
        assert!((measure.weights.weights[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn single_cell_samples_stay_in_the_spread_cell() {
        // degenerate partition: one central cell, so every draw is one of
        // the first six pushforwards of the cell conditional; the images of
        // a cell of radius r/64 stay within 2^5 r/64 = r/2 of the center
        let (f, measure) = doubling_tower(1);
        let samples = sample_mu_a(&f, &measure, 2000, 5, DEFAULT_CASCADE_DEPTH);
        let center = measure.induced.base.center.clone();
        let spread = max_distance_to(&samples, &center);
        assert!(spread <= measure.induced.base.radius / 2.0 + 1e-12, "spread {spread}");
    }

    #[test]
    fn empty_partition_and_bad_theta_are_rejected() {
        let (_, measure) = doubling_tower(2);
        let mut empty = (*measure.induced).clone();
        empty.cells.clear();
        assert!(matches!(
            make_weights(&empty, WeightFamily::Geometric { theta: 0.5 }),
            Err(MeasureError::EmptyPartition)
        ));
        assert!(matches!(
            make_weights(&measure.induced, WeightFamily::Geometric { theta: 1.5 }),
            Err(MeasureError::BadParam(_))
        ));
    }

    #[test]
    fn weights_sum_to_one_and_mean_return_is_finite() {
        let (_, measure) = doubling_tower(4);
        let total = numeric::pairwise_sum(&measure.weights.weights);
        assert!((total - 1.0).abs() < 1e-14);
        assert!(measure.mean_return() > 0.0);
        // direct-summation oracle for sum a_P R(P)
        let direct: f64 = measure
            .induced
            .cells
            .iter()
            .map(|c| measure.weights.weights[c.id] * c.return_time as f64)
            .sum();
        assert!((measure.mean_return() - direct).abs() < 1e-12);
    }

    #[test]
    fn geometric_level_masses_follow_theta() {
        let (_, measure) = doubling_tower(5);
        // sum of weights at return time k should be proportional to theta^k
        let mass_k = |k: usize| -> f64 {
            measure
                .induced
                .cells
                .iter()
                .filter(|c| c.return_time == k)
                .map(|c| measure.weights.weights[c.id])
                .sum()
        };
        let m2 = mass_k(2);
        let m3 = mass_k(3);
        let m4 = mass_k(4);
        assert!((m3 / m2 - 0.5).abs() < 1e-12);
        assert!((m4 / m3 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn two_thetas_give_distinct_weight_vectors() {
        let (_, measure) = doubling_tower(4);
        let other = make_weights(
            &measure.induced,
            WeightFamily::Geometric { theta: 0.25 },
        )
        .unwrap();
        let tv: f64 = measure
            .weights
            .weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv > 0.0);
    }

    #[test]
    fn cylinder_measures_multiply() {
        let (_, measure) = doubling_tower(3);
        let w = &measure.weights;
        assert_eq!(cylinder_measure(w, &[]).unwrap(), 1.0);
        let a0 = cylinder_measure(w, &[0]).unwrap();
        assert_eq!(a0, w.weights[0]);
        let a01 = cylinder_measure(w, &[0, 1]).unwrap();
        assert!((a01 - w.weights[0] * w.weights[1]).abs() < 1e-18);
        assert!(matches!(
            cylinder_measure(w, &[10_000]),
            Err(MeasureError::UnknownCell(10_000))
        ));
    }

    #[test]
    fn cylinder_additivity_is_exact() {
        let (_, measure) = doubling_tower(4);
        let w = &measure.weights;
        let n = w.weights.len();
        for p in [0usize, 1, n / 2] {
            let terms: Vec<f64> = (0..n)
                .map(|q| cylinder_measure(w, &[p, q]).unwrap())
                .collect();
            let total = numeric::pairwise_sum(&terms);
            let direct = cylinder_measure(w, &[p]).unwrap();
            assert!((total - direct).abs() < 1e-14);
        }
    }

    #[test]
    fn f_invariance_on_shallow_cylinders() {
        // nu(F^{-1} C) = sum_Q nu([Q] ++ C) must equal nu(C) by the product
        // formula; verify on depth <= 3 cylinders
        let (_, measure) = doubling_tower(3);
        let w = &measure.weights;
        let n = w.weights.len();
        let cylinders: Vec<Vec<usize>> =
            vec![vec![0], vec![1, 0], vec![0, 1, 2 % n]];
        for c in cylinders {
            let direct = cylinder_measure(w, &c).unwrap();
            let terms: Vec<f64> = (0..n)
                .map(|q| {
                    let mut ext = vec![q];
                    ext.extend_from_slice(&c);
                    cylinder_measure(w, &ext).unwrap()
                })
                .collect();
            let pulled = numeric::pairwise_sum(&terms);
            assert!(
                (pulled - direct).abs() < 1e-14,
                "invariance defect {}",
                (pulled - direct).abs()
            );
        }
    }

    #[test]
    fn sampler_is_deterministic_given_seed() {
        let (f, measure) = doubling_tower(4);
        let a = sample_mu_a(&f, &measure, 100, 7, DEFAULT_CASCADE_DEPTH);
        let b = sample_mu_a(&f, &measure, 100, 7, DEFAULT_CASCADE_DEPTH);
        assert_eq!(a, b);
        let c = sample_mu_a(&f, &measure, 100, 8, DEFAULT_CASCADE_DEPTH);
        assert_ne!(a, c);
    }

    #[test]
    fn constant_observable_integrates_to_one_with_zero_error() {
        let (f, measure) = doubling_tower(3);
        let est = integrate(&f, &measure, |_| 1.0, 2000, 3, DEFAULT_CASCADE_DEPTH);
        assert_eq!(est.estimate, 1.0);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn sampled_support_fills_histogram() {
        let (f, measure) = doubling_tower(6);
        let samples = sample_mu_a(&f, &measure, 20_000, 42, DEFAULT_CASCADE_DEPTH);
        let hist = support_histogram(&samples, 64);
        let occupied = hist.iter().filter(|&&c| c > 0).count();
        assert_eq!(occupied, 64, "histogram {hist:?}");
    }

    #[test]
    fn bootstrap_errors_shrink_with_sample_size() {
        let (f, measure) = doubling_tower(4);
        let obs = |p: &TorusPoint| (2.0 * std::f64::consts::PI * p.coords()[0]).cos();
        let small = integrate(&f, &measure, obs, 4_000, 11, DEFAULT_CASCADE_DEPTH);
        let large = integrate(&f, &measure, obs, 16_000, 11, DEFAULT_CASCADE_DEPTH);
        let ratio = small.std_error / large.std_error;
        assert!(
            (ratio - 2.0).abs() < 0.8,
            "expected ~2x error reduction, got {ratio}"
        );
    }
}
