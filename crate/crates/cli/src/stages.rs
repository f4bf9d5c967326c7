//! Stage implementations. Each stage consumes the shared pipeline state,
//! writes its JSON report, logs to stderr with a stage-name prefix, and
//! records pass/fail in the reporter.

use std::sync::Arc;

use towerdyn::induced::{
    build_base, build_induced_map, certify_markov, InducedBuildOptions, InducedMarkovMap,
};
use towerdyn::map::{derivative_cocycle, TorusMap};
use towerdyn::measures::{
    integrate, make_weights, sample_mu_a, support_histogram, TowerMeasure,
};
use towerdyn::numeric;
use towerdyn::orbits::{
    find_periodic_points, preorbit_density_certificate, sampled_arc_escape,
    verify_expanding_off_u0, verify_irg, Classification, PeriodicOrbit,
};
use towerdyn::stats::{
    correlation_decay, lyapunov_exponents, tail_decay_fit, Sampler,
};
use towerdyn::torus::{torus_distance, Ball, TorusPoint};
use towerdyn::zooming::{
    check_zooming_axioms, compute_source_zooming_data, zooming_frequency, SourceZoomingData,
    ZoomingContraction,
};
use towerdyn::StatsError;

use crate::config::{
    ExperimentConfig, SamplerChoice, StageName, VerifyExampleParams, ZoomingScanParams,
};
use crate::report::*;

/// Exit codes, one per failing stage kind.
pub mod exit_codes {
    pub const CONFIG: i32 = 2;
    pub const MAP: i32 = 3;
    pub const PERIODIC: i32 = 4;
    pub const ZOOMING: i32 = 5;
    pub const INDUCED: i32 = 6;
    pub const MEASURES: i32 = 7;
    pub const STATS: i32 = 8;
    pub const VERIFY: i32 = 9;
    pub const PREORBIT: i32 = 10;
}

/// A stage failure carrying its exit code; the summary still gets written.
#[derive(Debug)]
pub struct StageFailure {
    pub stage: &'static str,
    pub code: i32,
    pub message: String,
}

impl std::fmt::Display for StageFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}] {}", self.stage, self.message)
    }
}

impl std::error::Error for StageFailure {}

fn fail(stage: &'static str, code: i32, message: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(StageFailure {
        stage,
        code,
        message: message.into(),
    })
}

fn log(stage: &str, message: impl AsRef<str>) {
    eprintln!("[{stage}] {}", message.as_ref());
}

/// Artifacts shared between stages of one run.
pub struct PipelineState {
    pub map: Box<dyn TorusMap>,
    pub source: Option<PeriodicOrbit>,
    pub zooming: Option<SourceZoomingData>,
    pub induced: Option<Arc<InducedMarkovMap>>,
    pub measure: Option<TowerMeasure>,
}

impl PipelineState {
    pub fn build(cfg: &ExperimentConfig) -> anyhow::Result<Self> {
        let map = cfg
            .map
            .build()
            .map_err(|e| fail("map", exit_codes::MAP, e.to_string()))?;
        Ok(Self {
            map,
            source: None,
            zooming: None,
            induced: None,
            measure: None,
        })
    }
}

pub fn run_stage(
    stage: StageName,
    cfg: &ExperimentConfig,
    state: &mut PipelineState,
    reporter: &mut Reporter,
) -> anyhow::Result<()> {
    match stage {
        StageName::MapInfo => run_map_info(cfg, state, reporter),
        StageName::Periodic => run_periodic(cfg, state, reporter),
        StageName::SourceZooming => run_source_zooming(cfg, state, reporter),
        StageName::Induced => run_induced(cfg, state, reporter),
        StageName::Measures => run_measures(cfg, state, reporter),
        StageName::Stats => run_stats(cfg, state, reporter),
        StageName::VerifyExample => run_verify_example(cfg, state, reporter),
        StageName::PreorbitDensity => run_preorbit_density(cfg, state, reporter),
        StageName::ZoomingScan => run_zooming_scan(cfg, state, reporter),
    }
}

pub fn run_map_info(
    cfg: &ExperimentConfig,
    state: &mut PipelineState,
    reporter: &mut Reporter,
) -> anyhow::Result<()> {
    let map = state.map.as_ref();
    let (sigma, u0_center, u0_radius) = match &cfg.map {
        towerdyn::families::MapDescriptor::PerturbedExample { params } => {
            let m = towerdyn::maps::PerturbedExampleMap::build(params.clone())
                .map_err(|e| fail("map-info", exit_codes::MAP, e.to_string()))?;
            (
                Some(m.sigma()),
                Some(m.u0().center.coords().to_vec()),
                Some(m.u0().radius),
            )
        }
        _ => (None, None, None),
    };
    let report = MapInfoReport {
        family: map.family_name().to_string(),
        dimension: map.dimension(),
        degree: map.degree(),
        sigma,
        u0_center,
        u0_radius,
    };
    reporter.write_json("map_info", &report)?;
    log("map-info", format!(
        "family {} on T^{} with degree {}",
        report.family, report.dimension, report.degree
    ));
    reporter.record("map-info", true, format!("degree {}", report.degree));
    Ok(())
}

pub fn run_periodic(
    cfg: &ExperimentConfig,
    state: &mut PipelineState,
    reporter: &mut Reporter,
) -> anyhow::Result<()> {
    let params = cfg.periodic.clone().unwrap_or_default();
    let search = find_periodic_points(state.map.as_ref(), params.period, params.seed_grid_resolution);
    let orbits: Vec<OrbitRecord> = search
        .orbits
        .iter()
        .map(|o| OrbitRecord {
            point: o.point.coords().to_vec(),
            period: o.period,
            classification: o.classification,
            eigenvalue_moduli: o.eigenvalue_moduli.clone(),
        })
        .collect();
    let sources: Vec<&PeriodicOrbit> = search
        .orbits
        .iter()
        .filter(|o| o.classification == Classification::Source)
        .collect();
    let report = PeriodicReport {
        period: params.period,
        seeds_total: search.seeds_total,
        seeds_converged: search.seeds_converged,
        orbits,
        source_count: sources.len(),
    };
    reporter.write_json("periodic", &report)?;
    log("periodic", format!(
        "{} orbits of period {} ({} sources)",
        report.orbits.len(),
        params.period,
        report.source_count
    ));
    let passed = !sources.is_empty();
    if let Some(first_source) = sources.first() {
        state.source = Some((*first_source).clone());
    }
    reporter.record(
        "periodic",
        passed,
        format!("{} sources found", report.source_count),
    );
    if !passed {
        return Err(fail(
            "periodic",
            exit_codes::PERIODIC,
            "no periodic source found",
        ));
    }
    Ok(())
}

pub fn run_source_zooming(
    cfg: &ExperimentConfig,
    state: &mut PipelineState,
    reporter: &mut Reporter,
) -> anyhow::Result<()> {
    let params = cfg.zooming.clone().unwrap_or_default();
    let source = state.source.as_ref().ok_or_else(|| {
        fail(
            "source-zooming",
            exit_codes::ZOOMING,
            "no source available; run the periodic stage first",
        )
    })?;
    let mut axiom_checks = Vec::new();
    for rate in &params.axiom_rates {
        let report = check_zooming_axioms(&ZoomingContraction::new(*rate), 10, 10)
            .map_err(|e| fail("source-zooming", exit_codes::ZOOMING, e.to_string()))?;
        axiom_checks.push(report);
    }
    let data = compute_source_zooming_data(state.map.as_ref(), source, params.delta_search)
        .map_err(|e| fail("source-zooming", exit_codes::ZOOMING, e.to_string()))?;
    log("source-zooming", format!(
        "n0 = {}, ell = {}, delta = {:.6}, block contraction {:.6}",
        data.n0, data.ell, data.delta, data.contraction_factor
    ));
    let report = SourceZoomingReport {
        axiom_checks,
        data: data.clone(),
    };
    reporter.write_json("source_zooming", &report)?;
    let passed = data.contraction_factor <= 1.0 / 16.0 + 1e-8;
    reporter.record(
        "source-zooming",
        passed,
        format!("ell {} delta {:.6}", data.ell, data.delta),
    );
    state.zooming = Some(data);
    Ok(())
}

pub fn run_induced(
    cfg: &ExperimentConfig,
    state: &mut PipelineState,
    reporter: &mut Reporter,
) -> anyhow::Result<()> {
    let params = cfg.induced.clone().unwrap_or_default();
    let data = state.zooming.as_ref().ok_or_else(|| {
        fail(
            "induced",
            exit_codes::INDUCED,
            "no zooming data; run the source-zooming stage first",
        )
    })?;
    let base = build_base(data, data.delta * params.radius_over_delta)
        .map_err(|e| fail("induced", exit_codes::INDUCED, e.to_string()))?;
    let opts = InducedBuildOptions {
        max_return: params.max_return,
        cell_budget: params.cell_budget,
        frontier_budget: params.frontier_budget,
        ..Default::default()
    };
    let alpha = ZoomingContraction::new(0.125);
    let induced = build_induced_map(state.map.as_ref(), &base, &alpha, &opts)
        .map_err(|e| fail("induced", exit_codes::INDUCED, e.to_string()))?;
    let markov = certify_markov(state.map.as_ref(), &induced, params.samples_per_cell)
        .map_err(|e| fail("induced", exit_codes::INDUCED, e.to_string()))?;
    let min_df = induced
        .cells
        .iter()
        .map(|c| c.df_min)
        .fold(f64::INFINITY, f64::min);
    log("induced", format!(
        "{} cells up to return time {}, min |DF| = {:.3e}, worst residual {:.2e}",
        induced.cells.len(),
        induced.truncation.max_return,
        min_df,
        markov.worst_step_residual
    ));
    let passed = min_df > 8.0 && markov.worst_step_residual < 1e-9;
    let report = InducedReport {
        markov,
        min_df_over_cells: min_df,
        document: induced.to_document(state.map.as_ref()),
    };
    reporter.write_json("induced", &report)?;
    reporter.record(
        "induced",
        passed,
        format!("{} cells, min |DF| {:.3e}", induced.cells.len(), min_df),
    );
    state.induced = Some(Arc::new(induced));
    Ok(())
}

pub fn run_measures(
    cfg: &ExperimentConfig,
    state: &mut PipelineState,
    reporter: &mut Reporter,
) -> anyhow::Result<()> {
    let params = cfg.measures.clone().ok_or_else(|| {
        fail(
            "measures",
            exit_codes::MEASURES,
            "missing `measures` section in the config",
        )
    })?;
    let induced = state.induced.clone().ok_or_else(|| {
        fail(
            "measures",
            exit_codes::MEASURES,
            "no induced map; run the induced stage first",
        )
    })?;
    let weights = make_weights(&induced, params.weights)
        .map_err(|e| fail("measures", exit_codes::MEASURES, e.to_string()))?;
    let measure = TowerMeasure::new(induced.clone(), weights);

    // Kac consistency test, grouped by return time
    let kac_test = kac_chi_squared(&measure, params.kac_draws, cfg.seed);
    log("measures", format!(
        "Kac chi2 = {:.3} (dof {}), p = {:.4}",
        kac_test.chi_squared, kac_test.degrees_of_freedom, kac_test.p_value
    ));

    let samples = sample_mu_a(
        state.map.as_ref(),
        &measure,
        params.n_samples,
        cfg.seed,
        params.cascade_depth,
    );
    let dim = state.map.dimension();
    let sample_mean: Vec<f64> = (0..dim)
        .map(|d| {
            let col: Vec<f64> = samples.iter().map(|p| p.coords()[d]).collect();
            numeric::mean(&col)
        })
        .collect();
    let bins = 64;
    let hist = support_histogram(&samples, bins);
    let occupied = hist.iter().filter(|&&c| c > 0).count();

    let coordinate_integral = integrate(
        state.map.as_ref(),
        &measure,
        |p: &TorusPoint| p.coords()[0],
        params.n_samples.min(200_000),
        cfg.seed ^ 0x11,
        params.cascade_depth,
    );

    if reporter.format == OutputFormat::Csv {
        let rows: Vec<String> = samples
            .iter()
            .map(|p| {
                p.coords()
                    .iter()
                    .map(|c| format!("{c}"))
                    .collect::<Vec<_>>()
                    .join(",")
            })
            .collect();
        let header = (0..dim).map(|d| format!("x{d}")).collect::<Vec<_>>().join(",");
        reporter.write_csv("samples", &header, &rows)?;
    }

    let passed = kac_test.passed;
    let report = MeasureReport {
        ideal_coverage: measure.weights.ideal_coverage,
        discarded_tail_mass: measure.weights.discarded_tail_mass,
        mean_return: measure.mean_return(),
        kac_test,
        sample_count: samples.len(),
        sample_mean,
        occupied_bins: occupied,
        histogram_bins: bins,
        coordinate_integral,
    };
    reporter.write_json("measures", &report)?;
    reporter.record(
        "measures",
        passed,
        format!(
            "coverage {:.4}, Kac p = {:.4}",
            report.ideal_coverage, report.kac_test.p_value
        ),
    );
    state.measure = Some(measure);
    Ok(())
}

pub fn kac_chi_squared(measure: &TowerMeasure, draws: usize, seed: u64) -> KacTestReport {
    let probabilities = measure.kac_probabilities();
    let mut counts = vec![0usize; probabilities.len()];
    for i in 0..draws {
        let mut rng = towerdyn::exec::rng_for(seed ^ 0x6AC, i as u64);
        counts[measure.sample_cell_kac(&mut rng)] += 1;
    }
    let max_r = measure.induced.truncation.max_return;
    let mut expected = vec![0.0f64; max_r + 1];
    let mut observed = vec![0.0f64; max_r + 1];
    for (cell, (p, c)) in measure
        .induced
        .cells
        .iter()
        .zip(probabilities.iter().zip(&counts))
    {
        expected[cell.return_time] += p * draws as f64;
        observed[cell.return_time] += *c as f64;
    }
    let mut chi2 = 0.0;
    let mut dof = 0usize;
    for k in 1..=max_r {
        if expected[k] >= 5.0 {
            chi2 += (observed[k] - expected[k]).powi(2) / expected[k];
            dof += 1;
        }
    }
    let dof = dof.saturating_sub(1).max(1);
    let p_value = numeric::chi_squared_sf(chi2, dof);
    KacTestReport {
        draws,
        chi_squared: chi2,
        degrees_of_freedom: dof,
        p_value,
        passed: p_value > 0.01,
    }
}

pub fn run_stats(
    cfg: &ExperimentConfig,
    state: &mut PipelineState,
    reporter: &mut Reporter,
) -> anyhow::Result<()> {
    let params = cfg.stats.clone().ok_or_else(|| {
        fail("stats", exit_codes::STATS, "missing `stats` section in the config")
    })?;
    let cascade = cfg
        .measures
        .as_ref()
        .map(|m| m.cascade_depth)
        .unwrap_or(towerdyn::measures::DEFAULT_CASCADE_DEPTH);

    let make_sampler = |choice: SamplerChoice| -> anyhow::Result<Sampler<'_>> {
        match choice {
            SamplerChoice::Lebesgue => Ok(Sampler::Lebesgue),
            SamplerChoice::Tower => {
                let measure = state.measure.as_ref().ok_or_else(|| {
                    fail(
                        "stats",
                        exit_codes::STATS,
                        "tower sampler requires the measures stage",
                    )
                })?;
                Ok(Sampler::Tower {
                    measure,
                    cascade_depth: cascade,
                })
            }
        }
    };

    let lyap_sampler = make_sampler(params.lyapunov.sampler)?;
    let lyapunov = lyapunov_exponents(
        state.map.as_ref(),
        &lyap_sampler,
        params.lyapunov.n_iterates,
        params.lyapunov.n_samples,
        cfg.seed ^ 0x1A9,
    )
    .map_err(|e| fail("stats", exit_codes::STATS, e.to_string()))?;
    log("stats", format!(
        "top Lyapunov exponent {:.6} +- {:.2e}",
        lyapunov.exponents[0], lyapunov.std_errors[0]
    ));

    let corr_sampler = make_sampler(params.correlations.sampler)?;
    let correlations = match correlation_decay(
        state.map.as_ref(),
        &corr_sampler,
        params.correlations.psi,
        params.correlations.phi,
        params.correlations.max_lag,
        params.correlations.n_samples,
        cfg.seed ^ 0xC0,
    ) {
        Ok(curve) => {
            log("stats", format!(
                "correlation slope {:.4}, R2 {:.4}",
                curve.fit.slope, curve.fit.r_squared
            ));
            if reporter.format == OutputFormat::Csv {
                let rows: Vec<String> = curve
                    .lags
                    .iter()
                    .map(|&k| {
                        format!("{k},{},{}", curve.correlations[k], curve.std_errors[k])
                    })
                    .collect();
                reporter.write_csv("correlations", "lag,correlation,std_error", &rows)?;
            }
            CorrelationOutcome::Curve(curve)
        }
        Err(StatsError::SignalBelowNoise { usable, needed }) => {
            log("stats", format!(
                "correlations below noise floor ({usable} usable lags of {needed} needed)"
            ));
            CorrelationOutcome::SignalBelowNoise { usable, needed }
        }
        Err(e) => return Err(fail("stats", exit_codes::STATS, e.to_string())),
    };

    let (tail_fit, lyap_ok) = if let Some(measure) = state.measure.as_ref() {
        let fit = tail_decay_fit(&measure.induced, &measure.weights, params.tail_n_max);
        let block_bound = 8f64.ln() / measure.ell() as f64;
        (fit, lyapunov.exponents[0] > block_bound)
    } else {
        (
            towerdyn::stats::TailFit {
                slope: 0.0,
                r_squared: None,
                points: Vec::new(),
                degenerate: true,
            },
            lyapunov.exponents[0] > 0.0,
        )
    };

    let passed = lyap_ok
        && match &correlations {
            CorrelationOutcome::Curve(c) => c.fit.slope < 0.0,
            CorrelationOutcome::SignalBelowNoise { .. } => true,
        };
    let report = StatsReport {
        lyapunov_sampler: lyap_sampler.name().to_string(),
        lyapunov,
        correlation_sampler: corr_sampler.name().to_string(),
        correlations,
        tail_fit,
    };
    reporter.write_json("stats", &report)?;
    reporter.record(
        "stats",
        passed,
        format!("lyapunov {:.4}", report.lyapunov.exponents[0]),
    );
    Ok(())
}

pub fn run_preorbit_density(
    cfg: &ExperimentConfig,
    state: &mut PipelineState,
    reporter: &mut Reporter,
) -> anyhow::Result<()> {
    let params = cfg.preorbit.clone().ok_or_else(|| {
        fail(
            "preorbit-density",
            exit_codes::PREORBIT,
            "missing `preorbit` section in the config",
        )
    })?;
    let point = match (&params.point, &state.source) {
        (Some(coords), _) => TorusPoint::new(coords.clone()),
        (None, Some(source)) => source.point.clone(),
        (None, None) => {
            return Err(fail(
                "preorbit-density",
                exit_codes::PREORBIT,
                "no point given and no source available",
            ))
        }
    };
    let cert = preorbit_density_certificate(
        state.map.as_ref(),
        &point,
        params.eps,
        params.depth_max,
        params.node_budget,
    )
    .map_err(|e| fail("preorbit-density", exit_codes::PREORBIT, e.to_string()))?;
    log("preorbit-density", format!(
        "certified = {}, depth = {:?}, nodes = {}",
        cert.certified, cert.depth_used, cert.nodes_expanded
    ));
    let passed = cert.certified;
    let report = PreorbitReport {
        point: point.coords().to_vec(),
        eps: params.eps,
        certificate: cert,
    };
    reporter.write_json("preorbit_density", &report)?;
    reporter.record(
        "preorbit-density",
        passed,
        format!("depth {:?}", report.certificate.depth_used),
    );
    Ok(())
}

pub fn run_zooming_scan(
    cfg: &ExperimentConfig,
    state: &mut PipelineState,
    reporter: &mut Reporter,
) -> anyhow::Result<()> {
    let params: ZoomingScanParams = cfg.zooming_scan.clone().ok_or_else(|| {
        fail(
            "zooming-scan",
            exit_codes::ZOOMING,
            "missing `zooming_scan` section in the config",
        )
    })?;
    let point = TorusPoint::new(params.point.clone());
    let alpha = ZoomingContraction::new(params.lambda);
    let freq = zooming_frequency(state.map.as_ref(), &point, &alpha, params.delta, params.n_max);
    log("zooming-scan", format!(
        "frequency {:.4} over {} times",
        freq.frequency, params.n_max
    ));
    let report = ZoomingScanReport {
        point: params.point.clone(),
        lambda: params.lambda,
        delta: params.delta,
        frequency: freq,
    };
    reporter.write_json("zooming_scan", &report)?;
    reporter.record(
        "zooming-scan",
        true,
        format!("frequency {:.4}", report.frequency.frequency),
    );
    Ok(())
}

pub fn run_verify_example(
    cfg: &ExperimentConfig,
    state: &mut PipelineState,
    reporter: &mut Reporter,
) -> anyhow::Result<()> {
    let params: VerifyExampleParams = cfg.verify_example.clone().unwrap_or_default();
    let map = state.map.as_ref();
    let u0 = match &cfg.map {
        towerdyn::families::MapDescriptor::PerturbedExample { params } => Ball::new(
            TorusPoint::new(params.p.clone()),
            params.u0_radius,
        )
        .map_err(|e| fail("verify-example", exit_codes::VERIFY, e.to_string()))?,
        _ => {
            return Err(fail(
                "verify-example",
                exit_codes::VERIFY,
                "verify-example needs a perturbed-example map",
            ))
        }
    };

    // volume expansion on the requested grid
    let sigma = towerdyn::maps::min_abs_det_on_grid(map, params.grid_resolution);
    let volume_expanding = sigma > 1.0;
    log("verify-example", format!(
        "min |det Df| = {sigma:.6} on {0}x{0} grid",
        params.grid_resolution
    ));

    // hypothesis (i): expanding off U0
    let off_u0 = verify_expanding_off_u0(map, Some(&u0), params.grid_resolution);
    log("verify-example", format!(
        "min singular value off U0 = {:.6}",
        off_u0.min_singular_value
    ));

    // periodic structure near the pitchfork site
    let search = find_periodic_points(map, 1, 96);
    let saddle = search
        .orbits
        .iter()
        .find(|o| {
            o.classification == Classification::Saddle
                && torus_distance(&o.point, &u0.center) < u0.radius
        })
        .map(|o| OrbitRecord {
            point: o.point.coords().to_vec(),
            period: o.period,
            classification: o.classification,
            eigenvalue_moduli: o.eigenvalue_moduli.clone(),
        });
    let repeller_orbits: Vec<&PeriodicOrbit> = search
        .orbits
        .iter()
        .filter(|o| {
            o.classification == Classification::Source
                && torus_distance(&o.point, &u0.center) < u0.radius
        })
        .collect();
    let repellers: Vec<OrbitRecord> = repeller_orbits
        .iter()
        .map(|o| OrbitRecord {
            point: o.point.coords().to_vec(),
            period: o.period,
            classification: o.classification,
            eigenvalue_moduli: o.eigenvalue_moduli.clone(),
        })
        .collect();

    // complex pair at the first rotation site
    let (complex_pair_moduli, complex_pair_args) = match &cfg.map {
        towerdyn::families::MapDescriptor::PerturbedExample { params } => {
            let q = TorusPoint::new(params.q_sites[0].center.clone());
            let eigen = derivative_cocycle(map, &q, 1).matrix.complex_eigenvalues();
            (
                eigen.iter().map(|z| z.norm()).collect::<Vec<f64>>(),
                eigen.iter().map(|z| z.arg()).collect::<Vec<f64>>(),
            )
        }
        _ => unreachable!(),
    };

    // pre-orbit density for the first repeller
    let density_target = repeller_orbits
        .first()
        .map(|o| o.point.clone())
        .unwrap_or_else(|| u0.center.clone());
    let cert = preorbit_density_certificate(
        map,
        &density_target,
        params.preorbit_eps,
        params.preorbit_depth,
        params.preorbit_budget,
    )
    .map_err(|e| fail("verify-example", exit_codes::VERIFY, e.to_string()))?;
    log("verify-example", format!(
        "pre-orbit density certified = {} at depth {:?}",
        cert.certified, cert.depth_used
    ));

    // IRG along an orbit that stays off U0 (the rotation fixed point)
    let irg_start = match &cfg.map {
        towerdyn::families::MapDescriptor::PerturbedExample { params } => {
            TorusPoint::new(params.q_sites[0].center.clone())
        }
        _ => unreachable!(),
    };
    let irg = verify_irg(map, &irg_start, Some(&u0), 8, 0.01, 0.1)
        .map_err(|e| fail("verify-example", exit_codes::VERIFY, e.to_string()))?;

    // hypothesis (ii) sampled falsifier
    let u1 = Ball::new(u0.center.clone(), params.u1_radius)
        .map_err(|e| fail("verify-example", exit_codes::VERIFY, e.to_string()))?;
    let arc_escape = sampled_arc_escape(
        map,
        &u0,
        &u1,
        params.delta0,
        params.arcs,
        params.arc_horizon,
        cfg.seed ^ 0xA7C,
    );
    log("verify-example", format!(
        "arc escape: {}/{} arcs carry an escaping point (evidence, not proof)",
        arc_escape.arcs_with_escape_point, arc_escape.arcs_tested
    ));

    let class_f = ClassFReport {
        volume_expanding,
        dense_preorbit_evidence: cert.certified,
        expanding_off_u0: off_u0.expanding,
        separation_evidence_irg: irg.verified,
    };
    let has_complex_pair = complex_pair_moduli.iter().all(|m| *m > 1.0)
        && complex_pair_args.iter().any(|a| a.abs() > 1e-6);
    let passed = volume_expanding
        && off_u0.expanding
        && saddle.is_some()
        && repellers.len() == 2
        && has_complex_pair
        && cert.certified
        && irg.verified
        && arc_escape.passed;

    let report = VerifyExampleReport {
        grid_resolution: params.grid_resolution,
        sigma_on_grid: sigma,
        volume_expanding,
        off_u0,
        saddle,
        repellers,
        complex_pair_moduli,
        complex_pair_args,
        preorbit: PreorbitReport {
            point: density_target.coords().to_vec(),
            eps: params.preorbit_eps,
            certificate: cert,
        },
        irg,
        arc_escape,
        class_f,
        passed,
    };
    reporter.write_json("verify_example", &report)?;
    reporter.record(
        "verify-example",
        passed,
        format!("sigma {:.4}, off-U0 min {:.4}", sigma, report.off_u0.min_singular_value),
    );
    if !passed {
        return Err(fail(
            "verify-example",
            exit_codes::VERIFY,
            "one or more example certificates failed (see verify_example.json)",
        ));
    }
    Ok(())
}
