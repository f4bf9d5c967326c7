//! Acceptance suite: one test per shipped criterion, each printing a
//! PASS/FAIL line (run with `--nocapture` to see them). The criteria are
//! serialized through a mutex so the stated runtime budgets are measured
//! without cross-test contention.

use std::sync::{Arc, Mutex, OnceLock};
use std::time::Instant;

use towerdyn::induced::{
    build_base, build_induced_map, certify_markov, InducedBuildOptions, InducedMarkovMap,
};
use towerdyn::map::TorusMap;
use towerdyn::maps::{
    min_abs_det_on_grid, DoublingFamilyMap, PerturbedExampleMap, PerturbedExampleParams,
};
use towerdyn::measures::{
    cylinder_measure, make_weights, TowerMeasure, WeightFamily, DEFAULT_CASCADE_DEPTH,
};
use towerdyn::numeric;
use towerdyn::orbits::{
    find_periodic_points, preorbit_density_certificate, verify_expanding_off_u0, Classification,
};
use towerdyn::stats::{
    correlation_decay, lyapunov_exponents, tail_decay_fit, Observable, Sampler,
};
use towerdyn::zooming::{check_zooming_axioms, compute_source_zooming_data, ZoomingContraction};

fn lock() -> std::sync::MutexGuard<'static, ()> {
    static LOCK: OnceLock<Mutex<()>> = OnceLock::new();
    LOCK.get_or_init(|| Mutex::new(()))
        .lock()
        .unwrap_or_else(|e| e.into_inner())
}

fn report(criterion: usize, name: &str, passed: bool, detail: &str, elapsed: f64) {
    println!(
        "[acceptance] criterion {criterion} ({name}): {} — {detail} [{elapsed:.2}s]",
        if passed { "PASS" } else { "FAIL" }
    );
    assert!(passed, "criterion {criterion} ({name}) failed: {detail}");
}

fn doubling_pipeline(max_return: usize) -> (DoublingFamilyMap, InducedMarkovMap) {
    let f = DoublingFamilyMap::pure(2).unwrap();
    let source = find_periodic_points(&f, 1, 16).orbits.remove(0);
    let data = compute_source_zooming_data(&f, &source, 0.125).unwrap();
    let base = build_base(&data, data.delta / 8.0).unwrap();
    let opts = InducedBuildOptions {
        max_return,
        ..Default::default()
    };
    let alpha = ZoomingContraction::new(0.125);
    let induced = build_induced_map(&f, &base, &alpha, &opts).unwrap();
    (f, induced)
}

// ---------------------------------------------------------------------------
// criterion 1: zooming axioms
// ---------------------------------------------------------------------------

#[test]
fn criterion_1_zooming_axioms() {
    let _guard = lock();
    let t0 = Instant::now();

    let mut ok = true;
    let mut detail = String::new();
    for lambda in [0.125f64, 0.5] {
        let alpha = ZoomingContraction::new(lambda);
        let rep = check_zooming_axioms(&alpha, 10, 10).expect("axioms must hold");
        ok &= rep.grid_points == 1000;
        detail.push_str(&format!("lambda {lambda}: {} grid points; ", rep.grid_points));
    }
    // exact series for lambda = 1/8: sum_n alpha_n(r) = r/7 < r/4
    let alpha = ZoomingContraction::new(0.125);
    for r in [0.01f64, 0.125, 0.5, 1.0] {
        let sum = alpha.series_sum(r);
        ok &= sum == r / 7.0;
        ok &= sum < r / 4.0;
    }
    detail.push_str("series sum = r/7 exactly");

    let elapsed = t0.elapsed().as_secs_f64();
    ok &= elapsed < 1.0;
    report(1, "zooming axioms", ok, &detail, elapsed);
}

// ---------------------------------------------------------------------------
// criterion 2: source zooming data on the doubling map
// ---------------------------------------------------------------------------

#[test]
fn criterion_2_source_zooming_data() {
    let _guard = lock();
    let t0 = Instant::now();

    let f = DoublingFamilyMap::pure(2).unwrap();
    let source = find_periodic_points(&f, 1, 16).orbits.remove(0);
    let data = compute_source_zooming_data(&f, &source, 0.125).unwrap();

    let ok = data.n0 == 6
        && data.ell == 6
        && data.contraction_factor == 1.0 / 64.0
        && data.contraction_factor <= 1.0 / 16.0;
    let elapsed = t0.elapsed().as_secs_f64();
    let timed = elapsed < 1.0;
    report(
        2,
        "source zooming data",
        ok && timed,
        &format!(
            "n0 = {}, ell = {}, block contraction = {} (exactly 1/64)",
            data.n0, data.ell, data.contraction_factor
        ),
        elapsed,
    );
}

// ---------------------------------------------------------------------------
// criterion 3: induced Markov map on the doubling pipeline
// ---------------------------------------------------------------------------

/// Exact i128 oracle: candidate cell j at return k has endpoints
/// (64 j -+ 1) / (64^k * 64), is valid iff |j| <= 64^(k-1) - 1, and is a
/// first return iff no block image touches the base
/// (|j mod 64^(k-b)| > 64^(k-b-1) as a signed representative).
fn oracle_endpoints(k: u32, j: i128) -> (f64, f64) {
    let denom = 64f64.powi(k as i32) * 64.0;
    (
        towerdyn::torus::wrap_unit((64 * j - 1) as f64 / denom),
        towerdyn::torus::wrap_unit((64 * j + 1) as f64 / denom),
    )
}

fn oracle_first_return(k: u32, j: i128) -> bool {
    for b in 1..k {
        let modulus = 64i128.pow(k - b);
        let mut jb = j.rem_euclid(modulus);
        if jb > modulus / 2 {
            jb -= modulus;
        }
        if jb.abs() <= modulus / 64 {
            return false;
        }
    }
    true
}

#[test]
fn criterion_3_induced_markov_map() {
    let _guard = lock();
    let t0 = Instant::now();

    let (f, induced) = doubling_pipeline(8);
    let markov = certify_markov(&f, &induced, 16).unwrap();
    let min_df = induced
        .cells
        .iter()
        .map(|c| c.df_min)
        .fold(f64::INFINITY, f64::min);

    // covered nu-proxy mass: the untruncated geometric (theta = 1/2) family
    // mass carried by the found return levels
    let weights = make_weights(&induced, WeightFamily::Geometric { theta: 0.5 }).unwrap();
    let coverage = weights.ideal_coverage;

    // exhaustive-oracle match: every found cell's endpoints against the
    // exact rational arithmetic, to 1e-12
    let mut worst_endpoint_error = 0.0f64;
    for cell in &induced.cells {
        let k = cell.return_time as u32;
        let scale = 64f64.powi(k as i32);
        let c = cell.center().coords()[0];
        let unwrapped = if c > 0.5 { c - 1.0 } else { c };
        let j = (unwrapped * scale).round() as i128;
        assert!(
            j.abs() < 64i128.pow(k - 1),
            "cell j = {j} out of the candidate range at level {k}"
        );
        assert!(oracle_first_return(k, j), "cell {j} at level {k} is not a first return");
        let (lo_e, hi_e) = oracle_endpoints(k, j);
        let (lo_i, hi_i) = cell.endpoints.unwrap();
        worst_endpoint_error = worst_endpoint_error
            .max(towerdyn::torus::wrap_signed(lo_i - lo_e).abs())
            .max(towerdyn::torus::wrap_signed(hi_i - hi_e).abs());
    }

    let every_level_nonempty = (1..=8).all(|k| induced.cells.iter().any(|c| c.return_time == k));
    // the k = 1 central cell attains the minimum with exactly |DF| = 64
    let ok = markov.worst_step_residual < 1e-9
        && min_df == 64.0
        && min_df > 8.0
        && coverage >= 0.99
        && every_level_nonempty
        && worst_endpoint_error < 1e-12;

    let elapsed = t0.elapsed().as_secs_f64();
    let timed = elapsed < 10.0;
    report(
        3,
        "induced Markov map",
        ok && timed,
        &format!(
            "{} cells, min |DF| = {min_df}, residual {:.2e}, coverage {:.5}, oracle error {:.2e}",
            induced.cells.len(),
            markov.worst_step_residual,
            coverage,
            worst_endpoint_error
        ),
        elapsed,
    );
}

// ---------------------------------------------------------------------------
// criterion 4: tower measure consistency
// ---------------------------------------------------------------------------

#[test]
fn criterion_4_tower_measure_consistency() {
    let _guard = lock();
    let t0 = Instant::now();

    let (_f, induced) = doubling_pipeline(8);
    let induced = Arc::new(induced);
    let weights = make_weights(&induced, WeightFamily::Geometric { theta: 0.5 }).unwrap();
    let measure = TowerMeasure::new(induced.clone(), weights);
    let w = &measure.weights;
    let n = w.weights.len();

    // cylinder additivity to 1e-14
    let mut additivity_ok = true;
    for p in [0usize, 1, n / 2, n - 1] {
        let terms: Vec<f64> = (0..n)
            .map(|q| cylinder_measure(w, &[p, q]).unwrap())
            .collect();
        let defect = (numeric::pairwise_sum(&terms) - cylinder_measure(w, &[p]).unwrap()).abs();
        additivity_ok &= defect < 1e-14;
    }

    // Kac chi-squared with 1e5 draws, grouped by return time
    let draws = 100_000usize;
    let probabilities = measure.kac_probabilities();
    let mut counts = vec![0usize; n];
    for i in 0..draws {
        let mut rng = towerdyn::exec::rng_for(314159, i as u64);
        counts[measure.sample_cell_kac(&mut rng)] += 1;
    }
    let max_r = induced.truncation.max_return;
    let mut expected = vec![0.0f64; max_r + 1];
    let mut observed = vec![0.0f64; max_r + 1];
    for (cell, (p, c)) in induced.cells.iter().zip(probabilities.iter().zip(&counts)) {
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
    let p_value = numeric::chi_squared_sf(chi2, dof - 1);
    let kac_ok = p_value > 0.01;

    // F-invariance on depth <= 3 cylinders: nu(F^{-1} C) = nu(C) exactly
    let mut invariance_ok = true;
    for c in [vec![0usize], vec![1, 0], vec![0, 1, 2]] {
        let direct = cylinder_measure(w, &c).unwrap();
        let terms: Vec<f64> = (0..n)
            .map(|q| {
                let mut ext = vec![q];
                ext.extend_from_slice(&c);
                cylinder_measure(w, &ext).unwrap()
            })
            .collect();
        invariance_ok &= (numeric::pairwise_sum(&terms) - direct).abs() < 1e-14;
    }

    let elapsed = t0.elapsed().as_secs_f64();
    let timed = elapsed < 30.0;
    report(
        4,
        "tower measure consistency",
        additivity_ok && kac_ok && invariance_ok && timed,
        &format!("additivity exact, Kac p = {p_value:.4}, invariance exact"),
        elapsed,
    );
}

// ---------------------------------------------------------------------------
// criterion 5: expanding-measure certification
// ---------------------------------------------------------------------------

#[test]
fn criterion_5_expanding_measure() {
    let _guard = lock();
    let t0 = Instant::now();

    let (f, induced) = doubling_pipeline(8);
    let induced = Arc::new(induced);
    let weights = make_weights(&induced, WeightFamily::Geometric { theta: 0.5 }).unwrap();
    let measure = TowerMeasure::new(induced, weights);

    let tower_sampler = Sampler::Tower {
        measure: &measure,
        cascade_depth: DEFAULT_CASCADE_DEPTH,
    };
    let tower = lyapunov_exponents(&f, &tower_sampler, 10_000, 64, 5).unwrap();
    let block_bound = 8f64.ln() / measure.ell() as f64;
    let tower_ok = tower.exponents[0] > block_bound;

    let lebesgue = lyapunov_exponents(&f, &Sampler::Lebesgue, 1_000_000, 16, 5).unwrap();
    let lebesgue_ok = (lebesgue.exponents[0] - 2f64.ln()).abs() < 0.005 * 2f64.ln();

    let elapsed = t0.elapsed().as_secs_f64();
    let timed = elapsed < 60.0;
    report(
        5,
        "expanding-measure certification",
        tower_ok && lebesgue_ok && timed,
        &format!(
            "mu_a exponent {:.6} > {:.6}; Lebesgue exponent {:.6} vs log 2",
            tower.exponents[0], block_bound, lebesgue.exponents[0]
        ),
        elapsed,
    );
}

// ---------------------------------------------------------------------------
// criterion 6: exponential tails and decay of correlations
// ---------------------------------------------------------------------------

#[test]
fn criterion_6_tails_and_decay() {
    let _guard = lock();
    let t0 = Instant::now();

    let (f, induced) = doubling_pipeline(8);
    let induced = Arc::new(induced);
    let weights = make_weights(&induced, WeightFamily::Geometric { theta: 0.5 }).unwrap();
    let measure = TowerMeasure::new(induced.clone(), weights);

    // tail fit before the truncation horizon
    let tail = tail_decay_fit(&induced, &measure.weights, 7);
    let tail_ok = tail.r_squared.is_some_and(|r2| r2 > 0.99);

    // Lebesgue sawtooth: analytic oracle C(k) = 2^-k / 12, slope -log 2
    let obs = Observable::CenteredCoord { axis: 0 };
    let lebesgue_curve =
        correlation_decay(&f, &Sampler::Lebesgue, obs, obs, 10, 1_000_000, 1234).unwrap();
    let mut oracle_ok = true;
    for k in 0..=4usize {
        let analytic = 0.5f64.powi(k as i32) / 12.0;
        oracle_ok &= (lebesgue_curve.correlations[k] - analytic).abs()
            < 5.0 * lebesgue_curve.std_errors[k].max(1e-4);
    }
    let slope_ok = (lebesgue_curve.fit.slope + 2f64.ln()).abs() < 0.1 * 2f64.ln();

    // mu_a correlations: negative slope with a good fit
    let tower_sampler = Sampler::Tower {
        measure: &measure,
        cascade_depth: DEFAULT_CASCADE_DEPTH,
    };
    let mu_curve =
        correlation_decay(&f, &tower_sampler, obs, obs, 12, 400_000, 77).unwrap();
    let mu_ok = mu_curve.fit.slope < 0.0 && mu_curve.fit.r_squared > 0.9;

    let elapsed = t0.elapsed().as_secs_f64();
    let timed = elapsed < 300.0;
    report(
        6,
        "exponential tails and decay",
        tail_ok && oracle_ok && slope_ok && mu_ok && timed,
        &format!(
            "tail R2 {:.4}; Lebesgue slope {:.4} (want -log 2 within 10%); mu_a slope {:.4}, R2 {:.4}",
            tail.r_squared.unwrap_or(f64::NAN),
            lebesgue_curve.fit.slope,
            mu_curve.fit.slope,
            mu_curve.fit.r_squared
        ),
        elapsed,
    );
}

// ---------------------------------------------------------------------------
// criterion 7: the 2-D example certification
// ---------------------------------------------------------------------------

#[test]
fn criterion_7_example_certification() {
    let _guard = lock();
    let t0 = Instant::now();

    let map = PerturbedExampleMap::build(PerturbedExampleParams::reference()).unwrap();

    // volume expansion on the 512^2 grid
    let sigma = min_abs_det_on_grid(&map, 512);
    let volume_ok = sigma > 1.0;

    // saddle at p, repellers beside it
    let search = find_periodic_points(&map, 1, 96);
    let p = map.pitchfork_site();
    let saddle_ok = search.orbits.iter().any(|o| {
        o.classification == Classification::Saddle
            && towerdyn::torus::torus_distance(&o.point, p) < 1e-6
    });
    let repellers: Vec<_> = search
        .orbits
        .iter()
        .filter(|o| {
            o.classification == Classification::Source
                && towerdyn::torus::torus_distance(&o.point, p) < 0.1
        })
        .collect();
    let repellers_ok = repellers.len() == 2;

    // complex expanding pair at q1
    let q = towerdyn::torus::TorusPoint::new(map.q_sites()[0].center.clone());
    let eigen = map.derivative(&q).complex_eigenvalues();
    let complex_ok = eigen.iter().all(|z| z.norm() > 1.0 && z.im.abs() > 1e-6);

    // hypothesis (i): smallest singular value above 1 off U0
    let scan = verify_expanding_off_u0(&map, Some(map.u0()), 512);
    let expanding_ok = scan.expanding && scan.min_singular_value > 1.0;

    // pre-orbit density certificate for r1 within depth 12 (cell pruning)
    let r1 = &repellers[0];
    let cert = preorbit_density_certificate(&map, &r1.point, 0.05, 12, 2_000_000).unwrap();
    let density_ok = cert.certified && cert.depth_used.is_some_and(|d| d <= 12);

    let elapsed = t0.elapsed().as_secs_f64();
    let timed = elapsed < 600.0;
    report(
        7,
        "perturbed example certification",
        volume_ok && saddle_ok && repellers_ok && complex_ok && expanding_ok && density_ok && timed,
        &format!(
            "sigma = {sigma:.4}; saddle + {} repellers; |eig(q)| = {:.3}; off-U0 min sv {:.4}; density depth {:?}",
            repellers.len(),
            eigen[0].norm(),
            scan.min_singular_value,
            cert.depth_used
        ),
        elapsed,
    );
}

// ---------------------------------------------------------------------------
// criterion 8: byte-identical pipeline reports
// ---------------------------------------------------------------------------

#[test]
fn criterion_8_deterministic_reports() {
    let _guard = lock();
    let t0 = Instant::now();

    let exe = env!("CARGO_BIN_EXE_towerdyn");
    let config = concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../configs/doubling-pipeline.json"
    );
    let base = std::env::temp_dir().join(format!("towerdyn-acceptance-{}", std::process::id()));
    let out1 = base.join("run1");
    let out2 = base.join("run2");
    let _ = std::fs::remove_dir_all(&base);

    let mut statuses = Vec::new();
    for out in [&out1, &out2] {
        let status = std::process::Command::new(exe)
            .args([
                "pipeline",
                "--config",
                config,
                "--seed",
                "42",
                "--out",
                out.to_str().unwrap(),
            ])
            .stdout(std::process::Stdio::null())
            .stderr(std::process::Stdio::null())
            .status()
            .expect("pipeline run");
        statuses.push(status);
    }
    let exit_ok = statuses.iter().all(|s| s.success());

    // every report byte-identical across the two runs
    let mut files: Vec<String> = std::fs::read_dir(&out1)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    files.sort();
    let mut identical = !files.is_empty();
    for name in &files {
        let a = std::fs::read(out1.join(name)).unwrap();
        let b = std::fs::read(out2.join(name)).unwrap_or_default();
        identical &= a == b;
    }
    let _ = std::fs::remove_dir_all(&base);

    let elapsed = t0.elapsed().as_secs_f64();
    report(
        8,
        "deterministic pipeline reports",
        exit_ok && identical,
        &format!(
            "two seeded runs, exit codes ok = {exit_ok}, {} reports byte-identical",
            files.len()
        ),
        elapsed,
    );
}
