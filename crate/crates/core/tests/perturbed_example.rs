//! Certification of the shipped 2-D example: volume expansion, the saddle
//! and repeller structure at the pitchfork site, complex eigenvalues at the
//! rotation site, expansion off U0, pre-orbit density, and the hypothesis
//! verifiers.

use towerdyn::map::{derivative_cocycle, TorusMap};
use towerdyn::maps::{min_abs_det_on_grid, PerturbedExampleMap, PerturbedExampleParams};
use towerdyn::orbits::{
    find_periodic_points, preorbit_density_certificate, verify_expanding_off_u0, verify_irg,
    Classification,
};
use towerdyn::torus::{torus_distance, TorusPoint};
use towerdyn::zooming::compute_source_zooming_data;

fn reference() -> PerturbedExampleMap {
    PerturbedExampleMap::build(PerturbedExampleParams::reference()).unwrap()
}

#[test]
fn volume_expanding_on_fine_grid() {
    let map = reference();
    let sigma = min_abs_det_on_grid(&map, 512);
    assert!(sigma > 1.0);
    // golden: the 512-grid minimum sits next to the saddle where
    // |det Df| = 4 lambda_w = 2
    assert!((sigma - 2.006).abs() < 0.01, "sigma = {sigma}");
}

#[test]
fn pitchfork_structure_saddle_between_two_repellers() {
    let map = reference();
    let search = find_periodic_points(&map, 1, 96);
    let p = map.pitchfork_site();
    let near_p: Vec<_> = search
        .orbits
        .iter()
        .filter(|o| torus_distance(&o.point, p) < 0.1)
        .collect();
    assert_eq!(near_p.len(), 3, "expected saddle + two repellers near p");

    let saddle: Vec<_> = near_p
        .iter()
        .filter(|o| o.classification == Classification::Saddle)
        .collect();
    assert_eq!(saddle.len(), 1);
    assert!(torus_distance(&saddle[0].point, p) < 1e-8);
    // weak rate 1/2 along the pitchfork axis, 4 transverse
    let moduli = &saddle[0].eigenvalue_moduli;
    assert!((moduli[0] - 4.0).abs() < 1e-8);
    assert!((moduli[1] - 0.5).abs() < 1e-8);

    let sources: Vec<_> = near_p
        .iter()
        .filter(|o| o.classification == Classification::Source)
        .collect();
    assert_eq!(sources.len(), 2);
    for s in &sources {
        // golden multiplier of the repellers from the frozen construction
        assert!((s.eigenvalue_moduli[1] - 1.9431).abs() < 1e-3);
        assert!(s.eigenvalue_moduli.iter().all(|m| *m > 1.0));
    }
    // symmetric about p along the first axis
    let mut xs: Vec<f64> = sources.iter().map(|s| s.point.coords()[0]).collect();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let t_star = (xs[1] - xs[0]) / 2.0;
    assert!((t_star - 0.0239).abs() < 5e-4, "t* = {t_star}");
}

#[test]
fn complex_expanding_pair_at_rotation_site() {
    let map = reference();
    let q = TorusPoint::new(map.q_sites()[0].center.clone());
    let multiplier = derivative_cocycle(&map, &q, 1).into_matrix();
    let eigen = multiplier.complex_eigenvalues();
    for z in eigen.iter() {
        assert!((z.norm() - 4.0).abs() < 1e-9, "modulus {}", z.norm());
        assert!(z.im.abs() > 1.0, "eigenvalue {z} not genuinely complex");
    }
    // rotation angle pi/7 shows up as the argument
    let arg = eigen[0].arg().abs();
    assert!((arg - std::f64::consts::PI / 7.0).abs() < 1e-9);
}

#[test]
fn expanding_off_u0_with_golden_minimum() {
    let map = reference();
    let scan = verify_expanding_off_u0(&map, Some(map.u0()), 512);
    assert!(scan.expanding);
    // golden: the minimum lives inside the rotation bump
    assert!((scan.min_singular_value - 3.2809).abs() < 0.01);
    let q = TorusPoint::new(map.q_sites()[0].center.clone());
    assert!(torus_distance(&scan.argmin, &q) < map.q_sites()[0].radius);
}

#[test]
fn oversized_rotation_breaks_expansion_off_u0() {
    // a violating parameter set: crank the rotation angle until the cutoff
    // correction drags the smallest singular value below 1 outside U0
    let mut params = PerturbedExampleParams::reference();
    params.q_sites[0].angle = 5.0;
    let map = PerturbedExampleMap::build(params).unwrap();
    let scan = verify_expanding_off_u0(&map, Some(map.u0()), 256);
    assert!(!scan.expanding);
    assert!(scan.min_singular_value < 1.0);
}

#[test]
fn source_preorbit_is_dense_at_five_percent_within_depth_twelve() {
    let map = reference();
    let search = find_periodic_points(&map, 1, 96);
    let r1 = search
        .orbits
        .iter()
        .find(|o| {
            o.classification == Classification::Source
                && torus_distance(&o.point, map.pitchfork_site()) < 0.1
        })
        .expect("repeller near p");
    let cert = preorbit_density_certificate(&map, &r1.point, 0.05, 12, 2_000_000).unwrap();
    assert!(cert.certified);
    // golden: depth 3 suffices under cell pruning
    assert_eq!(cert.depth_used, Some(3));
}

#[test]
fn source_zooming_data_for_r1() {
    let map = reference();
    let search = find_periodic_points(&map, 1, 96);
    let r1 = search
        .orbits
        .into_iter()
        .find(|o| {
            o.classification == Classification::Source
                && torus_distance(&o.point, map.pitchfork_site()) < 0.1
        })
        .unwrap();
    let data = compute_source_zooming_data(&map, &r1, 0.05).unwrap();
    // golden: multiplier 1.9431 needs six blocks to clear expansion 32
    assert_eq!(data.n0, 6);
    assert_eq!(data.ell, 6);
    assert!((data.delta - 0.0193).abs() < 1e-3, "delta = {}", data.delta);
    assert!(data.contraction_factor <= 1.0 / 16.0 + 1e-8);
}

#[test]
fn irg_certificate_for_expanding_orbit_off_u0() {
    let map = reference();
    // the rotation fixed point q never leaves itself and sits outside U0
    let q = TorusPoint::new(map.q_sites()[0].center.clone());
    let cert = verify_irg(&map, &q, Some(map.u0()), 8, 0.01, 0.1).unwrap();
    assert!(cert.verified);
    // golden: expansion ~3.28 per step from eps = 0.01 reaches 0.1 by N = 2
    assert_eq!(cert.n_certified, Some(2));
}

#[test]
fn induced_map_on_the_torus_example() {
    // the zooming radius is small (the pull-back ball must dodge the
    // saddle's stable side), so the desk-scale base carries few branches;
    // the run is still fully certified and its shape is frozen here
    let map = reference();
    let r1 = find_periodic_points(&map, 1, 96)
        .orbits
        .into_iter()
        .find(|o| {
            o.classification == Classification::Source
                && torus_distance(&o.point, map.pitchfork_site()) < 0.1
        })
        .unwrap();
    let data = compute_source_zooming_data(&map, &r1, 0.05).unwrap();
    let base = towerdyn::induced::build_base(&data, data.delta / 8.0).unwrap();
    let opts = towerdyn::induced::InducedBuildOptions {
        max_return: 2,
        cell_budget: 512,
        frontier_budget: 4096,
        ..Default::default()
    };
    let alpha = towerdyn::zooming::ZoomingContraction::new(0.125);
    let induced = towerdyn::induced::build_induced_map(&map, &base, &alpha, &opts).unwrap();
    assert_eq!(induced.truncation.level_counts, vec![1, 1]);
    // golden expansion of the central branch: prod sigma_min over six steps
    assert!((induced.cells[0].df_min - 672.81).abs() < 0.5);
    assert!(induced.cells.iter().all(|c| c.df_min > 8.0));
    let markov = towerdyn::induced::certify_markov(&map, &induced, 12).unwrap();
    assert!(markov.worst_step_residual < 1e-9);
    assert!(markov.min_pair_separation > 0.0);

    // the single-branch tower still carries a working measure
    let weights = towerdyn::measures::make_weights(
        &induced,
        towerdyn::measures::WeightFamily::Geometric { theta: 0.5 },
    )
    .unwrap();
    let measure =
        towerdyn::measures::TowerMeasure::new(std::sync::Arc::new(induced), weights);
    let samples = towerdyn::measures::sample_mu_a(&map, &measure, 500, 3, 3);
    assert_eq!(samples.len(), 500);
}

#[test]
fn preimages_exist_inside_expanding_region() {
    // hypothesis (iii) style check: points outside the U1 neighborhood have
    // at least one pre-image outside U1
    let map = reference();
    let u1 = towerdyn::torus::Ball::new(map.pitchfork_site().clone(), 0.2).unwrap();
    let mut checked = 0;
    for i in 0..12 {
        for j in 0..12 {
            let z = TorusPoint::new(vec![i as f64 / 12.0, j as f64 / 12.0]);
            if u1.contains(&z) {
                continue;
            }
            checked += 1;
            let branches = map.inverse_branches(&z).unwrap();
            assert!(
                branches.iter().any(|w| !u1.contains(w)),
                "no pre-image of {:?} outside U1",
                z.coords()
            );
        }
    }
    assert!(checked > 100);
}
