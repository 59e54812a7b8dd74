mod common;

use std::f64::consts::{PI, TAU};

use proptest::prelude::*;
use qgraph::eigenphase::{spacing_functions, EigenphaseFrame};
use qgraph::graph::{kirchhoff_s0, BondScatteringMatrix};
use qgraph::lambda::{solve_eigenvalues, solve_shifted_spectrum, solve_spectrum};
use qgraph::stats::{lambda_spacing_functional, TestFunction};
use qgraph::torus::{self, ConstantFunction, SurfacePoint, TorusPoint};
use qgraph::MetricGraph;

fn star() -> (MetricGraph, BondScatteringMatrix) {
    let g = MetricGraph::star(&[1.0, 1.05, 0.95]).unwrap();
    let s0 = kirchhoff_s0(&g);
    (g, s0)
}

fn torus_point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..TAU, 3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn spacings_close_the_circle(x in torus_point()) {
        let (g, s0) = star();
        let frame = EigenphaseFrame::at_torus(&g, &s0, &x).unwrap();
        let s = spacing_functions(&frame);
        prop_assert!(s.iter().all(|&v| v >= 0.0));
        prop_assert!((s.iter().sum::<f64>() - TAU).abs() < 1e-12);
    }

    #[test]
    fn velocities_lie_between_extreme_lengths(lambda in 0.0..500.0f64) {
        let (g, s0) = star();
        let frame = EigenphaseFrame::at_lambda(&g, &s0, lambda).unwrap();
        for v in &frame.velocities {
            prop_assert!(*v >= 0.95 - 1e-10 && *v <= 1.05 + 1e-10, "{}", v);
        }
        prop_assert!(frame.orthonormality_deviation() < 1e-12);
    }

    #[test]
    fn phases_match_independent_diagonalisation(lambda in 0.0..200.0f64) {
        let (g, s0) = star();
        let frame = EigenphaseFrame::at_lambda(&g, &s0, lambda).unwrap();
        let u = common::evolution(&g, &common::kirchhoff(&g), lambda);
        let mut ours = frame.phases.clone();
        let mut theirs = common::phases(&u);
        // compare on the circle, insensitive to which side of the cut 2π lands
        ours.iter_mut().chain(theirs.iter_mut()).for_each(|p| *p = (*p + 1.0) % TAU);
        ours.sort_by(f64::total_cmp);
        theirs.sort_by(f64::total_cmp);
        for (a, b) in ours.iter().zip(&theirs) {
            prop_assert!((a - b).abs() < 1e-10);
        }
        prop_assert!(frame.residual(&u) < 1e-12);
    }

    #[test]
    fn flow_is_a_semigroup(x in torus_point(), s in -50.0..50.0f64, t in -50.0..50.0f64) {
        let (g, _) = star();
        let x0 = TorusPoint::new(&x);
        let a = torus::flow_point(&torus::flow_point(&x0, s, &g), t, &g);
        let b = torus::flow_point(&x0, s + t, &g);
        prop_assert!(a.distance(&b) < 1e-12);
    }

    #[test]
    fn crossing_windows_obey_bounds(x in torus_point(), s in 0.0..40.0f64) {
        let (g, s0) = star();
        let long = TAU / 0.95;
        let short = TAU / 1.05;
        let times = torus::crossings_from(&TorusPoint::new(&x), &g, &s0, s + long).unwrap();
        let count = |w: f64| times.iter().filter(|c| c.t > s && c.t <= s + w).map(|c| c.multiplicity).sum::<usize>();
        prop_assert!(count(long) >= 6);
        prop_assert!(count(short) <= 6);
    }

    #[test]
    fn return_time_is_sandwiched_by_spacing(x in torus_point()) {
        let (g, s0) = star();
        let x0 = TorusPoint::new(&x);
        let first = torus::crossings_from(&x0, &g, &s0, 10.0).unwrap()[0];
        let p = SurfacePoint::new(&g, &s0, torus::flow_point(&x0, first.t, &g), first.multiplicity)
            .unwrap()
            .with_next_crossing(&g, &s0)
            .unwrap();
        let d = p.next_crossing.unwrap();
        let sigma = p.first_spacing();
        prop_assert!(d >= sigma / 1.05 - 1e-9 && d <= sigma / 0.95 + 1e-9, "d={} σ₁={}", d, sigma);
    }

    #[test]
    fn lambda_functional_is_linear(a in -3.0..3.0f64, b in -3.0..3.0f64) {
        let (g, s0) = star();
        let spec = solve_eigenvalues(&g, &s0, 150.0).unwrap();
        let h1 = TestFunction::gaussian(1.0, 0.5).unwrap();
        let h2 = TestFunction::smoothed_indicator(0.5, 1.5, 0.05).unwrap();
        let (c1, c2) = (h1.clone(), h2.clone());
        let mix = TestFunction::custom("mix", a.abs() * h1.bound() + b.abs() * h2.bound(), move |s| a * c1.eval(s) + b * c2.eval(s));
        let p = |h: &TestFunction| lambda_spacing_functional(&spec, h, 1).unwrap().estimate;
        prop_assert!((p(&mix) - (a * p(&h1) + b * p(&h2))).abs() < 1e-12);
        prop_assert!(p(&h1).abs() <= h1.bound());
    }
}

#[test]
fn origin_crossings_are_the_spectrum() {
    let (g, s0) = star();
    let spec = solve_spectrum(&g, &s0, 60.0).unwrap();
    let crossings = torus::crossings_from(&TorusPoint::origin(3), &g, &s0, 60.0).unwrap();
    let from_flow: Vec<(f64, usize)> = crossings.iter().map(|c| (c.t, c.multiplicity)).collect();
    let from_spec: Vec<(f64, usize)> = spec.levels().iter().map(|l| (l.lambda, l.multiplicity)).collect();
    assert_eq!(from_flow, from_spec);
}

#[test]
fn zero_shift_is_the_plain_spectrum() {
    let (g, s0) = star();
    let a = solve_shifted_spectrum(&g, &s0, 0.0, 80.0).unwrap();
    let b = solve_eigenvalues(&g, &s0, 80.0).unwrap();
    assert_eq!(a.eigenvalues(), b.eigenvalues());
    let shifted = solve_shifted_spectrum(&g, &s0, 0.3, 80.0).unwrap();
    assert_ne!(shifted.eigenvalues(), b.eigenvalues());
}

#[test]
fn thickened_constant_is_one_for_every_epsilon() {
    let (g, s0) = star();
    for eps in [0.05, 0.2] {
        let r = torus::thickened_average(&ConstantFunction(1.0), eps, &g, &s0, 20_000, 3).unwrap();
        assert!((r.estimate - 1.0).abs() < 3.0 * r.stderr, "ε={eps}: {} ± {}", r.estimate, r.stderr);
    }
}

#[test]
fn equilateral_theta_integrand_is_constant() {
    let g = MetricGraph::star(&[1.0; 3]).unwrap();
    let s0 = kirchhoff_s0(&g);
    let h = TestFunction::gaussian(1.0, 0.5).unwrap();
    let values: Vec<f64> = (0..200)
        .map(|i| {
            let frame = EigenphaseFrame::at_lambda(&g, &s0, 0.137 + i as f64 * 0.31).unwrap();
            let s = spacing_functions(&frame);
            s.iter().map(|&x| h.eval(x)).sum::<f64>() / s.len() as f64
        })
        .collect();
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64;
    assert!(var < 1e-18, "{var}");
}

#[test]
fn degenerate_levels_contribute_zero_spacings() {
    let g = MetricGraph::star(&[1.0; 3]).unwrap();
    let spec = solve_eigenvalues(&g, &kirchhoff_s0(&g), 10.0 * PI).unwrap();
    let zeros = spec.eigenvalues().windows(2).filter(|w| w[1] == w[0]).count();
    assert_eq!(zeros, 10);
}

#[test]
fn spacing_sum_over_many_random_unitaries() {
    use rand::SeedableRng;
    let (g, s0) = star();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
    for _ in 0..10_000 {
        let x = TorusPoint::random(3, &mut rng);
        let frame = EigenphaseFrame::at_torus(&g, &s0, x.coords()).unwrap();
        let total: f64 = spacing_functions(&frame).iter().sum();
        assert!((total - TAU).abs() < 1e-9);
    }
}

#[test]
fn crossing_density_from_a_random_start() {
    use rand::SeedableRng;
    let (g, s0) = star();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
    let x0 = TorusPoint::random(3, &mut rng);
    let t_max = 5000.0 * PI / g.total_length();
    let n: usize = torus::crossings_from(&x0, &g, &s0, t_max).unwrap().iter().map(|c| c.multiplicity).sum();
    let density = n as f64 / t_max;
    let expected = g.total_length() / PI;
    assert!((density / expected - 1.0).abs() < 0.02, "{density} vs {expected}");
}
