mod common;

use std::f64::consts::TAU;

use common::{benchmark, non_vanishing};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rotpend::inner::{
    attractor_fit, continued_fraction, inner_flow, inner_lemma_bounds, inner_map_closed, inner_map_lifted,
    looks_diophantine, vanishing_map_lifted, InnerPoint,
};
use rotpend::integrate::{eigenvalues_2x2, jacobian_fd, stroboscopic_map, IntegratorConfig};
use rotpend::model::{angle_diff, cylinder_energy, State};

fn cfg() -> IntegratorConfig {
    IntegratorConfig::default()
}

#[test]
fn closed_map_matches_full_section_map() {
    let p = benchmark(1e-3, 0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let (i, th) = (rng.gen_range(0.5..2.0), rng.gen_range(0.0..TAU));
        let closed = inner_map_closed(&InnerPoint::new(i, th), &p).unwrap();
        let full = stroboscopic_map(&State::on_cylinder(i, th), 0.0, &p, &cfg()).unwrap();
        worst = worst
            .max((closed.action - full.action).abs())
            .max(angle_diff(closed.angle, full.angle).abs());
    }
    assert!(worst < 1e-9, "worst {worst}");
}

#[test]
fn closed_map_is_the_flow_at_one_period() {
    let p = benchmark(1e-2, 0.3);
    let z = InnerPoint::new(0.9, 2.0);
    assert_eq!(
        inner_map_closed(&z, &p).unwrap(),
        inner_flow(&z, 0.0, TAU, &p, &cfg()).unwrap()
    );
}

#[test]
fn derivative_is_the_explicit_conformal_matrix() {
    let p = benchmark(1e-2, 0.5);
    let lambda = p.lambda();
    let contraction = (-TAU * lambda).exp();
    let map = |x: &[f64]| {
        let (i, th) = vanishing_map_lifted(x[0], x[1], &p);
        vec![i, th]
    };
    for x in [[1.0, 0.2], [1.3, 4.0]] {
        let j = jacobian_fd(map, &x, 1e-6);
        let want = DMatrix::from_row_slice(2, 2, &[contraction, 0.0, (1.0 - contraction) / lambda, 1.0]);
        assert!((&j - want).abs().max() < 1e-6);
        assert!((j.determinant() - contraction).abs() < 1e-8 * contraction);
        let [(hi, hi_im), (lo, lo_im)] = eigenvalues_2x2(&j);
        assert_eq!((hi_im, lo_im), (0.0, 0.0));
        assert!((hi - 1.0).abs() < 1e-6 && (lo - contraction).abs() < 1e-6);
    }
}

#[test]
fn target_circle_and_unperturbed_limit() {
    let p = benchmark(1e-3, 0.4);
    let on = inner_map_closed(&InnerPoint::new(p.omega_star, 1.0), &p).unwrap();
    assert_eq!(on.action, p.omega_star);
    assert!(angle_diff(on.angle, 1.0 + TAU * p.omega_star).abs() < 1e-12);
    let free = inner_map_closed(&InnerPoint::new(0.8, 1.0), &benchmark(0.0, 0.4)).unwrap();
    assert_eq!(free.action, 0.8);
    assert!(angle_diff(free.angle, 1.0 + TAU * 0.8).abs() < 1e-12);
}

#[test]
fn slanted_fibre_converges_at_the_contraction_rate() {
    let p = benchmark(1e-2, 0.5);
    let lambda = p.lambda();
    let (i0, th0) = (1.1, 0.4);
    let gap = i0 - p.omega_star;
    let (mut a, mut b) = ((i0, th0 - gap / lambda), (p.omega_star, th0));
    for k in 1..=40 {
        a = vanishing_map_lifted(a.0, a.1, &p);
        b = vanishing_map_lifted(b.0, b.1, &p);
        let dist = (a.0 - b.0).hypot(a.1 - b.1);
        let bound = (1.0 + 1.0 / (lambda * lambda)).sqrt() * gap.abs() * (-TAU * lambda * k as f64).exp();
        assert!(dist <= bound * (1.0 + 1e-9), "k={k}: {dist} > {bound}");
    }
}

#[test]
fn stable_leaf_points_share_one_limit_orbit() {
    let p = benchmark(1e-2, 2.0);
    let lambda = p.lambda();
    let th0 = 2.0;
    let leaf: Vec<(f64, f64)> = [1.0, 1.1, 1.4, 1.6]
        .iter()
        .map(|&i| (i, th0 - (i - p.omega_star) / lambda))
        .collect();
    let iterate = |(mut i, mut th): (f64, f64)| {
        for _ in 0..2000 {
            (i, th) = vanishing_map_lifted(i, th, &p);
        }
        (i, th)
    };
    let reference = iterate((p.omega_star, th0));
    for z in leaf {
        let end = iterate(z);
        assert!((end.0 - reference.0).abs() < 1e-6 && (end.1 - reference.1).abs() < 1e-5);
    }
}

#[test]
fn undamped_limit_is_first_order_in_lambda() {
    let z = InnerPoint::new(1.0, 0.5);
    let dev = |rho_bar: f64| {
        let p = benchmark(1e-2, rho_bar);
        let out = inner_map_closed(&z, &p).unwrap();
        (out.action - 1.0).hypot(angle_diff(out.angle, 0.5 + TAU))
    };
    let ratio = dev(0.2) / dev(0.4);
    assert!((ratio - 0.5).abs() < 0.01, "ratio {ratio}");
}

#[test]
fn attractor_rate_and_degenerate_fit() {
    let p = benchmark(1e-3, 0.5);
    for i0 in [0.9, 1.1, 1.6] {
        let fit = attractor_fit(&InnerPoint::new(i0, 0.0), 60, &p, &cfg()).unwrap();
        assert!(!fit.degenerate);
        assert!((fit.slope + fit.predicted_rate).abs() < 1e-2 * fit.predicted_rate);
    }
    let on = attractor_fit(&InnerPoint::new(p.omega_star, 1.0), 30, &p, &cfg()).unwrap();
    assert!(on.degenerate);
    assert!(on.samples.iter().all(|(_, d)| *d == 0.0));
}

#[test]
fn undamped_non_vanishing_flow_keeps_its_energy() {
    let p = non_vanishing(1e-2, 0.0);
    let z = InnerPoint::new(1.1, 0.3);
    let k0 = cylinder_energy(z.action, z.angle, &p);
    for t in [10.0, 25.0, 50.0] {
        let out = inner_flow(&z, 0.0, t, &p, &cfg()).unwrap();
        assert!((cylinder_energy(out.action, out.angle, &p) - k0).abs() < 1e-8);
    }
}

#[test]
fn non_vanishing_orbit_stays_bounded() {
    let p = non_vanishing(1e-3, 0.5);
    let (mut i, mut th) = (1.2, 0.0);
    let (lo, hi) = (1.1 - 1.0, 1.43 + 1.0);
    for k in 0..10_000 {
        (i, th) = inner_map_lifted(i, th, &p, &cfg()).unwrap();
        assert!((lo..=hi).contains(&i), "k={k}: I={i}");
    }
}

#[test]
fn lemma_ratios_on_the_strip() {
    let p = non_vanishing(1e-3, 0.0667);
    let d_max = 0.185;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let z = InnerPoint::new(rng.gen_range(1.1..1.43), rng.gen_range(0.0..TAU));
        let r = inner_lemma_bounds(&z, 1.0, 40, &p, &cfg()).unwrap();
        for ratio in [r.action_ratio, r.angle_ratio, r.energy_ratio] {
            assert!(ratio.is_finite() && ratio < 10.0 * d_max, "{r:?}");
        }
    }
}

#[test]
fn lemma_without_damping_is_identically_zero() {
    let r = inner_lemma_bounds(&InnerPoint::new(1.2, 0.5), 1.0, 20, &non_vanishing(1e-3, 0.0), &cfg()).unwrap();
    assert!(r
        .samples
        .iter()
        .all(|s| s.action_gap == 0.0 && s.angle_gap == 0.0 && s.energy_gap == 0.0));
}

#[test]
fn lemma_gaps_vanish_linearly_at_the_start() {
    let p = non_vanishing(1e-3, 0.5);
    let z = InnerPoint::new(1.2, 0.5);
    let r = inner_lemma_bounds(&z, 1e-6, 5, &p, &cfg()).unwrap();
    let drift = p.lambda() * (z.action - p.omega_star).abs();
    for s in &r.samples {
        assert!((s.action_gap / s.t - drift).abs() < 1e-2 * drift, "{s:?}");
        assert!(s.angle_gap < 1e-15);
    }
}

#[test]
fn golden_mean_has_unit_partial_quotients() {
    let golden = 0.5 * (1.0 + 5f64.sqrt());
    assert!(continued_fraction(golden, 15).iter().all(|&a| a == 1));
    assert!(looks_diophantine(golden, 15, 10));
    assert!(!looks_diophantine(1.0 + 1e-7, 15, 10));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn determinant_is_the_conformal_factor(i in 0.5..2.0f64, th in 0.0..TAU, rho_bar in 0.05..2.0f64) {
        let p = benchmark(1e-3, rho_bar);
        let map = |x: &[f64]| {
            let (a, b) = vanishing_map_lifted(x[0], x[1], &p);
            vec![a, b]
        };
        let det = jacobian_fd(map, &[i, th], 1e-6).determinant();
        let want = (-TAU * p.lambda()).exp();
        prop_assert!((det - want).abs() < 1e-8 * want);
    }
}
