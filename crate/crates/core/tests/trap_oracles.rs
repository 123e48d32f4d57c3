mod common;

use common::{golden_minimize, reference_trap, TWO_PI};
use proptest::prelude::*;
use rydion::units::hz_to_angular;
use rydion::{
    equilibrium_from_offset, gradients_from_secular, mean_square_field, secular_from_gradients,
    EquilibriumPosition, IonSpecies, OffsetField, SecularFrequencies, TrapConfig,
};

/// Period average of `|grad Phi|^2` along the first-order Mathieu trajectory
/// `x(t) = x0 (1 + q/2 cos t)`, `y(t) = y0 (1 - q/2 cos t)`, with the static
/// quadrupole null at the rf null. The static term is kept.
fn brute_force_msq(cfg: &TrapConfig, x0: f64, y0: f64, samples: usize) -> f64 {
    let (a, b, eps) = (cfg.grad_rf, cfg.grad_dc, cfg.asymmetry);
    let q = cfg.mathieu_q();
    let mut acc = 0.0;
    for k in 0..samples {
        let c = (TWO_PI * k as f64 / samples as f64).cos();
        let x = x0 * (1.0 + 0.5 * q * c);
        let y = y0 * (1.0 - 0.5 * q * c);
        let ex = -(2.0 * a * c * x - 2.0 * b * (1.0 + eps) * x);
        let ey = -(-2.0 * a * c * y - 2.0 * b * (1.0 - eps) * y);
        acc += ex * ex + ey * ey;
    }
    acc / samples as f64
}

fn weak_static_trap() -> TrapConfig {
    let measured = reference_trap();
    TrapConfig::new(
        measured.drive_freq,
        measured.grad_rf,
        6.8e5,
        measured.asymmetry,
        measured.species,
    )
    .unwrap()
}

#[test]
fn mean_square_field_matches_period_average_when_static_gradient_is_weak() {
    let cfg = weak_static_trap();
    assert!(cfg.grad_dc / cfg.grad_rf < 1e-3);
    for &(x, y) in &[
        (5e-6, 0.0),
        (0.0, 5e-6),
        (3e-6, -4e-6),
        (1e-7, 2e-7),
        (-2.5e-6, 1e-6),
    ] {
        let brute = brute_force_msq(&cfg, x, y, 10_000);
        let model = mean_square_field(&cfg, &EquilibriumPosition { x, y });
        assert!(
            (model / brute - 1.0).abs() < 1e-3,
            "({x},{y}): {model} vs {brute}"
        );
    }
}

#[test]
fn static_gradient_error_at_the_operating_point_is_accounted_for() {
    // the dropped terms: a cross term -4ABq(1 +- eps) r^2 and a static 4B^2(1 +- eps)^2 (1 + q^2/8) r^2
    let cfg = reference_trap();
    let (a, b, eps, q) = (cfg.grad_rf, cfg.grad_dc, cfg.asymmetry, cfg.mathieu_q());
    for &(x, y) in &[(5e-6, 0.0), (0.0, 5e-6), (2e-6, 2e-6)] {
        let brute = brute_force_msq(&cfg, x, y, 10_000);
        let model = mean_square_field(&cfg, &EquilibriumPosition { x, y });
        let dropped: f64 = [(x, 1.0 + eps), (y, 1.0 - eps)]
            .iter()
            .map(|&(r, s)| {
                -4.0 * a * b * q * s * r * r + 4.0 * b * b * s * s * (1.0 + q * q / 8.0) * r * r
            })
            .sum();
        assert!(((model + dropped) / brute - 1.0).abs() < 1e-12);
        assert!(
            (model / brute - 1.0).abs() < 1e-2,
            "({x},{y}): {}",
            model / brute - 1.0
        );
    }
}

#[test]
fn equilibrium_is_the_potential_minimum() {
    let cfg = reference_trap();
    let w = cfg.secular().unwrap();
    let (m, e) = (cfg.species.mass, cfg.species.charge);
    for &(ex, ey) in &[(1.0, 0.0), (0.0, -3.0), (12.0, 7.5), (-40.0, 25.0)] {
        let r = equilibrium_from_offset(&cfg, &OffsetField::new(ex, ey).unwrap()).unwrap();
        let bound = 1e-5;
        let x = golden_minimize(|x| 0.5 * m * w.x * w.x * x * x - e * ex * x, -bound, bound);
        let y = golden_minimize(|y| 0.5 * m * w.y * w.y * y * y - e * ey * y, -bound, bound);
        assert!((r.x - x).abs() < 1e-12, "{} vs {x}", r.x);
        assert!((r.y - y).abs() < 1e-12, "{} vs {y}", r.y);
    }
}

#[test]
fn dc_null_offset_places_ion_at_the_static_null_scaled_by_stiffness() {
    let cfg = reference_trap();
    let w = cfg.secular().unwrap();
    let off = OffsetField::from_dc_null(&cfg, 1e-6, -2e-6);
    let r = equilibrium_from_offset(&cfg, &off).unwrap();
    let (m, e) = (cfg.species.mass, cfg.species.charge);
    let want_x = -2.0 * e * cfg.grad_dc * (1.0 + cfg.asymmetry) * 1e-6 / (m * w.x * w.x);
    let want_y = -2.0 * e * cfg.grad_dc * (1.0 - cfg.asymmetry) * -2e-6 / (m * w.y * w.y);
    assert!((r.x / want_x - 1.0).abs() < 1e-12);
    assert!((r.y / want_y - 1.0).abs() < 1e-12);
}

proptest! {
    #[test]
    fn secular_gradient_round_trip(
        fx in 0.3e6..4e6f64,
        fy in 0.3e6..4e6f64,
        fz in 0.1e6..2e6f64,
        drive in 5e6..60e6f64,
    ) {
        let w = SecularFrequencies::from_hz(fx, fy, fz).unwrap();
        let cfg = gradients_from_secular(&w, hz_to_angular(drive), IonSpecies::sr88_plus()).unwrap();
        let back = secular_from_gradients(&cfg).unwrap();
        for (a, b) in [(w.x, back.x), (w.y, back.y), (w.z, back.z)] {
            prop_assert!((a / b - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn equilibrium_is_linear_in_the_offset(ex in -50.0..50.0f64, ey in -50.0..50.0f64, s in 0.1..10.0f64) {
        let cfg = reference_trap();
        let r1 = equilibrium_from_offset(&cfg, &OffsetField::new(ex, ey).unwrap()).unwrap();
        let r2 = equilibrium_from_offset(&cfg, &OffsetField::new(s * ex, s * ey).unwrap()).unwrap();
        prop_assert!((r2.x - s * r1.x).abs() <= 1e-12 * r2.x.abs().max(1e-30));
        prop_assert!((r2.y - s * r1.y).abs() <= 1e-12 * r2.y.abs().max(1e-30));
    }
}
