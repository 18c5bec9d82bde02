mod common;

use common::{homogeneous, monomial, rel, Case};
use conegauss::functionals::hup_deficit;
use conegauss::inequality::{check_moment_identities, CheckOptions};
use conegauss::{Decay, Field, ScalarField, WeightSpec};

/// The weights of the identity suite; `|x|` in the plane is not log-concave
/// but the identities only use homogeneity.
fn identity_weights() -> Vec<Case> {
    vec![
        Case::new("unit", WeightSpec::unit(2)),
        Case::new("abs_x1", monomial(&[1.0, 0.0])),
        Case::new("abs_x1_x2_sq", monomial(&[1.0, 2.0])),
        Case::new("radial_2d", WeightSpec::Radial { alpha: 1.0, dim: 2 }),
    ]
}

#[test]
fn deficit_equals_sum_of_squares_on_seeded_fields() {
    for case in identity_weights() {
        let nu = case.nu();
        for seed in 0..50 {
            let f = case.poly_gauss(seed);
            let d = hup_deficit(&nu, &f).unwrap();
            let scale = (d.moments.a * d.moments.d).sqrt();
            assert!(
                d.identity_residual <= 1e-8 * scale,
                "{} seed {seed}: {:e}",
                case.name,
                d.identity_residual / scale
            );
            assert!(d.delta >= -1e-10 * scale, "{} seed {seed}: δ = {}", case.name, d.delta);
        }
    }
}

#[test]
fn deficit_vanishes_on_the_gaussian_family() {
    for case in homogeneous().into_iter().chain(identity_weights()) {
        let nu = case.nu();
        for lambda in [0.5, 1.0, 2.0] {
            for amp in [1.0, -3.0] {
                let d = hup_deficit(&nu, &Field::gaussian(case.dim(), amp, lambda)).unwrap();
                let scale = (d.moments.a * d.moments.d).sqrt();
                assert!(
                    d.delta.abs() <= 1e-10 * scale,
                    "{} λ={lambda}: δ = {}",
                    case.name,
                    d.delta
                );
                assert!((d.lambda - lambda).abs() <= 1e-10 * lambda);
            }
        }
    }
}

#[test]
fn deficit_scales_with_the_homogeneity_degree() {
    for case in identity_weights() {
        let nu = case.nu();
        let na = case.dim() as f64 + case.weight.degree().unwrap();
        for seed in 0..5 {
            let f = case.poly_gauss(100 + seed);
            for s in [0.5, 2.0] {
                let d = hup_deficit(&nu, &f).unwrap();
                let ds = hup_deficit(&nu, &f.clone().dilate(s)).unwrap();
                let scale = (d.moments.a * d.moments.d).sqrt();
                let gap = (d.delta - ds.delta * s.powf(-na)).abs();
                assert!(gap <= 1e-7 * scale, "{} s={s}: {gap:e}", case.name);
            }
        }
    }
}

#[test]
fn moment_identities_hold_for_homogeneous_weights() {
    let opts = CheckOptions { tolerance: 1e-10 };
    for case in homogeneous().into_iter().chain(identity_weights()) {
        let checks = check_moment_identities(&case.mu(), &opts).unwrap();
        for c in &checks {
            assert!(c.pass, "{}: {} {} vs {}", case.name, c.theorem, c.lhs, c.rhs);
        }
        assert!(checks.iter().any(|c| c.theorem == "second_moment"));
    }
}

#[test]
fn free_axis_half_moment_by_direct_integration() {
    // 2∫x₂²e^{−|x|²}w = ∫e^{−|x|²}w whenever w ignores x₂.
    for case in identity_weights()
        .into_iter()
        .take(2)
        .chain([Case::new("partial_1_5", common::partial(1.5))])
    {
        let nu = case.nu();
        let env = |x: &[f64]| (-x.iter().map(|v| v * v).sum::<f64>()).exp();
        let lhs = 2.0
            * nu.value(&|x: &[f64]| x[1] * x[1] * env(x), Decay::Gaussian { rate: 2.0 })
                .unwrap();
        let rhs = nu.value(&env, Decay::Gaussian { rate: 2.0 }).unwrap();
        assert!(rel(lhs, rhs) <= 1e-12, "{}: {lhs} vs {rhs}", case.name);
    }
}

#[test]
fn deficit_is_even_and_homogeneous_of_degree_two() {
    let case = Case::new("abs_x1", monomial(&[1.0, 0.0]));
    let nu = case.nu();
    let f = case.poly_gauss(7);
    let d = hup_deficit(&nu, &f).unwrap().delta;
    let neg = hup_deficit(&nu, &f.clone().scaled(-1.0)).unwrap().delta;
    let triple = hup_deficit(&nu, &f.clone().scaled(3.0)).unwrap().delta;
    assert!(rel(d, neg) <= 1e-12);
    assert!(rel(9.0 * d, triple) <= 1e-12);
    assert_eq!(f.dim(), 2);
}
