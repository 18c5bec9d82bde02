//! Γ-calculus for `L_w = Δ − x·∇ + ∇log w·∇`: generator, carré du champ,
//! iterated carré du champ, the CD margin and the Neumann residual.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::cone::{dot, Cone};
use crate::error::{Error, Result};
use crate::field::{Jet, Parity, ScalarField};
use crate::quadrature::Measure;
use crate::weight::Weight;

/// Largest `|∇f·η|` tolerated for a field without parity certificates.
pub const NEUMANN_TOL: f64 = 1e-8;

fn generator_from(jet: &Jet, x: &[f64], grad_log: &[f64]) -> f64 {
    let drift: f64 = jet
        .grad
        .iter()
        .zip(x.iter().zip(grad_log))
        .map(|(g, (xi, li))| g * (li - xi))
        .sum();
    jet.laplacian() + drift
}

/// `L_w f(x)`.
pub fn apply_generator(w: &Weight, f: &dyn ScalarField, x: &[f64]) -> Result<f64> {
    let gl = w.grad_log(x)?;
    Ok(generator_from(&f.jet(x), x, gl.as_slice()))
}

/// `L_w f` at a quadrature node, where the weight is known to be positive.
pub(crate) fn generator_at_node(w: &Weight, f: &dyn ScalarField, x: &[f64]) -> f64 {
    let gl = w.grad_log_unchecked(x);
    generator_from(&f.jet(x), x, gl.as_slice())
}

/// `Γ(f, g)(x) = ∇f(x)·∇g(x)`.
pub fn carre_du_champ(f: &dyn ScalarField, g: &dyn ScalarField, x: &[f64]) -> f64 {
    dot(&f.gradient(x), &g.gradient(x))
}

/// `Γ₂(f)(x) = ‖∇²f‖_F² + |∇f|² − ∇²log w(∇f, ∇f)`.
pub fn gamma2(w: &Weight, f: &dyn ScalarField, x: &[f64]) -> Result<f64> {
    let h = w.hess_log(x)?;
    let j = f.jet(x);
    Ok(gamma2_from(&j, &h))
}

fn gamma2_from(j: &Jet, hess_log: &nalgebra::DMatrix<f64>) -> f64 {
    let n = j.grad.len();
    let mut quad = 0.0;
    for a in 0..n {
        for b in 0..n {
            quad += j.grad[a] * hess_log[(a, b)] * j.grad[b];
        }
    }
    j.hess_frobenius_sq() + dot(&j.grad, &j.grad) - quad
}

/// `min_x Γ₂(f) − (1+K_w)Γ(f,f)` over the sample. Points on the zero set of
/// the weight are skipped.
pub fn cd_margin(w: &Weight, f: &dyn ScalarField, sample: &[Vec<f64>]) -> Result<f64> {
    let c = 1.0 + w.curvature()?;
    let mut margin = f64::INFINITY;
    for x in sample {
        if w.eval(x)? == 0.0 {
            continue;
        }
        let j = f.jet(x);
        let h = w.hess_log(x)?;
        margin = margin.min(gamma2_from(&j, &h) - c * dot(&j.grad, &j.grad));
    }
    if margin == f64::INFINITY {
        return Err(Error::DegenerateInput(
            "no sample point in the positivity set of the weight".into(),
        ));
    }
    Ok(margin)
}

/// `|½L_wΓ(f,f) − Γ(f, L_wf) − Γ₂(f)|` with the outer `L_w` and the
/// gradient of `L_wf` taken by centered differences of step `h`
/// (default `1e-4·(1+|x|)`). The error is `O(h²)`.
pub fn bochner_residual(w: &Weight, f: &dyn ScalarField, x: &[f64], h: Option<f64>) -> Result<f64> {
    let n = x.len();
    let h = h.unwrap_or(1e-4 * (1.0 + dot(x, x).sqrt()));
    if !(h > 0.0) {
        return Err(Error::Parameter(format!("step must be positive, got {h}")));
    }
    let gamma = |y: &[f64]| -> f64 {
        let g = f.gradient(y);
        dot(&g, &g)
    };
    let g0 = gamma(x);
    let gl = w.grad_log(x)?;
    let grad_f = f.gradient(x);
    let mut lap = 0.0;
    let mut drift = 0.0;
    let mut cross = 0.0;
    let mut y = x.to_vec();
    for i in 0..n {
        y[i] = x[i] + h;
        let (gp, lp) = (gamma(&y), apply_generator(w, f, &y)?);
        y[i] = x[i] - h;
        let (gm, lm) = (gamma(&y), apply_generator(w, f, &y)?);
        y[i] = x[i];
        lap += (gp - 2.0 * g0 + gm) / (h * h);
        drift += (gl[i] - x[i]) * (gp - gm) / (2.0 * h);
        cross += grad_f[i] * (lp - lm) / (2.0 * h);
    }
    let g2 = gamma2(w, f, x)?;
    Ok((0.5 * (lap + drift) - cross - g2).abs())
}

/// `max |∇f·η|` over boundary points lying on exactly one facet.
pub fn neumann_residual(f: &dyn ScalarField, cone: &Cone, boundary: &[Vec<f64>]) -> Result<f64> {
    if !cone.has_boundary() {
        return Err(Error::NoBoundary);
    }
    let mut worst: f64 = 0.0;
    for x in boundary {
        let eta = match cone.boundary_normal(x) {
            Ok(eta) => eta,
            Err(Error::AmbiguousNormal(_)) => continue,
            Err(e) => return Err(e),
        };
        worst = worst.max(dot(&f.gradient(x), &eta).abs());
    }
    Ok(worst)
}

/// Seeded points on the smooth part of the boundary, `per_facet` on each facet.
pub fn boundary_sample(cone: &Cone, per_facet: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let cons = cone.constraints();
    if cons.is_empty() {
        return Err(Error::NoBoundary);
    }
    let n = cone.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(per_facet * cons.len());
    for (k, v) in cons.iter().enumerate() {
        let mut found = 0;
        for _ in 0..per_facet * 200 {
            if found == per_facet {
                break;
            }
            let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            let t = dot(v, &z);
            let y: Vec<f64> = z.iter().zip(v).map(|(a, b)| a - t * b).collect();
            let ok = cons.iter().enumerate().all(|(j, u)| j == k || dot(u, &y) > 1e-6);
            if ok {
                out.push(y);
                found += 1;
            }
        }
    }
    Ok(out)
}

/// Seeded Gaussian points pushed into the interior of the cone: orthant
/// coordinates are reflected, other constraints are met by rejection.
pub fn interior_sample(cone: &Cone, count: usize, seed: u64, spread: f64) -> Vec<Vec<f64>> {
    let n = cone.dim();
    let axes = cone.orthant_axes().unwrap_or_default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut tries = 0usize;
    while out.len() < count && tries < count * 200 {
        tries += 1;
        let mut z: Vec<f64> = (0..n)
            .map(|_| {
                let s: f64 = StandardNormal.sample(&mut rng);
                spread * s
            })
            .collect();
        for &k in &axes {
            z[k] = z[k].abs();
        }
        if cone.is_interior(&z) {
            out.push(z);
        }
    }
    out
}

/// Fields enter inequality checks on cones with boundary only if they are even
/// in every orthant axis or have a Neumann residual below [`NEUMANN_TOL`].
pub fn admit(f: &dyn ScalarField, cone: &Cone) -> Result<()> {
    if !cone.has_boundary() {
        return Ok(());
    }
    if let Some(axes) = cone.orthant_axes() {
        if axes.iter().all(|&k| f.parity(k) == Parity::Even) {
            return Ok(());
        }
    }
    let sample = boundary_sample(cone, 64, 0x6e65_756d)?;
    let r = neumann_residual(f, cone, &sample)?;
    if r <= NEUMANN_TOL {
        Ok(())
    } else {
        Err(Error::Contract(format!(
            "field {} violates the Neumann condition (|∇f·η| = {r:.3e})",
            f.label()
        )))
    }
}

/// Relative defect of `∫(L_w f) g dμ = −∫Γ(f,g) dμ` on a normalized measure.
pub fn integration_by_parts_defect(measure: &Measure, f: &dyn ScalarField, g: &dyn ScalarField) -> Result<f64> {
    if !measure.is_normalized() {
        return Err(Error::Contract("integration by parts is checked against μ_w".into()));
    }
    let w = measure.weight();
    let decay = f
        .grad_decay()
        .times(g.decay())
        .plus(f.grad_decay().times(g.grad_decay()));
    let v = measure.values(
        &|x: &[f64], o: &mut [f64]| {
            o[0] = generator_at_node(w, f, x) * g.value(x);
            o[1] = carre_du_champ(f, g, x);
        },
        2,
        decay,
    )?;
    Ok((v[0] + v[1]).abs() / (1.0 + v[0].abs().max(v[1].abs())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Field;
    use crate::quadrature::QuadratureTarget;
    use crate::weight::WeightSpec;
    use proptest::prelude::*;

    fn monomial(a: &[f64]) -> Weight {
        Weight::new(WeightSpec::Monomial { exponents: a.to_vec() }).unwrap()
    }

    fn partial() -> Weight {
        Weight::new(WeightSpec::PartialProduct {
            inner: Box::new(WeightSpec::Monomial { exponents: vec![1.5] }),
            free_coords: vec![1],
        })
        .unwrap()
    }

    #[test]
    fn generator_examples() {
        let w = Weight::unit(3);
        let x = [0.3, -1.2, 0.7];
        assert!((apply_generator(&w, &Field::coordinate(3, 1), &x).unwrap() + x[1]).abs() < 1e-15);
        let sq = Field::Polynomial(crate::field::Polynomial {
            dim: 3,
            terms: (0..3)
                .map(|k| (1.0, (0..3).map(|i| if i == k { 2 } else { 0 }).collect()))
                .collect(),
        });
        let r2 = dot(&x, &x);
        assert!((apply_generator(&w, &sq, &x).unwrap() - (6.0 - 2.0 * r2)).abs() < 1e-14);
        let m = monomial(&[1.5, 0.5]);
        let y = [0.8, 1.7];
        let lf = apply_generator(&m, &Field::coordinate(2, 0), &y).unwrap();
        assert!((lf - (1.5 / 0.8 - 0.8)).abs() < 1e-14);
    }

    #[test]
    fn generator_drift_matches_difference_of_log_weight() {
        let m = monomial(&[1.5, 0.5]);
        let y = [0.8, 1.7];
        let h = 1e-6;
        let lw = |x: &[f64]| m.eval(x).unwrap().ln();
        let d0 = (lw(&[y[0] + h, y[1]]) - lw(&[y[0] - h, y[1]])) / (2.0 * h);
        let lf = apply_generator(&m, &Field::coordinate(2, 0), &y).unwrap();
        assert!((lf - (d0 - y[0])).abs() < 1e-8);
    }

    #[test]
    fn generator_singular_on_zero_set() {
        let m = monomial(&[1.0, 0.0]);
        assert!(matches!(
            apply_generator(&m, &Field::coordinate(2, 0), &[0.0, 1.0]),
            Err(Error::Singularity(_))
        ));
    }

    #[test]
    fn carre_du_champ_examples() {
        let f = Field::affine(&[1.0, -2.0, 0.5], 3.0);
        let x = [0.1, 0.2, 0.3];
        assert!((carre_du_champ(&f, &f, &x) - 5.25).abs() < 1e-15);
        assert_eq!(
            carre_du_champ(&Field::coordinate(3, 0), &Field::coordinate(3, 2), &x),
            0.0
        );
    }

    #[test]
    fn gamma2_examples() {
        let f = Field::affine(&[1.0, -2.0], 0.5);
        let x = [0.4, -0.9];
        assert!((gamma2(&Weight::unit(2), &f, &x).unwrap() - 5.0).abs() < 1e-15);
        let tilt = Weight::new(WeightSpec::GaussianTilt { s: -0.5, dim: 2 }).unwrap();
        assert!((gamma2(&tilt, &f, &x).unwrap() - 2.5).abs() < 1e-14);
        let half_sq = Field::Polynomial(crate::field::Polynomial {
            dim: 2,
            terms: vec![(0.5, vec![2, 0]), (0.5, vec![0, 2])],
        });
        assert!((gamma2(&Weight::unit(2), &half_sq, &x).unwrap() - (2.0 + dot(&x, &x))).abs() < 1e-14);
    }

    #[test]
    fn cd_margin_equality_for_affine_under_tilt() {
        let tilt = Weight::new(WeightSpec::GaussianTilt { s: -0.5, dim: 2 }).unwrap();
        let pts = interior_sample(&Cone::full(2), 200, 1, 2.0);
        let m = cd_margin(&tilt, &Field::affine(&[1.0, 2.0], 0.0), &pts).unwrap();
        assert!(m.abs() < 1e-14);
        assert_eq!(cd_margin(&tilt, &Field::constant(2, 3.0), &pts).unwrap(), 0.0);
    }

    #[test]
    fn cd_margin_nonnegative_for_monomial() {
        let w = monomial(&[1.5, 0.5]);
        let cone = Cone::orthant(2, &[0, 1]);
        let pts = interior_sample(&cone, 10_000, 2, 1.5);
        for seed in 0..5 {
            let f = Field::poly_gauss(2, seed, 4, None, &[0, 1]);
            assert!(cd_margin(&w, &f, &pts).unwrap() >= -1e-9);
        }
    }

    #[test]
    fn bochner_residual_examples() {
        let w = Weight::unit(2);
        let sq = Field::Polynomial(crate::field::Polynomial {
            dim: 2,
            terms: vec![(1.0, vec![2, 0]), (1.0, vec![0, 2])],
        });
        assert!(bochner_residual(&w, &sq, &[0.3, -0.7], Some(1e-4)).unwrap() <= 1e-6);
        let aff = Field::affine(&[0.5, -1.5], 2.0);
        assert!(bochner_residual(&partial(), &aff, &[0.8, 0.4], None).unwrap() <= 1e-7);
    }

    #[test]
    fn bochner_residual_is_second_order() {
        let w = partial();
        let pts = [[0.9, 0.3], [1.4, -0.6], [0.6, 1.1]];
        for seed in 0..4 {
            let f = Field::poly_gauss(2, seed, 3, None, &[0]);
            let at = |h: f64| {
                pts.iter()
                    .map(|x| bochner_residual(&w, &f, x, Some(h)).unwrap())
                    .sum::<f64>()
            };
            let ratio = at(1e-2) / at(5e-3);
            assert!((ratio - 4.0).abs() < 0.5, "seed {seed}: ratio {ratio}");
        }
    }

    #[test]
    fn neumann_examples() {
        let cone = Cone::orthant(2, &[0]);
        let pts = boundary_sample(&cone, 20, 3).unwrap();
        assert_eq!(pts.len(), 20);
        assert!(pts.iter().all(|p| p[0] == 0.0));
        let x1 = Field::coordinate(2, 0);
        assert!((neumann_residual(&x1, &cone, &pts).unwrap() - 1.0).abs() < 1e-15);
        assert!(neumann_residual(&Field::gaussian(2, 1.0, 1.3), &cone, &pts).unwrap() <= 1e-15);
        let even = Field::poly_gauss(2, 5, 4, None, &[0]);
        assert!(neumann_residual(&even, &cone, &pts).unwrap() <= 1e-12);
        assert!(matches!(
            neumann_residual(&x1, &Cone::full(2), &pts),
            Err(Error::NoBoundary)
        ));
        assert!(admit(&even, &cone).is_ok());
        assert!(matches!(admit(&x1, &cone), Err(Error::Contract(_))));
        assert!(admit(&x1, &Cone::full(2)).is_ok());
    }

    #[test]
    fn radial_field_is_neumann_on_oblique_halfspace() {
        let cone = Cone::Halfspace { normal: vec![0.6, 0.8] };
        let pts = boundary_sample(&cone, 30, 9).unwrap();
        assert!(neumann_residual(&Field::gaussian_quarter(2, 2.0), &cone, &pts).unwrap() < 1e-15);
        assert!(admit(&Field::gaussian_quarter(2, 2.0), &cone).is_ok());
    }

    #[test]
    fn integration_by_parts_on_partial_weight() {
        let cone = Cone::orthant(2, &[0]);
        let mu = Measure::gaussian(partial(), cone, QuadratureTarget::default()).unwrap();
        let fields = [
            Field::poly_gauss(2, 1, 3, None, &[0]),
            Field::exp_axis(2, 1, 0.5),
            Field::affine(&[0.0, 3.0], 1.0),
            Field::gaussian_quarter(2, 1.0),
        ];
        for f in &fields {
            for g in &fields {
                assert!(
                    integration_by_parts_defect(&mu, f, g).unwrap() < 1e-7,
                    "{} {}",
                    f.label(),
                    g.label()
                );
            }
        }
    }

    proptest! {
        #[test]
        fn gamma_is_nonnegative(x0 in -3.0..3.0f64, x1 in -3.0..3.0f64, seed in 0u64..50) {
            let f = Field::poly_gauss(2, seed, 3, None, &[]);
            prop_assert!(carre_du_champ(&f, &f, &[x0, x1]) >= 0.0);
        }

        #[test]
        fn generator_integrates_to_zero(seed in 0u64..40) {
            let mu = Measure::gaussian(monomial(&[1.0, 2.0]), Cone::orthant(2, &[0, 1]), QuadratureTarget::default()).unwrap();
            let f = Field::poly_gauss(2, seed, 4, None, &[0, 1]);
            let w = mu.weight().clone();
            let v = mu.value(&|x: &[f64]| generator_at_node(&w, &f, x), f.decay()).unwrap();
            prop_assert!(v.abs() < 1e-8, "∫Lf = {v}");
        }
    }
}
