//! Distances from a field to the uncertainty optimizers `c·e^{−|x|²/(2λ²)}`
//! and `(c + d·x)·e^{−|x|²/(2λ²)}` in `L²(w dx)`, and the stability
//! inequalities that bound the uncertainty deficit below by them.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::functionals::hup_deficit;
use crate::inequality::{CheckOptions, InequalityCheck};
use crate::quadrature::{Decay, Measure};

/// Outer search interval for `λ`.
pub const LAMBDA_BRACKET: (f64, f64) = (1e-2, 1e2);
pub const PRESCAN_POINTS: usize = 16;
/// Width of the final golden-section interval in `log λ`.
pub const GOLDEN_TOL: f64 = 1e-10;
const GOLDEN_MAX_ITER: usize = 200;

/// Optimizer family with Gaussian envelope `e^{−|x|²/(2λ²)}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GaussianFamily {
    /// `c·e^{−|x|²/(2λ²)}`
    Gaussian,
    /// `(c + d·x)·e^{−|x|²/(2λ²)}`
    AffineGaussian,
}

impl GaussianFamily {
    fn size(self, n: usize) -> usize {
        match self {
            GaussianFamily::Gaussian => 1,
            GaussianFamily::AffineGaussian => n + 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyArgmin {
    pub c: f64,
    /// Empty for [`GaussianFamily::Gaussian`].
    pub d: Vec<f64>,
    pub lambda: f64,
    /// `f` is orthogonal to the family at every pre-scan scale; the distance
    /// is `‖f‖` and `lambda` carries no information.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyDistance {
    pub family: GaussianFamily,
    pub distance: f64,
    pub distance_sq: f64,
    pub argmin: FamilyArgmin,
    /// Final golden-section bracket in `λ`.
    pub bracket: (f64, f64),
    pub iterations: usize,
    pub evaluations: usize,
}

/// Value of the inner least-squares problem at one `λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerFit {
    pub lambda: f64,
    /// `(c, d₁, …, d_n)` or `(c)`.
    pub coefficients: Vec<f64>,
    pub residual_sq: f64,
}

struct Objective<'a> {
    nu: &'a Measure,
    f: &'a dyn ScalarField,
    family: GaussianFamily,
    f_rate: f64,
    norm_sq: f64,
}

impl<'a> Objective<'a> {
    fn new(nu: &'a Measure, f: &'a dyn ScalarField, family: GaussianFamily) -> Result<Self> {
        if nu.is_normalized() {
            return Err(Error::Contract("distances are measured in L²(w dx)".into()));
        }
        let f_rate = f.decay().gaussian_rate().ok_or_else(|| {
            Error::DecayContract(format!(
                "distance to the Gaussian family needs Gaussian decay, got {:?}",
                f.decay()
            ))
        })?;
        let norm_sq = nu.value(&|x: &[f64]| f.value(x).powi(2), Decay::Gaussian { rate: 2.0 * f_rate })?;
        if !(norm_sq > 0.0) {
            return Err(Error::DegenerateInput("field has zero L²(w dx) norm".into()));
        }
        Ok(Self {
            nu,
            f,
            family,
            f_rate,
            norm_sq,
        })
    }

    fn fit(&self, lambda: f64) -> Result<InnerFit> {
        let n = self.nu.dim();
        let m = self.family.size(n);
        let r = 1.0 / (lambda * lambda);
        let env = move |x: &[f64]| (-0.5 * r * x.iter().map(|v| v * v).sum::<f64>()).exp();
        let phi = |x: &[f64], out: &mut [f64]| {
            let g = env(x);
            out[0] = g;
            for k in 1..m {
                out[k] = x[k - 1] * g;
            }
        };
        let rhs = self.nu.values(
            &|x: &[f64], o: &mut [f64]| {
                phi(x, o);
                let fx = self.f.value(x);
                o.iter_mut().for_each(|v| *v *= fx);
            },
            m,
            Decay::Gaussian { rate: self.f_rate + r },
        )?;
        let tri = m * (m + 1) / 2;
        let gram = self.nu.values(
            &|x: &[f64], o: &mut [f64]| {
                let mut p = vec![0.0; m];
                phi(x, &mut p);
                let mut k = 0;
                for i in 0..m {
                    for j in i..m {
                        o[k] = p[i] * p[j];
                        k += 1;
                    }
                }
            },
            tri,
            Decay::Gaussian { rate: 2.0 * r },
        )?;
        let mut g = DMatrix::zeros(m, m);
        let mut k = 0;
        for i in 0..m {
            for j in i..m {
                g[(i, j)] = gram[k];
                g[(j, i)] = gram[k];
                k += 1;
            }
        }
        let b = DVector::from_column_slice(&rhs);
        let c = match g.clone().cholesky() {
            Some(ch) => ch.solve(&b),
            None => g
                .svd(true, true)
                .solve(&b, 1e-14)
                .map_err(|e| Error::DegenerateInput(format!("family Gram matrix: {e}")))?,
        };
        let residual_sq = (self.norm_sq - c.dot(&b)).max(0.0);
        Ok(InnerFit {
            lambda,
            coefficients: c.iter().copied().collect(),
            residual_sq,
        })
    }
}

/// Inner least-squares fit of `f` by the family at a fixed scale.
pub fn fit_at_scale(nu: &Measure, f: &dyn ScalarField, family: GaussianFamily, lambda: f64) -> Result<InnerFit> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Parameter(format!("λ must be positive, got {lambda}")));
    }
    Objective::new(nu, f, family)?.fit(lambda)
}

/// `inf_{λ>0} min_{c(,d)} ∫|f − (c + d·x)e^{−|x|²/(2λ²)}|² w dx` over
/// [`LAMBDA_BRACKET`]: a log-spaced pre-scan picks the basin, golden-section
/// search in `log λ` refines it.
pub fn distance_to_family(nu: &Measure, f: &dyn ScalarField, family: GaussianFamily) -> Result<FamilyDistance> {
    let obj = Objective::new(nu, f, family)?;
    let (lo, hi) = (LAMBDA_BRACKET.0.ln(), LAMBDA_BRACKET.1.ln());
    let step = (hi - lo) / (PRESCAN_POINTS - 1) as f64;
    let scan: Vec<InnerFit> = (0..PRESCAN_POINTS)
        .into_par_iter()
        .map(|i| obj.fit((lo + step * i as f64).exp()))
        .collect::<Result<_>>()?;
    let first = scan[0].residual_sq;
    if scan
        .iter()
        .all(|s| (s.residual_sq - first).abs() <= 1e-12 * (1.0 + first.abs()))
    {
        let n = nu.dim();
        return Ok(FamilyDistance {
            family,
            distance: first.sqrt(),
            distance_sq: first,
            argmin: FamilyArgmin {
                c: 0.0,
                d: vec![0.0; family.size(n) - 1],
                lambda: 1.0,
                degenerate: true,
            },
            bracket: LAMBDA_BRACKET,
            iterations: 0,
            evaluations: PRESCAN_POINTS,
        });
    }
    let best = (0..PRESCAN_POINTS)
        .min_by(|&i, &j| scan[i].residual_sq.total_cmp(&scan[j].residual_sq))
        .unwrap();
    let mut a = lo + step * best.saturating_sub(1) as f64;
    let mut b = lo + step * (best + 1).min(PRESCAN_POINTS - 1) as f64;
    let mut best_fit = scan[best].clone();

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = obj.fit(x1.exp())?;
    let mut f2 = obj.fit(x2.exp())?;
    let mut evaluations = PRESCAN_POINTS + 2;
    let mut iterations = 0;
    while b - a > GOLDEN_TOL && iterations < GOLDEN_MAX_ITER {
        iterations += 1;
        if f1.residual_sq <= f2.residual_sq {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = obj.fit(x1.exp())?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = obj.fit(x2.exp())?;
        }
        evaluations += 1;
    }
    for cand in [f1, f2] {
        if cand.residual_sq < best_fit.residual_sq {
            best_fit = cand;
        }
    }
    let c = &best_fit.coefficients;
    Ok(FamilyDistance {
        family,
        distance: best_fit.residual_sq.sqrt(),
        distance_sq: best_fit.residual_sq,
        argmin: FamilyArgmin {
            c: c[0],
            d: c[1..].to_vec(),
            lambda: best_fit.lambda,
            degenerate: false,
        },
        bracket: (a.exp(), b.exp()),
        iterations,
        evaluations,
    })
}

/// Deficit, distances and the verdicts of the basic and improved stability inequalities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub field: String,
    pub delta: f64,
    /// Optimal uncertainty scale `(D/A)^{1/4}`.
    pub lambda_star: f64,
    pub distance_sq: f64,
    pub improved_distance_sq: Option<f64>,
    pub argmin: FamilyArgmin,
    pub improved_argmin: Option<FamilyArgmin>,
    pub checks: Vec<InequalityCheck>,
    pub diagnostics: BTreeMap<String, f64>,
}

impl StabilityReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| !c.is_failure())
    }
}

/// `δ_w(f) ≥ (1+K_w)·d²` and, when `improved`, also
/// `δ_w(f) − (1+K_w)·d² ≥ ((1+K_w)/2)·tilde-d²`.
pub fn check_hup_stability(
    nu: &Measure,
    f: &dyn ScalarField,
    improved: bool,
    opts: &CheckOptions,
) -> Result<StabilityReport> {
    let def = hup_deficit(nu, f)?;
    let c = 1.0 + nu.weight().curvature()?;
    let basic = distance_to_family(nu, f, GaussianFamily::Gaussian)?;
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("identity_residual".to_string(), def.identity_residual);
    diagnostics.insert("golden_iterations".to_string(), basic.iterations as f64);
    diagnostics.insert("bracket_lo".to_string(), basic.bracket.0);
    diagnostics.insert("bracket_hi".to_string(), basic.bracket.1);
    let mut checks = vec![
        InequalityCheck::new("hup_stability", c * basic.distance_sq, def.delta, c, opts.tolerance)?
            .with_field(f.label())
            .diag("delta", def.delta)
            .diag("distance_sq", basic.distance_sq)
            .diag("lambda_star", def.lambda),
    ];
    let mut improved_distance_sq = None;
    let mut improved_argmin = None;
    if improved {
        let aff = distance_to_family(nu, f, GaussianFamily::AffineGaussian)?;
        diagnostics.insert("improved_golden_iterations".to_string(), aff.iterations as f64);
        checks.push(
            InequalityCheck::new(
                "hup_stability_improved",
                0.5 * c * aff.distance_sq,
                def.delta - c * basic.distance_sq,
                0.5 * c,
                opts.tolerance,
            )?
            .with_field(f.label())
            .diag("improved_distance_sq", aff.distance_sq),
        );
        improved_distance_sq = Some(aff.distance_sq);
        improved_argmin = Some(aff.argmin);
    }
    Ok(StabilityReport {
        field: f.label(),
        delta: def.delta,
        lambda_star: def.lambda,
        distance_sq: basic.distance_sq,
        improved_distance_sq,
        argmin: basic.argmin,
        improved_argmin,
        checks,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Field;
    use crate::quadrature::QuadratureTarget;
    use crate::weight::{Weight, WeightSpec};
    use crate::Cone;

    fn partial(a: f64) -> Measure {
        let inner = WeightSpec::Monomial { exponents: vec![a] };
        let w = Weight::new(WeightSpec::PartialProduct {
            inner: Box::new(inner),
            free_coords: vec![1],
        })
        .unwrap();
        Measure::lebesgue(w, Cone::orthant(2, &[0]), QuadratureTarget::default()).unwrap()
    }

    fn flat(n: usize) -> Measure {
        Measure::lebesgue(Weight::unit(n), Cone::full(n), QuadratureTarget::default()).unwrap()
    }

    /// `∫_0^∞ t^a e^{−t²} dt = Γ((a+1)/2)/2`.
    fn half_moment(a: f64) -> f64 {
        0.5 * statrs::function::gamma::gamma((a + 1.0) / 2.0)
    }

    #[test]
    fn family_member_has_zero_distance() {
        let f = Field::gaussian(2, 2.0, 2.0);
        let d = distance_to_family(&flat(2), &f, GaussianFamily::Gaussian).unwrap();
        assert!(d.distance < 1e-6, "{}", d.distance);
        assert!((d.argmin.c - 2.0).abs() < 1e-6);
        assert!((d.argmin.lambda - 2.0).abs() < 1e-6);
    }

    #[test]
    fn witness_distances() {
        for a in [1.0, 1.5] {
            let nu = partial(a);
            let f = Field::hermite_witness(2, 1);
            let want = half_moment(a) * std::f64::consts::PI.sqrt() / 2.0;
            let d = distance_to_family(&nu, &f, GaussianFamily::Gaussian).unwrap();
            assert!(d.argmin.degenerate);
            assert_eq!(d.argmin.c, 0.0);
            assert!(
                (d.distance_sq - want).abs() < 1e-10,
                "a={a}: {} vs {want}",
                d.distance_sq
            );
            let t = distance_to_family(&nu, &f, GaussianFamily::AffineGaussian).unwrap();
            assert!(t.distance_sq < 1e-12);
            assert!((t.argmin.lambda - 1.0).abs() < 1e-6);
            assert!((t.argmin.d[1] - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn witness_stability_is_an_equality() {
        let want = std::f64::consts::PI.sqrt() / 4.0;
        let r = check_hup_stability(
            &partial(1.0),
            &Field::hermite_witness(2, 1),
            true,
            &CheckOptions::default(),
        )
        .unwrap();
        assert!(r.pass());
        assert!((r.delta - want).abs() < 1e-6);
        assert!((r.distance_sq - want).abs() < 1e-6);
        assert!((r.lambda_star - 1.0).abs() < 1e-8);
        assert!(r.checks[1].deficit.abs() < 1e-7);
    }

    #[test]
    fn inner_fit_matches_generic_least_squares() {
        let nu = partial(1.0);
        let f = Field::poly_gauss(2, 5, 3, Some(1.0), &[0]);
        let fit = fit_at_scale(&nu, &f, GaussianFamily::AffineGaussian, 1.0).unwrap();
        let ls = crate::functionals::least_squares(
            &nu,
            &|x: &[f64]| f.value(x),
            &|x: &[f64], o: &mut [f64]| {
                let g = (-0.5 * (x[0] * x[0] + x[1] * x[1])).exp();
                o[0] = g;
                o[1] = x[0] * g;
                o[2] = x[1] * g;
            },
            3,
            Decay::Gaussian { rate: 2.0 },
        )
        .unwrap();
        for (a, b) in fit.coefficients.iter().zip(&ls.coefficients) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!((fit.residual_sq - ls.residual_sq).abs() < 1e-10 * (1.0 + ls.residual_sq));
    }

    #[test]
    fn normalized_measures_are_refused() {
        let mu = Measure::gaussian(Weight::unit(1), Cone::full(1), QuadratureTarget::default()).unwrap();
        let f = Field::gaussian(1, 1.0, 1.0);
        assert!(matches!(
            distance_to_family(&mu, &f, GaussianFamily::Gaussian),
            Err(Error::Contract(_))
        ));
        assert!(matches!(
            distance_to_family(&flat(1), &Field::coordinate(1, 0), GaussianFamily::Gaussian),
            Err(Error::DecayContract(_))
        ));
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(12))]
        #[test]
        fn affine_distance_never_exceeds_basic(seed in 0u64..10_000) {
            let nu = partial(1.0);
            let f = Field::poly_gauss(2, seed, 3, None, &[0]);
            let d = distance_to_family(&nu, &f, GaussianFamily::Gaussian).unwrap();
            let t = distance_to_family(&nu, &f, GaussianFamily::AffineGaussian).unwrap();
            proptest::prop_assert!(t.distance_sq <= d.distance_sq + 1e-12 * (1.0 + d.distance_sq));
        }

        #[test]
        fn argmin_scales_with_dilation(seed in 0u64..10_000, s in 0.5f64..2.0) {
            let nu = partial(1.5);
            let f = Field::poly_gauss(2, seed, 2, None, &[0]);
            let d = distance_to_family(&nu, &f, GaussianFamily::Gaussian).unwrap();
            let ds = distance_to_family(&nu, &f.clone().dilate(s), GaussianFamily::Gaussian).unwrap();
            proptest::prop_assume!(!d.argmin.degenerate);
            proptest::prop_assert!((ds.argmin.lambda - s * d.argmin.lambda).abs() <= 1e-6 * s * d.argmin.lambda,
                "{} vs {}", ds.argmin.lambda, s * d.argmin.lambda);
        }
    }
}
