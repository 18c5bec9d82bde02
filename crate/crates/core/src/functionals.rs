//! Scalar functionals: norms, variance, entropy, Dirichlet energy, the
//! optimal uncertainty scale and the uncertainty deficit.

use serde::{Deserialize, Serialize};

use crate::cone::dot;
use crate::error::{Error, Result};
use crate::field::{Parity, ScalarField};
use crate::quadrature::{Decay, Measure};

/// A computed functional with its integration error estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalValue {
    pub name: String,
    pub value: f64,
    pub measure: String,
    pub error: f64,
}

/// `"mu_w(lambda=…)"` or `"w dx"`.
pub fn describe(measure: &Measure) -> String {
    match measure.scale() {
        Some(l) => format!("mu_w(lambda={l})"),
        None => "w dx".into(),
    }
}

fn fv(name: &str, measure: &Measure, value: f64, error: f64) -> FunctionalValue {
    FunctionalValue {
        name: name.into(),
        value,
        measure: describe(measure),
        error: error.abs(),
    }
}

/// True when `f` is odd in an axis along which the measure is symmetric.
pub fn integral_vanishes_by_parity(measure: &Measure, f: &dyn ScalarField) -> bool {
    (0..measure.dim()).any(|k| f.parity(k) == Parity::Odd && measure.axis_symmetric(k))
}

fn require_normalized(measure: &Measure, what: &str) -> Result<()> {
    if measure.is_normalized() {
        Ok(())
    } else {
        Err(Error::Contract(format!("{what} needs a probability measure, got w dx")))
    }
}

fn require_lebesgue(measure: &Measure, what: &str) -> Result<()> {
    if measure.is_normalized() {
        Err(Error::Contract(format!(
            "{what} is defined with w dx, got a normalized measure"
        )))
    } else {
        Ok(())
    }
}

/// `∫ f`, exactly zero when a parity tag makes the integrand odd.
pub fn integral(measure: &Measure, f: &dyn ScalarField) -> Result<FunctionalValue> {
    if integral_vanishes_by_parity(measure, f) {
        return Ok(fv("integral", measure, 0.0, 0.0));
    }
    let i = measure.integrate(&|x: &[f64]| f.value(x), f.decay())?;
    Ok(fv("integral", measure, i.value, i.error))
}

fn power_decay(d: Decay, q: f64) -> Decay {
    match d {
        Decay::Gaussian { rate } => Decay::Gaussian { rate: q * rate },
        d => d,
    }
}

/// `(∫|f|^q)^{1/q}`.
pub fn lq_norm(measure: &Measure, f: &dyn ScalarField, q: f64) -> Result<FunctionalValue> {
    if !(q >= 1.0) {
        return Err(Error::Parameter(format!("norm exponent must be ≥ 1, got {q}")));
    }
    let i = measure.integrate(&|x: &[f64]| f.value(x).abs().powf(q), power_decay(f.decay(), q))?;
    let v = i.value.max(0.0).powf(1.0 / q);
    let err = if i.value > 0.0 {
        i.error * v / (q * i.value)
    } else {
        i.error.powf(1.0 / q)
    };
    Ok(fv(&format!("L{q} norm"), measure, v, err))
}

/// `∫|f − ∫f|²` on a probability measure.
pub fn variance(measure: &Measure, f: &dyn ScalarField) -> Result<FunctionalValue> {
    require_normalized(measure, "variance")?;
    let m = integral(measure, f)?.value;
    let mut decay = power_decay(f.decay(), 2.0);
    if m != 0.0 {
        decay = decay.plus(Decay::Polynomial);
    }
    let i = measure.integrate(&|x: &[f64]| (f.value(x) - m).powi(2), decay)?;
    Ok(fv("variance", measure, i.value.max(0.0), i.error))
}

/// `∫ g log g − (∫g) log(∫g)` for a nonnegative field `g`, with `0·log 0 = 0`.
pub fn entropy(measure: &Measure, g: &dyn ScalarField) -> Result<FunctionalValue> {
    entropy_of(measure, &|x: &[f64]| g.value(x), g.decay(), "entropy")
}

/// `Ent(f²)`, evaluating `f²` pointwise.
pub fn entropy_of_square(measure: &Measure, f: &dyn ScalarField) -> Result<FunctionalValue> {
    entropy_of(
        measure,
        &|x: &[f64]| f.value(x).powi(2),
        power_decay(f.decay(), 2.0),
        "entropy of f^2",
    )
}

/// `Ent(|f|^q)`.
pub fn entropy_of_power(measure: &Measure, f: &dyn ScalarField, q: f64) -> Result<FunctionalValue> {
    entropy_of(
        measure,
        &|x: &[f64]| f.value(x).abs().powf(q),
        power_decay(f.decay(), q),
        "entropy of |f|^q",
    )
}

fn xlogx(v: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v * v.ln()
    }
}

fn entropy_of(measure: &Measure, g: &dyn Fn(&[f64]) -> f64, decay: Decay, name: &str) -> Result<FunctionalValue> {
    let negative = std::sync::Mutex::new(None);
    let v = measure.integrate_many(
        &|x: &[f64], o: &mut [f64]| {
            let v = g(x);
            if v < 0.0 {
                negative.lock().expect("poisoned").get_or_insert(v);
            }
            o[0] = xlogx(v.max(0.0));
            o[1] = v.max(0.0);
        },
        2,
        decay,
    )?;
    if let Some(v) = *negative.lock().expect("poisoned") {
        return Err(Error::Domain(format!("entropy of a negative integrand ({v})")));
    }
    let m = v[1].value;
    let value = v[0].value - xlogx(m);
    let err = v[0].error + v[1].error * (1.0 + m.abs().max(1e-300).ln().abs());
    Ok(fv(name, measure, value, err))
}

/// `∫|∇f|^q`.
pub fn dirichlet_energy(measure: &Measure, f: &dyn ScalarField, q: f64) -> Result<FunctionalValue> {
    if !(q >= 1.0) {
        return Err(Error::Parameter(format!("energy exponent must be ≥ 1, got {q}")));
    }
    let i = measure.integrate(
        &|x: &[f64]| {
            let g = f.gradient(x);
            let s = dot(&g, &g);
            if q == 2.0 {
                s
            } else {
                s.sqrt().powf(q)
            }
        },
        power_decay(f.grad_decay(), q),
    )?;
    Ok(fv(&format!("dirichlet energy q={q}"), measure, i.value, i.error))
}

/// `A = ∫|∇f|²w`, `B = ∫f²w`, `D = ∫|x|²f²w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HupMoments {
    pub a: f64,
    pub b: f64,
    pub d: f64,
}

/// The three `w dx` moments entering the uncertainty principle.
pub fn hup_moments(nu: &Measure, f: &dyn ScalarField) -> Result<HupMoments> {
    require_lebesgue(nu, "the uncertainty functional")?;
    let v = nu.values(
        &|x: &[f64], o: &mut [f64]| {
            let j = f.jet(x);
            let f2 = j.value * j.value;
            o[0] = dot(&j.grad, &j.grad);
            o[1] = f2;
            o[2] = dot(x, x) * f2;
        },
        3,
        power_decay(f.decay(), 2.0).plus(power_decay(f.grad_decay(), 2.0)),
    )?;
    let m = HupMoments {
        a: v[0],
        b: v[1],
        d: v[2],
    };
    if !(m.b > 0.0) {
        return Err(Error::DegenerateInput("field has zero L² norm".into()));
    }
    Ok(m)
}

/// `λ* = (D/A)^{1/4}`.
pub fn optimal_scale(nu: &Measure, f: &dyn ScalarField) -> Result<f64> {
    let m = hup_moments(nu, f)?;
    scale_from(&m)
}

fn scale_from(m: &HupMoments) -> Result<f64> {
    if !(m.a > 0.0 && m.d > 0.0) {
        return Err(Error::DegenerateInput(
            "field has zero energy or zero second moment".into(),
        ));
    }
    Ok((m.d / m.a).powf(0.25))
}

/// Uncertainty deficit and its sum-of-squares representation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HupDeficit {
    /// `√(A·D) − ((n+α)/2)·B`.
    pub delta: f64,
    /// `(λ*²/2)∫|∇f + f x/λ*²|² w dx`.
    pub sum_of_squares: f64,
    /// `|δ − sum_of_squares|`.
    pub identity_residual: f64,
    pub lambda: f64,
    pub moments: HupMoments,
}

/// `δ_w(f)` for a homogeneous weight and a Gaussian-decay field.
pub fn hup_deficit(nu: &Measure, f: &dyn ScalarField) -> Result<HupDeficit> {
    let alpha = nu
        .weight()
        .require_degree()
        .map_err(|_| Error::Contract("the uncertainty deficit needs a homogeneous weight".into()))?;
    let n = nu.dim() as f64;
    let m = hup_moments(nu, f)?;
    let lambda = scale_from(&m)?;
    let delta = (m.a * m.d).sqrt() - 0.5 * (n + alpha) * m.b;
    let l2 = lambda * lambda;
    let sos = 0.5
        * l2
        * nu.value(
            &|x: &[f64]| {
                let j = f.jet(x);
                j.grad
                    .iter()
                    .zip(x)
                    .map(|(g, xi)| (g + j.value * xi / l2).powi(2))
                    .sum()
            },
            power_decay(f.decay(), 2.0).plus(power_decay(f.grad_decay(), 2.0)),
        )?;
    Ok(HupDeficit {
        delta,
        sum_of_squares: sos,
        identity_residual: (delta - sos).abs(),
        lambda,
        moments: m,
    })
}

/// Best `L²` approximation of `f` by the span of `basis` (evaluated into an
/// `m`-slice), solved from the normal equations. `decay` must bound every
/// product `f·φ_i` and `φ_i·φ_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeastSquares {
    pub coefficients: Vec<f64>,
    pub residual_sq: f64,
}

pub fn least_squares(
    measure: &Measure,
    f: &dyn Fn(&[f64]) -> f64,
    basis: &dyn Fn(&[f64], &mut [f64]),
    m: usize,
    decay: Decay,
) -> Result<LeastSquares> {
    let tri = m * (m + 1) / 2;
    let v = measure.values(
        &|x: &[f64], o: &mut [f64]| {
            let (gram, rest) = o.split_at_mut(tri);
            let (phi, rhs) = rest.split_at_mut(m);
            basis(x, phi);
            let fx = f(x);
            let mut k = 0;
            for i in 0..m {
                for j in i..m {
                    gram[k] = phi[i] * phi[j];
                    k += 1;
                }
                rhs[i] = fx * phi[i];
            }
        },
        tri + 2 * m,
        decay,
    )?;
    let mut g = nalgebra::DMatrix::<f64>::zeros(m, m);
    let mut k = 0;
    for i in 0..m {
        for j in i..m {
            g[(i, j)] = v[k];
            g[(j, i)] = v[k];
            k += 1;
        }
    }
    let b = nalgebra::DVector::from_column_slice(&v[tri + m..tri + 2 * m]);
    let c = match g.clone().cholesky() {
        Some(ch) => ch.solve(&b),
        None => g
            .svd(true, true)
            .solve(&b, 1e-14)
            .map_err(|e| Error::DegenerateInput(format!("least-squares system: {e}")))?,
    };
    let coefficients: Vec<f64> = c.iter().copied().collect();
    let residual_sq = measure.value(
        &|x: &[f64]| {
            let mut phi = vec![0.0; 2 * m];
            basis(x, &mut phi[..m]);
            (f(x) - dot(&coefficients, &phi[..m])).powi(2)
        },
        decay,
    )?;
    Ok(LeastSquares {
        coefficients,
        residual_sq: residual_sq.max(0.0),
    })
}
