//! Smooth test fields with analytic first and second derivatives.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cone::dot;
use crate::error::{Error, Result};
pub use crate::quadrature::Decay;

/// Behaviour under the reflection `x_k → -x_k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    Even,
    Odd,
    Neither,
}

impl Parity {
    fn times(self, other: Parity) -> Parity {
        match (self, other) {
            (Parity::Neither, _) | (_, Parity::Neither) => Parity::Neither,
            (a, b) if a == b => Parity::Even,
            _ => Parity::Odd,
        }
    }

    fn plus(self, other: Parity) -> Parity {
        if self == other {
            self
        } else {
            Parity::Neither
        }
    }
}

/// Value, gradient and row-major Hessian at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess: Vec<f64>,
}

impl Jet {
    pub fn zero(dim: usize) -> Self {
        Self {
            value: 0.0,
            grad: vec![0.0; dim],
            hess: vec![0.0; dim * dim],
        }
    }

    pub fn laplacian(&self) -> f64 {
        let n = self.grad.len();
        (0..n).map(|i| self.hess[i * n + i]).sum()
    }

    pub fn hess_frobenius_sq(&self) -> f64 {
        self.hess.iter().map(|h| h * h).sum()
    }
}

/// A smooth function on a cone. Implementations are immutable and thread-safe.
pub trait ScalarField: Send + Sync {
    fn dim(&self) -> usize;

    fn jet(&self, x: &[f64]) -> Jet;

    fn value(&self, x: &[f64]) -> f64 {
        self.jet(x).value
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.jet(x).grad
    }

    /// Growth envelope used to pick a quadrature rule.
    fn decay(&self) -> Decay;

    /// Envelope of `∇f`; constant summands do not contribute.
    fn grad_decay(&self) -> Decay {
        self.decay()
    }

    fn parity(&self, _axis: usize) -> Parity {
        Parity::Neither
    }

    fn is_radial(&self) -> bool {
        false
    }

    fn label(&self) -> String {
        "field".into()
    }
}

/// Sparse polynomial `Σ c·x^e`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    pub dim: usize,
    pub terms: Vec<(f64, Vec<u32>)>,
}

impl Polynomial {
    pub fn new(dim: usize, terms: Vec<(f64, Vec<u32>)>) -> Result<Self> {
        if terms.iter().any(|(c, e)| e.len() != dim || !c.is_finite()) {
            return Err(Error::Parameter(format!(
                "polynomial terms must have {dim} finite exponents"
            )));
        }
        Ok(Self { dim, terms })
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Self {
            dim,
            terms: vec![(c, vec![0; dim])],
        }
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .iter()
            .filter(|(c, _)| *c != 0.0)
            .map(|(_, e)| e.iter().sum())
            .max()
            .unwrap_or(0)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(c, e)| c * e.iter().zip(x).map(|(&k, &v)| v.powi(k as i32)).product::<f64>())
            .sum()
    }

    pub fn jet(&self, x: &[f64]) -> Jet {
        let n = self.dim;
        let mut j = Jet::zero(n);
        let mut p = vec![0.0; n];
        let mut d1 = vec![0.0; n];
        let mut d2 = vec![0.0; n];
        for (c, e) in &self.terms {
            if *c == 0.0 {
                continue;
            }
            for i in 0..n {
                let k = e[i] as i32;
                p[i] = x[i].powi(k);
                d1[i] = if k >= 1 { k as f64 * x[i].powi(k - 1) } else { 0.0 };
                d2[i] = if k >= 2 {
                    (k * (k - 1)) as f64 * x[i].powi(k - 2)
                } else {
                    0.0
                };
            }
            let prod_except =
                |skip: &[usize]| -> f64 { (0..n).filter(|i| !skip.contains(i)).map(|i| p[i]).product::<f64>() };
            j.value += c * prod_except(&[]);
            for a in 0..n {
                if d1[a] == 0.0 && d2[a] == 0.0 {
                    continue;
                }
                let rest = prod_except(&[a]);
                j.grad[a] += c * d1[a] * rest;
                j.hess[a * n + a] += c * d2[a] * rest;
                for b in (a + 1)..n {
                    let h = c * d1[a] * d1[b] * prod_except(&[a, b]);
                    j.hess[a * n + b] += h;
                    j.hess[b * n + a] += h;
                }
            }
        }
        j
    }

    pub fn parity(&self, axis: usize) -> Parity {
        let mut out: Option<Parity> = None;
        for (c, e) in &self.terms {
            if *c == 0.0 {
                continue;
            }
            let p = if e[axis] % 2 == 0 { Parity::Even } else { Parity::Odd };
            out = Some(out.map_or(p, |q| q.plus(p)));
        }
        out.unwrap_or(Parity::Even)
    }

    fn is_constant(&self) -> bool {
        self.terms.iter().all(|(c, e)| *c == 0.0 || e.iter().all(|&k| k == 0))
    }
}

/// The built-in field algebra.
#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    Polynomial(Polynomial),
    /// `amplitude·e^{b x_axis}`.
    ExpAxis {
        dim: usize,
        axis: usize,
        b: f64,
        amplitude: f64,
    },
    /// `P(x)·e^{-rate|x|²/2}`.
    PolyGauss {
        poly: Polynomial,
        rate: f64,
    },
    Sum(Vec<Field>),
    Product(Box<Field>, Box<Field>),
    Scaled(f64, Box<Field>),
    /// `x ↦ inner(x/s)`.
    Dilate {
        inner: Box<Field>,
        s: f64,
    },
}

impl Field {
    pub fn constant(dim: usize, c: f64) -> Self {
        Field::Polynomial(Polynomial::constant(dim, c))
    }

    /// `a·x + b`.
    pub fn affine(a: &[f64], b: f64) -> Self {
        let n = a.len();
        let mut terms = vec![(b, vec![0; n])];
        for (k, &ak) in a.iter().enumerate() {
            let mut e = vec![0; n];
            e[k] = 1;
            terms.push((ak, e));
        }
        Field::Polynomial(Polynomial { dim: n, terms })
    }

    pub fn coordinate(dim: usize, axis: usize) -> Self {
        let mut a = vec![0.0; dim];
        a[axis] = 1.0;
        Field::affine(&a, 0.0)
    }

    pub fn exp_axis(dim: usize, axis: usize, b: f64) -> Self {
        Field::ExpAxis {
            dim,
            axis,
            b,
            amplitude: 1.0,
        }
    }

    /// `x_axis·e^{-|x|²/2}`.
    pub fn hermite_witness(dim: usize, axis: usize) -> Self {
        let mut e = vec![0; dim];
        e[axis] = 1;
        Field::PolyGauss {
            poly: Polynomial {
                dim,
                terms: vec![(1.0, e)],
            },
            rate: 1.0,
        }
    }

    /// `amplitude·e^{-|x|²/(2λ²)}`.
    pub fn gaussian(dim: usize, amplitude: f64, lambda: f64) -> Self {
        Field::PolyGauss {
            poly: Polynomial::constant(dim, amplitude),
            rate: 1.0 / (lambda * lambda),
        }
    }

    /// `amplitude·e^{-|x|²/4}`.
    pub fn gaussian_quarter(dim: usize, amplitude: f64) -> Self {
        Field::PolyGauss {
            poly: Polynomial::constant(dim, amplitude),
            rate: 0.5,
        }
    }

    /// Seeded random polynomial of total degree `≤ degree` times a Gaussian
    /// bump. Exponents on `even_axes` are even, so the field satisfies the
    /// Neumann condition on the facets `x_k = 0` of an orthant.
    pub fn poly_gauss(dim: usize, seed: u64, degree: u32, rate: Option<f64>, even_axes: &[usize]) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rate = rate.unwrap_or_else(|| rng.random_range(0.5..1.5));
        let mut terms = Vec::new();
        for e in exponents_up_to(dim, degree) {
            if even_axes.iter().any(|&k| e[k] % 2 == 1) {
                continue;
            }
            terms.push((rng.random_range(-1.0..1.0), e));
        }
        Field::PolyGauss {
            poly: Polynomial { dim, terms },
            rate,
        }
    }

    /// `1 + ε·u`.
    pub fn perturbation(u: Field, eps: f64) -> Self {
        let n = u.dim();
        Field::Sum(vec![Field::constant(n, 1.0), Field::Scaled(eps, Box::new(u))])
    }

    pub fn scaled(self, factor: f64) -> Self {
        Field::Scaled(factor, Box::new(self))
    }

    pub fn dilate(self, s: f64) -> Self {
        Field::Dilate {
            inner: Box::new(self),
            s,
        }
    }

    pub fn times(self, other: Field) -> Self {
        Field::Product(Box::new(self), Box::new(other))
    }

    fn jet_into(&self, x: &[f64]) -> Jet {
        let n = x.len();
        match self {
            Field::Polynomial(p) => p.jet(x),
            Field::ExpAxis { axis, b, amplitude, .. } => {
                let mut j = Jet::zero(n);
                let v = amplitude * (b * x[*axis]).exp();
                j.value = v;
                j.grad[*axis] = b * v;
                j.hess[axis * n + axis] = b * b * v;
                j
            }
            Field::PolyGauss { poly, rate } => {
                // f = P g:  ∇f = (∇P − cPx) g,
                // ∇²f = (∇²P − c(∇P xᵀ + x ∇Pᵀ) − cP I + c²P x xᵀ) g.
                let c = *rate;
                let pj = poly.jet(x);
                let g = (-0.5 * c * dot(x, x)).exp();
                let mut j = Jet::zero(n);
                j.value = pj.value * g;
                for a in 0..n {
                    j.grad[a] = (pj.grad[a] - c * pj.value * x[a]) * g;
                    for b in a..n {
                        let mut h = pj.hess[a * n + b] - c * (pj.grad[a] * x[b] + x[a] * pj.grad[b])
                            + c * c * pj.value * x[a] * x[b];
                        if a == b {
                            h -= c * pj.value;
                        }
                        j.hess[a * n + b] = h * g;
                        j.hess[b * n + a] = h * g;
                    }
                }
                j
            }
            Field::Sum(parts) => {
                let mut j = Jet::zero(n);
                for p in parts {
                    let q = p.jet_into(x);
                    j.value += q.value;
                    j.grad.iter_mut().zip(&q.grad).for_each(|(a, b)| *a += b);
                    j.hess.iter_mut().zip(&q.hess).for_each(|(a, b)| *a += b);
                }
                j
            }
            Field::Product(u, v) => {
                let (a, b) = (u.jet_into(x), v.jet_into(x));
                let mut j = Jet::zero(n);
                j.value = a.value * b.value;
                for i in 0..n {
                    j.grad[i] = a.value * b.grad[i] + b.value * a.grad[i];
                    for k in i..n {
                        let h = a.value * b.hess[i * n + k]
                            + b.value * a.hess[i * n + k]
                            + a.grad[i] * b.grad[k]
                            + b.grad[i] * a.grad[k];
                        j.hess[i * n + k] = h;
                        j.hess[k * n + i] = h;
                    }
                }
                j
            }
            Field::Scaled(s, inner) => {
                let mut j = inner.jet_into(x);
                j.value *= s;
                j.grad.iter_mut().for_each(|g| *g *= s);
                j.hess.iter_mut().for_each(|h| *h *= s);
                j
            }
            Field::Dilate { inner, s } => {
                let y: Vec<f64> = x.iter().map(|v| v / s).collect();
                let mut j = inner.jet_into(&y);
                j.grad.iter_mut().for_each(|g| *g /= s);
                j.hess.iter_mut().for_each(|h| *h /= s * s);
                j
            }
        }
    }

    fn value_of(&self, x: &[f64]) -> f64 {
        match self {
            Field::Polynomial(p) => p.value(x),
            Field::ExpAxis { axis, b, amplitude, .. } => amplitude * (b * x[*axis]).exp(),
            Field::PolyGauss { poly, rate } => poly.value(x) * (-0.5 * rate * dot(x, x)).exp(),
            Field::Sum(parts) => parts.iter().map(|p| p.value_of(x)).sum(),
            Field::Product(u, v) => u.value_of(x) * v.value_of(x),
            Field::Scaled(s, inner) => s * inner.value_of(x),
            Field::Dilate { inner, s } => {
                let y: Vec<f64> = x.iter().map(|v| v / s).collect();
                inner.value_of(&y)
            }
        }
    }
}

impl ScalarField for Field {
    fn dim(&self) -> usize {
        match self {
            Field::Polynomial(p) => p.dim,
            Field::ExpAxis { dim, .. } => *dim,
            Field::PolyGauss { poly, .. } => poly.dim,
            Field::Sum(parts) => parts.first().map_or(0, |p| p.dim()),
            Field::Product(u, _) => u.dim(),
            Field::Scaled(_, inner) | Field::Dilate { inner, .. } => inner.dim(),
        }
    }

    fn jet(&self, x: &[f64]) -> Jet {
        self.jet_into(x)
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.value_of(x)
    }

    fn decay(&self) -> Decay {
        match self {
            Field::Polynomial(_) => Decay::Polynomial,
            Field::ExpAxis { .. } => Decay::Exponential,
            Field::PolyGauss { rate, .. } => Decay::Gaussian { rate: *rate },
            Field::Sum(parts) => parts
                .iter()
                .map(|p| p.decay())
                .reduce(Decay::plus)
                .unwrap_or(Decay::Polynomial),
            Field::Product(u, v) => u.decay().times(v.decay()),
            Field::Scaled(_, inner) => inner.decay(),
            Field::Dilate { inner, s } => match inner.decay() {
                Decay::Gaussian { rate } => Decay::Gaussian { rate: rate / (s * s) },
                d => d,
            },
        }
    }

    fn grad_decay(&self) -> Decay {
        match self {
            Field::Sum(parts) => parts
                .iter()
                .filter(|p| !matches!(p, Field::Polynomial(q) if q.is_constant()))
                .map(|p| p.grad_decay())
                .reduce(Decay::plus)
                .unwrap_or(Decay::Polynomial),
            Field::Product(u, v) => u.decay().times(v.grad_decay()).plus(v.decay().times(u.grad_decay())),
            Field::Scaled(_, inner) => inner.grad_decay(),
            Field::Dilate { inner, s } => match inner.grad_decay() {
                Decay::Gaussian { rate } => Decay::Gaussian { rate: rate / (s * s) },
                d => d,
            },
            _ => self.decay(),
        }
    }

    fn parity(&self, axis: usize) -> Parity {
        match self {
            Field::Polynomial(p) => p.parity(axis),
            Field::ExpAxis { axis: k, b, .. } => {
                if *k == axis && *b != 0.0 {
                    Parity::Neither
                } else {
                    Parity::Even
                }
            }
            Field::PolyGauss { poly, .. } => poly.parity(axis),
            Field::Sum(parts) => parts
                .iter()
                .map(|p| p.parity(axis))
                .reduce(Parity::plus)
                .unwrap_or(Parity::Even),
            Field::Product(u, v) => u.parity(axis).times(v.parity(axis)),
            Field::Scaled(_, inner) | Field::Dilate { inner, .. } => inner.parity(axis),
        }
    }

    fn is_radial(&self) -> bool {
        match self {
            Field::Polynomial(p) => p.is_constant(),
            Field::PolyGauss { poly, .. } => poly.is_constant(),
            Field::Sum(parts) => parts.iter().all(|p| p.is_radial()),
            Field::Product(u, v) => u.is_radial() && v.is_radial(),
            Field::Scaled(_, inner) | Field::Dilate { inner, .. } => inner.is_radial(),
            Field::ExpAxis { b, .. } => *b == 0.0,
        }
    }

    fn label(&self) -> String {
        match self {
            Field::Polynomial(p) if p.is_constant() => "constant".into(),
            Field::Polynomial(_) => "polynomial".into(),
            Field::ExpAxis { .. } => "exp_axis".into(),
            Field::PolyGauss { .. } => "poly_gauss".into(),
            _ => "composite".into(),
        }
    }
}

/// All exponent vectors of total degree `≤ degree`, graded then lexicographic.
pub fn exponents_up_to(dim: usize, degree: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for d in 0..=degree {
        let mut cur = vec![0u32; dim];
        push_exact(&mut out, &mut cur, 0, d);
    }
    out
}

fn push_exact(out: &mut Vec<Vec<u32>>, cur: &mut Vec<u32>, i: usize, left: u32) {
    if i + 1 == cur.len() {
        cur[i] = left;
        out.push(cur.clone());
        return;
    }
    if cur.is_empty() {
        if left == 0 {
            out.push(Vec::new());
        }
        return;
    }
    for k in (0..=left).rev() {
        cur[i] = k;
        push_exact(out, cur, i + 1, left - k);
    }
    cur[i] = 0;
}

fn one() -> f64 {
    1.0
}

fn three() -> u32 {
    3
}

/// One monomial of a configured polynomial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coef: f64,
    pub exponents: Vec<u32>,
}

/// Configuration form of the field library. Axes are 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldSpec {
    Constant {
        c: f64,
    },
    Affine {
        a: Vec<f64>,
        b: f64,
    },
    ExpAxis {
        b: f64,
        axis: usize,
        #[serde(default = "one")]
        amplitude: f64,
    },
    HermiteWitness {
        axis: usize,
    },
    Gaussian {
        #[serde(default = "one")]
        amplitude: f64,
        lambda: f64,
    },
    GaussianQuarter {
        #[serde(default = "one")]
        amplitude: f64,
    },
    PolyGauss {
        seed: u64,
        #[serde(default = "three")]
        degree: u32,
        #[serde(default)]
        rate: Option<f64>,
    },
    Polynomial {
        terms: Vec<Term>,
    },
    /// `1 + epsilon·direction`.
    Perturbation {
        epsilon: f64,
        direction: Box<FieldSpec>,
    },
}

impl FieldSpec {
    /// Instantiate in dimension `dim`; `even_axes` are the orthant axes of
    /// the target cone (used by `poly_gauss` to stay Neumann-compatible).
    pub fn build(&self, dim: usize, even_axes: &[usize]) -> Result<Field> {
        let axis_ok = |k: usize| {
            if k < dim {
                Ok(())
            } else {
                Err(Error::Config(format!("axis {k} out of range for dimension {dim}")))
            }
        };
        Ok(match self {
            FieldSpec::Constant { c } => Field::constant(dim, *c),
            FieldSpec::Affine { a, b } => {
                if a.len() != dim {
                    return Err(Error::Config(format!(
                        "affine field needs {dim} coefficients, got {}",
                        a.len()
                    )));
                }
                Field::affine(a, *b)
            }
            FieldSpec::ExpAxis { b, axis, amplitude } => {
                axis_ok(*axis)?;
                Field::ExpAxis {
                    dim,
                    axis: *axis,
                    b: *b,
                    amplitude: *amplitude,
                }
            }
            FieldSpec::HermiteWitness { axis } => {
                axis_ok(*axis)?;
                Field::hermite_witness(dim, *axis)
            }
            FieldSpec::Gaussian { amplitude, lambda } => {
                if !(*lambda > 0.0) {
                    return Err(Error::Config(format!("gaussian field needs lambda > 0, got {lambda}")));
                }
                Field::gaussian(dim, *amplitude, *lambda)
            }
            FieldSpec::GaussianQuarter { amplitude } => Field::gaussian_quarter(dim, *amplitude),
            FieldSpec::PolyGauss { seed, degree, rate } => {
                if let Some(r) = rate {
                    if !(*r > 0.0) {
                        return Err(Error::Config(format!("poly_gauss rate must be positive, got {r}")));
                    }
                }
                Field::poly_gauss(dim, *seed, *degree, *rate, even_axes)
            }
            FieldSpec::Polynomial { terms } => Field::Polynomial(
                Polynomial::new(dim, terms.iter().map(|t| (t.coef, t.exponents.clone())).collect())
                    .map_err(|e| Error::Config(e.to_string()))?,
            ),
            FieldSpec::Perturbation { epsilon, direction } => {
                Field::perturbation(direction.build(dim, even_axes)?, *epsilon)
            }
        })
    }

    /// Short human-readable name used in reports.
    pub fn label(&self) -> String {
        match self {
            FieldSpec::Constant { c } => format!("constant({c})"),
            FieldSpec::Affine { a, b } => format!("affine({a:?},{b})"),
            FieldSpec::ExpAxis { b, axis, amplitude } => format!("exp_axis(b={b},axis={axis},amp={amplitude})"),
            FieldSpec::HermiteWitness { axis } => format!("hermite_witness(axis={axis})"),
            FieldSpec::Gaussian { amplitude, lambda } => format!("gaussian(amp={amplitude},lambda={lambda})"),
            FieldSpec::GaussianQuarter { amplitude } => format!("gaussian_quarter(amp={amplitude})"),
            FieldSpec::PolyGauss { seed, degree, .. } => format!("poly_gauss(seed={seed},degree={degree})"),
            FieldSpec::Polynomial { terms } => format!("polynomial({} terms)", terms.len()),
            FieldSpec::Perturbation { epsilon, direction } => format!("1+{epsilon}*{}", direction.label()),
        }
    }
}
