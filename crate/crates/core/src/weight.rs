//! Weight models `w` on cones, their log-derivatives, homogeneity degree and
//! curvature bound `K_w` (the largest `K` with `-∇² log w ⪰ K·I`).

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::cone::{dot, Cone, FACET_TOL};
use crate::error::{Error, Result};

type LogFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type GradFn = Arc<dyn Fn(&[f64]) -> DVector<f64> + Send + Sync>;
type HessFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

/// A user-supplied weight given through `log w` and its first two derivatives.
#[derive(Clone)]
pub struct CustomWeight {
    pub name: String,
    pub dim: usize,
    pub log_weight: LogFn,
    pub grad_log: GradFn,
    pub hess_log: HessFn,
    /// Homogeneity degree, if the weight is known to be homogeneous.
    pub degree: Option<f64>,
    /// Gaussian proposal scale for Monte Carlo rules. `None` means the
    /// weight cannot be integrated.
    pub proposal_scale: Option<f64>,
}

impl fmt::Debug for CustomWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomWeight")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("degree", &self.degree)
            .field("proposal_scale", &self.proposal_scale)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightSpec {
    /// `∏ |x_k|^{a_k}`.
    Monomial { exponents: Vec<f64> },
    /// `|x|^alpha`.
    Radial { alpha: f64, dim: usize },
    /// `∏ |⟨β, x⟩|^{2 k_β}` over unit roots β.
    DunklProduct {
        roots: Vec<Vec<f64>>,
        multiplicities: Vec<f64>,
    },
    /// `exp(-s|x|²/2)`.
    GaussianTilt { s: f64, dim: usize },
    /// `inner` evaluated on the coordinates not listed in `free_coords`.
    PartialProduct {
        inner: Box<WeightSpec>,
        free_coords: Vec<usize>,
    },
    #[serde(skip)]
    Custom(CustomWeight),
}

impl WeightSpec {
    /// The constant weight `w = 1` in dimension `dim`.
    pub fn unit(dim: usize) -> Self {
        WeightSpec::Monomial {
            exponents: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            WeightSpec::Monomial { exponents } => exponents.len(),
            WeightSpec::Radial { dim, .. } | WeightSpec::GaussianTilt { dim, .. } => *dim,
            WeightSpec::DunklProduct { roots, .. } => roots.first().map_or(0, Vec::len),
            WeightSpec::PartialProduct { inner, free_coords } => inner.dim() + free_coords.len(),
            WeightSpec::Custom(c) => c.dim,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        match self {
            WeightSpec::Monomial { exponents } => {
                if exponents.is_empty() {
                    return bad("monomial weight needs at least one exponent".into());
                }
                if exponents.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
                    return bad(format!(
                        "monomial exponents must be finite and nonnegative: {exponents:?}"
                    ));
                }
            }
            WeightSpec::Radial { alpha, dim } => {
                if !(alpha.is_finite() && *alpha >= 0.0) || *dim == 0 {
                    return bad(format!(
                        "radial weight needs alpha >= 0 and dim >= 1 (alpha={alpha}, dim={dim})"
                    ));
                }
            }
            WeightSpec::DunklProduct { roots, multiplicities } => {
                if roots.is_empty() || roots.len() != multiplicities.len() {
                    return bad("dunkl weight needs one multiplicity per root".into());
                }
                let n = roots[0].len();
                for r in roots {
                    let norm = dot(r, r).sqrt();
                    if r.len() != n || n == 0 || (norm - 1.0).abs() > 1e-10 {
                        return bad(format!("dunkl roots must be unit vectors of equal dimension: {r:?}"));
                    }
                }
                if multiplicities.iter().any(|k| !(k.is_finite() && *k >= 0.0)) {
                    return bad("dunkl multiplicities must be nonnegative".into());
                }
            }
            WeightSpec::GaussianTilt { s, dim } => {
                if *dim == 0 || !s.is_finite() {
                    return bad("gaussian tilt needs finite s and dim >= 1".into());
                }
                if *s <= -1.0 {
                    return Err(Error::InadmissibleWeight(format!(
                        "gaussian tilt requires s > -1, got {s}"
                    )));
                }
            }
            WeightSpec::PartialProduct { inner, free_coords } => {
                inner.validate()?;
                let n = self.dim();
                let mut seen = vec![false; n];
                for &k in free_coords {
                    if k >= n || seen[k] {
                        return bad(format!("free coordinate {k} invalid or repeated for dim {n}"));
                    }
                    seen[k] = true;
                }
                if free_coords.is_empty() {
                    return bad("partial product needs at least one free coordinate".into());
                }
            }
            WeightSpec::Custom(c) => {
                if c.dim == 0 {
                    return bad("custom weight dim must be >= 1".into());
                }
            }
        }
        Ok(())
    }

    /// Homogeneity degree, when the variant is homogeneous.
    pub fn degree(&self) -> Option<f64> {
        match self {
            WeightSpec::Monomial { exponents } => Some(exponents.iter().sum()),
            WeightSpec::Radial { alpha, .. } => Some(*alpha),
            WeightSpec::DunklProduct { multiplicities, .. } => Some(2.0 * multiplicities.iter().sum::<f64>()),
            WeightSpec::GaussianTilt { .. } => None,
            WeightSpec::PartialProduct { inner, .. } => inner.degree(),
            WeightSpec::Custom(c) => c.degree,
        }
    }

    /// Indices of the coordinates the inner weight of a partial product acts on.
    fn inner_coords(n: usize, free: &[usize]) -> Vec<usize> {
        (0..n).filter(|k| !free.contains(k)).collect()
    }

    /// Natural support `{w > 0}` as a cone (the positive chamber for
    /// weights vanishing on hyperplanes).
    pub fn support(&self) -> Cone {
        let n = self.dim();
        match self {
            WeightSpec::Monomial { exponents } => {
                let axes: Vec<usize> = (0..n).filter(|&k| exponents[k] > 0.0).collect();
                Cone::orthant(n, &axes)
            }
            WeightSpec::Radial { alpha, dim } if *dim == 1 && *alpha > 0.0 => Cone::orthant(1, &[0]),
            WeightSpec::Radial { .. } | WeightSpec::GaussianTilt { .. } | WeightSpec::Custom(_) => Cone::full(n),
            WeightSpec::DunklProduct { roots, multiplicities } => {
                let factors: Vec<Cone> = roots
                    .iter()
                    .zip(multiplicities)
                    .filter(|(_, k)| **k > 0.0)
                    .map(|(r, _)| Cone::Halfspace { normal: r.clone() })
                    .collect();
                if factors.is_empty() {
                    Cone::full(n)
                } else {
                    Cone::Product { factors }
                }
            }
            WeightSpec::PartialProduct { inner, free_coords } => {
                let coords = Self::inner_coords(n, free_coords);
                let lift = |v: &[f64]| {
                    let mut out = vec![0.0; n];
                    for (i, &k) in coords.iter().enumerate() {
                        out[k] = v[i];
                    }
                    out
                };
                let factors: Vec<Cone> = inner
                    .support()
                    .constraints()
                    .iter()
                    .map(|v| Cone::Halfspace { normal: lift(v) })
                    .collect();
                if factors.is_empty() {
                    Cone::full(n)
                } else {
                    Cone::Product { factors }
                }
            }
        }
    }

    fn log_value(&self, x: &[f64]) -> f64 {
        match self {
            WeightSpec::Monomial { exponents } => exponents
                .iter()
                .zip(x)
                .filter(|(a, _)| **a != 0.0)
                .map(|(a, xi)| a * xi.abs().ln())
                .sum(),
            WeightSpec::Radial { alpha, .. } => {
                if *alpha == 0.0 {
                    0.0
                } else {
                    0.5 * alpha * dot(x, x).ln()
                }
            }
            WeightSpec::DunklProduct { roots, multiplicities } => roots
                .iter()
                .zip(multiplicities)
                .filter(|(_, k)| **k != 0.0)
                .map(|(r, k)| 2.0 * k * dot(r, x).abs().ln())
                .sum(),
            WeightSpec::GaussianTilt { s, .. } => -0.5 * s * dot(x, x),
            WeightSpec::PartialProduct { inner, free_coords } => {
                let y = restrict(x, &Self::inner_coords(x.len(), free_coords));
                inner.log_value(&y)
            }
            WeightSpec::Custom(c) => (c.log_weight)(x),
        }
    }

    /// True when `x` lies on the zero set `{w = 0}` (within facet tolerance).
    fn on_zero_set(&self, x: &[f64]) -> bool {
        match self {
            WeightSpec::Monomial { exponents } => {
                exponents.iter().zip(x).any(|(a, xi)| *a > 0.0 && xi.abs() <= FACET_TOL)
            }
            WeightSpec::Radial { alpha, .. } => *alpha > 0.0 && dot(x, x).sqrt() <= FACET_TOL,
            WeightSpec::DunklProduct { roots, multiplicities } => roots
                .iter()
                .zip(multiplicities)
                .any(|(r, k)| *k > 0.0 && dot(r, x).abs() <= FACET_TOL),
            WeightSpec::GaussianTilt { .. } => false,
            WeightSpec::PartialProduct { inner, free_coords } => {
                inner.on_zero_set(&restrict(x, &Self::inner_coords(x.len(), free_coords)))
            }
            WeightSpec::Custom(c) => !(c.log_weight)(x).is_finite(),
        }
    }

    fn grad_log(&self, x: &[f64]) -> DVector<f64> {
        let n = x.len();
        match self {
            WeightSpec::Monomial { exponents } => DVector::from_iterator(
                n,
                exponents
                    .iter()
                    .zip(x)
                    .map(|(a, xi)| if *a == 0.0 { 0.0 } else { a / xi }),
            ),
            WeightSpec::Radial { alpha, .. } => {
                let r2 = dot(x, x);
                DVector::from_iterator(n, x.iter().map(|xi| alpha * xi / r2))
            }
            WeightSpec::DunklProduct { roots, multiplicities } => {
                let mut g = DVector::zeros(n);
                for (r, k) in roots.iter().zip(multiplicities) {
                    if *k == 0.0 {
                        continue;
                    }
                    let c = 2.0 * k / dot(r, x);
                    for i in 0..n {
                        g[i] += c * r[i];
                    }
                }
                g
            }
            WeightSpec::GaussianTilt { s, .. } => DVector::from_iterator(n, x.iter().map(|xi| -s * xi)),
            WeightSpec::PartialProduct { inner, free_coords } => {
                let coords = Self::inner_coords(n, free_coords);
                let gi = inner.grad_log(&restrict(x, &coords));
                let mut g = DVector::zeros(n);
                for (i, &k) in coords.iter().enumerate() {
                    g[k] = gi[i];
                }
                g
            }
            WeightSpec::Custom(c) => (c.grad_log)(x),
        }
    }

    fn hess_log(&self, x: &[f64]) -> DMatrix<f64> {
        let n = x.len();
        match self {
            WeightSpec::Monomial { exponents } => DMatrix::from_diagonal(&DVector::from_iterator(
                n,
                exponents
                    .iter()
                    .zip(x)
                    .map(|(a, xi)| if *a == 0.0 { 0.0 } else { -a / (xi * xi) }),
            )),
            WeightSpec::Radial { alpha, .. } => {
                let r2 = dot(x, x);
                let mut h = DMatrix::identity(n, n) * (alpha / r2);
                for i in 0..n {
                    for j in 0..n {
                        h[(i, j)] -= 2.0 * alpha * x[i] * x[j] / (r2 * r2);
                    }
                }
                h
            }
            WeightSpec::DunklProduct { roots, multiplicities } => {
                let mut h = DMatrix::zeros(n, n);
                for (r, k) in roots.iter().zip(multiplicities) {
                    if *k == 0.0 {
                        continue;
                    }
                    let d = dot(r, x);
                    let c = -2.0 * k / (d * d);
                    for i in 0..n {
                        for j in 0..n {
                            h[(i, j)] += c * r[i] * r[j];
                        }
                    }
                }
                h
            }
            WeightSpec::GaussianTilt { s, .. } => DMatrix::identity(n, n) * (-s),
            WeightSpec::PartialProduct { inner, free_coords } => {
                let coords = Self::inner_coords(n, free_coords);
                let hi = inner.hess_log(&restrict(x, &coords));
                let mut h = DMatrix::zeros(n, n);
                for (i, &a) in coords.iter().enumerate() {
                    for (j, &b) in coords.iter().enumerate() {
                        h[(a, b)] = hi[(i, j)];
                    }
                }
                h
            }
            WeightSpec::Custom(c) => (c.hess_log)(x),
        }
    }

    /// Closed-form `K_w` where one exists. `Ok(None)` asks for sampling.
    fn analytic_curvature(&self) -> Result<Option<f64>> {
        match self {
            // Products of log-concave factors that are homogeneous: K_w = 0.
            WeightSpec::Monomial { .. } | WeightSpec::DunklProduct { .. } => Ok(Some(0.0)),
            WeightSpec::Radial { alpha, dim } => {
                if *alpha == 0.0 || *dim == 1 {
                    Ok(Some(0.0))
                } else {
                    // Tangential eigenvalue of -∇² log w is -alpha/|x|², unbounded below.
                    Err(Error::InadmissibleWeight(format!(
                        "|x|^{alpha} in dimension {dim} is not log-concave: -∇²log w has eigenvalue -alpha/|x|² on tangent directions"
                    )))
                }
            }
            WeightSpec::GaussianTilt { s, .. } => Ok(Some(*s)),
            // Free coordinates contribute zero rows and columns.
            WeightSpec::PartialProduct { inner, .. } => Ok(inner.analytic_curvature()?.map(|k| k.min(0.0))),
            WeightSpec::Custom(_) => Ok(None),
        }
    }
}

fn restrict(x: &[f64], coords: &[usize]) -> Vec<f64> {
    coords.iter().map(|&k| x[k]).collect()
}

/// How `K_w` was obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CurvatureCertificate {
    Analytic,
    Sampled {
        num_points: usize,
        min_eigenvalue_found: f64,
        argmin: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curvature {
    pub k: f64,
    pub certificate: CurvatureCertificate,
}

/// Point cloud used by sample-based curvature certification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureSampler {
    pub num_points: usize,
    pub radius: f64,
    pub descent_starts: usize,
}

impl Default for CurvatureSampler {
    fn default() -> Self {
        Self {
            num_points: 100_000,
            radius: 10.0,
            descent_starts: 10,
        }
    }
}

/// An admissible (or explicitly rejected) weight.
#[derive(Debug, Clone)]
pub struct Weight {
    spec: WeightSpec,
    dim: usize,
    degree: Option<f64>,
    support: Cone,
    curvature: std::result::Result<Curvature, Error>,
}

impl Weight {
    pub fn new(spec: WeightSpec) -> Result<Self> {
        Self::with_sampler(spec, CurvatureSampler::default())
    }

    pub fn with_sampler(spec: WeightSpec, sampler: CurvatureSampler) -> Result<Self> {
        spec.validate()?;
        let dim = spec.dim();
        let degree = spec.degree();
        let support = spec.support();
        let curvature = curvature_lower_bound(&spec, &support, &sampler);
        Ok(Self {
            spec,
            dim,
            degree,
            support,
            curvature,
        })
    }

    pub fn unit(dim: usize) -> Self {
        Self::new(WeightSpec::unit(dim)).expect("unit weight is valid")
    }

    pub fn spec(&self) -> &WeightSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> Option<f64> {
        self.degree
    }

    pub fn require_degree(&self) -> Result<f64> {
        self.degree.ok_or(Error::NotHomogeneous)
    }

    /// The natural support `{w > 0}`.
    pub fn support(&self) -> &Cone {
        &self.support
    }

    /// `K_w`, or the reason the weight fails the curvature condition.
    pub fn curvature(&self) -> Result<f64> {
        self.curvature.as_ref().map(|c| c.k).map_err(Clone::clone)
    }

    pub fn curvature_certificate(&self) -> Result<&Curvature> {
        self.curvature.as_ref().map_err(Clone::clone)
    }

    /// Homogeneous with `K_w = 0` and `-∇² log w ⪰ 0`.
    pub fn is_log_concave_homogeneous(&self) -> bool {
        self.degree.is_some() && matches!(self.curvature(), Ok(k) if k == 0.0)
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Domain(format!(
                "point has dim {}, weight has dim {}",
                x.len(),
                self.dim
            )));
        }
        Ok(())
    }

    /// `w(x)` on the closure of the support.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        if !self.support.contains_closure(x) {
            return Err(Error::Domain(format!("point {x:?} outside the support of the weight")));
        }
        if self.spec.on_zero_set(x) {
            return Ok(0.0);
        }
        Ok(self.spec.log_value(x).exp())
    }

    /// `w(x)` without domain checks, for hot loops over known-interior nodes.
    pub(crate) fn eval_unchecked(&self, x: &[f64]) -> f64 {
        if self.spec.on_zero_set(x) {
            0.0
        } else {
            self.spec.log_value(x).exp()
        }
    }

    fn check_interior(&self, x: &[f64]) -> Result<()> {
        self.check_dim(x)?;
        if !self.support.contains_closure(x) {
            return Err(Error::Domain(format!("point {x:?} outside the support of the weight")));
        }
        if self.spec.on_zero_set(x) {
            return Err(Error::Singularity(format!("log w is -inf at {x:?}")));
        }
        Ok(())
    }

    pub fn grad_log(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.check_interior(x)?;
        Ok(self.spec.grad_log(x))
    }

    pub fn hess_log(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_interior(x)?;
        Ok(self.spec.hess_log(x))
    }

    pub(crate) fn grad_log_unchecked(&self, x: &[f64]) -> DVector<f64> {
        self.spec.grad_log(x)
    }

    /// `x·∇w(x) − α w(x)`; vanishes for homogeneous weights.
    pub fn euler_residual(&self, x: &[f64]) -> Result<f64> {
        let alpha = self.require_degree()?;
        let w = self.eval(x)?;
        let g = self.grad_log(x)?;
        let radial: f64 = x.iter().zip(g.iter()).map(|(a, b)| a * b).sum();
        Ok(w * (radial - alpha))
    }
}

/// `K_w` for a weight: analytic where available, otherwise the infimum of the
/// smallest eigenvalue of `-∇² log w` over a quasi-random interior sample,
/// refined by local descent from the worst points.
pub fn curvature_lower_bound(spec: &WeightSpec, support: &Cone, sampler: &CurvatureSampler) -> Result<Curvature> {
    if let Some(k) = spec.analytic_curvature()? {
        return admissible(Curvature {
            k,
            certificate: CurvatureCertificate::Analytic,
        });
    }
    let n = spec.dim();
    let min_eig = |x: &[f64]| -> f64 {
        if !support.is_interior(x) || spec.on_zero_set(x) {
            return f64::INFINITY;
        }
        let h = -spec.hess_log(x);
        let e = SymmetricEigen::new(h).eigenvalues;
        e.iter().copied().fold(f64::INFINITY, f64::min)
    };

    let mut scored: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut idx = 0usize;
    while scored.len() < sampler.num_points && idx < 64 * sampler.num_points {
        idx += 1;
        let x: Vec<f64> = (0..n)
            .map(|d| sampler.radius * (2.0 * halton(idx, PRIMES[d % PRIMES.len()]) - 1.0))
            .collect();
        if dot(&x, &x) > sampler.radius * sampler.radius {
            continue;
        }
        let v = min_eig(&x);
        if v.is_finite() {
            scored.push((v, x));
        }
    }
    if scored.is_empty() {
        return Err(Error::InadmissibleWeight("no interior sample point found".into()));
    }
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best = scored[0].clone();
    for (v0, x0) in scored.iter().take(sampler.descent_starts) {
        let (v, x) = compass_descent(&min_eig, x0.clone(), *v0, sampler.radius);
        if v < best.0 {
            best = (v, x);
        }
    }
    admissible(Curvature {
        k: best.0,
        certificate: CurvatureCertificate::Sampled {
            num_points: scored.len(),
            min_eigenvalue_found: best.0,
            argmin: best.1,
        },
    })
}

fn admissible(c: Curvature) -> Result<Curvature> {
    if c.k <= -1.0 {
        Err(Error::InadmissibleWeight(format!("curvature bound {} <= -1", c.k)))
    } else {
        Ok(c)
    }
}

const PRIMES: [usize; 6] = [2, 3, 5, 7, 11, 13];

fn halton(mut i: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

fn compass_descent(obj: &impl Fn(&[f64]) -> f64, mut x: Vec<f64>, mut v: f64, radius: f64) -> (f64, Vec<f64>) {
    let n = x.len();
    let mut step = 0.25;
    let mut iters = 0;
    while step > 1e-10 && iters < 20_000 {
        iters += 1;
        let mut improved = false;
        for d in 0..n {
            for sign in [1.0, -1.0] {
                let mut y = x.clone();
                y[d] += sign * step;
                if dot(&y, &y) > radius * radius {
                    continue;
                }
                let vy = obj(&y);
                if vy < v {
                    v = vy;
                    x = y;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (v, x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn monomial(a: &[f64]) -> Weight {
        Weight::new(WeightSpec::Monomial { exponents: a.to_vec() }).unwrap()
    }

    #[test]
    fn monomial_values() {
        let w = monomial(&[1.0, 2.0]);
        assert_eq!(w.eval(&[1.0, 1.0]).unwrap(), 1.0);
        assert!((w.eval(&[2.0, 3.0]).unwrap() - 18.0).abs() < 1e-12);
        assert_eq!(w.eval(&[0.0, 3.0]).unwrap(), 0.0);
        assert!(matches!(w.eval(&[-1.0, 3.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn tilt_at_origin() {
        let w = Weight::new(WeightSpec::GaussianTilt { s: -0.5, dim: 2 }).unwrap();
        assert_eq!(w.eval(&[0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(w.curvature().unwrap(), -0.5);
        let h = w.hess_log(&[0.3, -2.0]).unwrap();
        assert_eq!(h, DMatrix::identity(2, 2) * 0.5);
    }

    #[test]
    fn monomial_log_derivatives() {
        let w = monomial(&[1.0, 2.0]);
        let g = w.grad_log(&[1.0, 1.0]).unwrap();
        assert_eq!(g.as_slice(), &[1.0, 2.0]);
        let h = w.hess_log(&[1.0, 1.0]).unwrap();
        assert_eq!(h, DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -2.0])));
        assert!(matches!(w.grad_log(&[0.0, 1.0]), Err(Error::Singularity(_))));
    }

    #[test]
    fn radial_gradient() {
        let w = Weight::new(WeightSpec::Radial { alpha: 1.5, dim: 3 }).unwrap();
        let x = [0.3, -1.2, 2.0];
        let r2 = dot(&x, &x);
        let g = w.grad_log(&x).unwrap();
        for i in 0..3 {
            assert!((g[i] - 1.5 * x[i] / r2).abs() < 1e-15);
        }
    }

    #[test]
    fn homogeneous_curvature_is_zero() {
        assert_eq!(monomial(&[0.5, 3.0]).curvature().unwrap(), 0.0);
        let d = Weight::new(WeightSpec::DunklProduct {
            roots: vec![vec![std::f64::consts::FRAC_1_SQRT_2, -std::f64::consts::FRAC_1_SQRT_2]],
            multiplicities: vec![1.0],
        })
        .unwrap();
        assert_eq!(d.curvature().unwrap(), 0.0);
        assert_eq!(d.degree(), Some(2.0));
    }

    #[test]
    fn radial_above_one_dimension_is_not_log_concave() {
        let w = Weight::new(WeightSpec::Radial { alpha: 1.0, dim: 2 }).unwrap();
        assert!(matches!(w.curvature(), Err(Error::InadmissibleWeight(_))));
        // the tangential eigenvalue really is negative
        let h = -w.hess_log(&[1.0, 0.0]).unwrap();
        assert!((h[(1, 1)] + 1.0).abs() < 1e-14);
        let w1 = Weight::new(WeightSpec::Radial { alpha: 1.0, dim: 1 }).unwrap();
        assert_eq!(w1.curvature().unwrap(), 0.0);
    }

    #[test]
    fn euler_identity() {
        let w = monomial(&[1.0, 2.0]);
        assert!(w.euler_residual(&[2.0, 3.0]).unwrap().abs() < 1e-12);
        let r = Weight::new(WeightSpec::Radial { alpha: 1.5, dim: 2 }).unwrap();
        assert!(r.euler_residual(&[0.7, -0.2]).unwrap().abs() < 1e-14);
        let t = Weight::new(WeightSpec::GaussianTilt { s: 0.3, dim: 2 }).unwrap();
        assert_eq!(t.euler_residual(&[1.0, 1.0]), Err(Error::NotHomogeneous));
    }

    #[test]
    fn tilt_below_minus_one_rejected() {
        assert!(matches!(
            Weight::new(WeightSpec::GaussianTilt { s: -1.0, dim: 1 }),
            Err(Error::InadmissibleWeight(_))
        ));
    }

    #[test]
    fn partial_product_layout() {
        let w = Weight::new(WeightSpec::PartialProduct {
            inner: Box::new(WeightSpec::Monomial { exponents: vec![1.5] }),
            free_coords: vec![1],
        })
        .unwrap();
        assert_eq!(w.dim(), 2);
        assert_eq!(w.degree(), Some(1.5));
        assert_eq!(
            w.support(),
            &Cone::Product {
                factors: vec![Cone::Halfspace { normal: vec![1.0, 0.0] }]
            }
        );
        assert_eq!(w.support().orthant_axes(), Some(vec![0]));
        assert!((w.eval(&[4.0, -7.0]).unwrap() - 8.0).abs() < 1e-12);
        let h = w.hess_log(&[2.0, 5.0]).unwrap();
        assert_eq!(h[(1, 1)], 0.0);
        assert_eq!(h[(0, 1)], 0.0);
        assert!((h[(0, 0)] + 1.5 / 4.0).abs() < 1e-15);
    }

    #[test]
    fn partial_curvature_takes_min_with_zero() {
        let inner = WeightSpec::GaussianTilt { s: -0.5, dim: 1 };
        let w = Weight::new(WeightSpec::PartialProduct {
            inner: Box::new(inner),
            free_coords: vec![0],
        })
        .unwrap();
        assert_eq!(w.curvature().unwrap(), -0.5);
        let inner = WeightSpec::GaussianTilt { s: 0.5, dim: 1 };
        let w = Weight::new(WeightSpec::PartialProduct {
            inner: Box::new(inner),
            free_coords: vec![0],
        })
        .unwrap();
        assert_eq!(w.curvature().unwrap(), 0.0);
    }

    fn quartic() -> CustomWeight {
        // w = exp(-|x|^4)
        CustomWeight {
            name: "exp(-|x|^4)".into(),
            dim: 2,
            log_weight: Arc::new(|x| -dot(x, x).powi(2)),
            grad_log: Arc::new(|x| {
                let r2 = dot(x, x);
                DVector::from_iterator(x.len(), x.iter().map(|xi| -4.0 * r2 * xi))
            }),
            hess_log: Arc::new(|x| {
                let n = x.len();
                let r2 = dot(x, x);
                let mut h = DMatrix::identity(n, n) * (-4.0 * r2);
                for i in 0..n {
                    for j in 0..n {
                        h[(i, j)] -= 8.0 * x[i] * x[j];
                    }
                }
                h
            }),
            degree: None,
            proposal_scale: None,
        }
    }

    #[test]
    fn custom_quartic_curvature_is_zero_in_the_limit() {
        let sampler = CurvatureSampler {
            num_points: 20_000,
            ..Default::default()
        };
        let w = Weight::with_sampler(WeightSpec::Custom(quartic()), sampler).unwrap();
        let c = w.curvature_certificate().unwrap();
        assert!(c.k >= 0.0 && c.k < 1e-6, "k = {}", c.k);
        match &c.certificate {
            CurvatureCertificate::Sampled { num_points, argmin, .. } => {
                assert!(*num_points > 10_000);
                assert!(dot(argmin, argmin).sqrt() < 1e-3);
            }
            other => panic!("expected sampled certificate, got {other:?}"),
        }
    }

    #[test]
    fn custom_inadmissible_weight() {
        // w = exp(+|x|^2) has -∇² log w = -2 I
        let c = CustomWeight {
            name: "exp(|x|^2)".into(),
            dim: 1,
            log_weight: Arc::new(|x| x[0] * x[0]),
            grad_log: Arc::new(|x| DVector::from_vec(vec![2.0 * x[0]])),
            hess_log: Arc::new(|_| DMatrix::from_element(1, 1, 2.0)),
            degree: None,
            proposal_scale: None,
        };
        let sampler = CurvatureSampler {
            num_points: 1000,
            ..Default::default()
        };
        let w = Weight::with_sampler(WeightSpec::Custom(c), sampler).unwrap();
        assert!(matches!(w.curvature(), Err(Error::InadmissibleWeight(_))));
    }

    #[test]
    fn spec_roundtrips_through_json() {
        let spec = WeightSpec::PartialProduct {
            inner: Box::new(WeightSpec::Monomial { exponents: vec![1.5] }),
            free_coords: vec![1],
        };
        let s = serde_json::to_string(&spec).unwrap();
        assert_eq!(
            s,
            r#"{"kind":"partial_product","inner":{"kind":"monomial","exponents":[1.5]},"free_coords":[1]}"#
        );
        let back: WeightSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back.dim(), 2);
    }
}
