//! Multivariate rules: tensor products of generalized Gauss–Hermite factors,
//! polar rules for radial weights, and seeded Monte Carlo.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::gauss::{base_rule, legendre};
use crate::cone::Cone;
use crate::error::{Error, Result};
use crate::weight::{Weight, WeightSpec};

pub const MAX_ORDER: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RuleKind {
    TensorGeneralizedHermite,
    Polar,
    MonteCarlo { seed: u64, samples: usize },
}

/// Approximates `∫_Σ g(x) w(x) e^{-rate|x|²/2} dx ≈ Σ weights[i] g(node_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub dim: usize,
    /// Row-major, `dim` coordinates per node.
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Points per axis (tensor, polar); 0 for Monte Carlo.
    pub order: usize,
    pub kind: RuleKind,
    pub rate: f64,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.dim..(i + 1) * self.dim]
    }

    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// One row per node: coordinates then weight.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for k in 0..self.dim {
            let _ = write!(s, "x{},", k + 1);
        }
        s.push_str("weight\n");
        for i in 0..self.len() {
            for x in self.node(i) {
                let _ = write!(s, "{x:.17e},");
            }
            let _ = writeln!(s, "{:.17e}", self.weights[i]);
        }
        s
    }
}

/// Requested accuracy for rule construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureTarget {
    /// Points per axis for tensor and polar rules; `None` picks a default by dimension.
    pub order: Option<usize>,
    pub mc_samples: usize,
    pub seed: u64,
}

impl Default for QuadratureTarget {
    fn default() -> Self {
        Self {
            order: None,
            mc_samples: 1_000_000,
            seed: 0,
        }
    }
}

impl QuadratureTarget {
    pub fn with_order(order: usize) -> Self {
        Self {
            order: Some(order),
            ..Self::default()
        }
    }

    pub fn monte_carlo(samples: usize, seed: u64) -> Self {
        Self {
            order: None,
            mc_samples: samples,
            seed,
        }
    }

    pub(crate) fn resolved_order(&self, dim: usize) -> usize {
        self.order.unwrap_or(match dim {
            0..=2 => 32,
            3 => 20,
            _ => 12,
        })
    }
}

/// One tensor factor `|t|^a e^{-(rate+tilt) t²/2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct AxisFactor {
    pub a: f64,
    pub tilt: f64,
    pub half: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Plan {
    Tensor { axes: Vec<AxisFactor>, order: usize },
    Polar { alpha: f64, dim: usize, order: usize },
    MonteCarlo { samples: usize, seed: u64 },
}

impl Plan {
    pub fn new(weight: &Weight, cone: &Cone, target: &QuadratureTarget) -> Result<Plan> {
        let n = weight.dim();
        if let Some(o) = target.order {
            if o > MAX_ORDER {
                return Err(Error::Resource(format!(
                    "order {o} exceeds the per-axis limit {MAX_ORDER}"
                )));
            }
            if o == 0 {
                return Err(Error::Parameter("quadrature order must be positive".into()));
            }
        }
        let order = target.resolved_order(n);
        if let (Some(factors), Some(half_axes)) = (axis_factors(weight.spec()), cone.orthant_axes()) {
            let axes = factors
                .into_iter()
                .enumerate()
                .map(|(k, (a, tilt))| AxisFactor {
                    a,
                    tilt,
                    half: half_axes.contains(&k),
                })
                .collect();
            return Ok(Plan::Tensor { axes, order });
        }
        if let WeightSpec::Radial { alpha, dim } = weight.spec() {
            if (*dim == 2 || *dim == 3) && !cone.has_boundary() {
                return Ok(Plan::Polar {
                    alpha: *alpha,
                    dim: *dim,
                    order,
                });
            }
        }
        if let WeightSpec::Custom(c) = weight.spec() {
            if c.proposal_scale.is_none() {
                return Err(Error::Unsupported(format!("custom weight '{}' has no sampler", c.name)));
            }
        }
        if target.mc_samples == 0 {
            return Err(Error::Parameter("Monte Carlo sample count must be positive".into()));
        }
        Ok(Plan::MonteCarlo {
            samples: target.mc_samples,
            seed: target.seed,
        })
    }

    pub fn is_deterministic(&self) -> bool {
        !matches!(self, Plan::MonteCarlo { .. })
    }

    /// Rule for `w e^{-rate|x|²/2}` on `cone`.
    pub fn build(&self, weight: &Weight, cone: &Cone, rate: f64) -> Result<QuadratureRule> {
        self.build_with_order(weight, cone, rate, None)
    }

    /// Coarser deterministic companion used for error estimates.
    pub fn companion(&self, weight: &Weight, cone: &Cone, rate: f64) -> Result<Option<QuadratureRule>> {
        match self {
            Plan::Tensor { order, .. } | Plan::Polar { order, .. } => {
                let o = ((3 * order).div_ceil(4)).max(4).min(*order);
                self.build_with_order(weight, cone, rate, Some(o)).map(Some)
            }
            Plan::MonteCarlo { .. } => Ok(None),
        }
    }

    fn build_with_order(
        &self,
        weight: &Weight,
        cone: &Cone,
        rate: f64,
        order: Option<usize>,
    ) -> Result<QuadratureRule> {
        match self {
            Plan::Tensor { axes, order: o } => tensor(axes, order.unwrap_or(*o), rate),
            Plan::Polar { alpha, dim, order: o } => polar(*alpha, *dim, order.unwrap_or(*o), rate),
            Plan::MonteCarlo { samples, seed } => monte_carlo(weight, cone, rate, *samples, *seed),
        }
    }
}

/// Per-axis `(a_k, tilt_k)` when the weight is `∏ |x_k|^{a_k} e^{-tilt_k x_k²/2}`.
fn axis_factors(spec: &WeightSpec) -> Option<Vec<(f64, f64)>> {
    match spec {
        WeightSpec::Monomial { exponents } => Some(exponents.iter().map(|&a| (a, 0.0)).collect()),
        WeightSpec::GaussianTilt { s, dim } => Some(vec![(0.0, *s); *dim]),
        WeightSpec::Radial { alpha, dim } => {
            if *dim == 1 {
                Some(vec![(*alpha, 0.0)])
            } else if *alpha == 0.0 {
                Some(vec![(0.0, 0.0); *dim])
            } else {
                None
            }
        }
        WeightSpec::DunklProduct { roots, multiplicities } => {
            let n = spec.dim();
            let mut out = vec![(0.0, 0.0); n];
            let mut used = vec![false; n];
            for (r, &k) in roots.iter().zip(multiplicities) {
                if k == 0.0 {
                    continue;
                }
                let nz: Vec<usize> = (0..n).filter(|&i| r[i] != 0.0).collect();
                if nz.len() != 1 || used[nz[0]] {
                    return None;
                }
                used[nz[0]] = true;
                out[nz[0]].0 = 2.0 * k;
            }
            Some(out)
        }
        WeightSpec::PartialProduct { inner, free_coords } => {
            let inner_f = axis_factors(inner)?;
            let n = spec.dim();
            let mut out = vec![(0.0, 0.0); n];
            let coords: Vec<usize> = (0..n).filter(|k| !free_coords.contains(k)).collect();
            for (i, &k) in coords.iter().enumerate() {
                out[k] = inner_f[i];
            }
            Some(out)
        }
        WeightSpec::Custom(_) => None,
    }
}

fn check_order(order: usize) -> Result<()> {
    if order > MAX_ORDER {
        return Err(Error::Resource(format!(
            "order {order} exceeds the per-axis limit {MAX_ORDER}"
        )));
    }
    Ok(())
}

fn tensor(axes: &[AxisFactor], order: usize, rate: f64) -> Result<QuadratureRule> {
    check_order(order)?;
    let n = axes.len();
    let mut factors = Vec::with_capacity(n);
    for f in axes {
        let r = rate + f.tilt;
        if r <= 0.0 || !r.is_finite() {
            return Err(Error::DecayContract(format!(
                "effective Gaussian rate {r} is not positive"
            )));
        }
        let base = base_rule(f.a, f.half, order);
        let s = r.sqrt();
        let scale = r.powf(-0.5 * (f.a + 1.0));
        let nodes: Vec<f64> = base.nodes.iter().map(|t| t / s).collect();
        let weights: Vec<f64> = base.weights.iter().map(|w| w * scale).collect();
        factors.push((nodes, weights));
    }
    let total: usize = factors.iter().map(|f| f.0.len()).product();
    let mut nodes = Vec::with_capacity(total * n);
    let mut weights = Vec::with_capacity(total);
    let mut idx = vec![0usize; n];
    for _ in 0..total {
        let mut w = 1.0;
        for k in 0..n {
            nodes.push(factors[k].0[idx[k]]);
            w *= factors[k].1[idx[k]];
        }
        weights.push(w);
        for k in (0..n).rev() {
            idx[k] += 1;
            if idx[k] < factors[k].0.len() {
                break;
            }
            idx[k] = 0;
        }
    }
    Ok(QuadratureRule {
        dim: n,
        nodes,
        weights,
        order,
        kind: RuleKind::TensorGeneralizedHermite,
        rate,
    })
}

fn polar(alpha: f64, dim: usize, order: usize, rate: f64) -> Result<QuadratureRule> {
    check_order(order)?;
    if rate <= 0.0 {
        return Err(Error::DecayContract(format!(
            "effective Gaussian rate {rate} is not positive"
        )));
    }
    let radial = base_rule(alpha + dim as f64 - 1.0, true, order);
    let s = rate.sqrt();
    let rscale = rate.powf(-0.5 * (alpha + dim as f64));
    let m = 2 * order;
    let dphi = 2.0 * std::f64::consts::PI / m as f64;
    let mut dirs: Vec<(Vec<f64>, f64)> = Vec::new();
    match dim {
        2 => {
            for j in 0..m {
                let phi = (j as f64 + 0.5) * dphi;
                dirs.push((vec![phi.cos(), phi.sin()], dphi));
            }
        }
        3 => {
            let leg = legendre(order);
            for (u, wu) in leg.nodes.iter().zip(&leg.weights) {
                let st = (1.0 - u * u).sqrt();
                for j in 0..m {
                    let phi = (j as f64 + 0.5) * dphi;
                    dirs.push((vec![st * phi.cos(), st * phi.sin(), *u], wu * dphi));
                }
            }
        }
        _ => return Err(Error::Unsupported(format!("polar rule in dimension {dim}"))),
    }
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for (rho, wr) in radial.nodes.iter().zip(&radial.weights) {
        let r = rho / s;
        for (d, wd) in &dirs {
            nodes.extend(d.iter().map(|c| c * r));
            weights.push(wr * rscale * wd);
        }
    }
    Ok(QuadratureRule {
        dim,
        nodes,
        weights,
        order,
        kind: RuleKind::Polar,
        rate,
    })
}

/// Standard normal draws for sample `index`; one ChaCha stream per index so
/// the result does not depend on evaluation order.
pub(crate) fn gaussian_sample(seed: u64, index: u64, out: &mut [f64]) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    for v in out.iter_mut() {
        *v = StandardNormal.sample(&mut rng);
    }
}

fn monte_carlo(weight: &Weight, cone: &Cone, rate: f64, samples: usize, seed: u64) -> Result<QuadratureRule> {
    if rate <= 0.0 {
        return Err(Error::DecayContract(format!(
            "effective Gaussian rate {rate} is not positive"
        )));
    }
    let n = weight.dim();
    let sigma = match weight.spec() {
        WeightSpec::Custom(c) => c.proposal_scale.unwrap_or(1.0) / rate.sqrt(),
        _ => 1.0 / rate.sqrt(),
    };
    let proposal_rate = 1.0 / (sigma * sigma);
    let norm = (2.0 * std::f64::consts::PI * sigma * sigma).powf(0.5 * n as f64) / samples as f64;
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    let mut x = vec![0.0; n];
    for i in 0..samples {
        gaussian_sample(seed, i as u64, &mut x);
        x.iter_mut().for_each(|v| *v *= sigma);
        if !cone.is_interior(&x) {
            continue;
        }
        let wx = weight.eval_unchecked(&x);
        if !(wx > 0.0) {
            continue;
        }
        let r2: f64 = x.iter().map(|v| v * v).sum();
        // importance ratio between the target Gaussian and the proposal
        let ratio = (-0.5 * (rate - proposal_rate) * r2).exp();
        nodes.extend_from_slice(&x);
        weights.push(wx * ratio * norm);
    }
    if weights.is_empty() {
        return Err(Error::IntegrationFailure(
            "no Monte Carlo sample fell inside the support".into(),
        ));
    }
    Ok(QuadratureRule {
        dim: n,
        nodes,
        weights,
        order: 0,
        kind: RuleKind::MonteCarlo { seed, samples },
        rate,
    })
}

/// Rule for `w e^{-|x|²/2}` on `cone` at the requested accuracy.
pub fn build_rule(weight: &Weight, cone: &Cone, target: &QuadratureTarget) -> Result<QuadratureRule> {
    Plan::new(weight, cone, target)?.build(weight, cone, 1.0)
}
