//! Weighted Gaussian measures `μ_{w,λ}` and the weighted Lebesgue measure `w dx`.

use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::rule::{Plan, QuadratureRule, QuadratureTarget, RuleKind};
use crate::cone::{dot, Cone};
use crate::error::{Error, Result};
use crate::weight::{Weight, WeightSpec};

/// Growth class of an integrand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Decay {
    /// Bounded by a polynomial times `e^{-rate|x|²/2}`, `rate > 0`.
    Gaussian {
        rate: f64,
    },
    Polynomial,
    /// At most `e^{b|x|}` growth.
    Exponential,
    None,
}

impl Decay {
    pub fn gaussian_rate(&self) -> Option<f64> {
        match self {
            Decay::Gaussian { rate } if *rate > 0.0 => Some(*rate),
            _ => None,
        }
    }

    /// Decay of a product of two integrands.
    pub fn times(self, other: Decay) -> Decay {
        match (self, other) {
            (Decay::Gaussian { rate: a }, Decay::Gaussian { rate: b }) => Decay::Gaussian { rate: a + b },
            (Decay::Gaussian { rate }, Decay::Polynomial) | (Decay::Polynomial, Decay::Gaussian { rate }) => {
                Decay::Gaussian { rate }
            }
            (Decay::Gaussian { rate }, Decay::Exponential) | (Decay::Exponential, Decay::Gaussian { rate }) => {
                Decay::Gaussian { rate }
            }
            (Decay::Polynomial, Decay::Polynomial) => Decay::Polynomial,
            (Decay::None, _) | (_, Decay::None) => Decay::None,
            _ => Decay::Exponential,
        }
    }

    /// Decay of a sum.
    pub fn plus(self, other: Decay) -> Decay {
        match (self, other) {
            (Decay::Gaussian { rate: a }, Decay::Gaussian { rate: b }) => Decay::Gaussian { rate: a.min(b) },
            (Decay::None, _) | (_, Decay::None) => Decay::None,
            (Decay::Exponential, _) | (_, Decay::Exponential) => Decay::Exponential,
            _ => Decay::Polynomial,
        }
    }
}

/// Integral value and an error estimate (companion-rule difference for
/// deterministic rules, standard error for Monte Carlo).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
}

type RuleCache = Vec<(u64, Arc<QuadratureRule>)>;
const CACHE_LIMIT: usize = 24;

/// `μ_{w,λ}` when `scale = Some(λ)`, otherwise the unnormalized `w dx`.
#[derive(Debug, Clone)]
pub struct Measure {
    weight: Weight,
    cone: Cone,
    scale: Option<f64>,
    target: QuadratureTarget,
    plan: Plan,
    base: Option<Arc<QuadratureRule>>,
    cache: Arc<Mutex<RuleCache>>,
}

impl Measure {
    pub fn new(weight: Weight, cone: Cone, scale: Option<f64>, target: QuadratureTarget) -> Result<Self> {
        cone.validate()?;
        if cone.dim() != weight.dim() {
            return Err(Error::Config(format!(
                "cone dim {} differs from weight dim {}",
                cone.dim(),
                weight.dim()
            )));
        }
        if !cone.is_subcone_of(weight.support()) {
            return Err(Error::Config(
                "cone is not contained in the support of the weight".into(),
            ));
        }
        if let Some(l) = scale {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::Parameter(format!("gaussian scale must be positive, got {l}")));
            }
        }
        let plan = Plan::new(&weight, &cone, &target)?;
        let mut m = Self {
            weight,
            cone,
            scale,
            target,
            plan,
            base: None,
            cache: Arc::new(Mutex::new(Vec::new())),
        };
        if let Some(l) = scale {
            let base = m.rule_at(1.0 / (l * l))?;
            let z = base.mass();
            if !(z > 0.0 && z.is_finite()) {
                return Err(Error::IntegrationFailure(format!("normalizing integral is {z}")));
            }
            m.base = Some(base);
        }
        Ok(m)
    }

    /// `μ_w` (scale 1) on `cone`.
    pub fn gaussian(weight: Weight, cone: Cone, target: QuadratureTarget) -> Result<Self> {
        Self::new(weight, cone, Some(1.0), target)
    }

    /// `dν = w dx`.
    pub fn lebesgue(weight: Weight, cone: Cone, target: QuadratureTarget) -> Result<Self> {
        Self::new(weight, cone, None, target)
    }

    /// Same weight, cone and rule settings at another Gaussian scale.
    pub fn with_scale(&self, scale: Option<f64>) -> Result<Self> {
        Self::new(self.weight.clone(), self.cone.clone(), scale, self.target)
    }

    pub fn weight(&self) -> &Weight {
        &self.weight
    }

    pub fn cone(&self) -> &Cone {
        &self.cone
    }

    pub fn dim(&self) -> usize {
        self.weight.dim()
    }

    pub fn scale(&self) -> Option<f64> {
        self.scale
    }

    pub fn target(&self) -> &QuadratureTarget {
        &self.target
    }

    pub fn is_normalized(&self) -> bool {
        self.scale.is_some()
    }

    pub fn is_deterministic(&self) -> bool {
        self.plan.is_deterministic()
    }

    /// Rule generating the measure (`rate = 1/λ²`), or the `λ = 1` rule for `w dx`.
    pub fn rule(&self) -> Result<Arc<QuadratureRule>> {
        match &self.base {
            Some(b) => Ok(b.clone()),
            None => self.rule_at(1.0),
        }
    }

    /// `C_{w,λ} = (∫_Σ w e^{-|x|²/(2λ²)} dx)^{-1}`.
    pub fn normalization(&self) -> Result<f64> {
        let base = self
            .base
            .as_ref()
            .ok_or_else(|| Error::Contract("w dx has no normalization".into()))?;
        Ok(1.0 / base.mass())
    }

    /// True when the reflection `x_k → -x_k` preserves both `w` and the cone,
    /// so integrals of integrands odd in `x_k` vanish.
    pub fn axis_symmetric(&self, k: usize) -> bool {
        if self.cone.constraints().iter().any(|v| v[k] != 0.0) {
            return false;
        }
        weight_even_in(self.weight.spec(), k)
    }

    pub(crate) fn rule_at(&self, rate: f64) -> Result<Arc<QuadratureRule>> {
        let key = rate.to_bits();
        {
            let cache = self.cache.lock().expect("rule cache poisoned");
            if let Some((_, r)) = cache.iter().find(|(k, _)| *k == key) {
                return Ok(r.clone());
            }
        }
        let rule = Arc::new(self.plan.build(&self.weight, &self.cone, rate)?);
        let mut cache = self.cache.lock().expect("rule cache poisoned");
        if cache.len() >= CACHE_LIMIT {
            cache.remove(0);
        }
        cache.push((key, rule.clone()));
        Ok(rule)
    }

    fn base_rate(&self) -> f64 {
        self.scale.map_or(0.0, |l| 1.0 / (l * l))
    }

    /// Rule and folding rate for an integrand with the given decay.
    fn select(&self, decay: Decay) -> Result<(f64, f64)> {
        let r0 = self.base_rate();
        match (self.scale, decay.gaussian_rate()) {
            (Some(_), Some(c)) if self.is_deterministic() => Ok((r0 + c, c)),
            (Some(_), _) => Ok((r0, 0.0)),
            (None, Some(c)) => Ok((c, c)),
            (None, None) => Err(Error::DecayContract(
                "integration against w dx requires an integrand with Gaussian decay".into(),
            )),
        }
    }

    fn sums(
        rule: &QuadratureRule,
        fold: f64,
        g: &mut dyn FnMut(&[f64], &mut [f64]),
        out: &mut [f64],
        sq: Option<&mut [f64]>,
    ) -> Result<()> {
        let m = out.len();
        let mut buf = vec![0.0; m];
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut sq = sq;
        if let Some(s) = sq.as_deref_mut() {
            s.iter_mut().for_each(|v| *v = 0.0);
        }
        for i in 0..rule.len() {
            let x = rule.node(i);
            g(x, &mut buf);
            let f = if fold != 0.0 {
                (0.5 * fold * dot(x, x)).exp()
            } else {
                1.0
            };
            for j in 0..m {
                let v = buf[j] * f;
                if !v.is_finite() {
                    return Err(Error::Evaluation(format!("integrand is {} at node {x:?}", buf[j])));
                }
                out[j] += rule.weights[i] * v;
                if let Some(s) = sq.as_deref_mut() {
                    s[j] += rule.weights[i] * rule.weights[i] * v * v;
                }
            }
        }
        Ok(())
    }

    fn run(
        &self,
        g: &mut dyn FnMut(&[f64], &mut [f64]),
        m: usize,
        decay: Decay,
        with_error: bool,
    ) -> Result<Vec<Integral>> {
        let (rate, fold) = self.select(decay)?;
        let rule = self.rule_at(rate)?;
        let mut s = vec![0.0; m];
        let mc = matches!(rule.kind, RuleKind::MonteCarlo { .. });
        let mut sq = vec![0.0; m];
        Self::sums(&rule, fold, g, &mut s, if mc { Some(&mut sq) } else { None })?;
        let z = match &self.base {
            Some(b) if fold != 0.0 || !mc => b.mass(),
            Some(_) => rule.mass(),
            None => 1.0,
        };
        let mut out: Vec<Integral> = s
            .iter()
            .map(|v| Integral {
                value: v / z,
                error: 0.0,
            })
            .collect();
        if mc {
            let samples = match rule.kind {
                RuleKind::MonteCarlo { samples, .. } => samples as f64,
                _ => unreachable!(),
            };
            for j in 0..m {
                out[j].error = if self.scale.is_some() {
                    // self-normalized estimator: Σ ŵ² (g − mean)²
                    let mean = out[j].value;
                    let mut acc = 0.0;
                    let mut buf = vec![0.0; m];
                    for i in 0..rule.len() {
                        g(rule.node(i), &mut buf);
                        let wn = rule.weights[i] / z;
                        acc += wn * wn * (buf[j] - mean) * (buf[j] - mean);
                    }
                    acc.sqrt()
                } else {
                    let mean = s[j];
                    let second = sq[j] * samples;
                    ((second - mean * mean).max(0.0) / samples).sqrt()
                };
            }
        } else if with_error {
            if let Some(comp) = self.plan.companion(&self.weight, &self.cone, rate)? {
                let mut c = vec![0.0; m];
                Self::sums(&comp, fold, g, &mut c, None)?;
                let zc = match &self.base {
                    Some(_) if fold == 0.0 => comp.mass(),
                    Some(b) => b.mass(),
                    None => 1.0,
                };
                for j in 0..m {
                    out[j].error = (out[j].value - c[j] / zc).abs();
                }
            }
        }
        Ok(out)
    }

    /// `∫ g dμ_{w,λ}` (normalized) or `∫ g w dx`, with an error estimate.
    pub fn integrate(&self, g: &dyn Fn(&[f64]) -> f64, decay: Decay) -> Result<Integral> {
        let mut h = |x: &[f64], o: &mut [f64]| o[0] = g(x);
        Ok(self.run(&mut h, 1, decay, true)?[0])
    }

    /// Value-only variant of [`Measure::integrate`].
    pub fn value(&self, g: &dyn Fn(&[f64]) -> f64, decay: Decay) -> Result<f64> {
        let mut h = |x: &[f64], o: &mut [f64]| o[0] = g(x);
        Ok(self.run(&mut h, 1, decay, false)?[0].value)
    }

    /// Several integrals sharing one pass over the nodes.
    pub fn values(&self, g: &dyn Fn(&[f64], &mut [f64]), m: usize, decay: Decay) -> Result<Vec<f64>> {
        let mut h = |x: &[f64], o: &mut [f64]| g(x, o);
        Ok(self
            .run(&mut h, m, decay, false)?
            .into_iter()
            .map(|i| i.value)
            .collect())
    }

    pub fn integrate_many(&self, g: &dyn Fn(&[f64], &mut [f64]), m: usize, decay: Decay) -> Result<Vec<Integral>> {
        let mut h = |x: &[f64], o: &mut [f64]| g(x, o);
        self.run(&mut h, m, decay, true)
    }

    /// Nodes of the generating rule with weights summing to one.
    pub fn probability_rule(&self) -> Result<(Arc<QuadratureRule>, Vec<f64>)> {
        let base = self
            .base
            .as_ref()
            .ok_or_else(|| Error::Contract("w dx is not a probability measure".into()))?;
        let z = base.mass();
        Ok((base.clone(), base.weights.iter().map(|w| w / z).collect()))
    }
}

fn weight_even_in(spec: &WeightSpec, k: usize) -> bool {
    match spec {
        WeightSpec::Monomial { .. } | WeightSpec::GaussianTilt { .. } | WeightSpec::Radial { .. } => true,
        WeightSpec::DunklProduct { roots, multiplicities } => roots
            .iter()
            .zip(multiplicities)
            .all(|(r, &m)| m == 0.0 || r.iter().enumerate().all(|(i, &v)| i == k || v == 0.0) || r[k] == 0.0),
        WeightSpec::PartialProduct { inner, free_coords } => {
            if free_coords.contains(&k) {
                return true;
            }
            let n = spec.dim();
            let pos = (0..n).filter(|i| !free_coords.contains(i)).position(|i| i == k);
            pos.is_some_and(|p| weight_even_in(inner, p))
        }
        WeightSpec::Custom(_) => false,
    }
}

/// `C_{w,λ}` for `weight` restricted to `cone`.
pub fn normalization_constant(weight: &Weight, cone: &Cone, scale: f64, target: QuadratureTarget) -> Result<f64> {
    Measure::new(weight.clone(), cone.clone(), Some(scale), target)?.normalization()
}

/// Second moments of a normalized measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecialMoments {
    /// `∫ |x|² dμ`.
    pub second_moment: f64,
    /// `∫ x_k² dμ` per axis.
    pub axis_moments: Vec<f64>,
}

pub fn special_moments(measure: &Measure) -> Result<SpecialMoments> {
    if !measure.is_normalized() {
        return Err(Error::Contract("special moments need a normalized measure".into()));
    }
    let n = measure.dim();
    let g = |x: &[f64], o: &mut [f64]| {
        for k in 0..n {
            o[k] = x[k] * x[k];
        }
    };
    let axis_moments = measure.values(&g, n, Decay::Polynomial)?;
    Ok(SpecialMoments {
        second_moment: axis_moments.iter().sum(),
        axis_moments,
    })
}
