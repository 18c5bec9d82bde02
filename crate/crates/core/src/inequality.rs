//! Both sides of the Beckner, Poincaré, log-Sobolev and Euclidean log-Sobolev
//! inequalities, their stability refinements, and perturbative sharpness sweeps.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::calculus::admit;
use crate::cone::dot;
use crate::error::{Error, Result};
use crate::field::{Field, ScalarField};
use crate::functionals::{
    dirichlet_energy, entropy_of_power, entropy_of_square, hup_moments, integral, least_squares, lq_norm, variance,
};
use crate::quadrature::{Decay, Measure};

/// Default relative pass tolerance.
pub const DEFAULT_TOLERANCE: f64 = 1e-7;

/// How `lhs` and `rhs` are compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// `lhs ≤ rhs`: pass iff `deficit ≥ −tolerance`.
    Le,
    /// `lhs = rhs`: pass iff `|deficit| ≤ tolerance`.
    Eq,
}

/// One verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub theorem: String,
    pub field: Option<String>,
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub constant: f64,
    pub deficit: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub relation: Relation,
    /// Reported but not asserted; excluded from the overall verdict.
    pub informational: bool,
    pub note: Option<String>,
    pub diagnostics: BTreeMap<String, f64>,
}

impl InequalityCheck {
    /// `lhs ≤ rhs` with tolerance `rel·(1+|lhs|+|rhs|)`.
    pub fn new(theorem: &str, lhs: f64, rhs: f64, constant: f64, rel: f64) -> Result<Self> {
        Self::build(theorem, lhs, rhs, constant, rel, Relation::Le)
    }

    /// `lhs = rhs` with tolerance `rel·(1+|lhs|+|rhs|)`.
    pub fn identity(theorem: &str, lhs: f64, rhs: f64, rel: f64) -> Result<Self> {
        Self::build(theorem, lhs, rhs, 1.0, rel, Relation::Eq)
    }

    fn build(theorem: &str, lhs: f64, rhs: f64, constant: f64, rel: f64, relation: Relation) -> Result<Self> {
        if !(lhs.is_finite() && rhs.is_finite() && constant.is_finite()) {
            return Err(Error::Evaluation(format!(
                "{theorem}: lhs {lhs}, rhs {rhs}, constant {constant}"
            )));
        }
        let tolerance = rel * (1.0 + lhs.abs() + rhs.abs());
        let deficit = rhs - lhs;
        let pass = match relation {
            Relation::Le => deficit >= -tolerance,
            Relation::Eq => deficit.abs() <= tolerance,
        };
        Ok(Self {
            theorem: theorem.into(),
            field: None,
            p: None,
            q: None,
            lhs,
            rhs,
            constant,
            deficit,
            tolerance,
            pass,
            relation,
            informational: false,
            note: None,
            diagnostics: BTreeMap::new(),
        })
    }

    pub fn with_exponents(mut self, p: Option<f64>, q: Option<f64>) -> Self {
        self.p = p;
        self.q = q;
        self
    }

    pub fn with_field(mut self, label: impl Into<String>) -> Self {
        self.field = Some(label.into());
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn informational(mut self, note: impl Into<String>) -> Self {
        self.informational = true;
        self.note = Some(note.into());
        self
    }

    pub fn diag(mut self, key: &str, v: f64) -> Self {
        self.diagnostics.insert(key.into(), v);
        self
    }

    /// Counts toward the overall verdict and failed.
    pub fn is_failure(&self) -> bool {
        !self.pass && !self.informational
    }
}

/// Per-run knobs shared by all checkers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckOptions {
    /// Relative tolerance `τ`; checks use `τ·(1+|lhs|+|rhs|)`.
    pub tolerance: f64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            tolerance: DEFAULT_TOLERANCE,
        }
    }
}

const OUTSIDE_Q_RANGE: &str = "outside verified q-range (q < 2)";

fn prepare(mu: &Measure, f: &dyn ScalarField) -> Result<f64> {
    if !mu.is_normalized() {
        return Err(Error::Contract(
            "this inequality is stated for the probability measure μ_w".into(),
        ));
    }
    admit(f, mu.cone())?;
    Ok(1.0 + mu.weight().curvature()?)
}

fn check_q(q: f64) -> Result<()> {
    if q >= 1.0 && q.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("q must be ≥ 1, got {q}")))
    }
}

/// `(‖f‖_q² − ‖f‖_p²)/(q−p) ≤ (1/(1+K_w))(∫|∇f|^q)^{2/q}`.
pub fn check_beckner(
    mu: &Measure,
    f: &dyn ScalarField,
    p: f64,
    q: f64,
    opts: &CheckOptions,
) -> Result<InequalityCheck> {
    if !(p >= 1.0) || p >= q {
        return Err(Error::Parameter(format!("need 1 ≤ p < q, got p = {p}, q = {q}")));
    }
    check_q(q)?;
    let c = prepare(mu, f)?;
    let nq = lq_norm(mu, f, q)?.value;
    let np = lq_norm(mu, f, p)?.value;
    let e = dirichlet_energy(mu, f, q)?.value;
    let lhs = (nq * nq - np * np) / (q - p);
    let rhs = e.powf(2.0 / q) / c;
    let mut chk = InequalityCheck::new("beckner", lhs, rhs, 1.0 / c, opts.tolerance)?
        .with_exponents(Some(p), Some(q))
        .with_field(f.label())
        .diag("norm_q_sq", nq * nq)
        .diag("norm_p_sq", np * np)
        .diag("energy_q", e);
    if q < 2.0 {
        chk = chk.informational(OUTSIDE_Q_RANGE);
    }
    Ok(chk)
}

/// Strength of the Poincaré statement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoincareLevel {
    Basic,
    GradientStability,
    L2Stability,
}

/// Moments shared by the stability levels: `f̄`, `∫f x`, `∫x`, `Var f`, `∫|∇f|²`.
struct StabilityMoments {
    mean: f64,
    fx: Vec<f64>,
    x: Vec<f64>,
    var: f64,
    energy: f64,
}

fn stability_moments(mu: &Measure, f: &dyn ScalarField) -> Result<StabilityMoments> {
    let n = mu.dim();
    let mean = integral(mu, f)?.value;
    let decay = f.decay().plus(Decay::Polynomial);
    let v = mu.values(
        &|x: &[f64], o: &mut [f64]| {
            let fx = f.value(x);
            for k in 0..n {
                o[k] = fx * x[k];
                o[n + k] = x[k];
            }
        },
        2 * n,
        decay,
    )?;
    Ok(StabilityMoments {
        mean,
        fx: v[..n].to_vec(),
        x: v[n..].to_vec(),
        var: variance(mu, f)?.value,
        energy: dirichlet_energy(mu, f, 2.0)?.value,
    })
}

/// Poincaré inequality and its gradient and `L²` stability refinements.
pub fn check_poincare(
    mu: &Measure,
    f: &dyn ScalarField,
    q: f64,
    level: PoincareLevel,
    opts: &CheckOptions,
) -> Result<InequalityCheck> {
    check_q(q)?;
    if level != PoincareLevel::Basic && q != 2.0 {
        return Err(Error::Parameter(format!(
            "stability levels are stated for q = 2, got {q}"
        )));
    }
    let c = prepare(mu, f)?;
    match level {
        PoincareLevel::Basic => {
            let var = variance(mu, f)?.value;
            let e = dirichlet_energy(mu, f, q)?.value;
            let mut chk = InequalityCheck::new("poincare", var, e.powf(2.0 / q) / c, 1.0 / c, opts.tolerance)?
                .with_exponents(None, Some(q))
                .with_field(f.label())
                .diag("variance", var)
                .diag("energy_q", e);
            if q < 2.0 {
                chk = chk.informational(OUTSIDE_Q_RANGE);
            }
            Ok(chk)
        }
        PoincareLevel::GradientStability => {
            let s = stability_moments(mu, f)?;
            // m = ∫(f − f̄)x dμ
            let m: Vec<f64> = s.fx.iter().zip(&s.x).map(|(a, b)| a - s.mean * b).collect();
            let cm: Vec<f64> = m.iter().map(|v| c * v).collect();
            let half = 0.5
                * mu.value(
                    &|x: &[f64]| {
                        let g = f.gradient(x);
                        g.iter().zip(&cm).map(|(a, b)| (a - b).powi(2)).sum()
                    },
                    f.decay().plus(Decay::Polynomial),
                )?;
            let rhs = s.energy - c * s.var;
            let mut chk = InequalityCheck::new("poincare_gradient_stability", half, rhs, c, opts.tolerance)?
                .with_exponents(None, Some(2.0))
                .with_field(f.label())
                .diag("variance", s.var)
                .diag("energy", s.energy)
                .diag("mean", s.mean);
            for (k, v) in m.iter().enumerate() {
                chk = chk.diag(&format!("m_{k}"), *v);
            }
            Ok(chk)
        }
        PoincareLevel::L2Stability => {
            let s = stability_moments(mu, f)?;
            let fx_x = dot(&s.fx, &s.x);
            let x_x = dot(&s.x, &s.x);
            // Π = f − f̄ − c(∫fx)·x + c f̄ (∫x)·x − c f̄ |∫x|² + c (∫fx)·(∫x)
            let t_const = -c * s.mean * x_x + c * fx_x;
            let pi =
                |x: &[f64]| -> f64 { f.value(x) - s.mean - c * dot(&s.fx, x) + c * s.mean * dot(&s.x, x) + t_const };
            let pi_sq = mu.value(&|x: &[f64]| pi(x).powi(2), f.decay().plus(Decay::Polynomial))?;
            let lhs = 0.5 * c * pi_sq;
            let rhs = s.energy - c * s.var;
            let mut chk = InequalityCheck::new("poincare_l2_stability", lhs, rhs, c, opts.tolerance)?
                .with_exponents(None, Some(2.0))
                .with_field(f.label())
                .diag("pi_sq", pi_sq)
                .diag("term_mean", s.mean)
                .diag("term_c_mean_x_sq", c * s.mean * x_x)
                .diag("term_c_fx_dot_x", c * fx_x)
                .diag("variance", s.var)
                .diag("energy", s.energy);
            for k in 0..s.fx.len() {
                chk = chk.diag(&format!("fx_{k}"), s.fx[k]).diag(&format!("x_{k}"), s.x[k]);
            }
            Ok(chk)
        }
    }
}

/// Scale-dependent Poincaré strength.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleLevel {
    Basic,
    Improved,
}

/// Poincaré inequality for `μ_{w,λ}`. Basic:
/// `((1+K)/λ²)·inf_c∫|f−c|² ≤ ∫|∇f|²`. Improved:
/// `(1+K)·inf_c∫|f−c|² + ((1+K)/2)·inf_{c,d}∫|f−c−d·x|² ≤ λ²∫|∇f|²`,
/// all integrals against `μ_{w,λ}`; infima by least squares.
pub fn check_scale_poincare(
    mu: &Measure,
    f: &dyn ScalarField,
    lambda: f64,
    level: ScaleLevel,
    opts: &CheckOptions,
) -> Result<InequalityCheck> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Parameter(format!("λ must be positive, got {lambda}")));
    }
    let ml = mu.with_scale(Some(lambda))?;
    let c = prepare(&ml, f)?;
    let n = ml.dim();
    let var = variance(&ml, f)?.value;
    let e = dirichlet_energy(&ml, f, 2.0)?.value;
    let l2 = lambda * lambda;
    match level {
        ScaleLevel::Basic => Ok(
            InequalityCheck::new("scale_poincare", c * var / l2, e, c / l2, opts.tolerance)?
                .with_exponents(None, Some(2.0))
                .with_field(f.label())
                .diag("lambda", lambda)
                .diag("variance", var)
                .diag("energy", e),
        ),
        ScaleLevel::Improved => {
            let basis = |x: &[f64], o: &mut [f64]| {
                o[0] = 1.0;
                o[1..].copy_from_slice(x);
            };
            let ls = least_squares(
                &ml,
                &|x: &[f64]| f.value(x),
                &basis,
                n + 1,
                f.decay().plus(Decay::Polynomial),
            )?;
            let lhs = c * var + 0.5 * c * ls.residual_sq;
            let mut chk = InequalityCheck::new("scale_poincare_improved", lhs, l2 * e, c, opts.tolerance)?
                .with_exponents(None, Some(2.0))
                .with_field(f.label())
                .diag("lambda", lambda)
                .diag("inf_c", var)
                .diag("inf_cd", ls.residual_sq)
                .diag("energy", e);
            for (k, v) in ls.coefficients.iter().enumerate() {
                chk = chk.diag(&format!("affine_coef_{k}"), *v);
            }
            Ok(chk)
        }
    }
}

/// Log-Sobolev inequality. At `q = 2`: `Ent(f²) ≤ (2/(1+K))∫|∇f|²`.
/// Otherwise `(2/q²)(∫|f|^q)^{2/q−1}Ent(|f|^q) ≤ (1/(1+K))(∫|∇f|^q)^{2/q}`.
pub fn check_lsi(mu: &Measure, f: &dyn ScalarField, q: f64, opts: &CheckOptions) -> Result<InequalityCheck> {
    check_q(q)?;
    let c = prepare(mu, f)?;
    let mass = lq_norm(mu, f, q)?.value.powf(q);
    if !(mass > 0.0) {
        return Err(Error::DegenerateInput("log-Sobolev check of the zero field".into()));
    }
    let e = dirichlet_energy(mu, f, q)?.value;
    if q == 2.0 {
        let ent = entropy_of_square(mu, f)?.value;
        return Ok(InequalityCheck::new("lsi", ent, 2.0 * e / c, 2.0 / c, opts.tolerance)?
            .with_exponents(None, Some(q))
            .with_field(f.label())
            .diag("entropy", ent)
            .diag("energy", e)
            .diag("mass", mass));
    }
    let ent = entropy_of_power(mu, f, q)?.value;
    let lhs = 2.0 / (q * q) * mass.powf(2.0 / q - 1.0) * ent;
    let mut chk = InequalityCheck::new("lsi", lhs, e.powf(2.0 / q) / c, 1.0 / c, opts.tolerance)?
        .with_exponents(None, Some(q))
        .with_field(f.label())
        .diag("entropy", ent)
        .diag("energy_q", e)
        .diag("mass", mass);
    if q < 2.0 {
        chk = chk.informational(OUTSIDE_Q_RANGE);
    }
    Ok(chk)
}

/// `C_LSIH = 4·C_w^{2/(n+α)} / (e(n+α))`.
pub fn euclidean_lsi_constant(c_w: f64, n_alpha: f64) -> f64 {
    4.0 * c_w.powf(2.0 / n_alpha) / (std::f64::consts::E * n_alpha)
}

struct Homogeneous {
    n_alpha: f64,
    c_w: f64,
}

fn log_concave_homogeneous(m: &Measure) -> Result<Homogeneous> {
    let w = m.weight();
    if !w.is_log_concave_homogeneous() {
        return Err(Error::Contract(
            "the Euclidean log-Sobolev inequality needs a log-concave homogeneous weight".into(),
        ));
    }
    let alpha = w.require_degree()?;
    let c_w = match m.scale() {
        Some(1.0) => m.normalization()?,
        _ => m.with_scale(Some(1.0))?.normalization()?,
    };
    Ok(Homogeneous {
        n_alpha: m.dim() as f64 + alpha,
        c_w,
    })
}

/// `Ent_ν(f²) ≤ ((n+α)/2)·∫f²·log(C_LSIH·∫|∇f|²/∫f²)` on `dν = w dx`.
pub fn check_euclidean_lsi(nu: &Measure, f: &dyn ScalarField, opts: &CheckOptions) -> Result<InequalityCheck> {
    if nu.is_normalized() {
        return Err(Error::Contract(
            "the Euclidean log-Sobolev inequality is stated for w dx".into(),
        ));
    }
    let h = log_concave_homogeneous(nu)?;
    admit(f, nu.cone())?;
    let m = hup_moments(nu, f)?;
    let ent = entropy_of_square(nu, f)?.value;
    let k = euclidean_lsi_constant(h.c_w, h.n_alpha);
    let rhs = 0.5 * h.n_alpha * m.b * (k * m.a / m.b).ln();
    Ok(InequalityCheck::new("euclidean_lsi", ent, rhs, k, opts.tolerance)?
        .with_field(f.label())
        .diag("c_w", h.c_w)
        .diag("n_plus_alpha", h.n_alpha)
        .diag("energy", m.a)
        .diag("mass", m.b))
}

/// Bookkeeping of the transform `f = F·√C_w·e^{−|x|²/4}` between the Gaussian
/// and the Euclidean log-Sobolev inequalities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LsiEquivalence {
    /// `Ent_μ(F²)` vs `Ent_ν(f²) − ∫f² log h² dν`.
    pub forward_entropy_residual: f64,
    /// `∫|∇F|²dμ` vs `∫|∇f|² − ((n+α)/2)∫f² + ¼∫|x|²f²`.
    pub forward_energy_residual: f64,
    /// `∫f² log h² dν` vs `B log C_w − D/2`.
    pub log_term_residual: f64,
    /// The `log t ≤ st − log s − 1` assembly vs its closed form, and the mapped
    /// inequality vs `2∫|∇F|²dμ`.
    pub backward_residual: f64,
    /// Coefficient of `∫|x|²f²dν` after assembly; exactly zero.
    pub d_coefficient: f64,
    pub checks: Vec<InequalityCheck>,
}

impl LsiEquivalence {
    pub fn forward_residual(&self) -> f64 {
        self.forward_entropy_residual
            .max(self.forward_energy_residual)
            .max(self.log_term_residual)
    }
}

fn rel_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + a.abs().max(b.abs()))
}

/// Coefficients of `(A, B, D, B·log C_w)` in a linear expression.
type Combo = [f64; 4];

fn combo_add(a: Combo, b: Combo, s: f64) -> Combo {
    [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2], a[3] + s * b[3]]
}

/// Forward and backward bookkeeping between `Ent_μ(F²) ≤ 2∫|∇F|²dμ` and the
/// Euclidean form, for `μ = μ_w` at scale 1.
pub fn check_lsi_equivalence(mu: &Measure, big_f: &Field, opts: &CheckOptions) -> Result<LsiEquivalence> {
    if mu.scale() != Some(1.0) {
        return Err(Error::Contract(
            "the equivalence transform is stated for μ_w at scale 1".into(),
        ));
    }
    let h = log_concave_homogeneous(mu)?;
    admit(big_f, mu.cone())?;
    let nu = mu.with_scale(None)?;
    let n = mu.dim();
    let hfield = Field::gaussian_quarter(n, h.c_w.sqrt());
    let f = big_f.clone().times(hfield);
    let lnc = h.c_w.ln();

    let ent_mu = entropy_of_square(mu, big_f)?.value;
    let e_mu = dirichlet_energy(mu, big_f, 2.0)?.value;
    let m = hup_moments(&nu, &f)?;
    let ent_nu = entropy_of_square(&nu, &f)?.value;
    let log_term = nu.value(
        &|x: &[f64]| {
            let v = f.value(x);
            v * v * (lnc - 0.5 * dot(x, x))
        },
        f.decay().times(f.decay()),
    )?;

    let forward_entropy_residual = rel_gap(ent_mu, ent_nu - log_term);
    let forward_energy_residual = rel_gap(e_mu, m.a - 0.5 * h.n_alpha * m.b + 0.25 * m.d);
    let log_term_residual = rel_gap(log_term, m.b * lnc - 0.5 * m.d);

    // Symbolic assembly: Ent_μ = Ent_ν − (B log C − D/2) and
    // ∫|∇F|² = A − ((n+α)/2)B + D/4, so Ent_μ ≤ 2∫|∇F|² reads
    // Ent_ν ≤ 2(A − ((n+α)/2)B + D/4) + (B log C − D/2).
    let energy: Combo = [1.0, -0.5 * h.n_alpha, 0.25, 0.0];
    let log_h: Combo = [0.0, 0.0, -0.5, 1.0];
    let assembled = combo_add(combo_add([0.0; 4], energy, 2.0), log_h, 1.0);
    let d_coefficient = assembled[2];
    let closed = assembled[0] * m.a + assembled[1] * m.b + assembled[3] * m.b * lnc;

    let k = euclidean_lsi_constant(h.c_w, h.n_alpha);
    let t = k * m.a / m.b;
    let s = std::f64::consts::E / h.c_w.powf(2.0 / h.n_alpha);
    let bound = 0.5 * h.n_alpha * m.b * (s * t - s.ln() - 1.0);
    let euclid = 0.5 * h.n_alpha * m.b * t.ln();
    let mapped = closed - (m.b * lnc - 0.5 * m.d);
    let backward_residual = rel_gap(bound, closed).max(rel_gap(mapped, 2.0 * e_mu));

    let tol = opts.tolerance;
    let checks = vec![
        InequalityCheck::identity("lsi_equivalence_entropy", ent_mu, ent_nu - log_term, tol)?,
        InequalityCheck::identity(
            "lsi_equivalence_energy",
            e_mu,
            m.a - 0.5 * h.n_alpha * m.b + 0.25 * m.d,
            tol,
        )?,
        InequalityCheck::identity("lsi_equivalence_log_term", log_term, m.b * lnc - 0.5 * m.d, tol)?,
        InequalityCheck::identity("lsi_equivalence_backward", bound, closed, tol)?
            .diag("s", s)
            .diag("t", t)
            .diag("log_gap", s * t - s.ln() - 1.0 - t.ln()),
        InequalityCheck::identity("lsi_equivalence_d_coefficient", d_coefficient, 0.0, 0.0)?,
        InequalityCheck::new("lsi_equivalence_euclidean", ent_nu, euclid, k, tol)?,
        InequalityCheck::new("lsi_equivalence_gaussian", ent_mu, 2.0 * e_mu, 2.0, tol)?,
    ]
    .into_iter()
    .map(|c| c.with_field(big_f.label()))
    .collect();

    Ok(LsiEquivalence {
        forward_entropy_residual,
        forward_energy_residual,
        log_term_residual,
        backward_residual,
        d_coefficient,
        checks,
    })
}

/// Moment identities of a homogeneous weight of degree `α`:
/// `∫|x|²dμ_w = n+α`; for every axis `∫|x|²x_k²e^{−|x|²}w = ((n+α+2)/2)∫x_k²e^{−|x|²}w`;
/// and for every free axis of a partial weight `2∫x_k²e^{−|x|²}w = ∫e^{−|x|²}w`.
pub fn check_moment_identities(mu: &Measure, opts: &CheckOptions) -> Result<Vec<InequalityCheck>> {
    if mu.scale() != Some(1.0) {
        return Err(Error::Contract(
            "moment identities are stated for μ_w at scale 1".into(),
        ));
    }
    let alpha = mu
        .weight()
        .require_degree()
        .map_err(|_| Error::Contract("moment identities need a homogeneous weight".into()))?;
    let n = mu.dim();
    let na = n as f64 + alpha;
    let tol = opts.tolerance;
    let second = crate::quadrature::special_moments(mu)?.second_moment;
    let mut out = vec![InequalityCheck::identity("second_moment", second, na, tol)?.diag("n_plus_alpha", na)];
    let nu = mu.with_scale(None)?;
    let v = nu.values(
        &|x: &[f64], o: &mut [f64]| {
            let r2 = dot(x, x);
            let e = (-r2).exp();
            o[0] = e;
            for k in 0..n {
                o[1 + k] = x[k] * x[k] * e;
                o[1 + n + k] = r2 * x[k] * x[k] * e;
            }
        },
        1 + 2 * n,
        Decay::Gaussian { rate: 2.0 },
    )?;
    for k in 0..n {
        out.push(
            InequalityCheck::identity("weighted_fourth_moment", v[1 + n + k], 0.5 * (na + 2.0) * v[1 + k], tol)?
                .diag("axis", k as f64),
        );
    }
    if let crate::weight::WeightSpec::PartialProduct { free_coords, .. } = mu.weight().spec() {
        for &k in free_coords {
            out.push(
                InequalityCheck::identity("free_axis_half_moment", 2.0 * v[1 + k], v[0], tol)?.diag("axis", k as f64),
            );
        }
    }
    Ok(out)
}

/// Checker driven by a sharpness sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SweepChecker {
    Beckner { p: f64, q: f64 },
    Poincare,
    Lsi,
}

impl SweepChecker {
    pub fn run(&self, mu: &Measure, f: &dyn ScalarField, opts: &CheckOptions) -> Result<InequalityCheck> {
        match *self {
            SweepChecker::Beckner { p, q } => check_beckner(mu, f, p, q, opts),
            SweepChecker::Poincare => check_poincare(mu, f, 2.0, PoincareLevel::Basic, opts),
            SweepChecker::Lsi => check_lsi(mu, f, 2.0, opts),
        }
    }

    pub fn name(&self) -> String {
        match self {
            SweepChecker::Beckner { p, q } => format!("beckner(p={p},q={q})"),
            SweepChecker::Poincare => "poincare".into(),
            SweepChecker::Lsi => "lsi".into(),
        }
    }
}

/// Family of fields to sweep.
#[derive(Debug, Clone)]
pub enum SweepFamily {
    /// `f = 1 + ε·u`.
    Perturbation { direction: Field, eps: Vec<f64> },
    /// Conjectured or proven extremals.
    Extremal { members: Vec<(String, Field)> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub label: String,
    pub parameter: Option<f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub deficit: f64,
    pub ratio: f64,
    /// `deficit/ε²` for perturbation rows.
    pub scaled_deficit: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub checker: String,
    pub rows: Vec<SweepRow>,
    /// Richardson extrapolation of `lhs/rhs` to `ε → 0` from the two smallest `ε`.
    pub extrapolated_ratio: Option<f64>,
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("label,parameter,lhs,rhs,deficit,ratio,scaled_deficit\n");
        let g = |v: f64| format!("{v:.12e}");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.label,
                r.parameter.map(g).unwrap_or_default(),
                g(r.lhs),
                g(r.rhs),
                g(r.deficit),
                g(r.ratio),
                r.scaled_deficit.map(g).unwrap_or_default()
            ));
        }
        s
    }
}

fn ratio(lhs: f64, rhs: f64) -> f64 {
    if rhs == 0.0 {
        if lhs == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        lhs / rhs
    }
}

/// Evaluate `checker` along `family`.
pub fn sharpness_sweep(
    checker: SweepChecker,
    family: &SweepFamily,
    mu: &Measure,
    opts: &CheckOptions,
) -> Result<SweepTable> {
    let mut rows = Vec::new();
    let mut extrapolated_ratio = None;
    match family {
        SweepFamily::Perturbation { direction, eps } => {
            if eps.len() < 2 {
                return Err(Error::Parameter(
                    "a perturbation sweep needs at least two ε values".into(),
                ));
            }
            if eps.iter().any(|e| *e == 0.0 || !e.is_finite()) {
                return Err(Error::Parameter("ε values must be finite and nonzero".into()));
            }
            for &e in eps {
                let f = Field::perturbation(direction.clone(), e);
                let c = checker.run(mu, &f, opts)?;
                rows.push(SweepRow {
                    label: format!("eps={e}"),
                    parameter: Some(e),
                    lhs: c.lhs,
                    rhs: c.rhs,
                    deficit: c.deficit,
                    ratio: ratio(c.lhs, c.rhs),
                    scaled_deficit: Some(c.deficit / (e * e)),
                });
            }
            let mut idx: Vec<usize> = (0..rows.len()).collect();
            idx.sort_by(|&a, &b| eps[a].abs().total_cmp(&eps[b].abs()));
            let (s, b) = (idx[0], idx[1]);
            let (es, eb) = (eps[s].abs(), eps[b].abs());
            if es != eb {
                extrapolated_ratio = Some((eb * rows[s].ratio - es * rows[b].ratio) / (eb - es));
            }
        }
        SweepFamily::Extremal { members } => {
            for (label, f) in members {
                let c = checker.run(mu, f, opts)?;
                rows.push(SweepRow {
                    label: label.clone(),
                    parameter: None,
                    lhs: c.lhs,
                    rhs: c.rhs,
                    deficit: c.deficit,
                    ratio: ratio(c.lhs, c.rhs),
                    scaled_deficit: None,
                });
            }
        }
    }
    Ok(SweepTable {
        checker: checker.name(),
        rows,
        extrapolated_ratio,
    })
}
