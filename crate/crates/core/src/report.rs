//! Batch runs: a JSON run configuration selects a weight, a cone, a field list
//! and suites; [`run`] executes them in order and [`to_json`] / [`to_csv`]
//! render the report. Output is a pure function of the configuration.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::calculus::{admit, bochner_residual, cd_margin, gamma2, integration_by_parts_defect, interior_sample};
use crate::cone::{dot, Cone};
use crate::error::{Error, Result};
use crate::field::{Field, FieldSpec, ScalarField};
use crate::functionals::hup_deficit;
use crate::inequality::{
    check_beckner, check_euclidean_lsi, check_lsi, check_lsi_equivalence, check_moment_identities, check_poincare,
    check_scale_poincare, CheckOptions, InequalityCheck, PoincareLevel, ScaleLevel, DEFAULT_TOLERANCE,
};
use crate::quadrature::{Measure, QuadratureTarget};
use crate::spectral::{DecayTable, GalerkinSystem, SpectralResult};
use crate::stability::{check_hup_stability, StabilityReport};
use crate::weight::{Weight, WeightSpec};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Beckner,
    Poincare,
    ScalePoincare,
    Lsi,
    EuclideanLsi,
    LsiEquivalence,
    Hup,
    HupStability,
    Spectral,
    GammaCalculus,
}

impl Suite {
    pub const ALL: [Suite; 10] = [
        Suite::Beckner,
        Suite::Poincare,
        Suite::ScalePoincare,
        Suite::Lsi,
        Suite::EuclideanLsi,
        Suite::LsiEquivalence,
        Suite::Hup,
        Suite::HupStability,
        Suite::Spectral,
        Suite::GammaCalculus,
    ];
}

/// Relative tolerances per check family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub default: f64,
    /// Spectral gap against `1 + K_w`.
    pub spectral: f64,
    /// Finite-difference Bochner residual, relative to `1 + |Γ₂| + Γ`.
    pub bochner: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            default: DEFAULT_TOLERANCE,
            spectral: 1e-6,
            bochner: 1e-6,
        }
    }
}

/// Parameters of the individual suites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteOptions {
    /// `(p, q)` pairs.
    pub beckner_exponents: Vec<(f64, f64)>,
    pub lsi_exponents: Vec<f64>,
    pub scale_lambdas: Vec<f64>,
    pub spectral_max_degree: Option<u32>,
    pub decay_grid: Vec<f64>,
    /// `(p, q)` pairs for the semigroup decay check.
    pub decay_exponents: Vec<(f64, f64)>,
    pub improved_stability: bool,
    pub cd_samples: usize,
    pub bochner_points: usize,
    pub seed: u64,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            beckner_exponents: vec![(1.0, 2.0), (1.5, 2.0), (1.5, 3.0)],
            lsi_exponents: vec![2.0],
            scale_lambdas: vec![0.5, 2.0],
            spectral_max_degree: None,
            decay_grid: (0..13).map(|k| 0.25 * k as f64).collect(),
            decay_exponents: vec![(1.0, 2.0), (1.5, 2.0)],
            improved_stability: true,
            cd_samples: 10_000,
            bochner_points: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub weight: WeightSpec,
    /// Defaults to the support of the weight.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cone: Option<Cone>,
    #[serde(default)]
    pub quadrature: QuadratureTarget,
    #[serde(default)]
    pub fields: Vec<FieldSpec>,
    #[serde(default)]
    pub suites: Vec<Suite>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub options: SuiteOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Results of one suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub checks: Vec<InequalityCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectral: Option<SpectralResult>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub stability: Vec<StabilityReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub decay: Vec<DecayTable>,
    /// Field/suite combinations outside the suite's hypotheses.
    pub skipped: Vec<String>,
    pub errors: Vec<String>,
    pub pass: bool,
}

impl SuiteReport {
    fn new(suite: Suite) -> Self {
        Self {
            suite,
            checks: Vec::new(),
            spectral: None,
            stability: Vec::new(),
            decay: Vec::new(),
            skipped: Vec::new(),
            errors: Vec::new(),
            pass: true,
        }
    }

    fn push(&mut self, label: &str, r: Result<InequalityCheck>) {
        match r {
            Ok(c) => self.checks.push(c.with_field(label)),
            Err(e) => self.fail(label, e),
        }
    }

    fn fail(&mut self, label: &str, e: Error) {
        match e {
            Error::DecayContract(m) => self.skipped.push(format!("{label}: {m}")),
            e => self.errors.push(format!("{label}: {e}")),
        }
    }

    fn finish(mut self) -> Self {
        self.pass = self.errors.is_empty()
            && self.checks.iter().all(|c| !c.is_failure())
            && self.stability.iter().all(StabilityReport::pass);
        self
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub version: String,
    pub suites: Vec<SuiteReport>,
    pub pass: bool,
}

impl RunReport {
    pub fn checks(&self) -> impl Iterator<Item = &InequalityCheck> {
        self.suites.iter().flat_map(|s| s.checks.iter())
    }
}

struct Context {
    weight: Weight,
    mu: Measure,
    nu: Measure,
    fields: Vec<(String, Field)>,
    opts: CheckOptions,
    tol: Tolerances,
    suite_opts: SuiteOptions,
}

fn context(config: &RunConfig) -> Result<Context> {
    let cfg = |e: Error| match e {
        Error::Config(m) => Error::Config(m),
        e => Error::Config(e.to_string()),
    };
    let weight = Weight::new(config.weight.clone()).map_err(cfg)?;
    let cone = config.cone.clone().unwrap_or_else(|| weight.support().clone());
    let mu = Measure::gaussian(weight.clone(), cone.clone(), config.quadrature).map_err(cfg)?;
    let nu = mu.with_scale(None).map_err(cfg)?;
    let even = cone.orthant_axes().unwrap_or_default();
    let fields = config
        .fields
        .iter()
        .map(|s| Ok((s.label(), s.build(weight.dim(), &even)?)))
        .collect::<Result<Vec<_>>>()
        .map_err(cfg)?;
    for t in [
        config.tolerances.default,
        config.tolerances.spectral,
        config.tolerances.bochner,
    ] {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::Config(format!(
                "tolerances must be finite and nonnegative, got {t}"
            )));
        }
    }
    Ok(Context {
        weight,
        mu,
        nu,
        fields,
        opts: CheckOptions {
            tolerance: config.tolerances.default,
        },
        tol: config.tolerances,
        suite_opts: config.options.clone(),
    })
}

/// The probability measure `μ_w` and the labelled fields a configuration describes.
pub fn inputs(config: &RunConfig) -> Result<(Measure, Vec<(String, Field)>)> {
    let ctx = context(config)?;
    Ok((ctx.mu, ctx.fields))
}

/// Executes the configured suites in order. Configuration problems are
/// returned as [`Error::Config`]; failures inside a suite are recorded in the report.
pub fn run(config: &RunConfig) -> Result<RunReport> {
    run_timed(config).map(|(r, _)| r)
}

/// [`run`] plus the wall time of every suite. Timings stay out of the report
/// so that reports are reproducible byte for byte.
pub fn run_timed(config: &RunConfig) -> Result<(RunReport, Vec<(Suite, std::time::Duration)>)> {
    let ctx = context(config)?;
    let mut suites = Vec::with_capacity(config.suites.len());
    let mut timings = Vec::with_capacity(config.suites.len());
    for &s in &config.suites {
        let start = std::time::Instant::now();
        suites.push(run_suite(&ctx, s).finish());
        timings.push((s, start.elapsed()));
    }
    let pass = suites.iter().all(|s| s.pass);
    Ok((
        RunReport {
            config: config.clone(),
            version: VERSION.to_string(),
            suites,
            pass,
        },
        timings,
    ))
}

fn run_suite(ctx: &Context, suite: Suite) -> SuiteReport {
    let mut rep = SuiteReport::new(suite);
    let opts = &ctx.opts;
    let so = &ctx.suite_opts;
    match suite {
        Suite::Beckner => {
            for (label, f) in &ctx.fields {
                for &(p, q) in &so.beckner_exponents {
                    rep.push(label, check_beckner(&ctx.mu, f, p, q, opts));
                }
            }
        }
        Suite::Poincare => {
            for (label, f) in &ctx.fields {
                for level in [
                    PoincareLevel::Basic,
                    PoincareLevel::GradientStability,
                    PoincareLevel::L2Stability,
                ] {
                    rep.push(label, check_poincare(&ctx.mu, f, 2.0, level, opts));
                }
            }
        }
        Suite::ScalePoincare => {
            for (label, f) in &ctx.fields {
                for &l in &so.scale_lambdas {
                    for level in [ScaleLevel::Basic, ScaleLevel::Improved] {
                        rep.push(label, check_scale_poincare(&ctx.mu, f, l, level, opts));
                    }
                }
            }
        }
        Suite::Lsi => {
            for (label, f) in &ctx.fields {
                for &q in &so.lsi_exponents {
                    rep.push(label, check_lsi(&ctx.mu, f, q, opts));
                }
            }
        }
        Suite::EuclideanLsi => {
            for (label, f) in &ctx.fields {
                rep.push(label, check_euclidean_lsi(&ctx.nu, f, opts));
            }
        }
        Suite::LsiEquivalence => {
            for (label, f) in &ctx.fields {
                match check_lsi_equivalence(&ctx.mu, f, opts) {
                    Ok(eq) => rep
                        .checks
                        .extend(eq.checks.into_iter().map(|c| c.with_field(label.as_str()))),
                    Err(e) => rep.fail(label, e),
                }
            }
        }
        Suite::Hup => {
            match check_moment_identities(&ctx.mu, opts) {
                Ok(cs) => rep.checks.extend(cs),
                Err(e) => rep.fail("weight", e),
            }
            let na = ctx.weight.degree().map(|a| ctx.mu.dim() as f64 + a);
            for (label, f) in &ctx.fields {
                match (hup_deficit(&ctx.nu, f), na) {
                    (Ok(d), Some(na)) => {
                        let lower = 0.5 * na * d.moments.b;
                        let upper = (d.moments.a * d.moments.d).sqrt();
                        rep.push(
                            label,
                            InequalityCheck::new("hup", lower, upper, 0.5 * na, opts.tolerance)
                                .map(|c| c.diag("lambda_star", d.lambda).diag("delta", d.delta)),
                        );
                        rep.push(
                            label,
                            InequalityCheck::identity("hup_identity", d.delta, d.sum_of_squares, opts.tolerance),
                        );
                    }
                    (Err(e), _) => rep.fail(label, e),
                    (Ok(_), None) => rep.fail(label, Error::NotHomogeneous),
                }
            }
        }
        Suite::HupStability => {
            for (label, f) in &ctx.fields {
                match check_hup_stability(&ctx.nu, f, so.improved_stability, opts) {
                    Ok(mut r) => {
                        r.field = label.clone();
                        for c in r.checks.iter_mut() {
                            c.field = Some(label.clone());
                        }
                        rep.checks.extend(r.checks.iter().cloned());
                        rep.stability.push(r);
                    }
                    Err(e) => rep.fail(label, e),
                }
            }
        }
        Suite::Spectral => spectral_suite(ctx, &mut rep),
        Suite::GammaCalculus => gamma_suite(ctx, &mut rep),
    }
    rep
}

fn spectral_suite(ctx: &Context, rep: &mut SuiteReport) {
    let so = &ctx.suite_opts;
    let sys = match GalerkinSystem::build(&ctx.mu, so.spectral_max_degree, None) {
        Ok(s) => s,
        Err(e) => return rep.fail("system", e),
    };
    match sys.spectral_gap() {
        Ok(r) => {
            if let Some(bound) = r.gap_lower_bound {
                rep.push(
                    "spectrum",
                    InequalityCheck::new("spectral_gap", bound, r.gap, bound, ctx.tol.spectral).map(|c| {
                        let c = c.diag("basis_size", r.basis_size as f64);
                        match r.convergence_delta {
                            Some(d) => c.diag("convergence_delta", d),
                            None => c,
                        }
                    }),
                );
            }
            rep.spectral = Some(r);
        }
        Err(e) => rep.fail("spectrum", e),
    }
    let n = ctx.mu.dim();
    for (label, f) in &ctx.fields {
        let centered = sys.mean(f).map(|m| Field::Sum(vec![f.clone(), Field::constant(n, -m)]));
        match centered {
            Ok(g) => rep.push(label, sys.duality_stability_residual(&g, &ctx.opts)),
            Err(e) => rep.fail(label, e),
        }
        for &(p, q) in &so.decay_exponents {
            match sys.semigroup_decay_check(f, p, q, &so.decay_grid, true) {
                Ok(mut t) => {
                    t.field = label.clone();
                    let worst = t
                        .rows
                        .iter()
                        .filter_map(|r| Some(r.quotient? / r.bound?))
                        .fold(f64::NEG_INFINITY, f64::max);
                    let chk =
                        InequalityCheck::new("semigroup_decay", worst, 1.0, t.curvature_bound, 0.0).map(|mut c| {
                            c.pass &= t.decreasing;
                            let c = c
                                .with_exponents(Some(p), Some(q))
                                .diag("decreasing", f64::from(u8::from(t.decreasing)));
                            match t.shift {
                                Some(s) => c.diag("shift", s),
                                None => c,
                            }
                        });
                    rep.push(label, chk);
                    rep.decay.push(t);
                }
                Err(e) => rep.fail(label, e),
            }
        }
    }
}

fn gamma_suite(ctx: &Context, rep: &mut SuiteReport) {
    let so = &ctx.suite_opts;
    let w = &ctx.weight;
    let cone = ctx.mu.cone();
    let points = interior_sample(cone, so.bochner_points, so.seed, 1.0);
    let cloud = interior_sample(cone, so.cd_samples, so.seed.wrapping_add(1), 2.0);
    let c = match w.curvature() {
        Ok(k) => 1.0 + k,
        Err(e) => return rep.fail("weight", e),
    };
    for (label, f) in &ctx.fields {
        let mut worst = 0.0f64;
        let mut failed = None;
        for x in &points {
            let r = bochner_residual(w, f, x, None).and_then(|r| {
                let g = f.gradient(x);
                Ok(r / (1.0 + gamma2(w, f, x)?.abs() + dot(&g, &g)))
            });
            match r {
                Ok(r) => worst = worst.max(r),
                Err(e) => {
                    failed = Some(e);
                    break;
                }
            }
        }
        match failed {
            Some(e) => rep.fail(label, e),
            None => rep.push(
                label,
                InequalityCheck::new("bochner", worst, 0.0, 1.0, 0.0).map(|mut ch| {
                    ch.tolerance = ctx.tol.bochner;
                    ch.pass = worst <= ctx.tol.bochner;
                    ch
                }),
            ),
        }
        rep.push(
            label,
            cd_margin(w, f, &cloud).and_then(|m| {
                InequalityCheck::new("curvature_dimension", 0.0, m, c, ctx.opts.tolerance)
                    .map(|ch| ch.diag("samples", cloud.len() as f64))
            }),
        );
    }
    let admissible: Vec<&(String, Field)> = ctx.fields.iter().filter(|(_, f)| admit(f, cone).is_ok()).collect();
    for (i, (lf, f)) in admissible.iter().enumerate() {
        for (lg, g) in admissible.iter().skip(i) {
            let label = format!("{lf} / {lg}");
            rep.push(
                &label,
                integration_by_parts_defect(&ctx.mu, f, g)
                    .and_then(|d| InequalityCheck::identity("integration_by_parts", d, 0.0, ctx.opts.tolerance)),
            );
        }
    }
    for (label, f) in &ctx.fields {
        if let Err(e) = admit(f, cone) {
            rep.skipped.push(format!("{label}: integration by parts: {e}"));
        }
    }
}

/// Pretty JSON with every float printed to 17 significant digits and
/// non-finite values as `null`. Object keys are sorted.
pub fn to_json(report: &RunReport) -> Result<String> {
    let v = serde_json::to_value(report).map_err(|e| Error::Evaluation(format!("report serialization: {e}")))?;
    let mut s = String::new();
    write_value(&mut s, &v, 0);
    s.push('\n');
    Ok(s)
}

fn write_value(s: &mut String, v: &Value, depth: usize) {
    let pad = |s: &mut String, d: usize| s.extend(std::iter::repeat_n(' ', 2 * d));
    match v {
        Value::Null => s.push_str("null"),
        Value::Bool(b) => s.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => match (n.as_i64(), n.as_u64(), n.as_f64()) {
            (Some(i), _, _) => {
                let _ = write!(s, "{i}");
            }
            (_, Some(u), _) => {
                let _ = write!(s, "{u}");
            }
            (_, _, Some(f)) => s.push_str(&format_f64(f, 17)),
            _ => s.push_str("null"),
        },
        Value::String(t) => s.push_str(&serde_json::to_string(t).expect("string serialization")),
        Value::Array(a) if a.is_empty() => s.push_str("[]"),
        Value::Array(a) => {
            s.push_str("[\n");
            for (i, x) in a.iter().enumerate() {
                pad(s, depth + 1);
                write_value(s, x, depth + 1);
                s.push_str(if i + 1 < a.len() { ",\n" } else { "\n" });
            }
            pad(s, depth);
            s.push(']');
        }
        Value::Object(o) if o.is_empty() => s.push_str("{}"),
        Value::Object(o) => {
            s.push_str("{\n");
            for (i, (k, x)) in o.iter().enumerate() {
                pad(s, depth + 1);
                s.push_str(&serde_json::to_string(k).expect("key serialization"));
                s.push_str(": ");
                write_value(s, x, depth + 1);
                s.push_str(if i + 1 < o.len() { ",\n" } else { "\n" });
            }
            pad(s, depth);
            s.push('}');
        }
    }
}

/// `digits` significant digits in scientific notation; `null` if not finite.
pub fn format_f64(v: f64, digits: usize) -> String {
    if v.is_finite() {
        format!("{:.*e}", digits - 1, v)
    } else {
        "null".into()
    }
}

/// One row per check: `theorem,lhs,rhs,deficit,pass`, 12 significant digits.
pub fn to_csv(report: &RunReport) -> String {
    let mut s = String::from("theorem,lhs,rhs,deficit,pass\n");
    for c in report.checks() {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            c.theorem,
            format_f64(c.lhs, 12),
            format_f64(c.rhs, 12),
            format_f64(c.deficit, 12),
            c.pass
        );
    }
    s
}
