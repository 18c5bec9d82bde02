//! Acceptance suite: one line per criterion, non-zero exit if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use conegauss::calculus::{bochner_residual, cd_margin, integration_by_parts_defect, interior_sample};
use conegauss::functionals::hup_deficit;
use conegauss::inequality::{
    check_beckner, check_euclidean_lsi, check_lsi, check_lsi_equivalence, check_moment_identities, check_poincare,
    CheckOptions, PoincareLevel,
};
use conegauss::spectral::GalerkinSystem;
use conegauss::stability::{check_hup_stability, distance_to_family, GaussianFamily};
use conegauss::weight::CurvatureCertificate;
use conegauss::{Cone, Decay, Error, Field, Measure, QuadratureTarget, ScalarField, Weight, WeightSpec};
use nalgebra::{DMatrix, DVector};
use statrs::function::gamma::gamma;

/// Collects the failed sub-assertions of one criterion.
#[derive(Default)]
struct Tally {
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Tally {
    fn expect(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.failures.push(what.into());
        }
    }

    fn note(&mut self, what: impl Into<String>) {
        self.notes.push(what.into());
    }
}

struct Case {
    name: &'static str,
    weight: Weight,
    cone: Cone,
    even: Vec<usize>,
}

impl Case {
    fn new(name: &'static str, spec: WeightSpec) -> Self {
        let weight = Weight::new(spec).unwrap();
        let cone = weight.support().clone();
        let even = cone.orthant_axes().unwrap_or_default();
        Case {
            name,
            weight,
            cone,
            even,
        }
    }

    fn dim(&self) -> usize {
        self.weight.dim()
    }

    fn mu(&self) -> Measure {
        Measure::gaussian(self.weight.clone(), self.cone.clone(), QuadratureTarget::default()).unwrap()
    }

    fn nu(&self) -> Measure {
        Measure::lebesgue(self.weight.clone(), self.cone.clone(), QuadratureTarget::default()).unwrap()
    }

    fn poly_gauss(&self, seed: u64) -> Field {
        Field::poly_gauss(self.dim(), seed, 3, None, &self.even)
    }
}

fn monomial(e: &[f64]) -> WeightSpec {
    WeightSpec::Monomial { exponents: e.to_vec() }
}

fn partial(a: f64) -> WeightSpec {
    WeightSpec::PartialProduct {
        inner: Box::new(monomial(&[a])),
        free_coords: vec![1],
    }
}

fn homogeneous() -> Vec<Case> {
    vec![
        Case::new("unit", WeightSpec::unit(2)),
        Case::new("abs_x1", monomial(&[1.0, 0.0])),
        Case::new("abs_x1_x2_sq", monomial(&[1.0, 2.0])),
        Case::new("radial_1d", WeightSpec::Radial { alpha: 1.0, dim: 1 }),
        Case::new(
            "dunkl_coordinate",
            WeightSpec::DunklProduct {
                roots: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                multiplicities: vec![0.5, 1.0],
            },
        ),
        Case::new("partial_1_5", partial(1.5)),
    ]
}

fn builtins() -> Vec<Case> {
    let mut v = homogeneous();
    let r = std::f64::consts::FRAC_1_SQRT_2;
    v.push(Case::new("tilt_neg_half", WeightSpec::GaussianTilt { s: -0.5, dim: 2 }));
    v.push(Case::new("tilt_pos", WeightSpec::GaussianTilt { s: 0.7, dim: 1 }));
    v.push(Case::new(
        "dunkl_a1",
        WeightSpec::DunklProduct {
            roots: vec![vec![r, -r]],
            multiplicities: vec![0.75],
        },
    ));
    v
}

/// The library in dimension `n`, restricted to fields even in `even`.
fn library(n: usize, even: &[usize]) -> Vec<Field> {
    let last = n - 1;
    let mut a = vec![0.0; n];
    a[last] = 1.5;
    let mut v = vec![
        Field::constant(n, 2.0),
        Field::affine(&a, -0.5),
        Field::coordinate(n, last),
        Field::exp_axis(n, last, 0.5),
        Field::exp_axis(n, last, -1.0),
        Field::hermite_witness(n, last),
        Field::gaussian(n, 1.5, 2.0),
        Field::gaussian(n, 1.0, 0.7),
        Field::gaussian_quarter(n, 1.0),
        Field::perturbation(Field::poly_gauss(n, 4, 2, Some(1.0), even), 0.2),
    ];
    v.extend((0..4).map(|s| Field::poly_gauss(n, s, 3, None, even)));
    v.retain(|f| even.iter().all(|&k| f.parity(k) == conegauss::Parity::Even));
    v
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

fn criterion_1(t: &mut Tally) {
    let start = Instant::now();
    let opts = CheckOptions { tolerance: 1e-9 };
    for n in [1usize, 2] {
        let case = Case::new("unit", WeightSpec::unit(n));
        let mu = case.mu();
        for deg in [12u32, 16] {
            let res = GalerkinSystem::build(&mu, Some(deg), None)
                .unwrap()
                .spectral_gap()
                .unwrap();
            let delta = res.convergence_delta.unwrap_or(f64::INFINITY);
            t.expect(
                (res.gap - 1.0).abs() <= 1e-8,
                format!("n={n} degree {deg}: gap {}", res.gap),
            );
            t.expect(
                delta <= 1e-9,
                format!("n={n} degree {deg}: convergence delta {delta:e}"),
            );
        }
        let mut worst = f64::INFINITY;
        for f in library(n, &[]) {
            let checks = [
                check_poincare(&mu, &f, 2.0, PoincareLevel::Basic, &opts).unwrap(),
                check_beckner(&mu, &f, 1.0, 2.0, &opts).unwrap(),
                check_lsi(&mu, &f, 2.0, &opts).unwrap(),
            ];
            for c in checks {
                worst = worst.min(c.deficit);
                t.expect(
                    c.deficit >= -1e-9,
                    format!("n={n} {} {}: deficit {:e}", c.theorem, f.label(), c.deficit),
                );
            }
        }
        t.note(format!("n={n} min deficit {worst:.2e}"));
    }
    let secs = start.elapsed().as_secs_f64();
    t.expect(secs <= 10.0, format!("runtime {secs:.1} s"));
    t.note(format!("{secs:.2} s"));
}

fn criterion_2(t: &mut Tally) {
    for spec in [
        monomial(&[1.5, 0.0]),
        monomial(&[1.0, 2.0]),
        WeightSpec::Radial { alpha: 1.0, dim: 1 },
        WeightSpec::Radial { alpha: 0.0, dim: 3 },
    ] {
        let w = Weight::new(spec.clone()).unwrap();
        let c = w.curvature_certificate().unwrap();
        t.expect(
            c.k == 0.0 && c.certificate == CurvatureCertificate::Analytic,
            format!("{spec:?}: K = {}", c.k),
        );
    }
    // |x|^α in the plane has an unbounded-below tangential curvature.
    let planar = Weight::new(WeightSpec::Radial { alpha: 1.0, dim: 2 }).unwrap();
    t.expect(
        matches!(planar.curvature(), Err(Error::InadmissibleWeight(_))),
        "planar radial weight accepted",
    );
    t.note("planar |x| rejected as not log-concave");

    let tilt = Case::new("tilt", WeightSpec::GaussianTilt { s: -0.5, dim: 2 });
    let k = tilt.weight.curvature().unwrap();
    t.expect(k == -0.5, format!("tilt K = {k}"));
    let mu = tilt.mu();
    let res = GalerkinSystem::build(&mu, None, None).unwrap().spectral_gap().unwrap();
    t.expect((res.gap - 0.5).abs() <= 1e-6, format!("tilt gap {}", res.gap));
    let opts = CheckOptions { tolerance: 1e-8 };
    for (a, b) in [([1.0, 0.0], 0.0), ([0.3, -2.0], 4.0), ([1.0, 1.0], -1.0)] {
        let c = check_poincare(&mu, &Field::affine(&a, b), 2.0, PoincareLevel::Basic, &opts).unwrap();
        t.expect(
            c.deficit.abs() <= 1e-8,
            format!("affine {a:?}: deficit {:e}", c.deficit),
        );
    }
    t.note(format!("tilt gap {:.10}", res.gap));
}

fn criterion_3(t: &mut Tally) {
    let case = Case::new("partial", partial(1.5));
    let mu = case.mu();
    let opts = CheckOptions { tolerance: 1e-8 };

    let c = check_poincare(&mu, &Field::affine(&[0.0, 3.0], 1.0), 2.0, PoincareLevel::Basic, &opts).unwrap();
    let (var, energy) = (c.diagnostics["variance"], c.diagnostics["energy_q"]);
    t.expect(
        (var - 9.0).abs() <= 1e-8 && (energy - 9.0).abs() <= 1e-8,
        format!("(a) Var {var}, energy {energy}"),
    );

    let b: f64 = 0.5;
    let closed = 2.0 * b * b * (2.0 * b * b).exp();
    let c = check_lsi(&mu, &Field::exp_axis(2, 1, b), 2.0, &opts).unwrap();
    t.expect(
        (c.lhs - closed).abs() <= 1e-7 && (c.rhs - closed).abs() <= 1e-7 && (closed - 0.8243606354).abs() <= 1e-10,
        format!("(b) Ent {} vs 2∫|∇f|² {} vs {closed}", c.lhs, c.rhs),
    );

    // δ = d² = ½Γ((a+1)/2)·½√π for the witness x₂e^{−|x|²/2} against |x₁|^a.
    let sqrt_pi = std::f64::consts::PI.sqrt();
    for a in [1.5, 1.0] {
        let case = Case::new("partial", partial(a));
        let nu = case.nu();
        let expect = 0.5 * gamma(0.5 * (a + 1.0)) * 0.5 * sqrt_pi;
        let rep = check_hup_stability(&nu, &Field::hermite_witness(2, 1), false, &CheckOptions::default()).unwrap();
        t.expect(
            (rep.delta - expect).abs() <= 1e-6,
            format!("(c) a={a}: δ {} vs {expect}", rep.delta),
        );
        t.expect(
            (rep.distance_sq - expect).abs() <= 1e-6,
            format!("(c) a={a}: d² {} vs {expect}", rep.distance_sq),
        );
        t.expect(
            (rep.lambda_star - 1.0).abs() <= 1e-8,
            format!("(c) a={a}: λ* {}", rep.lambda_star),
        );
        if a == 1.0 {
            t.expect((expect - sqrt_pi / 4.0).abs() <= 1e-15, "√π/4 closed form");
        }
        t.note(format!("a={a}: δ = d² = {:.10}", rep.delta));
    }
}

fn criterion_4(t: &mut Tally) {
    let weights = [
        Case::new("unit", WeightSpec::unit(2)),
        Case::new("abs_x1", monomial(&[1.0, 0.0])),
        Case::new("abs_x1_x2_sq", monomial(&[1.0, 2.0])),
        Case::new("radial_2d", WeightSpec::Radial { alpha: 1.0, dim: 2 }),
    ];
    let mut worst: f64 = 0.0;
    for case in &weights {
        let nu = case.nu();
        for seed in 0..50 {
            let d = hup_deficit(&nu, &case.poly_gauss(seed)).unwrap();
            let r = d.identity_residual / (d.moments.a * d.moments.d).sqrt();
            worst = worst.max(r);
            t.expect(r <= 1e-8, format!("{} seed {seed}: identity residual {r:e}", case.name));
        }
    }
    t.note(format!("max relative identity residual {worst:.1e}"));

    let opts = CheckOptions { tolerance: 1e-8 };
    let env = |x: &[f64]| (-x.iter().map(|v| v * v).sum::<f64>()).exp();
    for case in weights.iter().chain([Case::new("partial_1_5", partial(1.5))].iter()) {
        for c in check_moment_identities(&case.mu(), &opts).unwrap() {
            t.expect(
                (c.lhs - c.rhs).abs() <= 1e-8,
                format!("{} {}: {} vs {}", case.name, c.theorem, c.lhs, c.rhs),
            );
        }
        if case.name == "abs_x1_x2_sq" || case.name == "radial_2d" {
            continue;
        }
        let nu = case.nu();
        let lhs = 2.0
            * nu.value(&|x: &[f64]| x[1] * x[1] * env(x), Decay::Gaussian { rate: 2.0 })
                .unwrap();
        let rhs = nu.value(&env, Decay::Gaussian { rate: 2.0 }).unwrap();
        t.expect(
            (lhs - rhs).abs() <= 1e-8,
            format!("{} half moment: {lhs} vs {rhs}", case.name),
        );
    }
}

fn criterion_5(t: &mut Tally) {
    let opts = CheckOptions { tolerance: 1e-7 };
    let mut worst: f64 = 0.0;
    for case in [
        Case::new("unit", WeightSpec::unit(2)),
        Case::new("abs_x1_x2_sq", monomial(&[1.0, 2.0])),
        Case::new("partial_1_5", partial(1.5)),
    ] {
        let n = case.dim();
        let na = n as f64 + case.weight.degree().unwrap();
        let nu = case.nu();
        let z = nu
            .value(
                &|x: &[f64]| (-0.5 * x.iter().map(|v| v * v).sum::<f64>()).exp(),
                Decay::Gaussian { rate: 1.0 },
            )
            .unwrap();
        let c_w = 1.0 / z;
        let closed = c_w.ln() / c_w - na / (2.0 * c_w);
        for amp in [1.0, 2.0] {
            let c = check_euclidean_lsi(&nu, &Field::gaussian_quarter(n, amp), &opts).unwrap();
            let target = amp * amp * closed;
            worst = worst.max(rel(c.lhs, target)).max(rel(c.rhs, target));
            t.expect(
                rel(c.lhs, target) <= 1e-7,
                format!("{} A={amp}: Ent {} vs {target}", case.name, c.lhs),
            );
            t.expect(
                rel(c.rhs, target) <= 1e-7,
                format!("{} A={amp}: rhs {} vs {target}", case.name, c.rhs),
            );
        }
        for seed in 0..5 {
            let f = case.poly_gauss(seed);
            let lam: f64 = 2.0;
            let f_lam = f.clone().dilate(1.0 / lam).scaled(lam.powf(0.5 * na));
            let d0 = check_euclidean_lsi(&nu, &f, &opts).unwrap();
            let d1 = check_euclidean_lsi(&nu, &f_lam, &opts).unwrap();
            t.expect(
                d0.pass && d1.pass,
                format!("{} seed {seed}: Euclidean LSI violated", case.name),
            );
            t.expect(
                rel(d0.deficit, d1.deficit) <= 1e-7,
                format!("{} seed {seed}: deficit {} vs {}", case.name, d0.deficit, d1.deficit),
            );
        }
        let mu = case.mu();
        let mut transformed = vec![Field::constant(n, 1.0), Field::perturbation(case.poly_gauss(9), 0.3)];
        if !case.even.contains(&(n - 1)) {
            transformed.push(Field::exp_axis(n, n - 1, 0.5));
        }
        for big_f in transformed {
            let eq = check_lsi_equivalence(&mu, &big_f, &opts).unwrap();
            worst = worst.max(eq.forward_residual()).max(eq.backward_residual);
            t.expect(
                eq.forward_residual() <= 1e-7,
                format!("{} {}: forward {:e}", case.name, big_f.label(), eq.forward_residual()),
            );
            t.expect(
                eq.backward_residual <= 1e-7,
                format!("{} {}: backward {:e}", case.name, big_f.label(), eq.backward_residual),
            );
            t.expect(
                eq.d_coefficient == 0.0,
                format!("{}: |x|²f² coefficient {}", case.name, eq.d_coefficient),
            );
        }
    }
    t.note(format!("max relative residual {worst:.1e}"));
}

fn criterion_6(t: &mut Tally) {
    let part = Case::new("partial_1_5", partial(1.5));
    let pts = interior_sample(&part.cone, 6, 5, 1.5);
    let mut ratios = Vec::new();
    for seed in 0..10 {
        let f = Field::poly_gauss(2, seed, 4, Some(0.7), &[]);
        let total = |h: f64| -> f64 {
            pts.iter()
                .map(|x| bochner_residual(&part.weight, &f, x, Some(h)).unwrap())
                .sum()
        };
        let ratio = total(2e-2) / total(1e-2);
        ratios.push(ratio);
        t.expect(
            (ratio - 4.0).abs() <= 0.5,
            format!("Bochner seed {seed}: ratio {ratio}"),
        );
    }
    let (lo, hi) = ratios
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
    t.note(format!("Bochner ratios in [{lo:.3}, {hi:.3}]"));

    let mut worst = f64::INFINITY;
    for case in builtins() {
        let sample = interior_sample(&case.cone, 10_000, 11, 2.0);
        for seed in 0..3 {
            let f = Field::poly_gauss(case.dim(), seed, 3, Some(0.8), &[]);
            let m = cd_margin(&case.weight, &f, &sample).unwrap();
            worst = worst.min(m);
            t.expect(m >= -1e-9, format!("{} seed {seed}: cd margin {m:e}", case.name));
        }
    }
    t.note(format!("min cd margin {worst:.2e}"));

    for case in builtins().into_iter().filter(|c| c.name != "dunkl_a1") {
        let mu = case.mu();
        for seed in 0..5 {
            let d = integration_by_parts_defect(&mu, &case.poly_gauss(seed), &case.poly_gauss(seed + 50)).unwrap();
            t.expect(
                d <= 1e-7,
                format!("{} seed {seed}: integration by parts {d:e}", case.name),
            );
        }
    }
}

fn criterion_7(t: &mut Tally) {
    let grid: Vec<f64> = (0..13).map(|i| 0.25 * i as f64).collect();
    let mut worst: f64 = 0.0;
    for case in [
        Case::new("unit", WeightSpec::unit(2)),
        Case::new("partial_1_5", partial(1.5)),
    ] {
        let sys = GalerkinSystem::build(&case.mu(), None, None).unwrap();
        let fields = [
            Field::gaussian(2, 1.0, 2.0),
            Field::gaussian_quarter(2, 2.0),
            Field::exp_axis(2, 1, 0.5),
            Field::perturbation(Field::poly_gauss(2, 3, 2, Some(1.0), &case.even), 0.3),
            Field::hermite_witness(2, 1),
        ];
        for f in &fields {
            for (p, q) in [(1.0, 2.0), (1.5, 2.0)] {
                let tab = sys.semigroup_decay_check(f, p, q, &grid, true).unwrap();
                let strictly = tab.rows.windows(2).all(|w| w[1].phi < w[0].phi);
                t.expect(
                    strictly,
                    format!("{} {} p={p}: φ not strictly decreasing", case.name, f.label()),
                );
                for r in &tab.rows {
                    if let (Some(qt), Some(b)) = (r.quotient, r.bound) {
                        worst = worst.max(qt / b);
                        t.expect(
                            qt <= b,
                            format!("{} {} p={p} t={}: {qt:e} > {b:e}", case.name, f.label(), r.t),
                        );
                    }
                }
            }
        }
    }
    t.note(format!("max quotient/bound {worst:.4}"));
}

/// `‖f‖² − bᵀG⁻¹b`, every normal-equation entry under its own envelope.
fn oracle_residual(nu: &Measure, f: &Field, f_rate: f64, m: usize, lambda: f64) -> f64 {
    let r = 1.0 / (lambda * lambda);
    let phi = |i: usize, x: &[f64]| -> f64 {
        let g = (-0.5 * r * x.iter().map(|v| v * v).sum::<f64>()).exp();
        if i == 0 {
            g
        } else {
            x[i - 1] * g
        }
    };
    let norm = nu
        .value(&|x: &[f64]| f.value(x).powi(2), Decay::Gaussian { rate: 2.0 * f_rate })
        .unwrap();
    let mut g = DMatrix::<f64>::zeros(m, m);
    let mut b = DVector::<f64>::zeros(m);
    for i in 0..m {
        b[i] = nu
            .value(
                &|x: &[f64]| f.value(x) * phi(i, x),
                Decay::Gaussian { rate: f_rate + r },
            )
            .unwrap();
        for j in 0..m {
            g[(i, j)] = nu
                .value(&|x: &[f64]| phi(i, x) * phi(j, x), Decay::Gaussian { rate: 2.0 * r })
                .unwrap();
        }
    }
    norm - b.dot(&g.lu().solve(&b).unwrap())
}

/// 2001-point log grid on `[1e-2, 1e2]` refined by two nested 201-point grids.
fn grid_argmin(obj: &dyn Fn(f64) -> f64) -> f64 {
    let (mut lo, mut hi) = (1e-2f64.ln(), 1e2f64.ln());
    let mut best = f64::NAN;
    for points in [2001usize, 201, 201] {
        let step = (hi - lo) / (points - 1) as f64;
        let vals: Vec<f64> = (0..points).map(|i| obj((lo + step * i as f64).exp())).collect();
        let i = (0..points).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
        best = (lo + step * i as f64).exp();
        (lo, hi) = (
            lo + step * i.saturating_sub(1) as f64,
            lo + step * (i + 1).min(points - 1) as f64,
        );
    }
    best
}

fn criterion_8(t: &mut Tally) {
    let opts = CheckOptions { tolerance: 1e-7 };
    let mut worst = f64::INFINITY;
    for case in homogeneous() {
        let nu = case.nu();
        for seed in 0..20 {
            let rep = check_hup_stability(&nu, &case.poly_gauss(1000 + seed), true, &opts).unwrap();
            for c in &rep.checks {
                worst = worst.min(c.deficit);
                t.expect(
                    c.deficit >= -1e-7,
                    format!("{} seed {seed} {}: deficit {:e}", case.name, c.theorem, c.deficit),
                );
            }
        }
    }
    t.note(format!("min deficit {worst:.2e}"));

    let case = Case::new("partial_1_5", partial(1.5));
    let nu = case.nu();
    let mut dev: f64 = 0.0;
    for seed in 0..10 {
        let f = case.poly_gauss(seed);
        let rate = f.decay().gaussian_rate().unwrap();
        for (family, m) in [(GaussianFamily::Gaussian, 1), (GaussianFamily::AffineGaussian, 3)] {
            let got = distance_to_family(&nu, &f, family).unwrap().argmin.lambda;
            let oracle = grid_argmin(&|l| oracle_residual(&nu, &f, rate, m, l));
            dev = dev.max(rel(got, oracle));
            t.expect(
                rel(got, oracle) <= 1e-6,
                format!("seed {seed} {family:?}: λ {got} vs grid {oracle}"),
            );
        }
    }
    t.note(format!("max relative argmin deviation {dev:.1e}"));
}

fn criterion_9(t: &mut Tally) {
    let exe = env!("CARGO_BIN_EXE_conegauss");
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/replication.json");
    let dir = tempfile::tempdir().unwrap();
    let run = |args: &[&str]| Command::new(exe).args(args).output().unwrap();

    let start = Instant::now();
    let outs: Vec<_> = ["a.json", "b.json"]
        .iter()
        .map(|name| {
            let p = dir.path().join(name);
            let o = run(&[
                "verify",
                "--config",
                config.to_str().unwrap(),
                "--out",
                p.to_str().unwrap(),
            ]);
            (o.status.code(), std::fs::read(&p).unwrap_or_default())
        })
        .collect();
    let secs = start.elapsed().as_secs_f64() / 2.0;
    t.expect(outs[0].0 == Some(0), format!("replication exit {:?}", outs[0].0));
    t.expect(
        !outs[0].1.is_empty() && outs[0].1 == outs[1].1,
        "reports differ between runs",
    );
    t.expect(secs <= 300.0, format!("replication took {secs:.1} s"));
    t.note(format!("replication {secs:.2} s"));

    let write = |body: &str| {
        let p = dir.path().join("cfg.json");
        std::fs::write(&p, body).unwrap();
        p
    };
    let ok = write(
        r#"{"weight":{"kind":"monomial","exponents":[0.0]},"fields":[{"kind":"affine","a":[1.0],"b":0.0}],"suites":["poincare"]}"#,
    );
    t.expect(
        run(&["verify", "--config", ok.to_str().unwrap()]).status.code() == Some(0),
        "exit 0",
    );
    let bad_out = dir.path().join("missing/dir/out.json");
    let code = run(&[
        "verify",
        "--config",
        ok.to_str().unwrap(),
        "--out",
        bad_out.to_str().unwrap(),
    ])
    .status
    .code();
    t.expect(code == Some(3), format!("unwritable output exit {code:?}"));
    let fail = write(
        r#"{"weight":{"kind":"monomial","exponents":[1.0]},"fields":[{"kind":"affine","a":[1.0],"b":0.0}],"suites":["poincare"]}"#,
    );
    let code = run(&["verify", "--config", fail.to_str().unwrap()]).status.code();
    t.expect(code == Some(1), format!("failing suite exit {code:?}"));
    let unknown = write(r#"{"weight":{"kind":"monomial","exponents":[0.0]},"fields":[],"suites":["sobolev"]}"#);
    let code = run(&["verify", "--config", unknown.to_str().unwrap()]).status.code();
    t.expect(code == Some(2), format!("unknown suite exit {code:?}"));
}

type Criterion = fn(&mut Tally);

fn main() {
    let criteria: [(&str, Criterion); 9] = [
        ("Gaussian baseline", criterion_1),
        ("curvature pipeline", criterion_2),
        ("partial-weight equality suite", criterion_3),
        ("identity suite", criterion_4),
        ("Euclidean log-Sobolev and equivalence transform", criterion_5),
        ("Gamma calculus", criterion_6),
        ("semigroup decay", criterion_7),
        ("stability inequalities and optimizer oracle", criterion_8),
        ("determinism and interfaces", criterion_9),
    ];
    // Panics are reported on the criterion line instead.
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (title, run)) in criteria.iter().enumerate() {
        let mut tally = Tally::default();
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(|| run(&mut tally)));
        if let Err(e) = outcome {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            tally.failures.push(msg);
        }
        let ok = tally.failures.is_empty();
        failed += usize::from(!ok);
        println!(
            "criterion {}: {} {title} [{:.1} s] {}",
            i + 1,
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            tally.notes.join("; ")
        );
        for f in &tally.failures {
            println!("    {f}");
        }
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
