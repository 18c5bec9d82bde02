//! Galerkin discretization of `−L_w` on polynomials orthonormal under `μ_w`:
//! spectral gap, Poisson solves and the spectral semigroup `P_t`.
//!
//! The basis is built by an Arnoldi process: every new element is
//! `x_k^s · q_parent` orthogonalized against all earlier elements (two
//! modified Gram–Schmidt passes), where `s = 2` on parity-filtered axes and
//! `s = 1` elsewhere. Enumerating exponents in graded order makes every
//! prefix of the basis span a full space of polynomials of bounded degree.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{exponents_up_to, Jet, Parity, ScalarField};
use crate::inequality::{CheckOptions, InequalityCheck};
use crate::quadrature::rule::RuleKind;
use crate::quadrature::{Decay, Measure};

/// Largest tolerated `‖Gram − I‖_max`.
pub const GRAM_TOL: f64 = 1e-10;
/// Largest tolerated constant component of a Poisson right-hand side.
pub const MEAN_ZERO_TOL: f64 = 1e-8;
/// Relative safety factor on the semigroup difference-quotient bound.
pub const DECAY_SLACK: f64 = 1e-3;

/// 16 for `n ≤ 2`, 10 otherwise.
pub fn default_max_degree(dim: usize) -> u32 {
    if dim <= 2 {
        16
    } else {
        10
    }
}

/// `q_m = (x_axis^power · q_parent − Σ_{i<m} h_i q_i) / norm`.
#[derive(Debug, Clone)]
struct Step {
    axis: usize,
    power: u32,
    parent: usize,
    h: Vec<f64>,
    norm: f64,
}

#[derive(Debug)]
struct Basis {
    dim: usize,
    even_axes: Vec<usize>,
    exponents: Vec<Vec<u32>>,
    degrees: Vec<u32>,
    /// Value of the constant element.
    q0: f64,
    /// `steps[m − 1]` builds element `m`.
    steps: Vec<Step>,
}

impl Basis {
    fn len(&self) -> usize {
        self.exponents.len()
    }

    /// Values, gradients (`m·n + a`) and Hessians (`m·n² + a·n + b`) of all elements at `x`.
    fn jets(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.dim;
        let nn = n * n;
        let len = self.len();
        let mut v = vec![0.0; len];
        let mut g = vec![0.0; len * n];
        let mut h = vec![0.0; len * nn];
        v[0] = self.q0;
        for (m1, st) in self.steps.iter().enumerate() {
            let m = m1 + 1;
            let k = st.axis;
            let xk = x[k];
            let (t, dt, d2t) = if st.power == 1 {
                (xk, 1.0, 0.0)
            } else {
                (xk * xk, 2.0 * xk, 2.0)
            };
            let p = st.parent;
            let mut val = t * v[p];
            let mut grad: Vec<f64> = (0..n).map(|a| t * g[p * n + a]).collect();
            grad[k] += dt * v[p];
            let mut hess: Vec<f64> = (0..nn).map(|ab| t * h[p * nn + ab]).collect();
            for b in 0..n {
                hess[k * n + b] += dt * g[p * n + b];
                hess[b * n + k] += dt * g[p * n + b];
            }
            hess[k * n + k] += d2t * v[p];
            for (i, &hi) in st.h.iter().enumerate() {
                val -= hi * v[i];
                for a in 0..n {
                    grad[a] -= hi * g[i * n + a];
                }
                for ab in 0..nn {
                    hess[ab] -= hi * h[i * nn + ab];
                }
            }
            v[m] = val / st.norm;
            for a in 0..n {
                g[m * n + a] = grad[a] / st.norm;
            }
            for ab in 0..nn {
                h[m * nn + ab] = hess[ab] / st.norm;
            }
        }
        (v, g, h)
    }
}

/// Basis values, gradients and Laplacians on the quadrature nodes.
#[derive(Debug)]
struct Tape {
    weights: Vec<f64>,
    nodes: Vec<f64>,
    /// `[m][i]`
    vals: Vec<Vec<f64>>,
    /// `[m][i·n + a]`
    grads: Vec<Vec<f64>>,
    /// `[m][i]`
    laps: Vec<Vec<f64>>,
    /// `∇log w − x` at node `i`, `[i·n + a]`.
    drift: Vec<f64>,
}

fn wdot(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    w.iter().zip(a.iter().zip(b)).map(|(w, (a, b))| w * a * b).sum()
}

/// A polynomial in the Galerkin span, evaluated by replaying the basis recurrence.
#[derive(Debug, Clone)]
pub struct GalerkinField {
    basis: Arc<Basis>,
    coefficients: Vec<f64>,
    label: String,
}

impl GalerkinField {
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }
}

impl ScalarField for GalerkinField {
    fn dim(&self) -> usize {
        self.basis.dim
    }

    fn jet(&self, x: &[f64]) -> Jet {
        let n = self.basis.dim;
        let nn = n * n;
        let (v, g, h) = self.basis.jets(x);
        let mut j = Jet::zero(n);
        for (m, &c) in self.coefficients.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            j.value += c * v[m];
            for a in 0..n {
                j.grad[a] += c * g[m * n + a];
            }
            for ab in 0..nn {
                j.hess[ab] += c * h[m * nn + ab];
            }
        }
        j
    }

    fn decay(&self) -> Decay {
        Decay::Polynomial
    }

    fn parity(&self, axis: usize) -> Parity {
        if self.basis.even_axes.contains(&axis) {
            Parity::Even
        } else {
            Parity::Neither
        }
    }

    fn label(&self) -> String {
        self.label.clone()
    }
}

/// `−L_w` discretized on an orthonormal polynomial basis of `L²(μ_w)`.
#[derive(Debug)]
pub struct GalerkinSystem {
    measure: Measure,
    basis: Arc<Basis>,
    tape: Tape,
    stiffness: DMatrix<f64>,
    max_degree: u32,
    gram_residual: f64,
    /// Ascending eigenvalues and matching eigenvector columns of the stiffness.
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
}

/// Gap, spectrum and convergence of a [`GalerkinSystem`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralResult {
    pub max_degree: u32,
    pub basis_size: usize,
    pub eigenvalues: Vec<f64>,
    pub gap: f64,
    /// Gap of the degree `max_degree − 2` subsystem.
    pub gap_previous: Option<f64>,
    pub convergence_delta: Option<f64>,
    pub converged: bool,
    pub warning: Option<String>,
    /// `1 + K_w` when the weight is admissible.
    pub gap_lower_bound: Option<f64>,
    pub gram_residual: f64,
    /// Columns in basis coordinates, matching `eigenvalues`.
    #[serde(skip)]
    pub eigenvectors: Vec<Vec<f64>>,
}

/// Galerkin solution of `−L_w u = f`.
#[derive(Debug, Clone)]
pub struct PoissonSolution {
    pub u: GalerkinField,
    /// `‖−L_w u − f‖_{L²(μ_w)}` on the quadrature nodes.
    pub residual: f64,
    pub f_norm: f64,
    /// `‖f − Πf‖_{L²(μ_w)}`, zero when `f` lies in the span.
    pub projection_error: f64,
}

/// One grid point of the semigroup decay check. The quotient and bound refer
/// to the cell `[t, t_next]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub t: f64,
    pub phi: f64,
    pub quotient: Option<f64>,
    pub bound: Option<f64>,
    pub pass: bool,
}

/// `φ(t) = (∫(P_t f^p)^{q/p} dμ_w)^{2/q}` on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayTable {
    pub field: String,
    pub p: f64,
    pub q: f64,
    pub curvature_bound: f64,
    pub rows: Vec<DecayRow>,
    /// Constant added to make `f` positive on the nodes.
    pub shift: Option<f64>,
    pub energy_q: f64,
    /// `‖f‖_q²` computed from `f` directly.
    pub phi_zero: f64,
    /// `‖f‖_p²`, the `t → ∞` limit.
    pub phi_limit: f64,
    /// `|φ_Galerkin(0) − ‖f‖_q²|`, present when the grid starts at 0.
    pub phi_zero_residual: Option<f64>,
    pub phi_limit_residual: f64,
    /// Largest `|∇P_t f^p|² − e^{−2(1+K)t}(P_t|∇f^p|)²` over nodes and grid,
    /// only at `q = 2`, `p ∈ {1, 1.5}`. Reported, not asserted.
    pub gradient_bound_excess: Option<f64>,
    pub decreasing: bool,
    pub pass: bool,
}

impl DecayTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,phi,quotient,bound,pass\n");
        for r in &self.rows {
            let opt = |v: Option<f64>| v.map(|v| format!("{v:.12e}")).unwrap_or_default();
            let _ = writeln!(
                s,
                "{:.12e},{:.12e},{},{},{}",
                r.t,
                r.phi,
                opt(r.quotient),
                opt(r.bound),
                r.pass
            );
        }
        s
    }
}

/// Builds the system with the default degree and the cone's orthant axes as parity filter.
pub fn build_galerkin(
    measure: &Measure,
    max_degree: Option<u32>,
    even_axes: Option<&[usize]>,
) -> Result<GalerkinSystem> {
    GalerkinSystem::build(measure, max_degree, even_axes)
}

impl GalerkinSystem {
    pub fn build(measure: &Measure, max_degree: Option<u32>, even_axes: Option<&[usize]>) -> Result<Self> {
        let n = measure.dim();
        if measure.scale() != Some(1.0) {
            return Err(Error::Contract("the Galerkin system is built on μ_w at scale 1".into()));
        }
        let orthant = match measure.cone().orthant_axes() {
            Some(a) => a,
            None => {
                return Err(Error::Unsupported(
                    "parity-filtered bases need a full space or coordinate orthant".into(),
                ))
            }
        };
        let mut even: Vec<usize> = even_axes.map(<[usize]>::to_vec).unwrap_or_else(|| orthant.clone());
        even.sort_unstable();
        even.dedup();
        if let Some(&k) = even.iter().find(|&&k| k >= n) {
            return Err(Error::Parameter(format!(
                "parity axis {k} out of range for dimension {n}"
            )));
        }
        if let Some(k) = orthant.iter().find(|k| !even.contains(k)) {
            return Err(Error::Contract(format!(
                "axis {k} bounds the cone but is not parity filtered"
            )));
        }
        let max_degree = max_degree.unwrap_or_else(|| default_max_degree(n));
        let (rule, weights) = measure.probability_rule()?;
        if matches!(rule.kind, RuleKind::MonteCarlo { .. }) {
            return Err(Error::Unsupported(
                "the spectral solver needs a deterministic quadrature rule".into(),
            ));
        }
        if (rule.order as u64) <= max_degree as u64 {
            return Err(Error::Parameter(format!(
                "rule order {} is not exact through degree {}",
                rule.order,
                2 * max_degree
            )));
        }

        let exponents: Vec<Vec<u32>> = exponents_up_to(n, max_degree)
            .into_iter()
            .filter(|e| even.iter().all(|&k| e[k] % 2 == 0))
            .collect();
        let index: HashMap<Vec<u32>, usize> = exponents.iter().cloned().enumerate().map(|(i, e)| (e, i)).collect();
        let degrees: Vec<u32> = exponents.iter().map(|e| e.iter().sum()).collect();
        let len = exponents.len();
        let count = weights.len();
        let nodes = rule.nodes.clone();

        let z: f64 = weights.iter().sum();
        let q0 = 1.0 / z.sqrt();
        let mut vals = vec![vec![q0; count]];
        let mut grads = vec![vec![0.0; count * n]];
        let mut laps = vec![vec![0.0; count]];
        let mut steps = Vec::with_capacity(len.saturating_sub(1));

        for (m, e) in exponents.iter().enumerate().skip(1) {
            let step_of = |k: usize| if even.contains(&k) { 2 } else { 1 };
            let axis = (0..n).find(|&k| e[k] >= step_of(k)).expect("nonzero exponent");
            let power = step_of(axis);
            let mut pe = e.clone();
            pe[axis] -= power;
            let parent = index[&pe];

            let xs: Vec<f64> = (0..count).map(|i| nodes[i * n + axis]).collect();
            let tpow = |x: f64| if power == 1 { x } else { x * x };
            let mut c: Vec<f64> = (0..count).map(|i| tpow(xs[i]) * vals[parent][i]).collect();
            let norm0 = wdot(&weights, &c, &c).sqrt();
            let mut h = vec![0.0; m];
            for _ in 0..2 {
                for j in 0..m {
                    let hj = wdot(&weights, &c, &vals[j]);
                    for (ci, vj) in c.iter_mut().zip(&vals[j]) {
                        *ci -= hj * vj;
                    }
                    h[j] += hj;
                }
            }
            let norm = wdot(&weights, &c, &c).sqrt();
            if !(norm > 1e-12 * norm0) || !norm.is_finite() {
                return Err(Error::DegreeTooHigh(format!(
                    "Gram matrix numerically singular at element {m} (degree {}); lower max_degree",
                    degrees[m]
                )));
            }
            for ci in c.iter_mut() {
                *ci /= norm;
            }

            let grad: Vec<f64> = (0..count)
                .into_par_iter()
                .flat_map_iter(|i| {
                    let x = xs[i];
                    let (t, dt) = if power == 1 { (x, 1.0) } else { (x * x, 2.0 * x) };
                    let grads = &grads;
                    let vals = &vals;
                    let h = &h;
                    (0..n).map(move |a| {
                        let mut s = t * grads[parent][i * n + a];
                        if a == axis {
                            s += dt * vals[parent][i];
                        }
                        for (j, hj) in h.iter().enumerate() {
                            s -= hj * grads[j][i * n + a];
                        }
                        s / norm
                    })
                })
                .collect();
            let lap: Vec<f64> = (0..count)
                .into_par_iter()
                .map(|i| {
                    let x = xs[i];
                    let (t, dt, d2t) = if power == 1 {
                        (x, 1.0, 0.0)
                    } else {
                        (x * x, 2.0 * x, 2.0)
                    };
                    let mut s = t * laps[parent][i] + 2.0 * dt * grads[parent][i * n + axis] + d2t * vals[parent][i];
                    for (j, hj) in h.iter().enumerate() {
                        s -= hj * laps[j][i];
                    }
                    s / norm
                })
                .collect();
            vals.push(c);
            grads.push(grad);
            laps.push(lap);
            steps.push(Step {
                axis,
                power,
                parent,
                h,
                norm,
            });
        }

        let gram_residual = (0..len)
            .into_par_iter()
            .map(|i| {
                (0..=i)
                    .map(|j| {
                        let g = wdot(&weights, &vals[i], &vals[j]);
                        (g - if i == j { 1.0 } else { 0.0 }).abs()
                    })
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max);
        if !(gram_residual <= GRAM_TOL) {
            return Err(Error::DegreeTooHigh(format!(
                "orthonormality residual {gram_residual:.3e} exceeds {GRAM_TOL:e}; lower max_degree"
            )));
        }

        let rows: Vec<Vec<f64>> = (0..len)
            .into_par_iter()
            .map(|i| {
                (0..len)
                    .map(|j| {
                        if j < i {
                            return 0.0;
                        }
                        (0..count)
                            .map(|p| {
                                let gi = &grads[i][p * n..(p + 1) * n];
                                let gj = &grads[j][p * n..(p + 1) * n];
                                weights[p] * gi.iter().zip(gj).map(|(a, b)| a * b).sum::<f64>()
                            })
                            .sum()
                    })
                    .collect()
            })
            .collect();
        let mut stiffness = DMatrix::zeros(len, len);
        for i in 0..len {
            for j in i..len {
                stiffness[(i, j)] = rows[i][j];
                stiffness[(j, i)] = rows[i][j];
            }
        }

        let mut drift = vec![0.0; count * n];
        for i in 0..count {
            let x = &nodes[i * n..(i + 1) * n];
            let gl = measure.weight().grad_log_unchecked(x);
            for a in 0..n {
                drift[i * n + a] = gl[a] - x[a];
            }
        }

        let (eigenvalues, eigenvectors) = sorted_eigen(&stiffness)?;
        let basis = Arc::new(Basis {
            dim: n,
            even_axes: even,
            exponents,
            degrees,
            q0,
            steps,
        });
        Ok(Self {
            measure: measure.clone(),
            basis,
            tape: Tape {
                weights,
                nodes,
                vals,
                grads,
                laps,
                drift,
            },
            stiffness,
            max_degree,
            gram_residual,
            eigenvalues,
            eigenvectors,
        })
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.len() == 0
    }

    pub fn max_degree(&self) -> u32 {
        self.max_degree
    }

    pub fn measure(&self) -> &Measure {
        &self.measure
    }

    /// Leading monomial of each basis element.
    pub fn exponents(&self) -> &[Vec<u32>] {
        &self.basis.exponents
    }

    pub fn degrees(&self) -> &[u32] {
        &self.basis.degrees
    }

    pub fn parity_axes(&self) -> &[usize] {
        &self.basis.even_axes
    }

    pub fn stiffness(&self) -> &DMatrix<f64> {
        &self.stiffness
    }

    pub fn gram_residual(&self) -> f64 {
        self.gram_residual
    }

    /// Gram matrix of the basis on the quadrature nodes.
    pub fn gram(&self) -> DMatrix<f64> {
        let len = self.len();
        let w = &self.tape.weights;
        DMatrix::from_fn(len, len, |i, j| wdot(w, &self.tape.vals[i], &self.tape.vals[j]))
    }

    /// One row per basis element, 17 significant digits.
    pub fn stiffness_csv(&self) -> String {
        let mut s = String::new();
        for i in 0..self.len() {
            let row: Vec<String> = (0..self.len())
                .map(|j| format!("{:.16e}", self.stiffness[(i, j)]))
                .collect();
            let _ = writeln!(s, "{}", row.join(","));
        }
        s
    }

    /// Basis element `m` as a field.
    pub fn element(&self, m: usize) -> GalerkinField {
        let mut c = vec![0.0; self.len()];
        c[m] = 1.0;
        self.field(c, format!("basis[{m}]"))
    }

    fn field(&self, coefficients: Vec<f64>, label: String) -> GalerkinField {
        GalerkinField {
            basis: self.basis.clone(),
            coefficients,
            label,
        }
    }

    fn node_values(&self, f: &dyn ScalarField) -> Result<Vec<f64>> {
        let n = self.basis.dim;
        if f.dim() != n {
            return Err(Error::Parameter(format!(
                "field dim {} differs from system dim {n}",
                f.dim()
            )));
        }
        let v: Vec<f64> = self.tape.nodes.par_chunks(n).map(|x| f.value(x)).collect();
        if let Some(i) = v.iter().position(|y| !y.is_finite()) {
            return Err(Error::Evaluation(format!("field is {} at node {i}", v[i])));
        }
        Ok(v)
    }

    fn node_gradients(&self, f: &dyn ScalarField) -> Vec<f64> {
        self.tape
            .nodes
            .par_chunks(self.basis.dim)
            .flat_map_iter(|x| f.gradient(x))
            .collect()
    }

    fn project_values(&self, v: &[f64]) -> Vec<f64> {
        self.tape.vals.iter().map(|q| wdot(&self.tape.weights, v, q)).collect()
    }

    fn span_values(&self, c: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.tape.weights.len()];
        for (cm, q) in c.iter().zip(&self.tape.vals) {
            if *cm != 0.0 {
                for (o, qi) in out.iter_mut().zip(q) {
                    *o += cm * qi;
                }
            }
        }
        out
    }

    fn span_gradients(&self, c: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.tape.drift.len()];
        for (cm, g) in c.iter().zip(&self.tape.grads) {
            if *cm != 0.0 {
                for (o, gi) in out.iter_mut().zip(g) {
                    *o += cm * gi;
                }
            }
        }
        out
    }

    /// `L_w u` on the nodes for `u` in the span.
    fn span_generator(&self, c: &[f64]) -> Vec<f64> {
        let n = self.basis.dim;
        let g = self.span_gradients(c);
        let mut out = vec![0.0; self.tape.weights.len()];
        for (cm, l) in c.iter().zip(&self.tape.laps) {
            if *cm != 0.0 {
                for (o, li) in out.iter_mut().zip(l) {
                    *o += cm * li;
                }
            }
        }
        for (i, o) in out.iter_mut().enumerate() {
            *o += (0..n).map(|a| self.tape.drift[i * n + a] * g[i * n + a]).sum::<f64>();
        }
        out
    }

    /// Coefficients `⟨f, q_m⟩_{μ_w}` of the orthogonal projection onto the span.
    pub fn project(&self, f: &dyn ScalarField) -> Result<Vec<f64>> {
        Ok(self.project_values(&self.node_values(f)?))
    }

    /// `∫ f dμ_w` on the system's nodes.
    pub fn mean(&self, f: &dyn ScalarField) -> Result<f64> {
        let v = self.node_values(f)?;
        Ok(v.iter().zip(&self.tape.weights).map(|(a, w)| a * w).sum())
    }

    /// Ascending spectrum of the stiffness with a convergence estimate from
    /// the degree `max_degree − 2` subsystem.
    pub fn spectral_gap(&self) -> Result<SpectralResult> {
        let len = self.len();
        if len < 2 {
            return Err(Error::DegenerateInput("the basis holds only constants".into()));
        }
        let gap = self.eigenvalues[1];
        let prefix = self.basis.degrees.iter().filter(|&&d| d + 2 <= self.max_degree).count();
        let gap_previous = if prefix >= 2 {
            let sub = self.stiffness.view((0, 0), (prefix, prefix)).into_owned();
            Some(sorted_eigen(&sub)?.0[1])
        } else {
            None
        };
        let convergence_delta = gap_previous.map(|g| (gap - g).abs());
        let (converged, warning) = match convergence_delta {
            Some(d) if d <= 1e-4 * gap => (true, None),
            Some(d) => (
                false,
                Some(format!("unconverged: gap changed by {d:.3e} between degrees")),
            ),
            None => (false, Some("degree too low for a convergence estimate".to_string())),
        };
        Ok(SpectralResult {
            max_degree: self.max_degree,
            basis_size: len,
            eigenvalues: self.eigenvalues.clone(),
            gap,
            gap_previous,
            convergence_delta,
            converged,
            warning,
            gap_lower_bound: self.measure.weight().curvature().ok().map(|k| 1.0 + k),
            gram_residual: self.gram_residual,
            eigenvectors: (0..len)
                .map(|k| self.eigenvectors.column(k).iter().copied().collect())
                .collect(),
        })
    }

    /// Solves `stiffness·û = f̂` off the constant element.
    pub fn poisson_solve(&self, f: &dyn ScalarField) -> Result<PoissonSolution> {
        let fv = self.node_values(f)?;
        let w = &self.tape.weights;
        let mut fhat = self.project_values(&fv);
        let f_norm = wdot(w, &fv, &fv).sqrt();
        if fhat[0].abs() > MEAN_ZERO_TOL * f_norm.max(1.0) {
            return Err(Error::MeanZeroViolation(fhat[0] * self.basis.q0));
        }
        fhat[0] = 0.0;
        let len = self.len();
        let s11 = self.stiffness.view((1, 1), (len - 1, len - 1)).into_owned();
        let rhs = DVector::from_iterator(len - 1, fhat[1..].iter().copied());
        let chol = s11
            .cholesky()
            .ok_or_else(|| Error::DegenerateInput("stiffness is singular off the constants".into()))?;
        let sol = chol.solve(&rhs);
        let mut u = vec![0.0; len];
        u[1..].copy_from_slice(sol.as_slice());

        let lu = self.span_generator(&u);
        let r: Vec<f64> = lu.iter().zip(&fv).map(|(l, f)| -l - f).collect();
        let residual = wdot(w, &r, &r).sqrt();
        let fh = self.span_values(&fhat);
        let d: Vec<f64> = fv.iter().zip(&fh).map(|(a, b)| a - b).collect();
        let projection_error = wdot(w, &d, &d).sqrt();
        Ok(PoissonSolution {
            u: self.field(u, format!("poisson({})", f.label())),
            residual,
            f_norm,
            projection_error,
        })
    }

    /// `∫|∇f|² − c∫f² ≥ ∫|c∇u − ∇f|² ≥ 0` with `c = 1 + K_w` and `−L_w u = f`,
    /// evaluated for the projection of `f` onto the span.
    pub fn duality_stability_residual(&self, f: &dyn ScalarField, opts: &CheckOptions) -> Result<InequalityCheck> {
        let c = 1.0 + self.measure.weight().curvature()?;
        let sol = self.poisson_solve(f)?;
        let mut fhat = self.project(f)?;
        fhat[0] = 0.0;
        let w = &self.tape.weights;
        let n = self.basis.dim;
        let gf = self.span_gradients(&fhat);
        let gu = self.span_gradients(sol.u.coefficients());
        let fv = self.span_values(&fhat);
        let mut energy = 0.0;
        let mut middle = 0.0;
        for (i, wi) in w.iter().enumerate() {
            for a in 0..n {
                let df = gf[i * n + a];
                let r = c * gu[i * n + a] - df;
                energy += wi * df * df;
                middle += wi * r * r;
            }
        }
        let l2 = wdot(w, &fv, &fv);
        let rhs = energy - c * l2;
        Ok(
            InequalityCheck::new("poincare_duality", middle, rhs, c, opts.tolerance)?
                .with_field(f.label())
                .diag("energy", energy)
                .diag("l2_sq", l2)
                .diag("middle", middle)
                .diag("projection_error", sol.projection_error)
                .diag("poisson_residual", sol.residual),
        )
    }

    fn evolve(&self, c: &[f64], t: f64) -> Vec<f64> {
        let y = self.eigenvectors.tr_mul(&DVector::from_column_slice(c));
        let y = DVector::from_iterator(
            y.len(),
            y.iter().zip(&self.eigenvalues).map(|(y, l)| y * (-l * t).exp()),
        );
        (&self.eigenvectors * y).as_slice().to_vec()
    }

    /// `P_t f = Σ e^{−λ_k t}⟨f, e_k⟩ e_k` for the projection of `f`.
    pub fn semigroup_apply(&self, f: &dyn ScalarField, t: f64) -> Result<GalerkinField> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::Parameter(format!("time must be nonnegative, got {t}")));
        }
        let c = self.project(f)?;
        Ok(self.field(self.evolve(&c, t), format!("P_{t}({})", f.label())))
    }

    /// Checks that `φ` decreases on `grid` and that every difference quotient
    /// obeys `−Δφ/Δt ≤ 2e^{−2(1+K)t}(q−p)(∫|∇f|^q)^{2/q}·(1+DECAY_SLACK)` at the
    /// left endpoint of its cell.
    pub fn semigroup_decay_check(
        &self,
        f: &dyn ScalarField,
        p: f64,
        q: f64,
        grid: &[f64],
        allow_shift: bool,
    ) -> Result<DecayTable> {
        if !(p >= 1.0 && q > p && q.is_finite()) {
            return Err(Error::Parameter(format!("need 1 ≤ p < q, got p = {p}, q = {q}")));
        }
        if grid.len() < 2
            || grid[0] < 0.0
            || grid.windows(2).any(|w| !(w[1] > w[0]))
            || !grid[grid.len() - 1].is_finite()
        {
            return Err(Error::Parameter(
                "time grid must be finite, nonnegative and strictly increasing".into(),
            ));
        }
        let c = 1.0 + self.measure.weight().curvature()?;
        let n = self.basis.dim;
        let w = &self.tape.weights;
        let mut fv = self.node_values(f)?;
        let min = fv.iter().copied().fold(f64::INFINITY, f64::min);
        let shift = if min < 0.0 {
            if !allow_shift {
                return Err(Error::Domain(format!(
                    "field takes the negative value {min:.6e} on a node"
                )));
            }
            let s = -min + 1e-6;
            for v in fv.iter_mut() {
                *v += s;
            }
            Some(s)
        } else {
            None
        };
        let gf = self.node_gradients(f);
        let gnorm: Vec<f64> = gf
            .chunks(n)
            .map(|g| g.iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect();
        let energy_q: f64 = gnorm.iter().zip(w).map(|(g, w)| w * g.powf(q)).sum();
        let e2 = energy_q.powf(2.0 / q);

        let g: Vec<f64> = fv.iter().map(|v| v.powf(p)).collect();
        let ghat = self.project_values(&g);
        let phi_of = |vals: &[f64]| -> f64 {
            let s: f64 = vals.iter().zip(w).map(|(v, w)| w * v.max(0.0).powf(q / p)).sum();
            s.powf(2.0 / q)
        };
        let mut coefs = Vec::with_capacity(grid.len());
        let mut phis = Vec::with_capacity(grid.len());
        for &t in grid {
            let ct = self.evolve(&ghat, t);
            phis.push(phi_of(&self.span_values(&ct)));
            coefs.push(ct);
        }
        let phi_zero = fv.iter().zip(w).map(|(v, w)| w * v.powf(q)).sum::<f64>().powf(2.0 / q);
        let mean_g: f64 = g.iter().zip(w).map(|(g, w)| g * w).sum();
        let phi_limit = mean_g.powf(2.0 / p);
        let limit_galerkin = (ghat[0] * self.basis.q0).powf(2.0 / p);

        let mut rows = Vec::with_capacity(grid.len());
        let mut decreasing = true;
        let mut pass = true;
        for i in 0..grid.len() {
            if i + 1 < grid.len() {
                let dt = grid[i + 1] - grid[i];
                let quotient = -(phis[i + 1] - phis[i]) / dt;
                let bound = 2.0 * (-2.0 * c * grid[i]).exp() * (q - p) * e2 * (1.0 + DECAY_SLACK);
                let ok = phis[i + 1] < phis[i] && quotient <= bound;
                decreasing &= phis[i + 1] < phis[i];
                pass &= ok;
                rows.push(DecayRow {
                    t: grid[i],
                    phi: phis[i],
                    quotient: Some(quotient),
                    bound: Some(bound),
                    pass: ok,
                });
            } else {
                rows.push(DecayRow {
                    t: grid[i],
                    phi: phis[i],
                    quotient: None,
                    bound: None,
                    pass: true,
                });
            }
        }

        let gradient_bound_excess = if q == 2.0 && (p == 1.0 || p == 1.5) {
            let dg: Vec<f64> = fv.iter().zip(&gnorm).map(|(v, gn)| p * v.powf(p - 1.0) * gn).collect();
            let dghat = self.project_values(&dg);
            let mut worst = f64::NEG_INFINITY;
            for (k, &t) in grid.iter().enumerate() {
                let grad = self.span_gradients(&coefs[k]);
                let pt = self.span_values(&self.evolve(&dghat, t));
                for i in 0..w.len() {
                    let lhs: f64 = grad[i * n..(i + 1) * n].iter().map(|v| v * v).sum();
                    worst = worst.max(lhs - (-2.0 * c * t).exp() * pt[i] * pt[i]);
                }
            }
            Some(worst)
        } else {
            None
        };

        Ok(DecayTable {
            field: f.label(),
            p,
            q,
            curvature_bound: c,
            rows,
            shift,
            energy_q,
            phi_zero,
            phi_limit,
            phi_zero_residual: (grid[0] == 0.0).then(|| (phis[0] - phi_zero).abs()),
            phi_limit_residual: (limit_galerkin - phi_limit).abs(),
            gradient_bound_excess,
            decreasing,
            pass,
        })
    }
}

/// Ascending eigenpairs of a symmetric matrix; round-off negatives are clamped to 0.
fn sorted_eigen(a: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let len = a.nrows();
    let eig = SymmetricEigen::new(a.clone());
    let mut order: Vec<usize> = (0..len).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let scale = eig.eigenvalues.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut values = Vec::with_capacity(len);
    for &i in &order {
        let l = eig.eigenvalues[i];
        if l < -1e-10 * scale {
            return Err(Error::Evaluation(format!("stiffness has negative eigenvalue {l:.3e}")));
        }
        values.push(l.max(0.0));
    }
    let vectors = DMatrix::from_fn(len, len, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}
