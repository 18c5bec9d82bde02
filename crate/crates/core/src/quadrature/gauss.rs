//! One-dimensional Gauss rules from three-term recurrences.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};
use statrs::function::gamma::ln_gamma;

/// Nodes and weights of a one-dimensional rule, nodes ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule1d {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Golub–Welsch: eigen-decomposition of the Jacobi matrix built from
/// monic recurrence coefficients `alpha[0..n]`, `beta[1..n]` (`beta[0]` unused)
/// and total mass `mu0`.
pub fn golub_welsch(alpha: &[f64], beta: &[f64], mu0: f64) -> Rule1d {
    let n = alpha.len();
    let mut j = DMatrix::zeros(n, n);
    for k in 0..n {
        j[(k, k)] = alpha[k];
        if k + 1 < n {
            let b = beta[k + 1].sqrt();
            j[(k, k + 1)] = b;
            j[(k + 1, k)] = b;
        }
    }
    let eig = SymmetricEigen::new(j);
    let mut nodes: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    nodes.sort_by(f64::total_cmp);
    // Christoffel numbers 1/Σ p_k(t)² from the orthonormal recurrence keep
    // full relative accuracy in the tails, unlike squared eigenvector entries.
    let weights = nodes
        .iter()
        .map(|&t| {
            let mut prev = 0.0;
            let mut cur = 1.0 / mu0.sqrt();
            let mut sum = cur * cur;
            for k in 0..n - 1 {
                let sb = if k == 0 { 0.0 } else { beta[k].sqrt() };
                let next = ((t - alpha[k]) * cur - sb * prev) / beta[k + 1].sqrt();
                prev = cur;
                cur = next;
                sum += cur * cur;
            }
            1.0 / sum
        })
        .collect();
    Rule1d { nodes, weights }
}

/// Gauss–Hermite for `e^{-t²/2}` on ℝ.
pub fn hermite(n: usize) -> Rule1d {
    let alpha = vec![0.0; n];
    let beta: Vec<f64> = (0..n).map(|k| k as f64).collect();
    let mut r = golub_welsch(&alpha, &beta, (2.0 * std::f64::consts::PI).sqrt());
    // the rule is symmetric; enforce it exactly
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let t = 0.5 * (r.nodes[j] - r.nodes[i]);
        let w = 0.5 * (r.weights[i] + r.weights[j]);
        r.nodes[i] = -t;
        r.nodes[j] = t;
        r.weights[i] = w;
        r.weights[j] = w;
    }
    if n % 2 == 1 {
        r.nodes[n / 2] = 0.0;
    }
    r
}

/// Gauss–Legendre on [-1, 1].
pub fn legendre(n: usize) -> Rule1d {
    jacobi(n, 0.0, 0.0)
}

/// Gauss–Jacobi for `(1-x)^a (1+x)^b` on [-1, 1].
pub fn jacobi(n: usize, a: f64, b: f64) -> Rule1d {
    let s = a + b;
    let mut alpha = vec![0.0; n];
    let mut beta = vec![0.0; n];
    for k in 0..n {
        let kf = k as f64;
        let t = 2.0 * kf + s;
        alpha[k] = if k == 0 {
            (b - a) / (s + 2.0)
        } else {
            (b * b - a * a) / (t * (t + 2.0))
        };
        if k >= 1 {
            beta[k] = if k == 1 {
                4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + s) * (2.0 + s) * (3.0 + s))
            } else {
                4.0 * kf * (kf + a) * (kf + b) * (kf + s) / (t * t * (t + 1.0) * (t - 1.0))
            };
        }
    }
    let mu0 = ((s + 1.0) * std::f64::consts::LN_2 + ln_gamma(a + 1.0) + ln_gamma(b + 1.0) - ln_gamma(s + 2.0)).exp();
    golub_welsch(&alpha, &beta, mu0)
}

/// `∫_0^∞ t^{a+k} e^{-t²/2} dt = 2^{(a+k-1)/2} Γ((a+k+1)/2)`.
pub fn half_line_moment(a: f64, k: usize) -> f64 {
    let e = a + k as f64;
    (0.5 * (e - 1.0) * std::f64::consts::LN_2 + ln_gamma(0.5 * (e + 1.0))).exp()
}

/// Gauss rule for `t^a e^{-t²/2}` on (0, ∞).
///
/// Recurrence coefficients come from a discretized Stieltjes procedure on a
/// composite rule (Gauss–Jacobi on [0, 1] absorbing `t^a`, Gauss–Legendre on
/// unit panels beyond), which integrates the polynomials involved against the
/// smooth Gaussian factor to working precision.
pub fn half_line(n: usize, a: f64) -> Rule1d {
    let (alpha, beta) = half_line_recurrence(n, a);
    golub_welsch(&alpha, &beta, half_line_moment(a, 0))
}

fn half_line_recurrence(n: usize, a: f64) -> (Vec<f64>, Vec<f64>) {
    let m = n + 35;
    let tmax = (4.0 * n as f64 + a).sqrt() + 12.0;
    let mut t = Vec::new();
    let mut wt = Vec::new();
    let jac = jacobi(m, 0.0, a);
    let scale = 0.5f64.powf(a + 1.0);
    for (x, w) in jac.nodes.iter().zip(&jac.weights) {
        let s = 0.5 * (1.0 + x);
        t.push(s);
        wt.push(w * scale * (-0.5 * s * s).exp());
    }
    let leg = legendre(m);
    let mut lo = 1.0;
    while lo < tmax {
        for (x, w) in leg.nodes.iter().zip(&leg.weights) {
            let s = lo + 0.5 * (1.0 + x);
            t.push(s);
            wt.push(0.5 * w * s.powf(a) * (-0.5 * s * s).exp());
        }
        lo += 1.0;
    }
    stieltjes(&t, &wt, n)
}

/// Orthonormal Stieltjes procedure on a discrete measure.
fn stieltjes(t: &[f64], w: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mass: f64 = w.iter().sum();
    let mut alpha = vec![0.0; n];
    let mut beta = vec![0.0; n];
    beta[0] = mass;
    let mut prev = vec![0.0; t.len()];
    let mut cur = vec![1.0 / mass.sqrt(); t.len()];
    for k in 0..n {
        alpha[k] = t.iter().zip(w).zip(&cur).map(|((ti, wi), pi)| wi * ti * pi * pi).sum();
        if k + 1 == n {
            break;
        }
        let sb = if k == 0 { 0.0 } else { beta[k].sqrt() };
        let mut next: Vec<f64> = (0..t.len())
            .map(|i| (t[i] - alpha[k]) * cur[i] - sb * prev[i])
            .collect();
        let norm2: f64 = next.iter().zip(w).map(|(p, wi)| wi * p * p).sum();
        beta[k + 1] = norm2;
        let inv = 1.0 / norm2.sqrt();
        next.iter_mut().for_each(|p| *p *= inv);
        prev = std::mem::replace(&mut cur, next);
    }
    (alpha, beta)
}

type Key = (u64, bool, usize);

/// Cached rule for `|t|^a e^{-t²/2}`, on (0, ∞) when `half` and on ℝ otherwise.
pub(crate) fn base_rule(a: f64, half: bool, n: usize) -> Arc<Rule1d> {
    static CACHE: OnceLock<Mutex<HashMap<Key, Arc<Rule1d>>>> = OnceLock::new();
    let key = (a.to_bits(), half, n);
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(r) = cache.lock().expect("rule cache poisoned").get(&key) {
        return r.clone();
    }
    let rule = if half {
        half_line(n, a)
    } else if a == 0.0 {
        hermite(n)
    } else {
        // |t|^a on ℝ: mirror the half-line rule
        let h = half_line(n.div_ceil(2), a);
        let mut nodes: Vec<f64> = h.nodes.iter().rev().map(|t| -t).collect();
        nodes.extend(&h.nodes);
        let mut weights: Vec<f64> = h.weights.iter().rev().copied().collect();
        weights.extend(&h.weights);
        Rule1d { nodes, weights }
    };
    let rule = Arc::new(rule);
    cache.lock().expect("rule cache poisoned").insert(key, rule.clone());
    rule
}
