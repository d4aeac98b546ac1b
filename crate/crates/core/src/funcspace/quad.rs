//! Gauss–Legendre quadrature: cached rules, adaptive bisection and fixed
//! composite rules.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureSpec {
    /// Nodes per panel.
    pub order: usize,
    /// Accepted error relative to the integral of the absolute value.
    pub tolerance: f64,
    /// Absolute error floor, spread over the integration range.
    pub abs_floor: f64,
    pub max_depth: u32,
    pub initial_panels: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec { order: 16, tolerance: 1e-8, abs_floor: 1e-15, max_depth: 40, initial_panels: 2 }
    }
}

impl QuadratureSpec {
    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tolerance = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.order < 2 || self.order > 128 {
            return Err(Error::Config(format!("quadrature order {} outside 2..=128", self.order)));
        }
        if !(self.tolerance > 0.0) || !(self.abs_floor >= 0.0) || self.initial_panels == 0 {
            return Err(Error::Config("quadrature tolerance must be positive and panels nonzero".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadResult {
    pub value: C64,
    pub error: f64,
    pub evaluations: usize,
    pub converged: bool,
}

impl QuadResult {
    pub fn zero() -> Self {
        QuadResult { value: C64::new(0.0, 0.0), error: 0.0, evaluations: 0, converged: true }
    }

    pub fn into_checked(self, lo: f64, hi: f64) -> Result<C64> {
        if self.converged {
            Ok(self.value)
        } else {
            Err(Error::QuadratureNotConverged { lo, hi, estimate: self.error })
        }
    }
}

/// Nodes and weights on [-1, 1].
#[derive(Debug)]
pub struct GlRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

fn compute_rule(n: usize) -> GlRule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p1 = x;
                p0 = 1.0;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    GlRule { nodes, weights }
}

pub fn gl_rule(n: usize) -> Arc<GlRule> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GlRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    guard.entry(n).or_insert_with(|| Arc::new(compute_rule(n))).clone()
}

fn panel<F: FnMut(f64) -> C64>(f: &mut F, rule: &GlRule, a: f64, b: f64) -> (C64, f64) {
    let h = 0.5 * (b - a);
    let m = 0.5 * (a + b);
    let mut sum = C64::new(0.0, 0.0);
    let mut abs = 0.0;
    for (x, w) in rule.nodes.iter().zip(&rule.weights) {
        let v = f(m + h * x);
        sum += v * *w;
        abs += v.norm() * w;
    }
    (sum * h, abs * h)
}

/// Adaptive Gauss–Legendre by panel bisection.
///
/// A panel is accepted once the fine and coarse estimates differ by at most
/// `tolerance` times the larger of the panel's integral of `|f|` and its
/// length share of the initial estimate of `∫|f|` (plus a share of the
/// absolute floor). The total error is thus controlled relative to `∫|f|`
/// without refining panels where `f` is negligible.
pub fn integrate<F: FnMut(f64) -> C64>(mut f: F, lo: f64, hi: f64, spec: &QuadratureSpec) -> QuadResult {
    if !(hi > lo) {
        return QuadResult::zero();
    }
    let rule = gl_rule(spec.order);
    let n0 = spec.initial_panels.max(1);
    let width = hi - lo;
    let mut stack = Vec::with_capacity(64);
    let mut evaluations = 0;
    let mut global_abs = 0.0;
    for i in 0..n0 {
        let a = lo + width * i as f64 / n0 as f64;
        let b = if i + 1 == n0 { hi } else { lo + width * (i + 1) as f64 / n0 as f64 };
        let (v, abs) = panel(&mut f, &rule, a, b);
        evaluations += spec.order;
        global_abs += abs;
        stack.push((a, b, v, abs, 0u32));
    }
    let mut total = C64::new(0.0, 0.0);
    let mut error = 0.0;
    let mut converged = true;
    while let Some((a, b, whole, _, depth)) = stack.pop() {
        let m = 0.5 * (a + b);
        let (l, labs) = panel(&mut f, &rule, a, m);
        let (r, rabs) = panel(&mut f, &rule, m, b);
        evaluations += 2 * spec.order;
        let est = (l + r - whole).norm();
        let share = (b - a) / width;
        let allowed = spec.tolerance * (labs + rabs).max(global_abs * share) + spec.abs_floor * share;
        if est <= allowed || depth >= spec.max_depth || !est.is_finite() {
            if est > allowed {
                converged = false;
            }
            total += l + r;
            error += est;
        } else {
            stack.push((a, m, l, labs, depth + 1));
            stack.push((m, b, r, rabs, depth + 1));
        }
    }
    QuadResult { value: total, error, evaluations, converged }
}

/// Adaptive integration over a union of disjoint intervals.
pub fn integrate_intervals<F: FnMut(f64) -> C64>(mut f: F, intervals: &[(f64, f64)], spec: &QuadratureSpec) -> QuadResult {
    let mut out = QuadResult::zero();
    for &(lo, hi) in intervals {
        let r = integrate(&mut f, lo, hi, spec);
        out.value += r.value;
        out.error += r.error;
        out.evaluations += r.evaluations;
        out.converged &= r.converged;
    }
    out
}

/// Composite rule with `panels` equal panels of the given order.
pub fn integrate_fixed<F: FnMut(f64) -> C64>(mut f: F, lo: f64, hi: f64, panels: usize, order: usize) -> C64 {
    if !(hi > lo) {
        return C64::new(0.0, 0.0);
    }
    let rule = gl_rule(order);
    let h = (hi - lo) / panels as f64;
    (0..panels).map(|i| panel(&mut f, &rule, lo + h * i as f64, lo + h * (i + 1) as f64).0).sum()
}

/// Nodes and weights of a composite rule, for callers that reuse samples.
pub fn composite_nodes(lo: f64, hi: f64, panels: usize, order: usize) -> (Vec<f64>, Vec<f64>) {
    let rule = gl_rule(order);
    let h = (hi - lo) / panels as f64;
    let mut xs = Vec::with_capacity(panels * order);
    let mut ws = Vec::with_capacity(panels * order);
    for i in 0..panels {
        let m = lo + h * (i as f64 + 0.5);
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            xs.push(m + 0.5 * h * x);
            ws.push(0.5 * h * w);
        }
    }
    (xs, ws)
}

/// Merge overlapping intervals and drop empty ones.
pub fn merge_intervals(mut v: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    v.retain(|&(a, b)| b > a);
    v.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(v.len());
    for (a, b) in v {
        match out.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}
