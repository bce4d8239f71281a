//! Composite Gauss-Legendre quadrature with refinement by node doubling.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A fixed composite rule: `panels` equal panels, each with an `order`-point rule.
#[derive(Clone, Debug)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn composite(a: f64, b: f64, panels: usize, order: usize) -> Rule {
        let (x, w) = gauss_legendre(order);
        let h = (b - a) / panels as f64;
        let mut nodes = Vec::with_capacity(panels * order);
        let mut weights = Vec::with_capacity(panels * order);
        for p in 0..panels {
            let lo = a + p as f64 * h;
            for (xi, wi) in x.iter().zip(&w) {
                nodes.push(lo + 0.5 * h * (xi + 1.0));
                weights.push(0.5 * h * wi);
            }
        }
        Rule { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: FnMut(f64) -> Complex64>(&self, mut f: F) -> Complex64 {
        // pairwise summation keeps the result independent of evaluation scheduling
        let terms: Vec<Complex64> = self.nodes.iter().zip(&self.weights).map(|(&x, &w)| f(x) * w).collect();
        pairwise_sum(&terms)
    }
}

pub fn pairwise_sum(xs: &[Complex64]) -> Complex64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let (l, r) = xs.split_at(xs.len() / 2);
    pairwise_sum(l) + pairwise_sum(r)
}

/// Refinement settings: start with `panels` panels and double until successive estimates
/// agree to `tol * max(1, |value|)` or `max_doublings` is exhausted.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadSpec {
    pub panels: usize,
    pub order: usize,
    pub tol: f64,
    pub max_doublings: usize,
}

impl Default for QuadSpec {
    fn default() -> Self {
        QuadSpec { panels: 4, order: 16, tol: 1e-10, max_doublings: 8 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuadResult {
    pub value: Complex64,
    pub panels: usize,
    /// Estimates at each refinement level.
    pub trace: Vec<Complex64>,
}

fn converged(prev: Complex64, cur: Complex64, tol: f64) -> bool {
    (cur - prev).norm() <= tol * cur.norm().max(1.0)
}

fn inconclusive(trace: &[Complex64]) -> Error {
    let steps: Vec<String> = trace.iter().map(|z| format!("{:.3e}{:+.3e}i", z.re, z.im)).collect();
    Error::Inconclusive(format!("quadrature did not converge; refinement trace [{}]", steps.join(", ")))
}

/// Adaptive one-dimensional integral of `f` over `[a, b]`.
pub fn integrate<F: FnMut(f64) -> Complex64>(mut f: F, a: f64, b: f64, spec: &QuadSpec) -> Result<QuadResult> {
    let mut panels = spec.panels.max(1);
    let mut trace = vec![Rule::composite(a, b, panels, spec.order).integrate(&mut f)];
    for _ in 0..spec.max_doublings {
        panels *= 2;
        let cur = Rule::composite(a, b, panels, spec.order).integrate(&mut f);
        let prev = *trace.last().expect("nonempty");
        trace.push(cur);
        if converged(prev, cur, spec.tol) {
            return Ok(QuadResult { value: cur, panels, trace });
        }
    }
    Err(inconclusive(&trace))
}

/// Tensor-product rule over a box, one composite rule per axis.
pub fn integrate_box_fixed<F: FnMut(&[f64]) -> Complex64>(
    mut f: F,
    bounds: &[(f64, f64)],
    panels: usize,
    order: usize,
) -> Complex64 {
    let rules: Vec<Rule> = bounds.iter().map(|&(a, b)| Rule::composite(a, b, panels, order)).collect();
    let dim = rules.len();
    let mut point = vec![0.0; dim];
    let mut terms = Vec::new();
    let mut idx = vec![0usize; dim];
    let total: usize = rules.iter().map(Rule::len).product();
    for _ in 0..total {
        let mut w = 1.0;
        for d in 0..dim {
            point[d] = rules[d].nodes[idx[d]];
            w *= rules[d].weights[idx[d]];
        }
        terms.push(f(&point) * w);
        for d in (0..dim).rev() {
            idx[d] += 1;
            if idx[d] < rules[d].len() {
                break;
            }
            idx[d] = 0;
        }
    }
    pairwise_sum(&terms)
}

/// Adaptive tensor-product integral; all axes are refined together.
pub fn integrate_box<F: FnMut(&[f64]) -> Complex64>(
    mut f: F,
    bounds: &[(f64, f64)],
    spec: &QuadSpec,
) -> Result<QuadResult> {
    let mut panels = spec.panels.max(1);
    let mut trace = vec![integrate_box_fixed(&mut f, bounds, panels, spec.order)];
    for _ in 0..spec.max_doublings {
        panels *= 2;
        let cur = integrate_box_fixed(&mut f, bounds, panels, spec.order);
        let prev = *trace.last().expect("nonempty");
        trace.push(cur);
        if converged(prev, cur, spec.tol) {
            return Ok(QuadResult { value: cur, panels, trace });
        }
    }
    Err(inconclusive(&trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_and_weights() {
        let (x, w) = gauss_legendre(5);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
        // exact for polynomials of degree 2n - 1
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
        assert!((s - 2.0 / 9.0).abs() < 1e-14);
        let (x, w) = gauss_legendre(64);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.cos()).sum();
        assert!((s - 2.0 * 1f64.sin()).abs() < 1e-14);
    }

    #[test]
    fn adaptive_gaussian() {
        let spec = QuadSpec::default();
        let r = integrate(|x| Complex64::new((-x * x).exp(), 0.0), -10.0, 10.0, &spec).unwrap();
        assert!((r.value.re - std::f64::consts::PI.sqrt()).abs() < 1e-12);
        assert!(r.trace.len() >= 2);
    }

    #[test]
    fn box_integral_factorizes() {
        let spec = QuadSpec { panels: 2, order: 12, tol: 1e-12, max_doublings: 4 };
        let r = integrate_box(|p| Complex64::new(p[0] * p[1].exp(), 0.0), &[(0.0, 1.0), (0.0, 2.0)], &spec)
            .unwrap();
        assert!((r.value.re - 0.5 * (2f64.exp() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn nonconvergence_is_inconclusive() {
        let spec = QuadSpec { panels: 1, order: 2, tol: 1e-15, max_doublings: 2 };
        let r = integrate(|x| Complex64::new((50.0 * x).sin(), 0.0), 0.0, 10.0, &spec);
        assert!(matches!(r, Err(Error::Inconclusive(m)) if m.contains("trace")));
    }
}
