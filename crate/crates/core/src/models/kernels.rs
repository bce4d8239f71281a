//! Smeared orthogonality of the matrix-element kernels.
//!
//! Kernels are never sampled as distributions. Delta constraints are resolved through the
//! collapsed action, and plane-wave directions are either integrated by quadrature or
//! collapsed analytically with the Jacobian read off from the phase.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::expr::{Compiled, Expr};
use crate::quadrature::{integrate, integrate_box, QuadSpec, Rule};
use crate::reduction::J_VAR;

use super::GroupModel;

/// Separable Gaussian `a(q, q') = exp(-(|q - c|^2 + |q' - c'|^2) / (2 w^2))`.
#[derive(Clone, Debug, PartialEq)]
pub struct Gaussian {
    pub q: Vec<f64>,
    pub qp: Vec<f64>,
    pub width: f64,
}

impl Gaussian {
    pub fn new(q: &[f64], qp: &[f64], width: f64) -> Self {
        Gaussian { q: q.to_vec(), qp: qp.to_vec(), width }
    }

    fn factor(c: &[f64], w: f64, z: &[f64]) -> f64 {
        let d2: f64 = c.iter().zip(z).map(|(a, b)| (a - b).powi(2)).sum();
        (-d2 / (2.0 * w * w)).exp()
    }

    pub fn eval(&self, q: &[f64], qp: &[f64]) -> f64 {
        Self::factor(&self.q, self.width, q) * Self::factor(&self.qp, self.width, qp)
    }
}

/// Center and width of the product of two isotropic Gaussians.
fn product_gaussian(ca: &[f64], wa: f64, cb: &[f64], wb: f64) -> (Vec<f64>, f64) {
    let (pa, pb) = (1.0 / (wa * wa), 1.0 / (wb * wb));
    let c = ca.iter().zip(cb).map(|(a, b)| (a * pa + b * pb) / (pa + pb)).collect();
    (c, (pa + pb).powf(-0.5))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmokeReport {
    /// Group-side pairing.
    pub lhs: Complex64,
    /// Direct pairing, or the matched reference for a mismatch test.
    pub rhs: Complex64,
    /// `|lhs - rhs| / |rhs|`, or `|lhs| / |rhs|` for a mismatch test.
    pub deviation: f64,
    pub panels: usize,
}

const BOX_SIGMAS: f64 = 7.0;

struct H3Kernel {
    arg: Compiled,
    phase: Compiled,
}

impl H3Kernel {
    fn new(model: &GroupModel) -> Result<Self> {
        let slots = ["x1", "x2", "x3", "q", J_VAR];
        let c = &model.kernel.collapsed;
        if c.args.len() != 1 {
            return Err(Error::UnsupportedModel("expected a one-dimensional base".into()));
        }
        Ok(H3Kernel { arg: Compiled::new(&c.args[0], &slots)?, phase: Compiled::new(&c.phase, &slots)? })
    }

    /// `(q', D)` with `D = exp(phase)`.
    fn at(&self, x: [f64; 3], q: f64, j: f64) -> Result<(f64, Complex64)> {
        let s = [x[0], x[1], x[2], q, j];
        Ok((self.arg.eval_real(&s)?.re, self.phase.eval_real(&s)?.exp()))
    }
}

/// `int dx1 dx2 conj(A_J) B_Jt` where `A_J(x1, x2) = int a(q, q'(q, x)) conj(D^J(x)) dq` at
/// `x3 = 0`.
fn h3_plane_pairing(
    k: &H3Kernel,
    a: &Gaussian,
    b: &Gaussian,
    j: f64,
    jt: f64,
    quad: &QuadSpec,
) -> Result<(Complex64, usize)> {
    let wmin = a.width.min(b.width);
    let wmax = a.width.max(b.width);
    let lo = a.q[0].min(b.q[0]) - BOX_SIGMAS * wmax;
    let hi = a.q[0].max(b.q[0]) + BOX_SIGMAS * wmax;
    let inner = Rule::composite(lo, hi, 16, 16);
    let x1_max = BOX_SIGMAS / (j.abs().min(jt.abs()) * wmin);
    let shift = (a.qp[0] - a.q[0]).abs().max((b.qp[0] - b.q[0]).abs());
    let x2_max = shift + 1.5 * BOX_SIGMAS * wmax;
    let mut failure = None;
    let r = integrate_box(
        |x| {
            let side = |g: &Gaussian, jj: f64, conj: bool| -> Result<Complex64> {
                let mut terms = Vec::with_capacity(inner.len());
                for (&q, &w) in inner.nodes.iter().zip(&inner.weights) {
                    let (qp, d) = k.at([x[0], x[1], 0.0], q, jj)?;
                    let d = if conj { d.conj() } else { d };
                    terms.push(d * (w * g.eval(&[q], &[qp])));
                }
                Ok(crate::quadrature::pairwise_sum(&terms))
            };
            match side(a, j, true).and_then(|l| Ok(l * side(b, jt, false)?)) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    Complex64::new(0.0, 0.0)
                }
            }
        },
        &[(-x1_max, x1_max), (-x2_max, x2_max)],
        quad,
    )?;
    match failure {
        Some(e) => Err(e),
        None => Ok((r.value, r.panels)),
    }
}

/// Matched `J`: the `x3` integral supplies `2 pi delta(J - Jt)`, and the remaining pairing
/// must equal `(2 pi / |J|) int a b dq dq'`.
pub fn h3_matched(model: &GroupModel, a: &Gaussian, b: &Gaussian, j: f64, quad: &QuadSpec) -> Result<SmokeReport> {
    let k = H3Kernel::new(model)?;
    let (lhs, panels) = h3_plane_pairing(&k, a, b, j, j, quad)?;
    let (cq, wq) = product_gaussian(&a.q, a.width, &b.q, b.width);
    let (cp, wp) = product_gaussian(&a.qp, a.width, &b.qp, b.width);
    let span = |c: f64, w: f64| (c - BOX_SIGMAS * w, c + BOX_SIGMAS * w);
    let direct = integrate_box(
        |p| Complex64::new(a.eval(&p[..1], &p[1..]) * b.eval(&p[..1], &p[1..]), 0.0),
        &[span(cq[0], wq), span(cp[0], wp)],
        quad,
    )?
    .value;
    let rhs = direct * (2.0 * PI / j.abs());
    Ok(SmokeReport { lhs, rhs, deviation: (lhs - rhs).norm() / rhs.norm(), panels })
}

/// Mismatched `J`, with the `x3` integral smeared by `exp(-x3^2 / (2 s^2))`; the deviation
/// is the mismatched pairing relative to the matched one under the same window.
pub fn h3_mismatched(
    model: &GroupModel,
    a: &Gaussian,
    b: &Gaussian,
    j: f64,
    jt: f64,
    window: f64,
    quad: &QuadSpec,
) -> Result<SmokeReport> {
    let k = H3Kernel::new(model)?;
    let x3_factor = |jj: f64, jjt: f64| -> Result<Complex64> {
        let l = BOX_SIGMAS * window * 1.5;
        let mut failure = None;
        let r = integrate(
            |x3| {
                let w = (-x3 * x3 / (2.0 * window * window)).exp();
                match (k.at([0.0, 0.0, x3], 0.0, jj), k.at([0.0, 0.0, x3], 0.0, jjt)) {
                    (Ok((_, d)), Ok((_, dt))) => d.conj() * dt * w,
                    (Err(e), _) | (_, Err(e)) => {
                        failure.get_or_insert(e);
                        Complex64::new(0.0, 0.0)
                    }
                }
            },
            -l,
            l,
            &QuadSpec { tol: 1e-12, ..*quad },
        )?;
        match failure {
            Some(e) => Err(e),
            None => Ok(r.value),
        }
    };
    let (mis, panels) = h3_plane_pairing(&k, a, b, j, jt, quad)?;
    let (matched, _) = h3_plane_pairing(&k, a, b, j, j, quad)?;
    let lhs = mis * x3_factor(j, jt)?;
    let rhs = matched * x3_factor(j, j)?;
    Ok(SmokeReport { lhs, rhs, deviation: lhs.norm() / rhs.norm(), panels })
}

/// Phase coefficients of the collapsed directions, `omega_k = d(phase)/d(x_k) / i`, and the
/// Jacobian determinant `det d(omega)/d(q)`.
struct Collapse {
    omega_jac: Compiled,
    args: Vec<Compiled>,
    haar: Compiled,
    modular: Compiled,
    density: Compiled,
}

fn collapse_for(model: &GroupModel, collapsed: &[&str]) -> Result<Collapse> {
    let action = &model.kernel.collapsed;
    let q = model.q_vars_str();
    if collapsed.len() != q.len() {
        return Err(Error::Input("collapse needs as many plane-wave directions as base coordinates".into()));
    }
    let mut slots: Vec<&str> = model.x_vars_str();
    slots.extend(q.iter());
    slots.push(J_VAR);
    let mut jac = Vec::new();
    for x in collapsed {
        let om = (action.phase.diff(x) * (-Expr::i())).simplify();
        if !om.diff(x).simplify().is_zero() {
            return Err(Error::Precondition(format!("phase is not linear in {x}")));
        }
        jac.push(q.iter().map(|qa| om.diff(qa).simplify()).collect::<Vec<_>>());
    }
    let det = det_expr(&jac);
    Ok(Collapse {
        omega_jac: Compiled::new(&det, &slots)?,
        args: action.args.iter().map(|e| Compiled::new(e, &slots)).collect::<Result<_>>()?,
        haar: Compiled::new(&model.haar.left, &slots)?,
        modular: Compiled::new(&model.modular_multiplier, &slots)?,
        density: Compiled::new(&model.lrep.measure_density, &slots)?,
    })
}

fn det_expr(m: &[Vec<Expr>]) -> Expr {
    match m.len() {
        0 => Expr::one(),
        1 => m[0][0].clone(),
        2 => (&m[0][0] * &m[1][1] - &m[0][1] * &m[1][0]).simplify(),
        n => {
            let mut terms = Vec::new();
            for c in 0..n {
                let minor: Vec<Vec<Expr>> =
                    m[1..].iter().map(|r| r.iter().enumerate().filter(|(k, _)| *k != c).map(|(_, e)| e.clone()).collect()).collect();
                let sign = if c % 2 == 0 { Expr::one() } else { -Expr::one() };
                terms.push(sign * &m[0][c] * det_expr(&minor));
            }
            Expr::sum(terms).simplify()
        }
    }
}

/// `g47` pairing at matched `J`: the `x1, x2` integrals collapse `q~ = q` with weight
/// `(2 pi)^2 rho(q)^2 / |det d(omega)/dq|`; the `(x3, x4, q)` integral is done by quadrature
/// with the left Haar density and, if `twist`, the modular multiplier at `q'`. The result is
/// compared with `2 pi^2 int a b dmu(q) dmu(q')`.
pub fn g47_pairing(
    model: &GroupModel,
    a: &Gaussian,
    b: &Gaussian,
    j: f64,
    twist: bool,
    quad: &QuadSpec,
) -> Result<SmokeReport> {
    let c = collapse_for(model, &["x1", "x2"])?;
    let (cq, wq) = product_gaussian(&a.q, a.width, &b.q, b.width);
    let (cp, wp) = product_gaussian(&a.qp, a.width, &b.qp, b.width);
    let reach = 6.0;
    let qbox: Vec<(f64, f64)> = cq.iter().map(|&m| (m - reach * wq, m + reach * wq)).collect();
    let pbox: Vec<(f64, f64)> = cp.iter().map(|&m| (m - reach * wp, m + reach * wp)).collect();
    if qbox[1].0 <= 0.0 || pbox[1].0 <= 0.0 {
        return Err(Error::Input("test functions must be supported in q2 > 0".into()));
    }
    // q' = (q1 - q2 x3, q2 e^{-x4}); for each q the (x3, x4) rectangle is the preimage of
    // the q' box, parametrized by s in [0, 1]^2.
    let x_range = |q: [f64; 2]| {
        let x3 = ((q[0] - pbox[0].1) / q[1], (q[0] - pbox[0].0) / q[1]);
        let x4 = ((q[1] / pbox[1].1).ln(), (q[1] / pbox[1].0).ln());
        (x3, x4)
    };
    let mut failure = None;
    let lhs = integrate_box(
        |p| {
            let q = [p[2], p[3]];
            let (x3r, x4r) = x_range(q);
            let x3 = x3r.0 + p[0] * (x3r.1 - x3r.0);
            let x4 = x4r.0 + p[1] * (x4r.1 - x4r.0);
            let area = (x3r.1 - x3r.0) * (x4r.1 - x4r.0);
            let slots = [0.0, 0.0, x3, x4, q[0], q[1], j];
            let val = (|| -> Result<Complex64> {
                let qp: Vec<f64> = c.args.iter().map(|e| e.eval_real(&slots).map(|z| z.re)).collect::<Result<_>>()?;
                let rho = c.density.eval_real(&slots)?;
                let weight = (2.0 * PI).powi(2) * rho * rho / c.omega_jac.eval_real(&slots)?.norm();
                let lam = if twist {
                    c.modular.eval_real(&[0.0, 0.0, x3, x4, qp[0], qp[1], j])?
                } else {
                    Complex64::new(1.0, 0.0)
                };
                Ok(c.haar.eval_real(&slots)? * lam * (weight * area * a.eval(&q, &qp) * b.eval(&q, &qp)))
            })();
            val.unwrap_or_else(|e| {
                failure.get_or_insert(e);
                Complex64::new(0.0, 0.0)
            })
        },
        &[(0.0, 1.0), (0.0, 1.0), qbox[0], qbox[1]],
        quad,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    let dmu = |g1: &Gaussian, g2: &Gaussian, primed: bool, bx: &[(f64, f64)]| -> Result<Complex64> {
        let slots_of = |p: &[f64]| [0.0, 0.0, 0.0, 0.0, p[0], p[1], j];
        let mut failure = None;
        let r = integrate_box(
            |p| {
                let (c1, c2) = if primed { (&g1.qp, &g2.qp) } else { (&g1.q, &g2.q) };
                let g = Gaussian::factor(c1, g1.width, p) * Gaussian::factor(c2, g2.width, p);
                match c.density.eval_real(&slots_of(p)) {
                    Ok(rho) => rho * g,
                    Err(e) => {
                        failure.get_or_insert(e);
                        Complex64::new(0.0, 0.0)
                    }
                }
            },
            bx,
            quad,
        )?;
        failure.map_or(Ok(r.value), Err)
    };
    let rhs = 2.0 * PI * PI * dmu(a, b, false, &qbox)? * dmu(a, b, true, &pbox)?;
    Ok(SmokeReport { lhs: lhs.value, rhs, deviation: (lhs.value - rhs).norm() / rhs.norm(), panels: lhs.panels })
}

/// Standard smoke cases for a bundled model, keyed by case name.
pub fn kernel_orthogonality_smoke(model: &GroupModel, quad: &QuadSpec) -> Result<Vec<(String, SmokeReport)>> {
    match model.name.as_str() {
        "heisenberg" => {
            let a = Gaussian::new(&[0.3], &[-0.2], 0.8);
            let b = Gaussian::new(&[-0.1], &[0.4], 0.6);
            Ok(vec![
                ("matched J = 1".into(), h3_matched(model, &a, &b, 1.0, quad)?),
                ("matched J = -2".into(), h3_matched(model, &a, &b, -2.0, quad)?),
                ("J = 1 vs -1".into(), h3_mismatched(model, &a, &b, 1.0, -1.0, 3.0, quad)?),
            ])
        }
        "g4_7" => {
            let a = Gaussian::new(&[0.2, 1.0], &[-0.1, 0.8], 0.15);
            let b = Gaussian::new(&[0.25, 1.1], &[-0.05, 0.85], 0.2);
            Ok(vec![
                ("twisted J = 1".into(), g47_pairing(model, &a, &b, 1.0, true, quad)?),
                ("twisted J = -1".into(), g47_pairing(model, &a, &b, -1.0, true, quad)?),
            ])
        }
        other => Err(Error::UnsupportedModel(format!("no kernel smoke cases for `{other}`"))),
    }
}

pub const SMOKE_TOL: f64 = 1e-3;

pub fn smoke_quad() -> QuadSpec {
    QuadSpec { panels: 1, order: 16, tol: 1e-6, max_doublings: 4 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{g47::G47, heisenberg::Heisenberg, ModelFactory, ModelParams};

    #[test]
    fn product_gaussian_oracle() {
        let (c, w) = product_gaussian(&[0.0], 1.0, &[2.0], 1.0);
        assert!((c[0] - 1.0).abs() < 1e-15 && (w - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn h3_smoke() {
        let m = Heisenberg.build(&ModelParams::default()).unwrap();
        for (name, r) in kernel_orthogonality_smoke(&m, &smoke_quad()).unwrap() {
            assert!(r.deviation <= SMOKE_TOL, "{name}: {r:?}");
        }
    }

    #[test]
    fn g47_twist_matters() {
        let m = G47.build(&ModelParams::default()).unwrap();
        let a = Gaussian::new(&[0.2, 1.0], &[-0.1, 0.8], 0.15);
        let b = Gaussian::new(&[0.25, 1.1], &[-0.05, 0.85], 0.2);
        let t = g47_pairing(&m, &a, &b, 1.0, true, &smoke_quad()).unwrap();
        assert!(t.deviation <= SMOKE_TOL, "{t:?}");
        let u = g47_pairing(&m, &a, &b, 1.0, false, &smoke_quad()).unwrap();
        assert!(u.deviation > 0.1, "{u:?}");
    }
}
