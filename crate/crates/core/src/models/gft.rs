//! Heisenberg modes, the Airy integral identity, and the inverse transform on `H3`.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::expr::{airy, v, AiryKind, Compiled, Expr};
use crate::quadrature::{integrate, integrate_box, QuadSpec, Rule};
use crate::rational::{rat, Rational};

use super::GroupModel;

/// Airy argument `(2 nu^2 x1 + 2 mu nu + E) / (2 nu^2)^(2/3)` as an expression in `x1`.
pub fn mode_argument(mu: &Rational, nu: &Rational, e: &Rational) -> Result<Expr> {
    if *nu == rat(0) {
        return Err(Error::Parameter("nu must be nonzero".into()));
    }
    let two_nu2 = rat(2) * nu * nu;
    let shift = rat(2) * mu * nu + e;
    let lin = Expr::constant(two_nu2.clone()) * v("x1") + Expr::constant(shift);
    Ok((lin * Expr::constant(two_nu2).powr(Rational::new((-2).into(), 3.into()))).simplify())
}

/// `exp(i mu x2 + i nu x3) * Ai(arg)`; `kind` selects the Airy branch.
pub fn mode_solution_h3_kind(mu: &Rational, nu: &Rational, e: &Rational, kind: AiryKind) -> Result<Expr> {
    let arg = mode_argument(mu, nu, e)?;
    let wave = Expr::i() * (Expr::constant(mu.clone()) * v("x2") + Expr::constant(nu.clone()) * v("x3"));
    Ok((wave.exp() * Expr::airy(kind, arg)).simplify())
}

pub fn mode_solution_h3(mu: &Rational, nu: &Rational, e: &Rational) -> Result<Expr> {
    mode_solution_h3_kind(mu, nu, e, AiryKind::Ai)
}

/// The decaying mode with `mu`, `nu`, `E` left as variables.
pub fn mode_template() -> Expr {
    let (mu, nu, e) = (v("mu"), v("nu"), v("E"));
    let two_nu2 = 2 * nu.powi(2);
    let arg = (&two_nu2 * v("x1") + 2 * &mu * &nu + e) * two_nu2.powr(Rational::new((-2).into(), 3.into()));
    ((Expr::i() * (mu * v("x2") + nu * v("x3"))).exp() * Expr::airy(AiryKind::Ai, arg)).simplify()
}

/// `ell_c = s(J) * id` for a central basis element `c` (0-based); returns `s(J)`.
pub fn casimir_scalar_check(model: &GroupModel, element: usize, j: f64) -> Result<Complex64> {
    if element >= model.dim() {
        return Err(Error::Input(format!("basis index {} out of range", element + 1)));
    }
    if !model.center().contains(&element) {
        return Err(Error::Precondition(format!("e{} is not central", element + 1)));
    }
    let op = &model.lrep.ops[element];
    if op.order() > 0 {
        return Err(Error::Verification(format!("ell{} has a derivative part", element + 1)));
    }
    let c = op.coeff(&[]).simplify();
    if let Some(q) = model.lrep.q_vars.iter().find(|q| c.contains_var(q)) {
        return Err(Error::Verification(format!("ell{} depends on {q}", element + 1)));
    }
    let a = crate::expr::Assignment::new().with_real(crate::reduction::J_VAR, j);
    c.eval(&a)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AiryIdentity {
    pub lhs: Complex64,
    pub rhs: f64,
    pub residual: f64,
}

const CONTOUR_DECAY: f64 = 60.0;

/// `(1/2pi) int e^{i x tau + i t tau^3} dtau` along the rays `arg tau = pi/6, 5pi/6`,
/// compared with `(3|t|)^(-1/3) Ai(sign(t) x / (3|t|)^(1/3))`.
pub fn airy_identity_check(x: f64, t: f64) -> Result<AiryIdentity> {
    if t == 0.0 || !t.is_finite() || !x.is_finite() {
        return Err(Error::Parameter(format!("t must be finite and nonzero (t = {t})")));
    }
    let (xs, ts) = if t > 0.0 { (x, t) } else { (-x, -t) };
    let mut r_max: f64 = 1.0;
    while ts * r_max.powi(3) + 0.5 * xs * r_max < CONTOUR_DECAY {
        r_max *= 1.25;
    }
    let spec = QuadSpec { panels: 8, order: 16, tol: 1e-13, max_doublings: 10 };
    let ray = |theta: f64| -> Result<Complex64> {
        let dir = Complex64::from_polar(1.0, theta);
        let f = |r: f64| {
            let tau = dir * r;
            (Complex64::i() * (xs * tau + ts * tau * tau * tau)).exp()
        };
        Ok(dir * integrate(f, 0.0, r_max, &spec)?.value)
    };
    let lhs = (ray(PI / 6.0)? - ray(5.0 * PI / 6.0)?) / (2.0 * PI);
    let s = (3.0 * t.abs()).cbrt();
    let rhs = airy(AiryKind::Ai, t.signum() * x / s)? / s;
    Ok(AiryIdentity { lhs, rhs, residual: (lhs - rhs).norm() })
}

/// Rectangle in `(k, J)` carrying the spectral data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralBox {
    pub k: (f64, f64),
    pub j: (f64, f64),
}

impl SpectralBox {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.j;
        if !(lo < hi) || !(self.k.0 < self.k.1) {
            return Err(Error::Input(format!("empty spectral box {self:?}")));
        }
        if lo <= 0.0 && hi >= 0.0 {
            return Err(Error::SingularMeasure(format!("support [{lo}, {hi}] in J touches J = 0")));
        }
        Ok(())
    }

    /// `center +- half_width` in each direction.
    pub fn around(k: f64, j: f64, half_width: f64) -> Self {
        SpectralBox { k: (k - half_width, k + half_width), j: (j - half_width, j + half_width) }
    }
}

/// Inverse transform on a fixed tensor rule. Airy factors are cached per `x1`, so
/// finite-difference stencils cost one phase sum per point.
pub struct InverseGftH3 {
    k_rule: Rule,
    j_rule: Rule,
    /// `w_k w_J Phi^(k, J) (2|J|^2)^(1/3) / (2 pi)^2`, row-major in `(k, J)`.
    weights: Vec<Complex64>,
    e: f64,
    panels: usize,
    cache: RefCell<HashMap<u64, Vec<Complex64>>>,
}

impl InverseGftH3 {
    pub fn new(
        phi_hat: &dyn Fn(f64, f64) -> Complex64,
        support: &SpectralBox,
        e: f64,
        panels: usize,
        order: usize,
    ) -> Result<Self> {
        support.validate()?;
        let k_rule = Rule::composite(support.k.0, support.k.1, panels, order);
        let j_rule = Rule::composite(support.j.0, support.j.1, panels, order);
        let norm = 1.0 / (2.0 * PI).powi(2);
        let mut weights = Vec::with_capacity(k_rule.len() * j_rule.len());
        for (&k, &wk) in k_rule.nodes.iter().zip(&k_rule.weights) {
            for (&j, &wj) in j_rule.nodes.iter().zip(&j_rule.weights) {
                let meas = (2.0 * j * j).cbrt();
                weights.push(phi_hat(k, j) * (wk * wj * meas * norm));
            }
        }
        Ok(InverseGftH3 { k_rule, j_rule, weights, e, panels, cache: RefCell::new(HashMap::new()) })
    }

    pub fn panels(&self) -> usize {
        self.panels
    }

    fn airy_row(&self, x1: f64) -> Result<Vec<Complex64>> {
        if let Some(r) = self.cache.borrow().get(&x1.to_bits()) {
            return Ok(r.clone());
        }
        let mut row = Vec::with_capacity(self.weights.len());
        let mut idx = 0;
        for &k in &self.k_rule.nodes {
            for &j in &self.j_rule.nodes {
                let two_j2 = 2.0 * j * j;
                let arg = (two_j2 * x1 + 2.0 * k * j + self.e) / two_j2.powf(2.0 / 3.0);
                row.push(self.weights[idx] * airy(AiryKind::Ai, arg)?);
                idx += 1;
            }
        }
        self.cache.borrow_mut().insert(x1.to_bits(), row.clone());
        Ok(row)
    }

    pub fn eval(&self, x: &[f64]) -> Result<Complex64> {
        if x.len() != 3 {
            return Err(Error::Input(format!("expected 3 coordinates, got {}", x.len())));
        }
        let row = self.airy_row(x[0])?;
        let ek: Vec<Complex64> = self.k_rule.nodes.iter().map(|&k| Complex64::from_polar(1.0, k * x[1])).collect();
        let ej: Vec<Complex64> = self.j_rule.nodes.iter().map(|&j| Complex64::from_polar(1.0, j * x[2])).collect();
        let nj = ej.len();
        let partial: Vec<Complex64> = ek
            .iter()
            .enumerate()
            .map(|(a, &eka)| {
                let s: Complex64 = row[a * nj..(a + 1) * nj].iter().zip(&ej).map(|(r, e)| r * e).sum();
                s * eka
            })
            .collect();
        Ok(crate::quadrature::pairwise_sum(&partial))
    }
}

#[derive(Debug)]
pub struct GftResult {
    pub values: Vec<Complex64>,
    /// Converged field, reusable for finite differences.
    pub field: InverseGftH3,
    /// Largest change between successive refinements, relative to `max |psi|`.
    pub trace: Vec<f64>,
}

impl std::fmt::Debug for InverseGftH3 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("InverseGftH3").field("panels", &self.panels).field("e", &self.e).finish()
    }
}

/// `psi(x) = (2pi)^-2 int int (2|J|^2)^(1/3) Phi^(k,J) Ai(..) e^{i k x2 + i J x3} dk dJ`,
/// refined by doubling until every point changes by at most `tol * max |psi|`.
pub fn inverse_gft_h3(
    phi_hat: &dyn Fn(f64, f64) -> Complex64,
    support: &SpectralBox,
    e: f64,
    x_points: &[Vec<f64>],
    quad: &QuadSpec,
) -> Result<GftResult> {
    let mut panels = quad.panels.max(1);
    let mut field = InverseGftH3::new(phi_hat, support, e, panels, quad.order)?;
    let mut prev: Vec<Complex64> = x_points.iter().map(|x| field.eval(x)).collect::<Result<_>>()?;
    let mut trace = Vec::new();
    for _ in 0..quad.max_doublings {
        panels *= 2;
        field = InverseGftH3::new(phi_hat, support, e, panels, quad.order)?;
        let cur: Vec<Complex64> = x_points.iter().map(|x| field.eval(x)).collect::<Result<_>>()?;
        let scale = cur.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let diff = cur.iter().zip(&prev).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        let rel = if scale > 0.0 { diff / scale } else { diff };
        trace.push(rel);
        if rel <= quad.tol {
            return Ok(GftResult { values: cur, field, trace });
        }
        prev = cur;
    }
    let steps: Vec<String> = trace.iter().map(|d| format!("{d:.3e}")).collect();
    Err(Error::Inconclusive(format!("inverse transform did not converge; relative changes [{}]", steps.join(", "))))
}

/// `psi(x) = int int A(mu, nu) mode(x; mu, nu, E) dmu dnu`, built from the symbolic mode.
pub fn mode_superposition(
    amplitude: &dyn Fn(f64, f64) -> Complex64,
    support: &SpectralBox,
    e: f64,
    x_points: &[Vec<f64>],
    quad: &QuadSpec,
) -> Result<Vec<Complex64>> {
    support.validate()?;
    let mode = Compiled::new(&mode_template(), &["x1", "x2", "x3", "mu", "nu", "E"])?;
    let bounds = [support.k, support.j];
    x_points
        .iter()
        .map(|x| {
            let mut failure = None;
            let r = integrate_box(
                |p| {
                    let slots = [x[0], x[1], x[2], p[0], p[1], e];
                    match mode.eval_real(&slots) {
                        Ok(m) => amplitude(p[0], p[1]) * m,
                        Err(err) => {
                            failure.get_or_insert(err);
                            Complex64::new(0.0, 0.0)
                        }
                    }
                },
                &bounds,
                quad,
            )?;
            match failure {
                Some(err) => Err(err),
                None => Ok(r.value),
            }
        })
        .collect()
}

/// `exp(-((k - k0)^2 + (J - J0)^2) / (2 w^2))`.
pub fn gaussian_bump(k0: f64, j0: f64, w: f64) -> impl Fn(f64, f64) -> Complex64 {
    move |k, j| Complex64::new((-((k - k0).powi(2) + (j - j0).powi(2)) / (2.0 * w * w)).exp(), 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Assignment;
    use crate::models::{heisenberg::Heisenberg, pde_residual, ModelFactory, ModelParams};

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    #[test]
    fn mode_arguments() {
        let a = mode_argument(&r(1, 2), &rat(1), &rat(1)).unwrap();
        let two = Expr::int(2);
        let expect = ((2 * v("x1") + 2) * two.powr(r(-2, 3))).simplify();
        let p = Assignment::new().with_real("x1", 0.37);
        assert!((a.eval(&p).unwrap() - expect.eval(&p).unwrap()).norm() < 1e-15);
        let b = mode_argument(&rat(0), &rat(1), &rat(0)).unwrap();
        let expect = (two.powr(r(1, 3)) * v("x1")).simplify();
        assert!((b.eval(&p).unwrap() - expect.eval(&p).unwrap()).norm() < 1e-15);
        assert!(matches!(mode_argument(&rat(1), &rat(0), &rat(1)), Err(Error::Parameter(_))));
    }

    #[test]
    fn template_matches_exact_mode() {
        let m = mode_solution_h3(&r(1, 2), &rat(1), &rat(1)).unwrap();
        let t = mode_template();
        let p = Assignment::new()
            .with_real("x1", 0.2)
            .with_real("x2", -0.4)
            .with_real("x3", 0.9)
            .with_real("mu", 0.5)
            .with_real("nu", 1.0)
            .with_real("E", 1.0);
        assert!((m.eval(&p).unwrap() - t.eval(&p).unwrap()).norm() < 1e-14);
    }

    #[test]
    fn mode_solves_laplace_equation() {
        let model = Heisenberg.build(&ModelParams::default()).unwrap();
        let m = mode_solution_h3(&r(1, 2), &rat(1), &rat(1)).unwrap();
        let pts = crate::models::grid(3, 5, -1.0, 1.0);
        let res = pde_residual(&model, &m, 1.0, &pts).unwrap();
        assert!(res.residual.max <= 1e-8, "{res:?}");
        assert!(res.fd_deviation <= 1e-5, "{res:?}");
        let bi = mode_solution_h3_kind(&r(1, 2), &rat(1), &rat(1), AiryKind::Bi).unwrap();
        let res = pde_residual(&model, &bi, 1.0, &pts).unwrap();
        assert!(res.residual.max <= 1e-8, "{res:?}");
    }

    #[test]
    fn swapped_plane_wave_fails() {
        let model = Heisenberg.build(&ModelParams::default()).unwrap();
        let arg = mode_argument(&r(1, 2), &rat(1), &rat(1)).unwrap();
        let wave = Expr::i() * (Expr::constant(r(1, 2)) * v("x3") + v("x2"));
        let swapped = wave.exp() * Expr::airy(AiryKind::Ai, arg);
        let pts = crate::models::grid(3, 3, -1.0, 1.0);
        assert!(pde_residual(&model, &swapped, 1.0, &pts).unwrap().residual.max > 1e-2);
    }

    #[test]
    fn casimir_scalars() {
        let model = Heisenberg.build(&ModelParams::default()).unwrap();
        assert!((casimir_scalar_check(&model, 2, 1.0).unwrap() - Complex64::i()).norm() < 1e-15);
        assert!((casimir_scalar_check(&model, 2, -1.0).unwrap() + Complex64::i()).norm() < 1e-15);
        assert!(matches!(casimir_scalar_check(&model, 1, 1.0), Err(Error::Precondition(_))));
    }

    #[test]
    fn airy_integral_identity() {
        let a0 = airy_identity_check(0.0, 1.0 / 3.0).unwrap();
        assert!((a0.rhs - 0.355_028_053_887_817_2).abs() < 1e-12);
        assert!(a0.residual <= 1e-6, "{a0:?}");
        for (x, t) in [(1.0, 1.0), (-1.0, 2.0), (0.5, -0.7), (-3.0, 0.2)] {
            let a = airy_identity_check(x, t).unwrap();
            assert!(a.residual <= 1e-6, "({x}, {t}) {a:?}");
        }
        assert!(matches!(airy_identity_check(1.0, 0.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn zero_data_and_singular_support() {
        let pts = vec![vec![0.1, 0.2, 0.3]];
        let zero = |_: f64, _: f64| Complex64::new(0.0, 0.0);
        let sb = SpectralBox { k: (-1.0, 1.0), j: (0.5, 1.5) };
        let out = inverse_gft_h3(&zero, &sb, 1.0, &pts, &QuadSpec::default()).unwrap();
        assert_eq!(out.values, vec![Complex64::new(0.0, 0.0)]);
        let bad = SpectralBox { k: (-1.0, 1.0), j: (-0.5, 1.5) };
        assert!(matches!(
            inverse_gft_h3(&zero, &bad, 1.0, &pts, &QuadSpec::default()),
            Err(Error::SingularMeasure(_))
        ));
    }

    #[test]
    fn narrow_bump_approaches_single_mode() {
        let w = 0.01;
        let bump = gaussian_bump(0.0, 1.0, w);
        let sb = SpectralBox::around(0.0, 1.0, 4.5 * w);
        let pts = crate::models::grid(3, 3, -1.0, 1.0);
        let out = inverse_gft_h3(&bump, &sb, 1.0, &pts, &QuadSpec { panels: 2, ..QuadSpec::default() }).unwrap();
        let mode = mode_solution_h3(&rat(0), &rat(1), &rat(1)).unwrap();
        let c = 2f64.cbrt() / (2.0 * PI).powi(2) * 2.0 * PI * w * w;
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for (x, psi) in pts.iter().zip(&out.values) {
            let a = Assignment::new().with_real("x1", x[0]).with_real("x2", x[1]).with_real("x3", x[2]);
            let m = mode.eval(&a).unwrap() * c;
            worst = worst.max((psi - m).norm());
            scale = scale.max(m.norm());
        }
        assert!(worst / scale <= 1e-2, "{}", worst / scale);
    }
}
