//! Reduction of the invariant Laplacian through first-order representation operators on the
//! homogeneous space `Q`, down to a first-order PDE `(Z + V) psi = 0`, and its integration
//! along characteristics.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::algebra::{LieAlgebra, DEFAULT_INDEX_TRIALS};
use crate::bilinear::LaplacianData;
use crate::diffop::{is_skippable, DiffOp};
use crate::error::{Error, Result};
use crate::expr::{Assignment, Compiled, Expr};
use crate::rational::{rat, Rational, Subspace};
use crate::sampling::{scan, Predicate, Residual, SampleSpec};

pub const J_VAR: &str = "J";
pub const E_VAR: &str = "E";

/// Tolerance for the commutator closure of the representation operators.
pub const CLOSURE_TOL: f64 = 1e-12;
/// Largest sampled second-order coefficient still accepted as zero.
pub const SECOND_ORDER_TOL: f64 = 1e-12;
/// Below this sup-norm a field is considered identically zero.
pub const FIELD_FLOOR: f64 = 1e-200;

const LIFT_PARAM: &str = "t_lift";

#[derive(Clone, Debug, PartialEq)]
pub enum JParam {
    Discrete(Vec<f64>),
    RealNonzero,
}

impl JParam {
    pub fn contains(&self, j: f64) -> bool {
        match self {
            JParam::Discrete(v) => v.contains(&j),
            JParam::RealNonzero => j != 0.0 && j.is_finite(),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            JParam::Discrete(v) => {
                let items: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
                format!("{{{}}}", items.join(", "))
            }
            JParam::RealNonzero => "real, nonzero".to_string(),
        }
    }
}

/// First-order operators `l_i(q, d_q; J)` representing the basis `e_i`.
#[derive(Clone, Debug)]
pub struct LambdaRep {
    pub q_vars: Vec<String>,
    pub ops: Vec<DiffOp>,
    pub j_param: JParam,
    /// Density of the invariant measure on `Q`.
    pub measure_density: Expr,
    /// Indices (0-based) of the pure multiplication operators.
    pub mult_only: Vec<usize>,
    /// Sampling chart over the `q` variables and `J`.
    pub chart: SampleSpec,
}

impl LambdaRep {
    pub fn new(
        q_vars: &[&str],
        ops: Vec<DiffOp>,
        j_param: JParam,
        measure_density: Expr,
        chart: SampleSpec,
    ) -> Result<Self> {
        let q: Vec<String> = q_vars.iter().map(|s| s.to_string()).collect();
        for (i, op) in ops.iter().enumerate() {
            if op.vars() != q.as_slice() {
                return Err(Error::Input(format!("operator l{} acts on {:?}, expected {:?}", i + 1, op.vars(), q)));
            }
            if op.order() > 1 {
                return Err(Error::Precondition(format!("operator l{} has order {}", i + 1, op.order())));
            }
        }
        let mult_only = ops.iter().enumerate().filter(|(_, op)| op.order() == 0).map(|(i, _)| i).collect();
        Ok(LambdaRep { q_vars: q, ops, j_param, measure_density, mult_only, chart })
    }

    pub fn dim_q(&self) -> usize {
        self.q_vars.len()
    }

    pub fn q_vars_str(&self) -> Vec<&str> {
        self.q_vars.iter().map(String::as_str).collect()
    }

    pub fn samples(&self, count: usize, seed: u64) -> SampleSpec {
        self.chart.clone().with_count(count).with_seed(seed)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LambdaRepReport {
    pub pairs_checked: usize,
    pub max_deviation: f64,
    /// 1-based `(i, j)` pairs whose commutator does not match.
    pub failed_pairs: Vec<(usize, usize)>,
    pub mult_only_covers_ideal: bool,
    /// `dim Q == (dim g - ind g) / 2`.
    pub dim_ok: bool,
    pub max_skew_defect: f64,
    pub skew_ok: bool,
    pub samples_used: usize,
    pub skipped: usize,
}

impl LambdaRepReport {
    pub fn passed(&self) -> bool {
        self.failed_pairs.is_empty() && self.mult_only_covers_ideal && self.dim_ok && self.skew_ok
    }

    pub fn into_result(self) -> Result<Self> {
        if self.passed() {
            return Ok(self);
        }
        let mut why = Vec::new();
        if !self.failed_pairs.is_empty() {
            let pairs: Vec<String> = self.failed_pairs.iter().map(|(i, j)| format!("({i},{j})")).collect();
            why.push(format!("commutator mismatch on pairs {}", pairs.join(" ")));
        }
        if !self.mult_only_covers_ideal {
            why.push("multiplication operators do not cover the ideal".into());
        }
        if !self.dim_ok {
            why.push("dimension of Q does not match the index".into());
        }
        if !self.skew_ok {
            why.push(format!("skew-adjointness defect {:.3e}", self.max_skew_defect));
        }
        Err(Error::Verification(why.join("; ")))
    }
}

fn constant_combination(lrep: &LambdaRep, coeffs: &[Rational]) -> DiffOp {
    let vars = lrep.q_vars_str();
    let mut out = DiffOp::zero(&vars);
    for (k, c) in coeffs.iter().enumerate() {
        if *c != rat(0) {
            out = out.add(&lrep.ops[k].scale(&Expr::constant(c.clone()))).expect("same variables");
        }
    }
    out
}

/// Checks closure `[l_i, l_j] = sum_k C_ij^k l_k`, that the pure multiplication operators
/// cover `ideal`, the dimension count for `Q`, and skew-adjointness against the measure.
pub fn verify_lambda_rep(
    algebra: &LieAlgebra,
    lrep: &LambdaRep,
    ideal: &Subspace,
    count: usize,
    seed: u64,
) -> Result<LambdaRepReport> {
    let n = algebra.dim();
    if lrep.ops.len() != n {
        return Err(Error::Input(format!("{} operators for a {n}-dimensional algebra", lrep.ops.len())));
    }
    let spec = lrep.samples(count, seed);
    let mut report = LambdaRepReport {
        pairs_checked: 0,
        max_deviation: 0.0,
        failed_pairs: Vec::new(),
        mult_only_covers_ideal: true,
        dim_ok: true,
        max_skew_defect: 0.0,
        skew_ok: true,
        samples_used: 0,
        skipped: 0,
    };
    for i in 0..n {
        for j in i + 1..n {
            let lhs = lrep.ops[i].commutator(&lrep.ops[j])?;
            let rhs = constant_combination(lrep, &algebra.bracket_basis(i, j));
            let eq = lhs.op_equal(&rhs, &spec, CLOSURE_TOL)?;
            report.pairs_checked += 1;
            report.max_deviation = report.max_deviation.max(eq.max_deviation);
            report.samples_used += eq.samples_used;
            report.skipped += eq.skipped;
            if !eq.equal {
                report.failed_pairs.push((i + 1, j + 1));
            }
        }
    }
    report.mult_only_covers_ideal = ideal.generators().iter().all(|g| {
        g.iter().enumerate().all(|(k, c)| *c == rat(0) || lrep.mult_only.contains(&k))
    });
    let index = algebra.index(DEFAULT_INDEX_TRIALS, seed).index;
    report.dim_ok = 2 * lrep.dim_q() + index == n;
    let skew = skew_defect(lrep, &spec)?;
    report.max_skew_defect = skew.max;
    report.skew_ok = skew.max <= CLOSURE_TOL;
    report.samples_used += skew.samples_used;
    report.skipped += skew.skipped;
    Ok(report)
}

/// `l + l^dagger = 0` in `L^2(Q, rho dq)` holds iff every `a^A` is real and
/// `2 Re a_0 = rho^{-1} sum_A d_A(rho a^A)`.
fn skew_defect(lrep: &LambdaRep, spec: &SampleSpec) -> Result<Residual> {
    let rho = &lrep.measure_density;
    let mut checks = Vec::new();
    for op in &lrep.ops {
        let a0 = op.coeff(&[]);
        let comps: Vec<Expr> = (0..lrep.dim_q()).map(|a| op.coeff(&[a])).collect();
        let div = Expr::sum(
            comps.iter().zip(&lrep.q_vars).map(|(c, q)| (rho * c).diff(q)).collect(),
        ) / rho.clone();
        checks.push((a0, comps, div.simplify()));
    }
    scan(spec.points(), |p| {
        let mut worst: f64 = 0.0;
        for (a0, comps, div) in &checks {
            let a0 = a0.eval(&p)?;
            let div = div.eval(&p)?;
            let mut scale = a0.norm().max(1.0);
            let mut d = (2.0 * a0.re - div.re).abs() + div.im.abs();
            for c in comps {
                let c = c.eval(&p)?;
                scale = scale.max(c.norm());
                d = d.max(c.im.abs());
            }
            worst = worst.max(d / scale);
        }
        Ok(worst)
    })
}

/// `T(x) phi (q) = prefactor * exp(phase) * phi(args)`, the kernel action with its delta
/// constraints integrated out.
#[derive(Clone, Debug)]
pub struct CollapsedAction {
    pub x_vars: Vec<String>,
    pub q_vars: Vec<String>,
    /// `q'_A` as functions of `(q, x)`.
    pub args: Vec<Expr>,
    pub phase: Expr,
    pub prefactor: Expr,
}

impl CollapsedAction {
    pub fn apply(&self, phi: &Expr) -> Expr {
        let map: BTreeMap<String, Expr> = self.q_vars.iter().cloned().zip(self.args.iter().cloned()).collect();
        (self.prefactor.clone() * self.phase.exp() * phi.substitute(&map)).simplify()
    }

    /// The action along the curve `x = t e_i`.
    fn along_axis(&self, i: usize, phi: &Expr) -> Expr {
        let t = Expr::var(LIFT_PARAM);
        let map: BTreeMap<String, Expr> = self
            .x_vars
            .iter()
            .enumerate()
            .map(|(k, x)| (x.clone(), if k == i { t.clone() } else { Expr::zero() }))
            .collect();
        self.apply(phi).substitute(&map).simplify()
    }
}

/// Gaussian and polynomial-times-Gaussian test functions centered at `center`.
pub fn test_functions(q_vars: &[&str], center: &[f64]) -> Vec<Expr> {
    let c: Vec<Expr> = center
        .iter()
        .map(|&x| Expr::constant(num_rational::BigRational::from_float(x).expect("finite center")))
        .collect();
    let sq = Expr::sum(q_vars.iter().zip(&c).map(|(q, c)| (Expr::var(q) - c.clone()).powi(2)).collect());
    let g = (-sq).exp();
    let mut bank = vec![g.clone()];
    let mut poly = Expr::one();
    for (k, q) in q_vars.iter().enumerate() {
        poly = poly + Expr::int(k as i64 + 1) * Expr::var(q);
    }
    bank.push((poly * g.clone()).simplify());
    if let Some(q0) = q_vars.first() {
        bank.push((Expr::var(q0).powi(2) * g).simplify());
    }
    bank
}

/// Max relative deviation between `d/dt [T(t e_i) phi]|_{t=0}` and `l_i phi` over `bank`.
pub fn local_lift_check(
    lrep: &LambdaRep,
    action: &CollapsedAction,
    i: usize,
    bank: &[Expr],
    spec: &SampleSpec,
) -> Result<Residual> {
    if i >= lrep.ops.len() || i >= action.x_vars.len() {
        return Err(Error::Input(format!("basis index {} out of range", i + 1)));
    }
    let mut pairs = Vec::new();
    for phi in bank {
        let lhs = action.along_axis(i, phi).diff(LIFT_PARAM).subs(LIFT_PARAM, &Expr::zero()).simplify();
        let rhs = lrep.ops[i].apply(phi);
        pairs.push((lhs, rhs, phi.clone()));
    }
    if pairs.iter().all(|(l, r, _)| (l - r).simplify().is_zero()) {
        return Ok(Residual::exact_zero());
    }
    scan(spec.points(), |p| {
        let mut worst: f64 = 0.0;
        for (l, r, phi) in &pairs {
            let (l, r, f) = (l.eval(&p)?, r.eval(&p)?, phi.eval(&p)?);
            let scale = l.norm().max(r.norm()).max(f.norm()).max(1e-300);
            worst = worst.max((l - r).norm() / scale);
        }
        Ok(worst)
    })
}

/// Normalized first-order data: `(raw - E) / normalizer = sum_A Z^A d_A + V`.
#[derive(Clone, Debug, PartialEq)]
pub struct FirstOrder {
    pub z: Vec<Expr>,
    pub v: Expr,
    pub normalizer: Expr,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReducedOperator {
    pub raw: DiffOp,
    pub first_order: Option<FirstOrder>,
}

impl ReducedOperator {
    pub fn second_order_vanishes(&self) -> bool {
        self.raw.part(2).next().is_none()
    }
}

/// `sum G^ij A_i A_j + sum c^i A_i` for first-order operators `A_i`.
pub fn assemble(ops: &[DiffOp], data: &LaplacianData) -> Result<DiffOp> {
    let n = ops.len();
    if data.g_inv.rows() != n {
        return Err(Error::Input(format!("form of dimension {} for {n} operators", data.g_inv.rows())));
    }
    let vars: Vec<&str> = match ops.first() {
        Some(op) => op.vars().iter().map(String::as_str).collect(),
        None => Vec::new(),
    };
    let mut out = DiffOp::zero(&vars);
    let zero = rat(0);
    for i in 0..n {
        for j in 0..n {
            let g = &data.g_inv[(i, j)];
            if *g != zero {
                out = out.add(&ops[i].compose(&ops[j])?.scale(&Expr::constant(g.clone())))?;
            }
        }
        if data.c_vec[i] != zero {
            out = out.add(&ops[i].scale(&Expr::constant(data.c_vec[i].clone())))?;
        }
    }
    Ok(out)
}

/// `raw = sum G^ij l~_i l~_j + sum c^i l~_i` with `l~_i = Lambda^{-1} l_i Lambda`.
pub fn build_reduced(data: &LaplacianData, lrep: &LambdaRep, modular: &Expr) -> Result<ReducedOperator> {
    let twisted: Vec<DiffOp> = if modular.simplify().is_one() {
        lrep.ops.clone()
    } else {
        lrep.ops.iter().map(|op| op.conjugate_by(modular)).collect::<Result<_>>()?
    };
    let mut raw = assemble(&twisted, data)?;
    if twisted.is_empty() {
        raw = DiffOp::zero(&lrep.q_vars_str());
    }
    Ok(ReducedOperator { raw, first_order: None })
}

/// Splits `(raw - E) / normalizer` into `Z` and `V`; `E` stays symbolic inside `V`.
/// Second-order coefficients that do not simplify to zero are sampled on `check` and must
/// stay below `SECOND_ORDER_TOL`.
pub fn extract_first_order(
    red: &ReducedOperator,
    normalizer: &Expr,
    check: Option<&SampleSpec>,
) -> Result<ReducedOperator> {
    let second: Vec<Expr> = red.raw.part(2).map(|(_, c)| c.clone()).collect();
    if !second.is_empty() {
        let spec = check.ok_or_else(|| {
            Error::NotFirstOrder(format!("{} second-order coefficients remain", second.len()))
        })?;
        let r = scan(spec.points(), |p| {
            second.iter().map(|c| c.eval(&p).map(|z| z.norm())).try_fold(0.0f64, |m, x| Ok(m.max(x?)))
        })?;
        if r.max > SECOND_ORDER_TOL {
            return Err(Error::NotFirstOrder(format!("second-order coefficient of size {:.3e}", r.max)));
        }
    }
    let inv = normalizer.recip();
    let z = (0..red.raw.vars().len()).map(|a| (red.raw.coeff(&[a]) * inv.clone()).simplify()).collect();
    let v = ((red.raw.coeff(&[]) - Expr::var(E_VAR)) * inv).simplify();
    Ok(ReducedOperator {
        raw: red.raw.clone(),
        first_order: Some(FirstOrder { z, v, normalizer: normalizer.clone() }),
    })
}

/// `sum_A Z^A d_A f`, simplified.
pub fn directional(z: &[Expr], q_vars: &[&str], f: &Expr) -> Expr {
    Expr::sum(z.iter().zip(q_vars).map(|(c, q)| c * f.diff(q)).collect()).simplify()
}

/// Max of `|Z u| / (|u| |Z|)` over the samples.
pub fn invariant_residual(z: &[Expr], q_vars: &[&str], u: &Expr, spec: &SampleSpec) -> Result<Residual> {
    let zu = directional(z, q_vars, u);
    if zu.is_zero() {
        return Ok(Residual::exact_zero());
    }
    scan(spec.points(), |p| {
        let num = zu.eval(&p)?.norm();
        let uval = u.eval(&p)?.norm();
        let zn = z.iter().map(|c| c.eval(&p).map(|x| x.norm_sqr())).sum::<Result<f64>>()?.sqrt();
        Ok(num / (uval * zn).max(1e-300))
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RectifyReport {
    /// `max |Z v - 1|`.
    pub zv: Residual,
    /// `max |Z u_k|` over all invariants; absent when there are none.
    pub zu: Option<Residual>,
}

/// Absolute residuals certifying that `(v, u)` straighten `Z` to `d/dv`.
pub fn rectify_check(
    z: &[Expr],
    q_vars: &[&str],
    v: &Expr,
    u: &[Expr],
    spec: &SampleSpec,
) -> Result<RectifyReport> {
    let zv1 = (directional(z, q_vars, v) - Expr::one()).simplify();
    let zv = if zv1.is_zero() {
        Residual::exact_zero()
    } else {
        scan(spec.points(), |p| Ok(zv1.eval(&p)?.norm()))?
    };
    let zu = if u.is_empty() {
        None
    } else {
        let zus: Vec<Expr> = u.iter().map(|uk| directional(z, q_vars, uk)).collect();
        Some(if zus.iter().all(Expr::is_zero) {
            Residual::exact_zero()
        } else {
            scan(spec.points(), |p| {
                zus.iter().map(|e| e.eval(&p).map(|x| x.norm())).try_fold(0.0f64, |m, x| Ok(m.max(x?)))
            })?
        })
    };
    Ok(RectifyReport { zv, zu })
}

/// Vector field `Z` and optional potential `V`, compiled over `q` plus fixed parameters.
pub struct Tracer {
    q_vars: Vec<String>,
    z: Vec<Compiled>,
    v: Option<Compiled>,
    params: Vec<Complex64>,
    param_names: Vec<String>,
    domain: Option<Predicate>,
}

impl Tracer {
    pub fn new(
        z: &[Expr],
        v: Option<&Expr>,
        q_vars: &[&str],
        params: &Assignment,
        domain: Option<Predicate>,
    ) -> Result<Self> {
        if z.len() != q_vars.len() {
            return Err(Error::Input(format!("{} components for {} variables", z.len(), q_vars.len())));
        }
        let param_names: Vec<String> = params.iter().map(|(k, _)| k.clone()).collect();
        let params_vals: Vec<Complex64> = params.iter().map(|(_, v)| *v).collect();
        let mut slots: Vec<&str> = q_vars.to_vec();
        slots.extend(param_names.iter().map(String::as_str));
        let z = z.iter().map(|c| Compiled::new(c, &slots)).collect::<Result<_>>()?;
        let v = v.map(|e| Compiled::new(e, &slots)).transpose()?;
        Ok(Tracer {
            q_vars: q_vars.iter().map(|s| s.to_string()).collect(),
            z,
            v,
            params: params_vals,
            param_names,
            domain,
        })
    }

    fn inside(&self, q: &[f64]) -> bool {
        if q.iter().any(|x| !x.is_finite()) {
            return false;
        }
        let Some(pred) = &self.domain else { return true };
        let mut a = Assignment::new();
        for (n, &x) in self.q_vars.iter().zip(q) {
            a.set(n, Complex64::new(x, 0.0));
        }
        for (n, &x) in self.param_names.iter().zip(&self.params) {
            a.set(n, x);
        }
        pred(&a)
    }

    fn rhs(&self, q: &[f64], t: f64) -> Result<(Vec<f64>, Complex64)> {
        if !self.inside(q) {
            return Err(Error::DomainExit { time: t });
        }
        let mut slots: Vec<Complex64> = q.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        slots.extend_from_slice(&self.params);
        let exit = |e: Error| if is_skippable(&e) { Error::DomainExit { time: t } } else { e };
        let mut dq = Vec::with_capacity(q.len());
        for c in &self.z {
            let w = c.eval(&slots).map_err(exit)?;
            if w.im.abs() > 1e-12 * w.norm().max(1.0) {
                return Err(Error::Precondition(format!("vector field is complex ({w}) at {q:?}")));
            }
            dq.push(w.re);
        }
        let dphi = match &self.v {
            Some(v) => v.eval(&slots).map_err(exit)?,
            None => Complex64::new(0.0, 0.0),
        };
        Ok((dq, dphi))
    }

    /// Classical RK4 for `dq/dt = Z(q)`, `dphi/dt = V(q)` from `t = 0` to `t_end` (either
    /// sign); the step is shortened so the last step lands on `t_end`.
    pub fn trace(&self, q0: &[f64], t_end: f64, step: f64) -> Result<Characteristic> {
        if !(step > 0.0) {
            return Err(Error::Parameter(format!("step must be positive, got {step}")));
        }
        let steps = ((t_end.abs() / step).ceil() as usize).max(1);
        let h = t_end / steps as f64;
        let mut q = q0.to_vec();
        let mut phi = Complex64::new(0.0, 0.0);
        let mut times = vec![0.0];
        let mut points = vec![q.clone()];
        let mut phase = vec![phi];
        let axpy = |q: &[f64], k: &[f64], s: f64| -> Vec<f64> { q.iter().zip(k).map(|(a, b)| a + s * b).collect() };
        for n in 0..steps {
            let t = n as f64 * h;
            let (k1, p1) = self.rhs(&q, t)?;
            let (k2, p2) = self.rhs(&axpy(&q, &k1, h / 2.0), t + h / 2.0)?;
            let (k3, p3) = self.rhs(&axpy(&q, &k2, h / 2.0), t + h / 2.0)?;
            let (k4, p4) = self.rhs(&axpy(&q, &k3, h), t + h)?;
            for a in 0..q.len() {
                q[a] += h / 6.0 * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a]);
            }
            phi += (p1 + 2.0 * p2 + 2.0 * p3 + p4) * (h / 6.0);
            if !self.inside(&q) {
                return Err(Error::DomainExit { time: t + h });
            }
            times.push(if n + 1 == steps { t_end } else { t + h });
            points.push(q.clone());
            phase.push(phi);
        }
        Ok(Characteristic { start: q0.to_vec(), step: h.abs(), times, points, phase })
    }
}

/// One traced characteristic; `phase[k]` is `int_0^{times[k]} V dt`.
#[derive(Clone, Debug, PartialEq)]
pub struct Characteristic {
    pub start: Vec<f64>,
    pub step: f64,
    pub times: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub phase: Vec<Complex64>,
}

impl Characteristic {
    pub fn end(&self) -> &[f64] {
        self.points.last().expect("nonempty")
    }

    pub fn total_phase(&self) -> Complex64 {
        *self.phase.last().expect("nonempty")
    }
}

/// Integral curve of `Z` through `q0`.
pub fn flow(
    z: &[Expr],
    q_vars: &[&str],
    params: &Assignment,
    q0: &[f64],
    t_end: f64,
    step: f64,
    domain: Option<Predicate>,
) -> Result<Characteristic> {
    Tracer::new(z, None, q_vars, params, domain)?.trace(q0, t_end, step)
}

/// Flow-box coordinates for `Z`: `Z v = 1` and `Z u_k = 0`. Solutions are normalized on the
/// section `v = v_ref`.
#[derive(Clone, Debug, PartialEq)]
pub struct Rectifier {
    pub v: Expr,
    pub u: Vec<Expr>,
    pub v_ref: f64,
}

/// `psi(q) = Phi(u(q)) * exp(-int V dt)` along the characteristic from the section
/// `v = v_ref` to `q`, traced backwards from each target.
#[allow(clippy::too_many_arguments)]
pub fn solve_reduced(
    fo: &FirstOrder,
    q_vars: &[&str],
    params: &Assignment,
    rect: &Rectifier,
    phi: &dyn Fn(&[f64]) -> Complex64,
    targets: &[Vec<f64>],
    step: f64,
    domain: Option<Predicate>,
) -> Result<Vec<Complex64>> {
    let tracer = Tracer::new(&fo.z, Some(&fo.v), q_vars, params, domain)?;
    let mut slots: Vec<&str> = q_vars.to_vec();
    let names: Vec<String> = params.iter().map(|(k, _)| k.clone()).collect();
    slots.extend(names.iter().map(String::as_str));
    let v = Compiled::new(&rect.v, &slots)?;
    let u: Vec<Compiled> = rect.u.iter().map(|e| Compiled::new(e, &slots)).collect::<Result<_>>()?;
    let pvals: Vec<Complex64> = params.iter().map(|(_, v)| *v).collect();
    targets
        .iter()
        .map(|q| {
            let mut s: Vec<Complex64> = q.iter().map(|&x| Complex64::new(x, 0.0)).collect();
            s.extend_from_slice(&pvals);
            let vq = v.eval(&s)?.re;
            let uq: Vec<f64> = u.iter().map(|c| c.eval(&s).map(|z| z.re)).collect::<Result<_>>()?;
            let ch = tracer.trace(q, rect.v_ref - vq, step)?;
            Ok(phi(&uq) * ch.total_phase().exp())
        })
        .collect()
}

/// `max |raw psi - E psi| / max(max |psi|, FIELD_FLOOR)` with `raw` applied symbolically.
/// `spec` must bind `E` and `J` along with the `q` variables.
pub fn reduced_residual_symbolic(red: &ReducedOperator, psi: &Expr, spec: &SampleSpec) -> Result<Residual> {
    if psi.simplify().is_zero() {
        return Err(Error::Inconclusive("field is identically zero".into()));
    }
    let res = (red.raw.apply(psi) - Expr::var(E_VAR) * psi.clone()).simplify();
    if res.is_zero() {
        return Ok(Residual::exact_zero());
    }
    let mut vals = Vec::new();
    let mut skipped = 0;
    for p in spec.points() {
        match (res.eval(&p), psi.eval(&p)) {
            (Ok(r), Ok(f)) => vals.push((r.norm(), f.norm())),
            (Err(e), _) | (_, Err(e)) if is_skippable(&e) => skipped += 1,
            (Err(e), _) | (_, Err(e)) => return Err(e),
        }
    }
    normalize(&vals, skipped)
}

fn normalize(vals: &[(f64, f64)], skipped: usize) -> Result<Residual> {
    if vals.is_empty() {
        return Err(Error::Inconclusive(format!("no usable sample points ({skipped} skipped)")));
    }
    let sup = vals.iter().map(|v| v.1).fold(0.0, f64::max);
    if sup < FIELD_FLOOR {
        return Err(Error::Inconclusive("field vanishes on every sample".into()));
    }
    let max = vals.iter().map(|v| v.0).fold(0.0, f64::max) / sup;
    Ok(Residual { max, samples_used: vals.len(), skipped })
}

/// Same residual for a sampled field, using fourth-order central differences of width `h`.
/// `params` binds `E`, `J` and any other parameters of `raw`.
pub fn reduced_residual_numeric(
    red: &ReducedOperator,
    psi: &dyn Fn(&[f64]) -> Result<Complex64>,
    params: &Assignment,
    points: &[Vec<f64>],
    h: f64,
) -> Result<Residual> {
    let e = params.get(E_VAR).ok_or_else(|| Error::MissingVariable(E_VAR.into()))?;
    let mut vals = Vec::new();
    let mut skipped = 0;
    for q in points {
        let r = red.raw.apply_numeric(psi, q, params, h).and_then(|lhs| Ok((lhs, psi(q)?)));
        match r {
            Ok((lhs, f)) => vals.push(((lhs - e * f).norm(), f.norm())),
            Err(err) if is_skippable(&err) || matches!(err, Error::DomainExit { .. }) => skipped += 1,
            Err(err) => return Err(err),
        }
    }
    normalize(&vals, skipped)
}

/// `max |[raw, u]| / (max_A |raw^A| |u|)`: zero when multiplication by `u` commutes with raw.
pub fn symmetry_residual(red: &ReducedOperator, u: &Expr, spec: &SampleSpec) -> Result<Residual> {
    let vars: Vec<&str> = red.raw.vars().iter().map(String::as_str).collect();
    let comm = red.raw.commutator(&DiffOp::scalar(&vars, u.clone()))?;
    if comm.is_zero() {
        return Ok(Residual::exact_zero());
    }
    let c0 = comm.coeff(&[]);
    if comm.order() > 0 {
        return Err(Error::Verification("commutator with a multiplication operator has a derivative part".into()));
    }
    let firsts: Vec<Expr> = (0..vars.len()).map(|a| red.raw.coeff(&[a])).collect();
    scan(spec.points(), |p| {
        let num = c0.eval(&p)?.norm();
        let top = firsts.iter().map(|c| c.eval(&p).map(|z| z.norm())).try_fold(0.0f64, |m, x| Ok(m.max(x?)))?;
        Ok(num / (top * u.eval(&p)?.norm()).max(1e-300))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bilinear::{heisenberg_form, laplacian_data};
    use crate::expr::v;

    fn h3_algebra() -> LieAlgebra {
        LieAlgebra::from_integer_constants(3, &[(1, 2, &[(3, 1)])])
    }

    fn h3_rep(l3_sign: i64) -> LambdaRep {
        let q = ["q"];
        let ij = Expr::i() * v("J");
        let ops = vec![
            DiffOp::scalar(&q, -(ij.clone() * v("q"))),
            DiffOp::partial(&q, "q"),
            DiffOp::scalar(&q, Expr::int(l3_sign) * ij),
        ];
        let chart = SampleSpec::new(0, 0).uniform("q", -2.0, 2.0).choice("J", &[-2.0, -1.0, 0.5, 1.0, 3.0]);
        LambdaRep::new(&q, ops, JParam::RealNonzero, Expr::one(), chart).unwrap()
    }

    fn h3_ideal() -> Subspace {
        Subspace::coordinate(3, &[0, 2])
    }

    #[test]
    fn heisenberg_rep_closes() {
        let r = verify_lambda_rep(&h3_algebra(), &h3_rep(1), &h3_ideal(), 20, 1).unwrap();
        assert!(r.passed(), "{r:?}");
        assert_eq!(r.pairs_checked, 3);
        assert_eq!(h3_rep(1).mult_only, vec![0, 2]);
    }

    #[test]
    fn sign_flip_fails_on_first_pair() {
        let r = verify_lambda_rep(&h3_algebra(), &h3_rep(-1), &h3_ideal(), 20, 1).unwrap();
        assert_eq!(r.failed_pairs, vec![(1, 2)]);
        let e = r.into_result().unwrap_err();
        assert!(matches!(e, Error::Verification(m) if m.contains("(1,2)")));
    }

    #[test]
    fn non_skew_operator_is_flagged() {
        let mut rep = h3_rep(1);
        rep.ops[1] = DiffOp::partial(&["q"], "q").add(&DiffOp::scalar(&["q"], Expr::one())).unwrap();
        let r = verify_lambda_rep(&h3_algebra(), &rep, &h3_ideal(), 10, 1).unwrap();
        assert!(!r.skew_ok);
    }

    fn h3_action() -> CollapsedAction {
        let (q, x1, x2, x3) = (v("q"), v("x1"), v("x2"), v("x3"));
        let ij = Expr::i() * v("J");
        CollapsedAction {
            x_vars: vec!["x1".into(), "x2".into(), "x3".into()],
            q_vars: vec!["q".into()],
            args: vec![q.clone() + x2.clone()],
            phase: -(ij.clone() * (q + x2) * x1) + ij * x3,
            prefactor: Expr::one(),
        }
    }

    #[test]
    fn heisenberg_lift_matches_generators() {
        let rep = h3_rep(1);
        let bank = test_functions(&["q"], &[0.25]);
        let spec = rep.samples(20, 3);
        for i in 0..3 {
            let r = local_lift_check(&rep, &h3_action(), i, &bank, &spec).unwrap();
            assert!(r.max <= 1e-12, "i={i}: {r:?}");
        }
        let bad = h3_rep(-1);
        let r = local_lift_check(&bad, &h3_action(), 2, &bank, &spec).unwrap();
        assert!(r.max > 0.5);
    }

    fn h3_reduced() -> ReducedOperator {
        let data = laplacian_data(&h3_algebra(), &heisenberg_form(), Some(&h3_ideal())).unwrap();
        build_reduced(&data, &h3_rep(1), &Expr::one()).unwrap()
    }

    #[test]
    fn heisenberg_raw_operator() {
        let red = h3_reduced();
        let q = ["q"];
        let j = v("J");
        let expected = DiffOp::first_order(&q, -(j.clone().powi(2) * v("q").powi(2)), vec![Expr::int(2) * Expr::i() * j]);
        assert_eq!(red.raw, expected);
        assert!(red.second_order_vanishes());
    }

    #[test]
    fn heisenberg_first_order_split() {
        let red = h3_reduced();
        let n = Expr::int(2) * Expr::i() * v("J");
        let fo = extract_first_order(&red, &n, None).unwrap().first_order.unwrap();
        assert_eq!(fo.z, vec![Expr::one()]);
        let expected = (Expr::i() / 2 * (v("J").powi(2) * v("q").powi(2) + v("E")) / v("J")).simplify();
        assert!((fo.v.clone() - expected).simplify().is_zero(), "{}", fo.v);
    }

    #[test]
    fn scalar_raw_split() {
        let q = ["q"];
        let red = ReducedOperator { raw: DiffOp::scalar(&q, Expr::int(6)), first_order: None };
        let fo = extract_first_order(&red, &Expr::int(2), None).unwrap().first_order.unwrap();
        assert_eq!(fo.z, vec![Expr::zero()]);
        assert!((fo.v - (Expr::int(3) - v("E") / 2)).simplify().is_zero());
    }

    #[test]
    fn second_order_rejected() {
        let q = ["q"];
        let raw = DiffOp::zero(&q).with_term(vec![0, 0], v("q"));
        let red = ReducedOperator { raw, first_order: None };
        assert!(matches!(extract_first_order(&red, &Expr::one(), None), Err(Error::NotFirstOrder(_))));
        let spec = SampleSpec::new(10, 1).uniform("q", 1.0, 2.0);
        assert!(matches!(extract_first_order(&red, &Expr::one(), Some(&spec)), Err(Error::NotFirstOrder(_))));
    }

    #[test]
    fn abelian_toy_is_scalar() {
        let l = LieAlgebra::abelian(2);
        let form = crate::bilinear::BilinearForm::identity(2);
        let data = laplacian_data(&l, &form, None).unwrap();
        let q: [&str; 0] = [];
        let ops = vec![DiffOp::scalar(&q, Expr::i() * 2), DiffOp::scalar(&q, Expr::i() * 3)];
        let rep = LambdaRep::new(&q, ops, JParam::RealNonzero, Expr::one(), SampleSpec::new(0, 0)).unwrap();
        let red = build_reduced(&data, &rep, &Expr::one()).unwrap();
        assert_eq!(red.raw, DiffOp::scalar(&q, Expr::int(-13)));
    }

    #[test]
    fn unit_translation_flow() {
        let p = Assignment::new();
        let c = flow(&[Expr::one()], &["q"], &p, &[0.0], 1.0, 1e-2, None).unwrap();
        assert!((c.end()[0] - 1.0).abs() < 1e-14);
        let c = flow(&[Expr::zero()], &["q"], &p, &[0.3], -2.0, 1e-1, None).unwrap();
        assert_eq!(c.end(), &[0.3]);
    }

    #[test]
    fn domain_exit_reports_time() {
        let p = Assignment::new();
        let dom: Predicate = std::sync::Arc::new(|a: &Assignment| a.get("q").unwrap().re > 0.0);
        let r = flow(&[Expr::int(-1)], &["q"], &p, &[0.5], 1.0, 1e-2, Some(dom));
        match r {
            Err(Error::DomainExit { time }) => assert!((time - 0.5).abs() < 0.02, "{time}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn heisenberg_characteristic_solution() {
        let red = h3_reduced();
        let n = Expr::int(2) * Expr::i() * v("J");
        let fo = extract_first_order(&red, &n, None).unwrap().first_order.unwrap();
        let params = Assignment::new().with_real("E", 1.0).with_real("J", 1.0);
        let rect = Rectifier { v: v("q"), u: vec![], v_ref: 0.0 };
        let targets: Vec<Vec<f64>> = (0..=40).map(|k| vec![-2.0 + 0.1 * k as f64]).collect();
        let got = solve_reduced(&fo, &["q"], &params, &rect, &|_| Complex64::new(1.0, 0.0), &targets, 1e-3, None)
            .unwrap();
        for (q, g) in targets.iter().zip(&got) {
            let q = q[0];
            let want = Complex64::new(0.0, -q.powi(3) / 6.0 - q / 2.0).exp();
            assert!((g - want).norm() < 1e-8, "q={q}");
        }
    }

    #[test]
    fn zero_potential_keeps_phi() {
        let fo = FirstOrder { z: vec![Expr::one()], v: Expr::zero(), normalizer: Expr::one() };
        let rect = Rectifier { v: v("q"), u: vec![], v_ref: 0.0 };
        let got = solve_reduced(
            &fo,
            &["q"],
            &Assignment::new(),
            &rect,
            &|_| Complex64::new(0.7, 0.1),
            &[vec![1.3], vec![-0.4]],
            1e-2,
            None,
        )
        .unwrap();
        assert!(got.iter().all(|z| (z - Complex64::new(0.7, 0.1)).norm() < 1e-14));
    }

    #[test]
    fn heisenberg_closed_form_residuals() {
        let red = h3_reduced();
        let (q, j, e) = (v("q"), v("J"), v("E"));
        let psi = (-(Expr::i() * j.clone() * q.clone().powi(3) / 6) - Expr::i() * e * q / (Expr::int(2) * j)).exp();
        let spec = SampleSpec::new(20, 4).uniform("q", -2.0, 2.0).choice("J", &[-1.0, 1.0, 2.0]).uniform("E", -1.0, 1.0);
        let r = reduced_residual_symbolic(&red, &psi, &spec).unwrap();
        assert!(r.max <= 1e-12, "{r:?}");
        let spec0 = SampleSpec::new(20, 4).uniform("q", 0.5, 2.0).fixed("J", 1.0).fixed("E", 0.0);
        let r = reduced_residual_symbolic(&red, &Expr::one(), &spec0).unwrap();
        assert!(r.max > 0.2);
        let r = reduced_residual_symbolic(&red, &Expr::zero(), &spec0);
        assert!(matches!(r, Err(Error::Inconclusive(_))));
    }

    #[test]
    fn numeric_residual_agrees_with_symbolic() {
        let red = h3_reduced();
        let params = Assignment::new().with_real("E", 1.0).with_real("J", 1.0);
        let exact = |p: &[f64]| -> Result<Complex64> {
            let q = p[0];
            Ok(Complex64::new(0.0, -q.powi(3) / 6.0 - q / 2.0).exp())
        };
        let pts: Vec<Vec<f64>> = (0..9).map(|k| vec![-1.0 + 0.25 * k as f64]).collect();
        let r = reduced_residual_numeric(&red, &exact, &params, &pts, 1e-2).unwrap();
        assert!(r.max < 1e-7, "{r:?}");
        let one = |_: &[f64]| -> Result<Complex64> { Ok(Complex64::new(1.0, 0.0)) };
        assert!(reduced_residual_numeric(&red, &one, &params, &pts, 1e-2).unwrap().max > 0.5);
    }

    #[test]
    fn invariants_and_rectifier_trivia() {
        let z = [Expr::one()];
        let spec = SampleSpec::new(5, 1).uniform("q", -1.0, 1.0);
        assert_eq!(invariant_residual(&z, &["q"], &Expr::int(3), &spec).unwrap().max, 0.0);
        let r = rectify_check(&z, &["q"], &v("q"), &[], &spec).unwrap();
        assert_eq!(r.zv.max, 0.0);
        assert!(r.zu.is_none());
        let r = rectify_check(&z, &["q"], &(-v("q")), &[], &spec).unwrap();
        assert!((r.zv.max - 2.0).abs() < 1e-15);
    }

    #[test]
    fn rk4_step_halving_order() {
        // dq/dt = q, exact e^t
        let p = Assignment::new();
        let err = |h: f64| (flow(&[v("q")], &["q"], &p, &[1.0], 1.0, h, None).unwrap().end()[0] - 1f64.exp()).abs();
        let (e1, e2) = (err(0.1), err(0.05));
        assert!(e1 / e2 >= 8.0, "{e1} {e2}");
    }
}
