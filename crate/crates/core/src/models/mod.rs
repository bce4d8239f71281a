//! Bundled group models and the model-level verification toolkit.

pub mod checks;
pub mod g47;
pub mod gft;
pub mod heisenberg;
pub mod kernels;

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::algebra::LieAlgebra;
use crate::bilinear::{laplacian_data, BilinearForm};
use crate::diffop::{is_skippable, DiffOp};
use crate::error::{Error, Result};
use crate::expr::{Assignment, Expr};
use crate::rational::{rat, Rational, Subspace};
use crate::reduction::{assemble, CollapsedAction, LambdaRep, Rectifier};
use crate::sampling::{scan, Residual, SampleSpec};

pub use checks::{check_registry, run_checks, ModelCheck};

/// Sampled identities on the group hold to this tolerance.
pub const GROUP_TOL: f64 = 1e-12;
pub const HAAR_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub alpha: Rational,
    pub beta: Rational,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams { alpha: rat(1), beta: rat(1) }
    }
}

#[derive(Clone, Debug)]
pub struct Haar {
    pub left: Expr,
    pub right: Expr,
    pub unimodular: bool,
}

/// Spectral measure on the parameter set: `constant * density(J) dJ` on the real line, or
/// `constant` times counting measure on a discrete set.
#[derive(Clone, Debug)]
pub struct JMeasure {
    pub density: Expr,
    pub constant: f64,
}

/// Matrix elements `D_{qq'}(x) = prefactor * prod delta(c_k) * exp(phase)`.
#[derive(Clone, Debug)]
pub struct KernelD {
    pub q_prime_vars: Vec<String>,
    pub delta_constraints: Vec<Expr>,
    pub phase: Expr,
    pub prefactor: Expr,
    pub collapsed: CollapsedAction,
}

/// Printed normalized data `(Z, V)` for comparison against the derived split.
#[derive(Clone, Debug)]
pub struct FirstOrderRef {
    pub z: Vec<Expr>,
    pub v: Expr,
}

#[derive(Clone, Debug)]
pub struct GroupModel {
    pub name: String,
    pub params: ModelParams,
    pub algebra: LieAlgebra,
    pub x_vars: Vec<String>,
    pub y_vars: Vec<String>,
    /// `z(x, y)` with `h(x) h(y) = h(z)`.
    pub mult_law: Vec<Expr>,
    pub inverse_law: Vec<Expr>,
    pub xi: Vec<DiffOp>,
    pub eta: Vec<DiffOp>,
    /// `omega^i = sum_j dual_forms[i][j] dx_j`.
    pub dual_forms: Vec<Vec<Expr>>,
    pub form: BilinearForm,
    pub ideal: Subspace,
    pub lrep: LambdaRep,
    pub modular_multiplier: Expr,
    pub kernel: KernelD,
    pub haar: Haar,
    pub j_measure: JMeasure,
    pub normalizer: Expr,
    pub rectifier: Rectifier,
    pub printed_first_order: Option<FirstOrderRef>,
    pub printed_reduced: Option<DiffOp>,
    pub printed_frame_laplacian: DiffOp,
    pub printed_coordinate_laplacian: DiffOp,
    /// Sampling chart for `x`.
    pub x_chart: SampleSpec,
    /// Sampling chart for the reduced problem: `q`, `J` and `E`.
    pub reduced_chart: SampleSpec,
}

pub trait ModelFactory: Send + Sync {
    fn name(&self) -> &'static str;
    fn summary(&self) -> &'static str;
    fn build(&self, params: &ModelParams) -> Result<GroupModel>;
}

static REGISTRY: [&dyn ModelFactory; 2] = [&heisenberg::Heisenberg, &g47::G47];

pub fn registry() -> &'static [&'static dyn ModelFactory] {
    &REGISTRY
}

pub fn factory(name: &str) -> Result<&'static dyn ModelFactory> {
    registry().iter().copied().find(|f| f.name() == name).ok_or_else(|| {
        let known: Vec<&str> = registry().iter().map(|f| f.name()).collect();
        Error::UnsupportedModel(format!("unknown model `{name}` (known: {})", known.join(", ")))
    })
}

/// Builds the model and runs its self-validation.
pub fn load_model(name: &str, params: &ModelParams, seed: u64) -> Result<GroupModel> {
    let model = factory(name)?.build(params)?;
    model.validate(seed)?.into_result()?;
    Ok(model)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Validation {
    pub duality: Residual,
    pub associativity: Residual,
    pub identity: Residual,
    pub inverse: Residual,
    /// Frames recovered from the multiplication law versus the stored ones.
    pub frames_from_law: Residual,
    pub jacobi_ok: bool,
    pub kernel_identity_ok: bool,
}

impl Validation {
    pub fn passed(&self) -> bool {
        [self.duality, self.associativity, self.identity, self.inverse, self.frames_from_law]
            .iter()
            .all(|r| r.max <= GROUP_TOL)
            && self.jacobi_ok
            && self.kernel_identity_ok
    }

    pub fn into_result(self) -> Result<Self> {
        if self.passed() {
            Ok(self)
        } else {
            Err(Error::Verification(format!("model self-validation failed: {self:?}")))
        }
    }
}

fn strs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

impl GroupModel {
    pub fn dim(&self) -> usize {
        self.x_vars.len()
    }

    pub fn x_vars_str(&self) -> Vec<&str> {
        strs(&self.x_vars)
    }

    pub fn q_vars_str(&self) -> Vec<&str> {
        self.lrep.q_vars_str()
    }

    /// Basis indices of the center.
    pub fn center(&self) -> Vec<usize> {
        let n = self.dim();
        (0..n).filter(|&i| (0..n).all(|j| self.algebra.bracket_basis(i, j).iter().all(|c| *c == rat(0)))).collect()
    }

    fn point(&self, prefix: &str, a: &Assignment) -> Vec<f64> {
        (1..=self.dim()).map(|k| a.get(&format!("{prefix}{k}")).expect("sampled").re).collect()
    }

    fn law_at(&self, law: &[Expr], x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        let a = self.xy_assignment(x, y);
        law.iter().map(|e| e.eval(&a).map(|z| z.re)).collect()
    }

    fn xy_assignment(&self, x: &[f64], y: &[f64]) -> Assignment {
        let mut a = Assignment::new();
        for (n, &v) in self.x_vars.iter().zip(x) {
            a.set(n, Complex64::new(v, 0.0));
        }
        for (n, &v) in self.y_vars.iter().zip(y) {
            a.set(n, Complex64::new(v, 0.0));
        }
        a
    }

    pub fn multiply(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        self.law_at(&self.mult_law, x, y)
    }

    pub fn inverse(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.law_at(&self.inverse_law, x, &vec![0.0; self.dim()])
    }

    /// Seeded triples `(x, y, w)` with every coordinate uniform in `[-1, 1]`.
    pub fn triples(&self, count: usize, seed: u64) -> Vec<[Vec<f64>; 3]> {
        let mut spec = SampleSpec::new(count, seed);
        for p in ["a", "b", "c"] {
            for k in 1..=self.dim() {
                spec = spec.uniform(&format!("{p}{k}"), -1.0, 1.0);
            }
        }
        spec.points().iter().map(|a| [self.point("a", a), self.point("b", a), self.point("c", a)]).collect()
    }

    pub fn validate(&self, seed: u64) -> Result<Validation> {
        let n = self.dim();
        let triples = self.triples(50, seed);
        let vdist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let associativity = scan(&triples, |[x, y, w]| {
            let l = self.multiply(&self.multiply(x, y)?, w)?;
            let r = self.multiply(x, &self.multiply(y, w)?)?;
            Ok(vdist(&l, &r) / l.iter().map(|v| v.abs()).fold(1.0, f64::max))
        })?;
        let e = vec![0.0; n];
        let identity = scan(&triples, |[x, _, _]| {
            Ok(vdist(&self.multiply(&e, x)?, x).max(vdist(&self.multiply(x, &e)?, x)))
        })?;
        let inverse = scan(&triples, |[x, _, _]| {
            let xi = self.inverse(x)?;
            Ok(vdist(&self.multiply(x, &xi)?, &e).max(vdist(&self.multiply(&xi, x)?, &e)))
        })?;
        let spec = self.x_chart.clone().with_count(50).with_seed(seed);
        let duality = scan(spec.points(), |p| {
            let mut worst: f64 = 0.0;
            for (i, row) in self.dual_forms.iter().enumerate() {
                for (j, xi) in self.xi.iter().enumerate() {
                    let mut s = Complex64::new(0.0, 0.0);
                    for (k, w) in row.iter().enumerate() {
                        s += w.eval(&p)? * xi.coeff(&[k]).eval(&p)?;
                    }
                    let target = if i == j { 1.0 } else { 0.0 };
                    worst = worst.max((s - target).norm());
                }
            }
            Ok(worst)
        })?;
        let frames_from_law = self.frames_from_law(&spec)?;
        let kernel_identity_ok = self.kernel_identity_ok();
        Ok(Validation {
            duality,
            associativity,
            identity,
            inverse,
            frames_from_law,
            jacobi_ok: self.algebra.jacobi_defect().is_empty(),
            kernel_identity_ok,
        })
    }

    /// `xi_i^k(x) = dz_k/dy_i (x, 0)` and `eta_i^k(y) = dz_k/dx_i (0, y)`.
    fn frames_from_law(&self, spec: &SampleSpec) -> Result<Residual> {
        let n = self.dim();
        let zero_y: BTreeMap<String, Expr> = self.y_vars.iter().map(|y| (y.clone(), Expr::zero())).collect();
        let mut swap: BTreeMap<String, Expr> = self.x_vars.iter().map(|x| (x.clone(), Expr::zero())).collect();
        for (x, y) in self.x_vars.iter().zip(&self.y_vars) {
            swap.insert(y.clone(), Expr::var(x));
        }
        let mut pairs = Vec::new();
        for i in 0..n {
            for k in 0..n {
                let xi = self.mult_law[k].diff(&self.y_vars[i]).substitute(&zero_y).simplify();
                let eta = self.mult_law[k].diff(&self.x_vars[i]).substitute(&swap).simplify();
                pairs.push((xi, self.xi[i].coeff(&[k])));
                pairs.push((eta, self.eta[i].coeff(&[k])));
            }
        }
        if pairs.iter().all(|(a, b)| (a - b).simplify().is_zero()) {
            return Ok(Residual::exact_zero());
        }
        scan(spec.points(), |p| {
            let mut worst: f64 = 0.0;
            for (a, b) in &pairs {
                worst = worst.max((a.eval(&p)? - b.eval(&p)?).norm());
            }
            Ok(worst)
        })
    }

    /// At `x = 0` every constraint vanishes on `q' = q` and the phase vanishes.
    fn kernel_identity_ok(&self) -> bool {
        let mut map: BTreeMap<String, Expr> = self.x_vars.iter().map(|x| (x.clone(), Expr::zero())).collect();
        let zero_x = map.clone();
        for (qp, q) in self.kernel.q_prime_vars.iter().zip(&self.lrep.q_vars) {
            map.insert(qp.clone(), Expr::var(q));
        }
        let constraints_ok = self.kernel.delta_constraints.iter().all(|c| c.substitute(&map).simplify().is_zero());
        let args_ok = self
            .kernel
            .collapsed
            .args
            .iter()
            .zip(&self.lrep.q_vars)
            .all(|(a, q)| (a.substitute(&zero_x) - Expr::var(q)).simplify().is_zero());
        constraints_ok
            && args_ok
            && self.kernel.phase.substitute(&map).simplify().is_zero()
            && self.kernel.collapsed.phase.substitute(&zero_x).simplify().is_zero()
    }

    /// The frame Laplacian `sum G^ij xi_i xi_j + sum c^i xi_i`.
    pub fn laplace_operator(&self) -> Result<DiffOp> {
        let data = laplacian_data(&self.algebra, &self.form, Some(&self.ideal))?;
        assemble(&self.xi, &data)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameReport {
    pub relations: usize,
    pub max_deviation: f64,
    pub failed: Vec<String>,
    pub samples_used: usize,
    pub skipped: usize,
}

impl FrameReport {
    pub fn passed(&self) -> bool {
        self.failed.is_empty()
    }
}

/// `[xi_i, xi_j] = C_ij^k xi_k`, `[eta_i, eta_j] = -C_ij^k eta_k`, `[xi_i, eta_j] = 0`.
pub fn invariant_frame_check(model: &GroupModel, count: usize, seed: u64) -> Result<FrameReport> {
    let n = model.dim();
    let vars = model.x_vars_str();
    let spec = model.x_chart.clone().with_count(count).with_seed(seed);
    let combo = |ops: &[DiffOp], c: &[Rational], sign: i64| -> DiffOp {
        let mut out = DiffOp::zero(&vars);
        for (k, ck) in c.iter().enumerate() {
            if *ck != rat(0) {
                out = out.add(&ops[k].scale(&Expr::constant(ck.clone() * rat(sign)))).expect("same vars");
            }
        }
        out
    };
    let mut report = FrameReport { relations: 0, max_deviation: 0.0, failed: Vec::new(), samples_used: 0, skipped: 0 };
    let mut record = |label: String, lhs: DiffOp, rhs: DiffOp| -> Result<()> {
        let eq = lhs.op_equal(&rhs, &spec, GROUP_TOL)?;
        report.relations += 1;
        report.max_deviation = report.max_deviation.max(eq.max_deviation);
        report.samples_used += eq.samples_used;
        report.skipped += eq.skipped;
        if !eq.equal {
            report.failed.push(label);
        }
        Ok(())
    };
    for i in 0..n {
        for j in i + 1..n {
            let c = model.algebra.bracket_basis(i, j);
            record(format!("[xi{},xi{}]", i + 1, j + 1), model.xi[i].commutator(&model.xi[j])?, combo(&model.xi, &c, 1))?;
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            let c = model.algebra.bracket_basis(i, j);
            record(
                format!("[eta{},eta{}]", i + 1, j + 1),
                model.eta[i].commutator(&model.eta[j])?,
                combo(&model.eta, &c, -1),
            )?;
        }
    }
    for i in 0..n {
        for j in 0..n {
            record(format!("[xi{},eta{}]", i + 1, j + 1), model.xi[i].commutator(&model.eta[j])?, DiffOp::zero(&vars))?;
        }
    }
    Ok(report)
}

/// Gaussian elimination with partial pivoting.
pub fn det_complex(mut m: Vec<Vec<Complex64>>) -> Complex64 {
    let n = m.len();
    let mut det = Complex64::new(1.0, 0.0);
    for c in 0..n {
        let p = (c..n).max_by(|&a, &b| m[a][c].norm().total_cmp(&m[b][c].norm())).expect("nonempty");
        if m[p][c].norm() == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if p != c {
            m.swap(p, c);
            det = -det;
        }
        det *= m[c][c];
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            for k in c..n {
                let v = m[c][k];
                m[r][k] -= f * v;
            }
        }
    }
    det
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HaarReport {
    /// `max |rho_L(a y) det(d(a y)/dy) / rho_L(y) - 1|`.
    pub left: Residual,
    /// Same for right translations and `rho_R`.
    pub right: Residual,
    /// `max |rho_L / rho_R - 1|`; zero exactly when the densities agree.
    pub left_right_gap: f64,
}

/// Sampled invariance of the stored Haar densities under translations.
pub fn haar_invariance_check(model: &GroupModel, count: usize, seed: u64) -> Result<HaarReport> {
    let n = model.dim();
    let triples = model.triples(count, seed);
    let dz_dy: Vec<Vec<Expr>> =
        (0..n).map(|k| (0..n).map(|j| model.mult_law[k].diff(&model.y_vars[j]).simplify()).collect()).collect();
    let dz_dx: Vec<Vec<Expr>> =
        (0..n).map(|k| (0..n).map(|j| model.mult_law[k].diff(&model.x_vars[j]).simplify()).collect()).collect();
    let density = |rho: &Expr, x: &[f64]| -> Result<Complex64> { rho.eval(&model.xy_assignment(x, &[])) };
    let jac = |m: &[Vec<Expr>], x: &[f64], y: &[f64]| -> Result<Complex64> {
        let a = model.xy_assignment(x, y);
        let rows = m.iter().map(|r| r.iter().map(|e| e.eval(&a)).collect::<Result<Vec<_>>>()).collect::<Result<_>>()?;
        Ok(det_complex(rows))
    };
    let left = scan(&triples, |[a, y, _]| {
        let ay = model.multiply(a, y)?;
        let r = density(&model.haar.left, &ay)? * jac(&dz_dy, a, y)? / density(&model.haar.left, y)?;
        Ok((r - 1.0).norm())
    })?;
    let right = scan(&triples, |[a, y, _]| {
        let ya = model.multiply(y, a)?;
        let r = density(&model.haar.right, &ya)? * jac(&dz_dx, y, a)? / density(&model.haar.right, y)?;
        Ok((r - 1.0).norm())
    })?;
    let mut gap: f64 = 0.0;
    for [x, _, _] in &triples {
        let r = density(&model.haar.left, x)? / density(&model.haar.right, x)?;
        gap = gap.max((r - 1.0).norm());
    }
    Ok(HaarReport { left, right, left_right_gap: gap })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PdeResidual {
    /// `max |Delta psi - E psi| / max |psi|`.
    pub residual: Residual,
    /// Largest gap between the finite-difference and symbolic Laplacians over the first ten
    /// usable points, relative to the largest `|Delta psi|` or `|psi|` seen there.
    pub fd_deviation: f64,
}

pub const FD_STEP: f64 = 1e-2;
const FD_POINTS: usize = 10;

/// Relative residual of `Delta psi = E psi` at `points`, with a finite-difference cross-check.
pub fn pde_residual(model: &GroupModel, psi: &Expr, e: f64, points: &[Vec<f64>]) -> Result<PdeResidual> {
    let lap = model.laplace_operator()?;
    let lpsi = lap.apply(psi);
    let vars = model.x_vars_str();
    let at = |x: &[f64]| -> Assignment {
        let mut a = Assignment::new();
        for (n, &v) in vars.iter().zip(x) {
            a.set(n, Complex64::new(v, 0.0));
        }
        a
    };
    let field = |x: &[f64]| psi.eval(&at(x));
    let mut vals = Vec::new();
    let mut skipped = 0;
    let (mut fd_gap, mut fd_scale) = (0.0f64, 0.0f64);
    for x in points {
        match (lpsi.eval(&at(x)), field(x)) {
            (Ok(l), Ok(f)) => {
                if vals.len() < FD_POINTS {
                    match lap.apply_numeric(&field, x, &Assignment::new(), FD_STEP) {
                        Ok(fd) => {
                            fd_gap = fd_gap.max((fd - l).norm());
                            fd_scale = fd_scale.max(l.norm()).max(f.norm());
                        }
                        Err(err) if is_skippable(&err) => {}
                        Err(err) => return Err(err),
                    }
                }
                vals.push(((l - e * f).norm(), f.norm()));
            }
            (Err(err), _) | (_, Err(err)) if is_skippable(&err) => skipped += 1,
            (Err(err), _) | (_, Err(err)) => return Err(err),
        }
    }
    if vals.is_empty() {
        return Err(Error::Inconclusive(format!("every sample point was skipped ({skipped})")));
    }
    let sup = vals.iter().map(|v| v.1).fold(0.0, f64::max);
    if sup < crate::reduction::FIELD_FLOOR {
        return Err(Error::Inconclusive("field vanishes on every sample".into()));
    }
    let max = vals.iter().map(|v| v.0).fold(0.0, f64::max) / sup;
    let fd_deviation = fd_gap / fd_scale.max(crate::reduction::FIELD_FLOOR);
    Ok(PdeResidual { residual: Residual { max, samples_used: vals.len(), skipped }, fd_deviation })
}

/// Relative residual of `Delta psi = E psi` for a numeric field, with the Laplacian applied by
/// fourth-order central differences of width `h`.
pub fn field_pde_residual(
    model: &GroupModel,
    field: &dyn Fn(&[f64]) -> Result<Complex64>,
    e: f64,
    points: &[Vec<f64>],
    h: f64,
) -> Result<Residual> {
    let lap = model.laplace_operator()?;
    let mut vals = Vec::new();
    let mut skipped = 0;
    for x in points {
        match lap.apply_numeric(field, x, &Assignment::new(), h).and_then(|l| Ok((l, field(x)?))) {
            Ok((l, f)) => vals.push(((l - e * f).norm(), f.norm())),
            Err(err) if is_skippable(&err) => skipped += 1,
            Err(err) => return Err(err),
        }
    }
    if vals.is_empty() {
        return Err(Error::Inconclusive(format!("every sample point was skipped ({skipped})")));
    }
    let sup = vals.iter().map(|v| v.1).fold(0.0, f64::max);
    if sup < crate::reduction::FIELD_FLOOR {
        return Err(Error::Inconclusive("field vanishes on every sample".into()));
    }
    let max = vals.iter().map(|v| v.0).fold(0.0, f64::max) / sup;
    Ok(Residual { max, samples_used: vals.len(), skipped })
}

/// `n^3` grid over `[lo, hi]^3` (or the analogous tensor grid in `dim` dimensions).
pub fn grid(dim: usize, n: usize, lo: f64, hi: f64) -> Vec<Vec<f64>> {
    let axis: Vec<f64> =
        (0..n).map(|k| if n == 1 { 0.5 * (lo + hi) } else { lo + (hi - lo) * k as f64 / (n - 1) as f64 }).collect();
    let mut out = vec![Vec::new()];
    for _ in 0..dim {
        out = out.into_iter().flat_map(|p| axis.iter().map(move |&a| [p.clone(), vec![a]].concat())).collect();
    }
    out
}

/// Coefficient-wise comparison of two operators at sample points; returns the offending
/// multi-indices (as variable-name lists) with their largest absolute gap.
pub fn termwise_discrepancies(a: &DiffOp, b: &DiffOp, spec: &SampleSpec, tol: f64) -> Result<Vec<(String, f64)>> {
    let keys: std::collections::BTreeSet<Vec<usize>> = a.coeffs().keys().chain(b.coeffs().keys()).cloned().collect();
    let mut out = Vec::new();
    for k in keys {
        let d = (a.coeff(&k) - b.coeff(&k)).simplify();
        if d.is_zero() {
            continue;
        }
        let r = scan(spec.points(), |p| Ok(d.eval(&p)?.norm()))?;
        if r.max > tol {
            let names: Vec<&str> = k.iter().map(|&i| a.vars()[i].as_str()).collect();
            out.push((format!("D[{}]", names.join(",")), r.max));
        }
    }
    Ok(out)
}
