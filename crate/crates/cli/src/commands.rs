use std::collections::BTreeMap;
use std::path::Path;

use nclb_core::algebra::LieAlgebra;
use nclb_core::bilinear::coisotropy_check;
use nclb_core::expr::{self, Expr};
use nclb_core::models::checks::{check_registry, reduce_model, run_checks};
use nclb_core::models::gft::{inverse_gft_h3, mode_solution_h3, SpectralBox};
use nclb_core::models::{field_pde_residual, g47, load_model, pde_residual, GroupModel, ModelParams, FD_STEP};
use nclb_core::quadrature::QuadSpec;
use nclb_core::rational::{format_rational, ratio, to_f64, Rational, Subspace};
use nclb_core::reduction::{E_VAR, J_VAR};
use nclb_core::report::{CheckReport, ReportDoc, Status};
use nclb_core::sampling::Residual;
use nclb_core::{Error, Result};
use num_complex::Complex64;

use crate::io::{load_form, parse_grid, parse_rational_flag, read_field_csv, read_text, write_field_csv};
use crate::{is_usage_error, Command, ModelCommand, ParamArgs};

pub const MODE_TOL: f64 = 1e-8;
pub const FD_CROSS_TOL: f64 = 1e-5;
pub const SAMPLED_TOL: f64 = 1e-4;
pub const REDUCED_TOL: f64 = 1e-6;
pub const RECONSTRUCT_TOL: f64 = 1e-3;
const DEFAULT_GRID: &str = "5:-1:1";
const CHARACTERISTIC_POINTS: usize = 25;
const RECONSTRUCT_ORDER: usize = 8;
const MAX_ALIGNED_PANELS: usize = 64;

type Params = BTreeMap<String, String>;

pub fn execute(cmd: &Command, seed: u64) -> Result<ReportDoc> {
    match cmd {
        Command::CheckAlgebra { file } => check_algebra(file, seed),
        Command::Index { file, trials } => index(file, *trials, seed),
        Command::Coisotropic { file, form, ideal, params } => coisotropic(file, form, ideal, params, seed),
        Command::Model(m) => model(m, seed),
    }
}

/// Runs a check body; invocation errors propagate, anything else becomes the check record.
fn guard(name: &str, seed: u64, body: impl FnOnce() -> Result<CheckReport>) -> Result<CheckReport> {
    match body() {
        Ok(r) => Ok(r),
        Err(e) if is_usage_error(&e) => Err(e),
        Err(e) => Ok(CheckReport::from_error(name, &e, seed)),
    }
}

fn load_algebra(path: &Path) -> Result<LieAlgebra> {
    LieAlgebra::from_json(&read_text(path)?).map_err(|e| match e {
        Error::Input(m) => Error::Input(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn model_params(p: &ParamArgs) -> Result<ModelParams> {
    let d = ModelParams::default();
    Ok(ModelParams {
        alpha: p.alpha.as_deref().map(|s| parse_rational_flag("alpha", s)).transpose()?.unwrap_or(d.alpha),
        beta: p.beta.as_deref().map(|s| parse_rational_flag("beta", s)).transpose()?.unwrap_or(d.beta),
    })
}

fn record_params(params: &mut Params, mp: &ModelParams) {
    params.insert("alpha".into(), format_rational(&mp.alpha));
    params.insert("beta".into(), format_rational(&mp.beta));
}

fn check_algebra(file: &Path, seed: u64) -> Result<ReportDoc> {
    let l = load_algebra(file)?;
    let defect = l.jacobi_defect();
    let triples: Vec<String> =
        defect.iter().map(|v| format!("({},{},{})", v.triple.0 + 1, v.triple.1 + 1, v.triple.2 + 1)).collect();
    let mut r = CheckReport::new("jacobi", Status::from_bool(defect.is_empty()), seed)
        .metric("dim", l.dim())
        .metric("violations", defect.len())
        .metric("exact", true);
    r.max_residual = Some(defect.len() as f64);
    if !triples.is_empty() {
        r = r.metric("failing_triples", &triples).with_message(format!("Jacobi fails on {}", triples.join(", ")));
    }
    let params = Params::from([("file".to_string(), file.display().to_string())]);
    Ok(ReportDoc::new("check-algebra", seed, params, vec![r]))
}

fn index(file: &Path, trials: usize, seed: u64) -> Result<ReportDoc> {
    if trials == 0 {
        return Err(Error::Input("--trials must be at least 1".into()));
    }
    let l = load_algebra(file)?;
    let est = l.index(trials, seed);
    let witness: Vec<String> = est.witness.0.iter().map(format_rational).collect();
    let r = CheckReport::new("index", Status::Pass, seed)
        .metric("index", est.index)
        .metric("frobenius", est.index == 0)
        .metric("trials", trials)
        .metric("witness", witness)
        .with_message(format!("index = {}", est.index));
    let params = Params::from([
        ("file".to_string(), file.display().to_string()),
        ("trials".to_string(), trials.to_string()),
    ]);
    Ok(ReportDoc::new("index", seed, params, vec![r]))
}

fn coisotropic(file: &Path, form: &Path, ideal: &[usize], p: &ParamArgs, seed: u64) -> Result<ReportDoc> {
    let l = load_algebra(file)?;
    let mp = model_params(p)?;
    let (g, substituted) = load_form(form, &mp.alpha, &mp.beta)?;
    let n = l.dim();
    if let Some(bad) = ideal.iter().find(|&&i| i == 0 || i > n) {
        return Err(Error::Input(format!("--ideal index {bad} outside 1..={n}")));
    }
    let idx: Vec<usize> = ideal.iter().map(|i| i - 1).collect();
    let h = Subspace::coordinate(n, &idx);
    let rep = coisotropy_check(&l, &g, &h)?;
    let r = CheckReport::new("coisotropic", Status::from_bool(rep.verdict), seed)
        .metric("is_commutative_ideal", rep.is_commutative_ideal)
        .metric("hperp_in_h", rep.hperp_in_h)
        .metric("block_zero", rep.block_zero)
        .metric("verdict", rep.verdict)
        .with_message(format!("verdict = {}", rep.verdict));
    let list: Vec<String> = ideal.iter().map(usize::to_string).collect();
    let mut params = Params::from([
        ("file".to_string(), file.display().to_string()),
        ("form".to_string(), form.display().to_string()),
        ("ideal".to_string(), list.join(",")),
    ]);
    if substituted {
        record_params(&mut params, &mp);
    }
    Ok(ReportDoc::new("coisotropic", seed, params, vec![r]))
}

fn model(cmd: &ModelCommand, seed: u64) -> Result<ReportDoc> {
    match cmd {
        ModelCommand::Verify { name, params } => {
            let mp = model_params(params)?;
            let m = load_model(name, &mp, seed)?;
            let mut p = Params::from([("model".to_string(), name.clone())]);
            record_params(&mut p, &mp);
            Ok(ReportDoc::new("model verify", seed, p, run_checks(&m, seed)))
        }
        ModelCommand::Reduce { name, params, j, e } => reduce(name, params, j.as_deref(), e.as_deref(), seed),
        ModelCommand::Residual { name, params, psi, mu, nu, e, j, grid, tol } => {
            let mp = model_params(params)?;
            let m = load_model(name, &mp, seed)?;
            let mut p = Params::from([("model".to_string(), name.clone()), ("psi".to_string(), psi.clone())]);
            record_params(&mut p, &mp);
            let opts = ResidualOpts { mu: mu.as_deref(), nu: nu.as_deref(), e: e.as_deref(), j: j.as_deref(), grid: grid.as_deref(), tol: *tol };
            let checks = residual(&m, psi, &opts, &mut p, seed)?;
            Ok(ReportDoc::new("model residual", seed, p, checks))
        }
        ModelCommand::Reconstruct { name, phi, e, grid, tol, out } => {
            reconstruct(name, phi, e, grid, *tol, out.as_deref(), seed)
        }
    }
}

fn parse_j(m: &GroupModel, text: &str) -> Result<Rational> {
    let j = parse_rational_flag("J", text)?;
    if !m.lrep.j_param.contains(to_f64(&j)) {
        return Err(Error::Parameter(format!("J = {text} is not in {} for {}", m.lrep.j_param.describe(), m.name)));
    }
    Ok(j)
}

fn reduce(name: &str, params: &ParamArgs, j: Option<&str>, e: Option<&str>, seed: u64) -> Result<ReportDoc> {
    let mp = model_params(params)?;
    let m = load_model(name, &mp, seed)?;
    let mut p = Params::from([("model".to_string(), name.to_string())]);
    record_params(&mut p, &mp);
    let mut subs = BTreeMap::new();
    if let Some(j) = j {
        let jv = parse_j(&m, j)?;
        p.insert(J_VAR.into(), format_rational(&jv));
        subs.insert(J_VAR.to_string(), Expr::constant(jv));
    }
    if let Some(e) = e {
        let ev = parse_rational_flag("E", e)?;
        p.insert(E_VAR.into(), format_rational(&ev));
        subs.insert(E_VAR.to_string(), Expr::constant(ev));
    }
    let check = check_registry().iter().find(|c| c.name() == "reduced-first-order").expect("registered");
    let r = guard(check.name(), seed, || {
        let red = reduce_model(&m, seed)?;
        let fo = red.first_order.as_ref().ok_or_else(|| Error::NotFirstOrder("no first-order split".into()))?;
        let show = |x: &Expr| x.substitute(&subs).simplify().to_string();
        Ok(check
            .run(&m, seed)?
            .metric("raw", red.raw.substitute(&subs).to_string())
            .metric("Z", fo.z.iter().map(show).collect::<Vec<_>>())
            .metric("V", show(&fo.v))
            .metric("normalizer", show(&fo.normalizer)))
    })?;
    Ok(ReportDoc::new("model reduce", seed, p, vec![r]))
}

struct ResidualOpts<'a> {
    mu: Option<&'a str>,
    nu: Option<&'a str>,
    e: Option<&'a str>,
    j: Option<&'a str>,
    grid: Option<&'a str>,
    tol: Option<f64>,
}

fn residual(m: &GroupModel, psi: &str, o: &ResidualOpts, p: &mut Params, seed: u64) -> Result<Vec<CheckReport>> {
    let rat_or = |flag: &str, v: Option<&str>, d: Rational| -> Result<Rational> {
        v.map(|s| parse_rational_flag(flag, s)).transpose().map(|x| x.unwrap_or(d))
    };
    let need_e = || -> Result<Rational> {
        o.e.map(|s| parse_rational_flag("E", s)).transpose()?.ok_or_else(|| Error::Input("--E is required for a field file".into()))
    };
    if psi == "mode" {
        return match m.name.as_str() {
            "heisenberg" => {
                let mu = rat_or("mu", o.mu, ratio(1, 2))?;
                let nu = rat_or("nu", o.nu, ratio(1, 1))?;
                let e = rat_or("E", o.e, ratio(1, 1))?;
                for (k, v) in [("mu", &mu), ("nu", &nu), ("E", &e)] {
                    p.insert(k.into(), format_rational(v));
                }
                let f = mode_solution_h3(&mu, &nu, &e)?;
                symbolic_residual(m, &f, to_f64(&e), o, p, seed)
            }
            "g4_7" => {
                let e = rat_or("E", o.e, ratio(7, 10))?;
                p.insert("E".into(), format_rational(&e));
                let js: Vec<f64> = match o.j {
                    Some(j) => vec![to_f64(&parse_j(m, j)?)],
                    None => g47::J_VALUES.to_vec(),
                };
                let tol = o.tol.unwrap_or(REDUCED_TOL);
                let red = reduce_model(m, seed)?;
                let pts = g47::interior_points(&m.params, CHARACTERISTIC_POINTS, seed);
                js.iter()
                    .map(|&j| {
                        let name = format!("reduced-residual(J={j})");
                        guard(&name, seed, || {
                            let r = g47::characteristic_residual(m, &red, j, to_f64(&e), &pts)?;
                            Ok(CheckReport::from_residual(&name, &r, tol, seed).metric("J", j))
                        })
                    })
                    .collect()
            }
            other => Err(Error::UnsupportedModel(format!("no mode family for `{other}`"))),
        };
    }
    let path = Path::new(psi);
    let e = need_e()?;
    p.insert("E".into(), format_rational(&e));
    if path.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv")) {
        let field = read_field_csv(path, m.dim())?;
        let h = field.uniform_step().ok_or_else(|| {
            Error::Input(format!("{}: finite differences need one common grid step on every axis", path.display()))
        })?;
        let pts = field.interior_nodes(2);
        if pts.is_empty() {
            return Err(Error::Input(format!("{}: need at least five nodes per axis", path.display())));
        }
        let tol = o.tol.unwrap_or(SAMPLED_TOL);
        p.insert("step".into(), format!("{h:e}"));
        let r = guard("pde-residual", seed, || {
            let r = field_pde_residual(m, &|x| field.eval(x), to_f64(&e), &pts, h)?;
            Ok(CheckReport::from_residual("pde-residual", &r, tol, seed).metric("step", h))
        })?;
        return Ok(vec![r]);
    }
    let f = expr::parse(read_text(path)?.trim())?;
    p.insert("expression".into(), f.to_string());
    symbolic_residual(m, &f, to_f64(&e), o, p, seed)
}

fn symbolic_residual(
    m: &GroupModel,
    f: &Expr,
    e: f64,
    o: &ResidualOpts,
    p: &mut Params,
    seed: u64,
) -> Result<Vec<CheckReport>> {
    let grid = o.grid.unwrap_or(DEFAULT_GRID);
    p.insert("grid".into(), grid.to_string());
    let pts = parse_grid(grid, m.dim())?;
    let tol = o.tol.unwrap_or(MODE_TOL);
    match pde_residual(m, f, e, &pts) {
        Ok(r) => {
            let fd = Residual { max: r.fd_deviation, samples_used: r.residual.samples_used.min(10), skipped: 0 };
            Ok(vec![
                CheckReport::from_residual("pde-residual", &r.residual, tol, seed),
                CheckReport::from_residual("fd-crosscheck", &fd, FD_CROSS_TOL, seed).metric("step", FD_STEP),
            ])
        }
        Err(err) if is_usage_error(&err) => Err(err),
        Err(err) => Ok(vec![CheckReport::from_error("pde-residual", &err, seed)]),
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn reconstruct(
    name: &str,
    phi: &Path,
    e: &str,
    grid: &str,
    tol: f64,
    out: Option<&Path>,
    seed: u64,
) -> Result<ReportDoc> {
    if name != "heisenberg" {
        return Err(Error::UnsupportedModel(format!("reconstruct supports heisenberg only, not `{name}`")));
    }
    if !(tol > 0.0) {
        return Err(Error::Input("--tol must be positive".into()));
    }
    let m = load_model(name, &ModelParams::default(), seed)?;
    let data = read_field_csv(phi, 2)?;
    let b = data.bounds();
    let support = SpectralBox { k: b[0], j: b[1] };
    let ev = parse_rational_flag("E", e)?;
    let e = to_f64(&ev);
    let pts = parse_grid(grid, 3)?;
    let (ck, cj) = (data.axes()[0].len() - 1, data.axes()[1].len() - 1);
    let lcm = ck / gcd(ck, cj) * cj;
    let panels = if lcm <= MAX_ALIGNED_PANELS { lcm } else { ck.max(cj) };
    let quad = QuadSpec { panels, order: RECONSTRUCT_ORDER, tol, max_doublings: 4 };
    let phi_fn = |k: f64, j: f64| data.eval(&[k, j]).unwrap_or(Complex64::new(0.0, 0.0));
    let params = Params::from([
        ("model".to_string(), name.to_string()),
        ("phi".to_string(), phi.display().to_string()),
        ("E".to_string(), format_rational(&ev)),
        ("grid".to_string(), grid.to_string()),
        ("tol".to_string(), format!("{tol:e}")),
    ]);
    let mut checks = Vec::new();
    match inverse_gft_h3(&phi_fn, &support, e, &pts, &quad) {
        Ok(res) => {
            let trace = Residual { max: res.trace.last().copied().unwrap_or(0.0), samples_used: pts.len(), skipped: 0 };
            checks.push(
                CheckReport::from_residual("inverse-transform", &trace, tol, seed)
                    .metric("panels", res.field.panels())
                    .metric("refinement_trace", &res.trace),
            );
            checks.push(guard("pde-residual", seed, || {
                let r = field_pde_residual(&m, &|x| res.field.eval(x), e, &pts, FD_STEP)?;
                Ok(CheckReport::from_residual("pde-residual", &r, RECONSTRUCT_TOL, seed).metric("step", FD_STEP))
            })?);
            if let Some(out) = out {
                write_field_csv(out, &m.x_vars_str(), &pts, &res.values)?;
            }
        }
        Err(err) if is_usage_error(&err) => return Err(err),
        Err(err) => checks.push(CheckReport::from_error("inverse-transform", &err, seed)),
    }
    Ok(ReportDoc::new("model reconstruct", seed, params, checks))
}
