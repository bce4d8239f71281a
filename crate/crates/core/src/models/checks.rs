//! Registry of model-level checks run by `model verify`.

use crate::bilinear::laplacian_data;
use crate::error::{Error, Result};
use crate::reduction::{
    build_reduced, extract_first_order, local_lift_check, rectify_check, symmetry_residual, test_functions,
    verify_lambda_rep, ReducedOperator, CLOSURE_TOL,
};
use crate::report::{CheckReport, Status};
use crate::sampling::Residual;

use super::gft::casimir_scalar_check;
use super::{invariant_frame_check, GroupModel, GROUP_TOL};

pub const SAMPLES: usize = 100;
pub const LIFT_TOL: f64 = 1e-12;
pub const FIRST_ORDER_TOL: f64 = 1e-12;
pub const SYMMETRY_TOL: f64 = 1e-10;

pub trait ModelCheck: Send + Sync {
    fn name(&self) -> &'static str;

    fn applies_to(&self, _model: &GroupModel) -> bool {
        true
    }

    fn run(&self, model: &GroupModel, seed: u64) -> Result<CheckReport>;
}

struct Jacobi;
struct Frames;
struct LambdaRepClosure;
struct Lift;
struct ReducedFirstOrder;
struct Casimir;
struct Rectification;
struct ReducedSymmetry;

static CHECKS: [&dyn ModelCheck; 8] =
    [&Jacobi, &Frames, &LambdaRepClosure, &Lift, &ReducedFirstOrder, &Casimir, &Rectification, &ReducedSymmetry];

pub fn check_registry() -> &'static [&'static dyn ModelCheck] {
    &CHECKS
}

/// Every applicable check, in registry order. Errors become failing or inconclusive records.
pub fn run_checks(model: &GroupModel, seed: u64) -> Vec<CheckReport> {
    check_registry()
        .iter()
        .filter(|c| c.applies_to(model))
        .map(|c| c.run(model, seed).unwrap_or_else(|e| CheckReport::from_error(c.name(), &e, seed)))
        .collect()
}

/// Reduced operator with its normalized first-order split.
pub fn reduce_model(model: &GroupModel, seed: u64) -> Result<ReducedOperator> {
    let data = laplacian_data(&model.algebra, &model.form, Some(&model.ideal))?;
    let red = build_reduced(&data, &model.lrep, &model.modular_multiplier)?;
    let spec = model.reduced_chart.clone().with_count(SAMPLES).with_seed(seed);
    extract_first_order(&red, &model.normalizer, Some(&spec))
}

impl ModelCheck for Jacobi {
    fn name(&self) -> &'static str {
        "jacobi"
    }

    fn run(&self, model: &GroupModel, seed: u64) -> Result<CheckReport> {
        let defect = model.algebra.jacobi_defect();
        let mut r = CheckReport::new(self.name(), Status::from_bool(defect.is_empty()), seed)
            .metric("violations", defect.len())
            .metric("exact", true);
        r.max_residual = Some(defect.len() as f64);
        Ok(r)
    }
}

impl ModelCheck for Frames {
    fn name(&self) -> &'static str {
        "frames"
    }

    fn run(&self, model: &GroupModel, seed: u64) -> Result<CheckReport> {
        let fr = invariant_frame_check(model, SAMPLES, seed)?;
        let val = model.validate(seed)?;
        let mut r = CheckReport::new(self.name(), Status::from_bool(fr.passed() && val.passed()), seed)
            .metric("relations", fr.relations)
            .metric("failed", &fr.failed)
            .metric("duality", val.duality.max)
            .metric("associativity", val.associativity.max)
            .metric("frames_from_law", val.frames_from_law.max)
            .metric("tolerance", GROUP_TOL);
        r.max_residual = Some(fr.max_deviation);
        r.samples_used = fr.samples_used;
        r.skipped_samples = fr.skipped;
        if !fr.failed.is_empty() {
            r.message = Some(format!("relations failed: {}", fr.failed.join(", ")));
        }
        Ok(r)
    }
}

impl ModelCheck for LambdaRepClosure {
    fn name(&self) -> &'static str {
        "lambda-rep"
    }

    fn run(&self, model: &GroupModel, seed: u64) -> Result<CheckReport> {
        let rep = verify_lambda_rep(&model.algebra, &model.lrep, &model.ideal, SAMPLES, seed)?;
        let failed: Vec<String> = rep.failed_pairs.iter().map(|(i, j)| format!("({i},{j})")).collect();
        let mut r = CheckReport::new(self.name(), Status::from_bool(rep.passed()), seed)
            .metric("pairs_checked", rep.pairs_checked)
            .metric("mult_only_covers_ideal", rep.mult_only_covers_ideal)
            .metric("dimension_ok", rep.dim_ok)
            .metric("skew_defect", rep.max_skew_defect)
            .metric("tolerance", CLOSURE_TOL);
        r.max_residual = Some(rep.max_deviation);
        r.samples_used = rep.samples_used;
        r.skipped_samples = rep.skipped;
        if !failed.is_empty() {
            r.message = Some(format!("pairs failed: {}", failed.join(", ")));
        }
        Ok(r)
    }
}

impl ModelCheck for Lift {
    fn name(&self) -> &'static str {
        "lift"
    }

    fn run(&self, model: &GroupModel, seed: u64) -> Result<CheckReport> {
        let spec = model.lrep.samples(SAMPLES, seed);
        let center: Vec<f64> = match model.name.as_str() {
            "g4_7" => vec![0.5, 1.0],
            _ => vec![0.0; model.lrep.dim_q()],
        };
        let bank = test_functions(&model.q_vars_str(), &center);
        let mut total = Residual::exact_zero();
        let mut per = Vec::new();
        for i in 0..model.dim() {
            let r = local_lift_check(&model.lrep, &model.kernel.collapsed, i, &bank, &spec)?;
            per.push(r.max);
            total = total.merge(r);
        }
        Ok(CheckReport::from_residual(self.name(), &total, LIFT_TOL, seed).metric("per_generator", per))
    }
}

impl ModelCheck for ReducedFirstOrder {
    fn name(&self) -> &'static str {
        "reduced-first-order"
    }

    fn run(&self, model: &GroupModel, seed: u64) -> Result<CheckReport> {
        let red = reduce_model(model, seed)?;
        let symbolic_zero = red.second_order_vanishes();
        let spec = model.reduced_chart.clone().with_count(SAMPLES).with_seed(seed);
        let mut r = CheckReport::new(self.name(), Status::from_bool(symbolic_zero), seed)
            .metric("second_order_symbolic_zero", symbolic_zero);
        r.max_residual = Some(0.0);
        if let Some(p) = &model.printed_reduced {
            let eq = red.raw.op_equal(p, &spec, FIRST_ORDER_TOL)?;
            r = r.absorb("raw_vs_printed", &Residual { max: eq.max_deviation, samples_used: eq.samples_used, skipped: eq.skipped }, FIRST_ORDER_TOL);
            if !eq.equal {
                r.status = Status::Fail;
            }
        }
        if let Some(p) = &model.printed_first_order {
            let fo = red.first_order.as_ref().ok_or_else(|| Error::NotFirstOrder("no split".into()))?;
            let q = model.q_vars_str();
            let derived = crate::diffop::DiffOp::first_order(&q, fo.v.clone(), fo.z.clone());
            let printed = crate::diffop::DiffOp::first_order(&q, p.v.clone(), p.z.clone());
            let eq = derived.op_equal(&printed, &spec, FIRST_ORDER_TOL)?;
            r = r.absorb("zv_vs_printed", &Residual { max: eq.max_deviation, samples_used: eq.samples_used, skipped: eq.skipped }, FIRST_ORDER_TOL);
            if !eq.equal {
                r.status = Status::Fail;
            }
        }
        Ok(r)
    }
}

impl ModelCheck for Casimir {
    fn name(&self) -> &'static str {
        "casimir"
    }

    fn applies_to(&self, model: &GroupModel) -> bool {
        !model.center().is_empty()
    }

    fn run(&self, model: &GroupModel, seed: u64) -> Result<CheckReport> {
        let mut worst: f64 = 0.0;
        let mut scalars = Vec::new();
        for c in model.center() {
            for j in [1.0, -1.0] {
                let s = casimir_scalar_check(model, c, j)?;
                worst = worst.max((s - num_complex::Complex64::new(0.0, j)).norm());
                scalars.push(format!("ell{}(J={j}) = {:+}{:+}i", c + 1, s.re, s.im));
            }
        }
        let mut r = CheckReport::new(self.name(), Status::from_bool(worst == 0.0), seed)
            .metric("central", model.center().iter().map(|c| c + 1).collect::<Vec<_>>())
            .metric("scalars", scalars);
        r.max_residual = Some(worst);
        Ok(r)
    }
}

impl ModelCheck for Rectification {
    fn name(&self) -> &'static str {
        "rectification"
    }

    fn applies_to(&self, model: &GroupModel) -> bool {
        !model.rectifier.u.is_empty()
    }

    fn run(&self, model: &GroupModel, seed: u64) -> Result<CheckReport> {
        let red = reduce_model(model, seed)?;
        let fo = red.first_order.as_ref().ok_or_else(|| Error::NotFirstOrder("no split".into()))?;
        let spec = model.reduced_chart.clone().with_count(SAMPLES).with_seed(seed);
        let rr = rectify_check(&fo.z, &model.q_vars_str(), &model.rectifier.v, &model.rectifier.u, &spec)?;
        let mut r = CheckReport::from_residual(self.name(), &rr.zv, GROUP_TOL, seed).metric("zv_minus_one", rr.zv.max);
        if let Some(zu) = rr.zu {
            r = r.absorb("zu", &zu, GROUP_TOL);
        }
        Ok(r)
    }
}

impl ModelCheck for ReducedSymmetry {
    fn name(&self) -> &'static str {
        "reduced-symmetry"
    }

    fn applies_to(&self, model: &GroupModel) -> bool {
        !model.rectifier.u.is_empty()
    }

    fn run(&self, model: &GroupModel, seed: u64) -> Result<CheckReport> {
        let red = reduce_model(model, seed)?;
        let spec = model.reduced_chart.clone().with_count(SAMPLES).with_seed(seed);
        let mut total = Residual::exact_zero();
        for u in &model.rectifier.u {
            total = total.merge(symmetry_residual(&red, u, &spec)?);
        }
        Ok(CheckReport::from_residual(self.name(), &total, SYMMETRY_TOL, seed))
    }
}
