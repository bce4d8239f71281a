//! The non-unimodular group of type g(4,7) with the signature (2,2) metric `G1(alpha, beta)`.

use crate::algebra::LieAlgebra;
use crate::bilinear::g47_form;
use crate::diffop::DiffOp;
use crate::error::{Error, Result};
use crate::expr::{v, Expr};
use crate::rational::{rat, to_f64, Rational, Subspace};
use num_complex::Complex64;

use crate::expr::Assignment;
use crate::reduction::{
    reduced_residual_numeric, solve_reduced, CollapsedAction, JParam, LambdaRep, Rectifier, ReducedOperator, E_VAR,
    J_VAR,
};
use crate::sampling::{Residual, SampleSpec};

use super::{FirstOrderRef, GroupModel, Haar, JMeasure, KernelD, ModelFactory, ModelParams};

pub struct G47;

pub const X: [&str; 4] = ["x1", "x2", "x3", "x4"];
pub const Y: [&str; 4] = ["y1", "y2", "y3", "y4"];
pub const Q: [&str; 2] = ["q1", "q2"];
pub const J_VALUES: [f64; 2] = [-1.0, 1.0];
/// Section of the characteristic foliation used to normalize solutions.
pub const V_REF: f64 = -1.0;

pub fn algebra() -> LieAlgebra {
    LieAlgebra::from_integer_constants(
        4,
        &[(1, 4, &[(1, 2)]), (2, 3, &[(1, 1)]), (2, 4, &[(2, 1)]), (3, 4, &[(2, 1), (3, 1)])],
    )
}

pub fn check_params(p: &ModelParams) -> Result<()> {
    let zero = rat(0);
    if p.alpha == zero || p.beta == zero {
        return Err(Error::Parameter(format!(
            "alpha * beta must be nonzero (alpha = {}, beta = {})",
            p.alpha, p.beta
        )));
    }
    if discriminant(p) <= zero {
        return Err(Error::Parameter(format!("alpha^2 + 4 beta must be positive (got {})", discriminant(p))));
    }
    Ok(())
}

fn discriminant(p: &ModelParams) -> Rational {
    &p.alpha * &p.alpha + rat(4) * &p.beta
}

/// Roots of `lambda^2 - alpha lambda - beta = 0`, larger first, exact and as floats.
pub fn lambdas(p: &ModelParams) -> ([Expr; 2], [f64; 2]) {
    let root = Expr::constant(discriminant(p)).sqrt();
    let a = Expr::constant(p.alpha.clone());
    let l1 = ((&a + &root) / 2).simplify();
    let l2 = ((&a - &root) / 2).simplify();
    let r = to_f64(&discriminant(p)).sqrt();
    let af = to_f64(&p.alpha);
    ([l1, l2], [(af + r) / 2.0, (af - r) / 2.0])
}

/// `(v, u)` with `Z v = 1`, `Z u = 0`.
pub fn rectifying_coordinates(p: &ModelParams) -> (Expr, Expr) {
    let ([l1, l2], _) = lambdas(p);
    let (q1, q2) = (v("q1"), v("q2"));
    let w1 = &q1 + &l1 * &q2;
    let w2 = &q1 + &l2 * &q2;
    let vv = ((&l1 - &l2).recip() * (&w2 / &w1).ln()).simplify();
    let u = (w1.pow(l1.clone()) * w2.pow(-l2.clone())).simplify();
    (vv, u)
}

/// Chart `{q2 > 0, q1 + lambda_i q2 > 0}` sampled from `q1 in [-3, 3]`, `q2 in (0, 3]`.
pub fn positive_chart(p: &ModelParams) -> SampleSpec {
    let (_, [l1, l2]) = lambdas(p);
    SampleSpec::new(0, 0)
        .uniform("q1", -3.0, 3.0)
        .uniform("q2", 0.05, 3.0)
        .choice("J", &J_VALUES)
        .with_domain(move |a| {
            let q1 = a.get("q1").map_or(f64::NAN, |z| z.re);
            let q2 = a.get("q2").map_or(f64::NAN, |z| z.re);
            q2 > 0.0 && q1 + l1 * q2 > 0.0 && q1 + l2 * q2 > 0.0
        })
}

/// Margin keeping finite-difference stencils away from the chart boundary `w_i = 0`.
pub const FD_MARGIN: f64 = 0.3;
pub const CHARACTERISTIC_STEP: f64 = 1e-3;

/// Seeded points of `q1 in [-1, 2]`, `q2 in [0.3, 2]` with `w_i >= FD_MARGIN`.
pub fn interior_points(p: &ModelParams, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let (_, [l1, l2]) = lambdas(p);
    SampleSpec::new(count, seed)
        .uniform("q1", -1.0, 2.0)
        .uniform("q2", 0.3, 2.0)
        .with_domain(move |a| {
            let (q1, q2) = (a.get("q1").map_or(f64::NAN, |z| z.re), a.get("q2").map_or(f64::NAN, |z| z.re));
            q1 + l1 * q2 >= FD_MARGIN && q1 + l2 * q2 >= FD_MARGIN
        })
        .points()
        .iter()
        .map(|a| Q.iter().map(|n| a.get(n).expect("sampled").re).collect())
        .collect()
}

/// Numeric reduced residual of the characteristic solution with data `Phi(u) = 1 / (1 + u^2)`.
pub fn characteristic_residual(
    model: &GroupModel,
    red: &ReducedOperator,
    j: f64,
    e: f64,
    points: &[Vec<f64>],
) -> Result<Residual> {
    if !model.lrep.j_param.contains(j) {
        return Err(Error::Parameter(format!("J = {j} is not in {}", model.lrep.j_param.describe())));
    }
    let fo = red.first_order.as_ref().ok_or_else(|| Error::NotFirstOrder("operator has no first-order split".into()))?;
    let q = model.q_vars_str();
    let params = Assignment::new().with_real(J_VAR, j).with_real(E_VAR, e);
    let domain = positive_chart(&model.params).domain;
    let phi = |u: &[f64]| Complex64::new(1.0 / (1.0 + u[0] * u[0]), 0.0);
    let field = |x: &[f64]| -> Result<Complex64> {
        let vals = solve_reduced(fo, &q, &params, &model.rectifier, &phi, &[x.to_vec()], CHARACTERISTIC_STEP, domain.clone())?;
        Ok(vals[0])
    };
    reduced_residual_numeric(red, &field, &params, points, CHARACTERISTIC_STEP)
}

impl ModelFactory for G47 {
    fn name(&self) -> &'static str {
        "g4_7"
    }

    fn summary(&self) -> &'static str {
        "non-unimodular g(4,7), metric G1(alpha, beta), ideal span{e1, e2}"
    }

    fn build(&self, params: &ModelParams) -> Result<GroupModel> {
        check_params(params)?;
        let (alpha, beta) = (Expr::constant(params.alpha.clone()), Expr::constant(params.beta.clone()));
        let [x1, x2, x3, x4] = X.map(v);
        let [y1, y2, y3, y4] = Y.map(v);
        let (z, o) = (Expr::zero, Expr::one);
        let half = || Expr::constant(Rational::new(1.into(), 2.into()));
        let em = |k: i64| (Expr::int(-k) * &x4).exp();
        let ep = |k: i64| (Expr::int(k) * &x4).exp();
        let fo = |a: [Expr; 4]| DiffOp::first_order(&X, Expr::zero(), a.to_vec());

        let mult_law = vec![
            &x1 + em(2) * &y1 + half() * em(1) * (&x2 * &y3 - &x3 * &y2 + &x3 * &x4 * &y3),
            &x2 + em(1) * (&y2 - &x4 * &y3),
            &x3 + em(1) * &y3,
            &x4 + &y4,
        ];
        let inverse_law = vec![-(ep(2) * &x1), -(ep(1) * (&x2 + &x3 * &x4)), -(ep(1) * &x3), -&x4];
        let xi = vec![
            fo([em(2), z(), z(), z()]),
            fo([-(em(1) * &x3 * half()), em(1), z(), z()]),
            fo([em(1) * (&x2 + &x3 * &x4) * half(), -(em(1) * &x4), em(1), z()]),
            fo([z(), z(), z(), o()]),
        ];
        let eta = vec![
            fo([o(), z(), z(), z()]),
            fo([&x3 * half(), o(), z(), z()]),
            fo([-(&x2 * half()), z(), o(), z()]),
            fo([-(2 * &x1), -(&x2 + &x3), -x3.clone(), o()]),
        ];
        let dual_forms = vec![
            vec![ep(2), ep(2) * &x3 * half(), -(ep(2) * &x2 * half()), z()],
            vec![z(), ep(1), ep(1) * &x4, z()],
            vec![z(), z(), ep(1), z()],
            vec![z(), z(), z(), o()],
        ];

        let (q1, q2) = (v("q1"), v("q2"));
        let ij = Expr::i() * v("J");
        let ops = vec![
            DiffOp::scalar(&Q, &ij * q2.powi(2)),
            DiffOp::scalar(&Q, &ij * &q1 * &q2),
            DiffOp::first_order(&Q, &ij * &q1 * &q2 * q2.ln(), vec![-q2.clone(), z()]),
            DiffOp::first_order(&Q, z(), vec![z(), -q2.clone()]),
        ];
        let chart = positive_chart(params);
        let lrep = LambdaRep::new(&Q, ops, JParam::Discrete(J_VALUES.to_vec()), q2.recip(), chart.clone())?;

        let (qp1, qp2) = (v("qp1"), v("qp2"));
        let kphase = |qp1: &Expr| &ij * &x1 * q2.powi(2) + &ij * &q2 * half() * (&q1 + qp1) * (&x2 + &x3 * q2.ln());
        let arg1 = &q1 - &q2 * &x3;
        let kernel = KernelD {
            q_prime_vars: vec!["qp1".into(), "qp2".into()],
            delta_constraints: vec![&q1 - &qp1 - &q2 * &x3, q2.ln() - qp2.ln() - &x4],
            phase: kphase(&qp1),
            prefactor: o(),
            collapsed: CollapsedAction {
                x_vars: X.iter().map(|s| s.to_string()).collect(),
                q_vars: Q.iter().map(|s| s.to_string()).collect(),
                args: vec![arg1.clone(), &q2 * em(1)],
                phase: kphase(&arg1),
                prefactor: o(),
            },
        };

        let (vv, u) = rectifying_coordinates(params);
        let e = v("E");
        let printed_z = vec![&alpha * &q1 - &beta * &q2, -q1.clone()];
        let printed_v = &alpha * half() - &ij * &q1 * q2.ln() * (&alpha * &q1 - &beta * &q2)
            + &ij * &beta * &e / (2 * q2.powi(2))
            - Expr::int(5) * &q1 / (2 * &q2);

        let inv_b = beta.recip();
        let printed_frame_laplacian = xi[0]
            .compose(&xi[2])?
            .scale(&Expr::int(2))
            .add(&xi[1].compose(&xi[3].sub(&xi[2].scale(&alpha))?)?.scale(&(2 * &inv_b)))?
            .add(&xi[0].scale(&alpha).add(&xi[1].scale(&Expr::int(3)))?.scale(&inv_b))?;
        let ab = &alpha * &inv_b;
        let printed_coordinate_laplacian = DiffOp::zero(&X)
            .with_term(vec![0, 0], (em(3) + &ab * &x3 * half() * em(2)) * (&x2 + &x3 * &x4))
            .with_term(vec![0, 1], -(2 * &x4 * em(3) + &ab * (&x2 + 2 * &x3 * &x4) * em(2)))
            .with_term(vec![0, 2], 2 * em(3) + &ab * &x3 * em(2))
            .with_term(vec![0, 3], -(&x3 * &inv_b * em(1)))
            .with_term(vec![1, 1], 2 * &ab * &x4 * em(2))
            .with_term(vec![1, 2], -(2 * &ab * em(2)))
            .with_term(vec![1, 3], 2 * &inv_b * em(1))
            .with_term(vec![0], -(Expr::int(3) * &inv_b * half() * &x3 * em(1)))
            .with_term(vec![1], Expr::int(3) * &inv_b * em(1));

        let x_chart = X.iter().fold(SampleSpec::new(0, 0), |s, x| s.uniform(x, -1.0, 1.0));
        Ok(GroupModel {
            name: self.name().into(),
            params: params.clone(),
            algebra: algebra(),
            x_vars: X.iter().map(|s| s.to_string()).collect(),
            y_vars: Y.iter().map(|s| s.to_string()).collect(),
            mult_law,
            inverse_law,
            xi,
            eta,
            dual_forms,
            form: g47_form(&params.alpha, &params.beta)?,
            ideal: Subspace::coordinate(4, &[0, 1]),
            lrep,
            modular_multiplier: q2.powi(4),
            kernel,
            haar: Haar { left: ep(4), right: o(), unimodular: false },
            j_measure: JMeasure { density: o(), constant: 1.0 / (2.0 * std::f64::consts::PI.powi(2)) },
            normalizer: (2 * &ij * q2.powi(2) / &beta).simplify(),
            rectifier: Rectifier { v: vv, u: vec![u], v_ref: V_REF },
            printed_first_order: Some(FirstOrderRef { z: printed_z, v: printed_v }),
            printed_reduced: None,
            printed_frame_laplacian,
            printed_coordinate_laplacian,
            x_chart,
            reduced_chart: chart.uniform("E", -2.0, 2.0),
        })
    }
}
