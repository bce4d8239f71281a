//! The three-dimensional Heisenberg group with the null-center Lorentzian metric.

use crate::algebra::LieAlgebra;
use crate::bilinear::heisenberg_form;
use crate::diffop::DiffOp;
use crate::error::Result;
use crate::expr::{v, Expr};
use crate::rational::Subspace;
use crate::reduction::{CollapsedAction, JParam, LambdaRep, Rectifier};
use crate::sampling::SampleSpec;

use super::{GroupModel, Haar, JMeasure, KernelD, ModelFactory, ModelParams};

pub struct Heisenberg;

pub const X: [&str; 3] = ["x1", "x2", "x3"];
pub const Y: [&str; 3] = ["y1", "y2", "y3"];
pub const Q: [&str; 1] = ["q"];

/// Sample values of `J` used by the checks.
pub const J_SAMPLES: [f64; 6] = [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0];

pub fn algebra() -> LieAlgebra {
    LieAlgebra::from_integer_constants(3, &[(1, 2, &[(3, 1)])])
}

fn first_order(a: [Expr; 3]) -> DiffOp {
    DiffOp::first_order(&X, Expr::zero(), a.to_vec())
}

/// `psi(q) = exp(-i J q^3 / 6 - i E q / (2 J))`.
pub fn closed_form_reduced() -> Expr {
    let (q, j, e) = (v("q"), v("J"), v("E"));
    (-(Expr::i() * &j * q.powi(3) / 6) - Expr::i() * e * q / (2 * j)).exp().simplify()
}

impl ModelFactory for Heisenberg {
    fn name(&self) -> &'static str {
        "heisenberg"
    }

    fn summary(&self) -> &'static str {
        "Heisenberg group H3, metric with null center, ideal span{e1, e3}"
    }

    fn build(&self, params: &ModelParams) -> Result<GroupModel> {
        let (x1, x2, x3) = (v("x1"), v("x2"), v("x3"));
        let (y1, y2, y3) = (v("y1"), v("y2"), v("y3"));
        let (z, o) = (Expr::zero, Expr::one);
        let xi = vec![first_order([o(), z(), z()]), first_order([z(), o(), x1.clone()]), first_order([z(), z(), o()])];
        let eta = vec![first_order([o(), z(), x2.clone()]), first_order([z(), o(), z()]), first_order([z(), z(), o()])];
        let ij = Expr::i() * v("J");
        let q = v("q");
        let ops = vec![
            DiffOp::scalar(&Q, -(&ij * &q)),
            DiffOp::partial(&Q, "q"),
            DiffOp::scalar(&Q, ij.clone()),
        ];
        let chart = SampleSpec::new(0, 0).uniform("q", -2.0, 2.0).choice("J", &J_SAMPLES);
        let lrep = LambdaRep::new(&Q, ops, JParam::RealNonzero, Expr::one(), chart.clone())?;
        let qp = v("qp");
        let kernel = KernelD {
            q_prime_vars: vec!["qp".into()],
            delta_constraints: vec![&q + &x2 - &qp],
            phase: -(&ij * &qp * &x1) + &ij * &x3,
            prefactor: Expr::one(),
            collapsed: CollapsedAction {
                x_vars: X.iter().map(|s| s.to_string()).collect(),
                q_vars: vec!["q".into()],
                args: vec![&q + &x2],
                phase: -(&ij * (&q + &x2) * &x1) + &ij * &x3,
                prefactor: Expr::one(),
            },
        };
        let printed_coordinate_laplacian = DiffOp::zero(&X)
            .with_term(vec![0, 0], o())
            .with_term(vec![1, 2], Expr::int(2))
            .with_term(vec![2, 2], 2 * &x1);
        let printed_frame_laplacian = xi[0].compose(&xi[0])?.add(&xi[1].compose(&xi[2])?.scale(&Expr::int(2)))?;
        let printed_reduced = DiffOp::first_order(&Q, -(v("J").powi(2) * q.powi(2)), vec![2 * ij.clone()]);
        Ok(GroupModel {
            name: self.name().into(),
            params: params.clone(),
            algebra: algebra(),
            x_vars: X.iter().map(|s| s.to_string()).collect(),
            y_vars: Y.iter().map(|s| s.to_string()).collect(),
            mult_law: vec![&x1 + &y1, &x2 + &y2, &x3 + &y3 + &x1 * &y2],
            inverse_law: vec![-&x1, -&x2, -&x3 + &x1 * &x2],
            xi,
            eta,
            dual_forms: vec![vec![o(), z(), z()], vec![z(), o(), z()], vec![z(), -&x1, o()]],
            form: heisenberg_form(),
            ideal: Subspace::coordinate(3, &[0, 2]),
            lrep,
            modular_multiplier: Expr::one(),
            kernel,
            haar: Haar { left: o(), right: o(), unimodular: true },
            j_measure: JMeasure {
                density: v("J").powi(2).sqrt(),
                constant: 1.0 / (2.0 * std::f64::consts::PI).powi(2),
            },
            normalizer: 2 * ij,
            rectifier: Rectifier { v: q, u: vec![], v_ref: 0.0 },
            printed_first_order: None,
            printed_reduced: Some(printed_reduced),
            printed_frame_laplacian,
            printed_coordinate_laplacian,
            x_chart: SampleSpec::new(0, 0).uniform("x1", -1.0, 1.0).uniform("x2", -1.0, 1.0).uniform("x3", -1.0, 1.0),
            reduced_chart: chart.uniform("E", -2.0, 2.0),
        })
    }
}
