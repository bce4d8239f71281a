use super::{AiryKind, Expr, Node};

/// Unsimplified derivative of `e` with respect to `var`.
pub fn differentiate(e: &Expr, var: &str) -> Expr {
    if !e.contains_var(var) {
        return Expr::zero();
    }
    match e.node() {
        Node::Const(_) | Node::I => Expr::zero(),
        Node::Var(name) => {
            if name == var {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Node::Sum(ts) => Expr::sum(ts.iter().map(|t| differentiate(t, var)).collect()),
        Node::Product(fs) => {
            let mut terms = Vec::new();
            for (k, f) in fs.iter().enumerate() {
                if !f.contains_var(var) {
                    continue;
                }
                let mut factors: Vec<Expr> = fs.clone();
                factors[k] = differentiate(f, var);
                terms.push(Expr::product(factors));
            }
            Expr::sum(terms)
        }
        Node::Power(b, x) => {
            // d(b^x) = x b^(x-1) b' + b^x ln(b) x'
            let mut terms = Vec::new();
            if b.contains_var(var) {
                terms.push(Expr::product(vec![
                    x.clone(),
                    b.pow(Expr::sum(vec![x.clone(), Expr::int(-1)])),
                    differentiate(b, var),
                ]));
            }
            if x.contains_var(var) {
                terms.push(Expr::product(vec![e.clone(), b.ln(), differentiate(x, var)]));
            }
            Expr::sum(terms)
        }
        Node::Exp(a) => Expr::product(vec![e.clone(), differentiate(a, var)]),
        Node::Log(a) => Expr::product(vec![a.recip(), differentiate(a, var)]),
        Node::Airy(kind, a) => {
            let outer = match kind {
                AiryKind::Ai => Expr::airy(AiryKind::AiPrime, a.clone()),
                AiryKind::Bi => Expr::airy(AiryKind::BiPrime, a.clone()),
                AiryKind::AiPrime => a.clone() * Expr::airy(AiryKind::Ai, a.clone()),
                AiryKind::BiPrime => a.clone() * Expr::airy(AiryKind::Bi, a.clone()),
            };
            Expr::product(vec![outer, differentiate(a, var)])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::{v, AiryKind, Assignment, Expr};
    use num_complex::Complex64;

    #[test]
    fn elementary_derivatives() {
        let q = v("q");
        let j = v("J");
        let e = -(Expr::i() * &j * &q);
        assert_eq!(e.diff("q"), (-(Expr::i() * &j)).simplify());
        let x = v("x");
        let nu = v("nu");
        let w = (Expr::i() * &nu * &x).exp();
        assert_eq!(w.diff("x"), (Expr::i() * &nu * &w).simplify());
        assert!(q.diff("x").is_zero());
        assert_eq!(q.ln().diff("q"), q.recip());
    }

    #[test]
    fn airy_chain_rule_matches_finite_differences() {
        let z = v("z");
        let (c, d) = (Expr::constant(crate::rational::ratio(126, 100)), Expr::constant(crate::rational::ratio(1, 2)));
        let arg = &c * &z + &d;
        let f = Expr::airy(AiryKind::Ai, arg.clone());
        let df = f.diff("z");
        assert_eq!(df, (&c * Expr::airy(AiryKind::AiPrime, arg)).simplify());
        let at = |t: f64| f.eval(&Assignment::new().with("z", Complex64::new(t, 0.0))).unwrap();
        let h = 1e-5;
        let fd = (at(0.3 + h) - at(0.3 - h)) / (2.0 * h);
        let exact = df.eval(&Assignment::new().with("z", Complex64::new(0.3, 0.0))).unwrap();
        assert!((fd - exact).norm() < 1e-7, "{fd} vs {exact}");
    }

    #[test]
    fn airy_second_derivative_rule() {
        let z = v("z");
        let ai2 = Expr::airy(AiryKind::Ai, z.clone()).diff("z").diff("z");
        assert_eq!(ai2, (&z * Expr::airy(AiryKind::Ai, z.clone())).simplify());
        let bi2 = Expr::airy(AiryKind::Bi, z.clone()).diff("z").diff("z");
        assert_eq!(bi2, (&z * Expr::airy(AiryKind::Bi, z.clone())).simplify());
    }
}
