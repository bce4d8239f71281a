use std::collections::BTreeMap;

use num_complex::Complex64;

use super::{airy::airy, AiryKind, Expr, Node};
use crate::error::{Error, Result};
use crate::rational::to_f64;

/// Imaginary parts below this (relative) size are treated as zero in Airy arguments.
const REAL_ARG_TOL: f64 = 1e-12;

/// Numeric values for free variables.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Assignment(BTreeMap<String, Complex64>);

impl Assignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, value: Complex64) -> Self {
        self.0.insert(name.to_string(), value);
        self
    }

    pub fn with_real(self, name: &str, value: f64) -> Self {
        self.with(name, Complex64::new(value, 0.0))
    }

    pub fn set(&mut self, name: &str, value: Complex64) {
        self.0.insert(name.to_string(), value);
    }

    pub fn get(&self, name: &str) -> Option<Complex64> {
        self.0.get(name).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Complex64)> {
        self.0.iter()
    }
}

impl<S: AsRef<str>> FromIterator<(S, f64)> for Assignment {
    fn from_iter<T: IntoIterator<Item = (S, f64)>>(iter: T) -> Self {
        Assignment(
            iter.into_iter().map(|(k, v)| (k.as_ref().to_string(), Complex64::new(v, 0.0))).collect(),
        )
    }
}

pub fn evaluate(e: &Expr, a: &Assignment) -> Result<Complex64> {
    let z = eval_node(e, &|name| a.get(name).ok_or_else(|| Error::MissingVariable(name.into())))?;
    finite(z, e)
}

fn finite(z: Complex64, e: &Expr) -> Result<Complex64> {
    if z.re.is_finite() && z.im.is_finite() {
        Ok(z)
    } else {
        Err(Error::NonFinite(format!("{e} evaluated to {z}")))
    }
}

fn eval_node(e: &Expr, lookup: &dyn Fn(&str) -> Result<Complex64>) -> Result<Complex64> {
    Ok(match e.node() {
        Node::Const(r) => Complex64::new(to_f64(r), 0.0),
        Node::I => Complex64::i(),
        Node::Var(name) => lookup(name)?,
        Node::Sum(ts) => {
            let mut acc = Complex64::new(0.0, 0.0);
            for t in ts {
                acc += eval_node(t, lookup)?;
            }
            acc
        }
        Node::Product(fs) => {
            let mut acc = Complex64::new(1.0, 0.0);
            for f in fs {
                acc *= eval_node(f, lookup)?;
            }
            acc
        }
        Node::Power(b, x) => {
            let exponent = match x.as_const() {
                Some(r) => Complex64::new(to_f64(r), 0.0),
                None => eval_node(x, lookup)?,
            };
            power(eval_node(b, lookup)?, exponent)?
        }
        Node::Exp(a) => eval_node(a, lookup)?.exp(),
        Node::Log(a) => log(eval_node(a, lookup)?)?,
        Node::Airy(kind, a) => airy_complex(*kind, eval_node(a, lookup)?)?,
    })
}

fn integer_exponent(x: Complex64) -> Option<i32> {
    (x.im == 0.0 && x.re.fract() == 0.0 && x.re.abs() < 1e9).then_some(x.re as i32)
}

fn power(b: Complex64, x: Complex64) -> Result<Complex64> {
    if let Some(n) = integer_exponent(x) {
        if n < 0 && b == Complex64::new(0.0, 0.0) {
            return Err(Error::NonFinite("division by zero".into()));
        }
        return Ok(b.powi(n));
    }
    if b.re <= 0.0 {
        return Err(Error::Domain(format!(
            "non-integer power of {b} requires a base with positive real part"
        )));
    }
    Ok((x * b.ln()).exp())
}

fn log(a: Complex64) -> Result<Complex64> {
    if a.re <= 0.0 {
        return Err(Error::Domain(format!("log({a}) requires positive real part")));
    }
    Ok(a.ln())
}

fn airy_complex(kind: AiryKind, z: Complex64) -> Result<Complex64> {
    if z.im.abs() > REAL_ARG_TOL * (1.0 + z.re.abs()) {
        return Err(Error::Domain(format!("{}({z}) requires a real argument", kind.name())));
    }
    Ok(Complex64::new(airy(kind, z.re)?, 0.0))
}

#[derive(Clone, Debug)]
enum Op {
    Const(Complex64),
    Slot(usize),
    Sum(Vec<Op>),
    Product(Vec<Op>),
    PowInt(Box<Op>, i32),
    Pow(Box<Op>, Box<Op>),
    Exp(Box<Op>),
    Log(Box<Op>),
    Airy(AiryKind, Box<Op>),
}

/// An expression lowered to slot-indexed form for repeated evaluation.
#[derive(Clone, Debug)]
pub struct Compiled {
    vars: Vec<String>,
    root: Op,
}

impl Compiled {
    pub fn new(e: &Expr, vars: &[&str]) -> Result<Self> {
        let vars: Vec<String> = vars.iter().map(|s| s.to_string()).collect();
        let root = lower(e, &vars)?;
        Ok(Compiled { vars, root })
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn eval(&self, slots: &[Complex64]) -> Result<Complex64> {
        assert_eq!(slots.len(), self.vars.len(), "slot count mismatch");
        let z = run(&self.root, slots)?;
        if z.re.is_finite() && z.im.is_finite() {
            Ok(z)
        } else {
            Err(Error::NonFinite(format!("compiled expression evaluated to {z}")))
        }
    }

    pub fn eval_real(&self, slots: &[f64]) -> Result<Complex64> {
        let c: Vec<Complex64> = slots.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.eval(&c)
    }
}

fn lower(e: &Expr, vars: &[String]) -> Result<Op> {
    let rec = |x: &Expr| lower(x, vars);
    Ok(match e.node() {
        Node::Const(r) => Op::Const(Complex64::new(to_f64(r), 0.0)),
        Node::I => Op::Const(Complex64::i()),
        Node::Var(name) => Op::Slot(
            vars.iter()
                .position(|v| v == name)
                .ok_or_else(|| Error::MissingVariable(name.clone()))?,
        ),
        Node::Sum(ts) => Op::Sum(ts.iter().map(rec).collect::<Result<_>>()?),
        Node::Product(fs) => Op::Product(fs.iter().map(rec).collect::<Result<_>>()?),
        Node::Power(b, x) => {
            let int = x
                .as_const()
                .filter(|r| r.is_integer())
                .and_then(|r| num_traits::ToPrimitive::to_i32(&r.to_integer()));
            match int {
                Some(n) => Op::PowInt(Box::new(rec(b)?), n),
                None => Op::Pow(Box::new(rec(b)?), Box::new(rec(x)?)),
            }
        }
        Node::Exp(a) => Op::Exp(Box::new(rec(a)?)),
        Node::Log(a) => Op::Log(Box::new(rec(a)?)),
        Node::Airy(k, a) => Op::Airy(*k, Box::new(rec(a)?)),
    })
}

fn run(op: &Op, s: &[Complex64]) -> Result<Complex64> {
    Ok(match op {
        Op::Const(c) => *c,
        Op::Slot(i) => s[*i],
        Op::Sum(ts) => {
            let mut acc = Complex64::new(0.0, 0.0);
            for t in ts {
                acc += run(t, s)?;
            }
            acc
        }
        Op::Product(fs) => {
            let mut acc = Complex64::new(1.0, 0.0);
            for f in fs {
                acc *= run(f, s)?;
            }
            acc
        }
        Op::PowInt(b, n) => power(run(b, s)?, Complex64::new(*n as f64, 0.0))?,
        Op::Pow(b, x) => power(run(b, s)?, run(x, s)?)?,
        Op::Exp(a) => run(a, s)?.exp(),
        Op::Log(a) => log(run(a, s)?)?,
        Op::Airy(k, a) => airy_complex(*k, run(a, s)?)?,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{v, AiryKind, Expr};
    use super::*;

    #[test]
    fn basic_evaluation() {
        let x = v("x");
        let e = (Expr::i() * Expr::zero()).exp();
        assert_eq!(e.eval(&Assignment::new()).unwrap(), Complex64::new(1.0, 0.0));
        let a = Assignment::new().with_real("x", 2.0);
        assert_eq!((x.powi(3) + 1).eval(&a).unwrap(), Complex64::new(9.0, 0.0));
        let ai0 = Expr::airy(AiryKind::Ai, Expr::zero()).eval(&Assignment::new()).unwrap();
        assert!((ai0.re - 0.3550280538878172).abs() < 1e-16);
    }

    #[test]
    fn errors() {
        let x = v("x");
        assert_eq!(x.eval(&Assignment::new()), Err(Error::MissingVariable("x".into())));
        let a = Assignment::new().with_real("x", -1.0);
        assert!(matches!(x.ln().eval(&a), Err(Error::Domain(_))));
        assert!(matches!(x.sqrt().eval(&a), Err(Error::Domain(_))));
        assert!(x.powi(-2).eval(&a).is_ok());
        let z = Assignment::new().with_real("x", 0.0);
        assert!(matches!(x.recip().eval(&z), Err(Error::NonFinite(_))));
        let c = Assignment::new().with("x", Complex64::new(0.0, 1.0));
        assert!(matches!(Expr::airy(AiryKind::Ai, x.clone()).eval(&c), Err(Error::Domain(_))));
    }

    #[test]
    fn compiled_matches_tree_evaluation() {
        let x = v("x");
        let y = v("y");
        let e = (&x * &y).exp() * x.ln() + y.powr(crate::rational::ratio(3, 2)) - Expr::i() * &x;
        let c = e.compile(&["x", "y"]).unwrap();
        let a = Assignment::new().with_real("x", 0.7).with_real("y", 1.3);
        let want = e.eval(&a).unwrap();
        let got = c.eval_real(&[0.7, 1.3]).unwrap();
        assert!((want - got).norm() < 1e-15);
        assert!(matches!(e.compile(&["x"]), Err(Error::MissingVariable(_))));
    }
}
