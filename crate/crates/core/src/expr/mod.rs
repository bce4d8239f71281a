//! Immutable symbolic expressions with exact rational constants.

mod airy;
mod diff;
mod eval;
mod parse;
mod simplify;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use num_traits::{One, Zero};

use crate::rational::{rat, Rational};

pub use airy::{airy, airy_all, AiryValues, BI_OVERFLOW_THRESHOLD};
pub use eval::{Assignment, Compiled};
pub use parse::parse;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AiryKind {
    Ai,
    Bi,
    AiPrime,
    BiPrime,
}

impl AiryKind {
    pub fn name(self) -> &'static str {
        match self {
            AiryKind::Ai => "Ai",
            AiryKind::Bi => "Bi",
            AiryKind::AiPrime => "Ai'",
            AiryKind::BiPrime => "Bi'",
        }
    }
}

/// Expression tree node. Variant order fixes the canonical ordering used by `simplify`.
#[derive(Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Node {
    Const(Rational),
    I,
    Var(String),
    Sum(Vec<Expr>),
    Product(Vec<Expr>),
    Power(Expr, Expr),
    Exp(Expr),
    Log(Expr),
    Airy(AiryKind, Expr),
}

/// Shared handle to an immutable [`Node`].
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Expr(Arc<Node>);

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({self})")
    }
}

impl Expr {
    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn from_node(node: Node) -> Expr {
        Expr(Arc::new(node))
    }

    pub fn constant(r: Rational) -> Expr {
        Expr::from_node(Node::Const(r))
    }

    pub fn int(n: i64) -> Expr {
        Expr::constant(rat(n))
    }

    pub fn zero() -> Expr {
        Expr::int(0)
    }

    pub fn one() -> Expr {
        Expr::int(1)
    }

    pub fn i() -> Expr {
        Expr::from_node(Node::I)
    }

    pub fn var(name: &str) -> Expr {
        Expr::from_node(Node::Var(name.to_string()))
    }

    pub fn sum(terms: Vec<Expr>) -> Expr {
        match terms.len() {
            0 => Expr::zero(),
            1 => terms.into_iter().next().expect("one term"),
            _ => Expr::from_node(Node::Sum(terms)),
        }
    }

    pub fn product(factors: Vec<Expr>) -> Expr {
        match factors.len() {
            0 => Expr::one(),
            1 => factors.into_iter().next().expect("one factor"),
            _ => Expr::from_node(Node::Product(factors)),
        }
    }

    pub fn pow(&self, exponent: Expr) -> Expr {
        Expr::from_node(Node::Power(self.clone(), exponent))
    }

    pub fn powi(&self, n: i64) -> Expr {
        self.pow(Expr::int(n))
    }

    pub fn powr(&self, r: Rational) -> Expr {
        self.pow(Expr::constant(r))
    }

    pub fn sqrt(&self) -> Expr {
        self.powr(Rational::new(1.into(), 2.into()))
    }

    pub fn recip(&self) -> Expr {
        self.powi(-1)
    }

    pub fn exp(&self) -> Expr {
        Expr::from_node(Node::Exp(self.clone()))
    }

    pub fn ln(&self) -> Expr {
        Expr::from_node(Node::Log(self.clone()))
    }

    pub fn airy(kind: AiryKind, arg: Expr) -> Expr {
        Expr::from_node(Node::Airy(kind, arg))
    }

    pub fn as_const(&self) -> Option<&Rational> {
        match self.node() {
            Node::Const(r) => Some(r),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const().is_some_and(Zero::is_zero)
    }

    pub fn is_one(&self) -> bool {
        self.as_const().is_some_and(One::is_one)
    }

    pub fn children(&self) -> Vec<&Expr> {
        match self.node() {
            Node::Const(_) | Node::I | Node::Var(_) => vec![],
            Node::Sum(xs) | Node::Product(xs) => xs.iter().collect(),
            Node::Power(b, e) => vec![b, e],
            Node::Exp(a) | Node::Log(a) | Node::Airy(_, a) => vec![a],
        }
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        if let Node::Var(v) = self.node() {
            out.insert(v.clone());
        }
        for c in self.children() {
            c.collect_vars(out);
        }
    }

    pub fn contains_var(&self, name: &str) -> bool {
        match self.node() {
            Node::Var(v) => v == name,
            _ => self.children().iter().any(|c| c.contains_var(name)),
        }
    }

    /// Node count of the tree.
    pub fn size(&self) -> usize {
        1 + self.children().iter().map(|c| c.size()).sum::<usize>()
    }

    /// Replaces every occurrence of the named variables. The result is not simplified.
    pub fn substitute(&self, map: &BTreeMap<String, Expr>) -> Expr {
        if map.is_empty() {
            return self.clone();
        }
        let rebuild = |e: &Expr| e.substitute(map);
        match self.node() {
            Node::Var(v) => map.get(v).cloned().unwrap_or_else(|| self.clone()),
            Node::Const(_) | Node::I => self.clone(),
            Node::Sum(xs) => Expr::from_node(Node::Sum(xs.iter().map(rebuild).collect())),
            Node::Product(xs) => Expr::from_node(Node::Product(xs.iter().map(rebuild).collect())),
            Node::Power(b, e) => Expr::from_node(Node::Power(rebuild(b), rebuild(e))),
            Node::Exp(a) => rebuild(a).exp(),
            Node::Log(a) => rebuild(a).ln(),
            Node::Airy(k, a) => Expr::airy(*k, rebuild(a)),
        }
    }

    pub fn subs(&self, name: &str, value: &Expr) -> Expr {
        let mut map = BTreeMap::new();
        map.insert(name.to_string(), value.clone());
        self.substitute(&map)
    }

    pub fn simplify(&self) -> Expr {
        simplify::simplify(self)
    }

    /// Exact derivative with respect to `var`, simplified.
    pub fn diff(&self, var: &str) -> Expr {
        diff::differentiate(self, var).simplify()
    }

    pub fn eval(&self, a: &Assignment) -> crate::Result<num_complex::Complex64> {
        eval::evaluate(self, a)
    }

    /// Compiles to a slot-indexed evaluator over `vars`.
    pub fn compile(&self, vars: &[&str]) -> crate::Result<Compiled> {
        Compiled::new(self, vars)
    }
}

pub fn differentiate(e: &Expr, var: &str) -> Expr {
    e.diff(var)
}

pub fn simplify(e: &Expr) -> Expr {
    e.simplify()
}

pub fn evaluate(e: &Expr, a: &Assignment) -> crate::Result<num_complex::Complex64> {
    e.eval(a)
}

impl From<i64> for Expr {
    fn from(n: i64) -> Expr {
        Expr::int(n)
    }
}

impl From<Rational> for Expr {
    fn from(r: Rational) -> Expr {
        Expr::constant(r)
    }
}

impl Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::from_node(Node::Sum(vec![self, rhs]))
    }
}

impl Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        self + (-rhs)
    }
}

impl Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::from_node(Node::Product(vec![self, rhs]))
    }
}

impl Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        self * rhs.recip()
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        match self.node() {
            Node::Const(r) => Expr::constant(-r),
            _ => Expr::int(-1) * self,
        }
    }
}

macro_rules! forward_ref_binop {
    ($($tr:ident $m:ident),*) => {$(
        impl $tr<&Expr> for &Expr {
            type Output = Expr;
            fn $m(self, rhs: &Expr) -> Expr { $tr::$m(self.clone(), rhs.clone()) }
        }
        impl $tr<Expr> for &Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr { $tr::$m(self.clone(), rhs) }
        }
        impl $tr<&Expr> for Expr {
            type Output = Expr;
            fn $m(self, rhs: &Expr) -> Expr { $tr::$m(self, rhs.clone()) }
        }
        impl $tr<i64> for Expr {
            type Output = Expr;
            fn $m(self, rhs: i64) -> Expr { $tr::$m(self, Expr::int(rhs)) }
        }
        impl $tr<i64> for &Expr {
            type Output = Expr;
            fn $m(self, rhs: i64) -> Expr { $tr::$m(self.clone(), Expr::int(rhs)) }
        }
        impl $tr<Expr> for i64 {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr { $tr::$m(Expr::int(self), rhs) }
        }
        impl $tr<&Expr> for i64 {
            type Output = Expr;
            fn $m(self, rhs: &Expr) -> Expr { $tr::$m(Expr::int(self), rhs.clone()) }
        }
    )*};
}

forward_ref_binop!(Add add, Sub sub, Mul mul, Div div);

impl Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        -self.clone()
    }
}

/// Shorthand for a variable.
pub fn v(name: &str) -> Expr {
    Expr::var(name)
}
