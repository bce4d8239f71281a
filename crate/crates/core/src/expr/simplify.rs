//! Canonical normalization of expression trees.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::{Expr, Node};
use crate::rational::Rational;

const MAX_PASSES: usize = 32;
const MAX_EXPANDED_POWER: i64 = 4;

pub fn simplify(e: &Expr) -> Expr {
    let mut cur = e.clone();
    for _ in 0..MAX_PASSES {
        let next = pass(&cur);
        if next == cur {
            return next;
        }
        cur = next;
    }
    cur
}

/// `re + im*i` with rational parts.
#[derive(Clone, Debug, PartialEq)]
struct Coeff {
    re: Rational,
    im: Rational,
}

impl Coeff {
    fn one() -> Self {
        Coeff { re: Rational::one(), im: Rational::zero() }
    }

    fn zero() -> Self {
        Coeff { re: Rational::zero(), im: Rational::zero() }
    }

    fn real(r: Rational) -> Self {
        Coeff { re: r, im: Rational::zero() }
    }

    fn imag_unit() -> Self {
        Coeff { re: Rational::zero(), im: Rational::one() }
    }

    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    fn mul(&self, o: &Coeff) -> Coeff {
        Coeff {
            re: &self.re * &o.re - &self.im * &o.im,
            im: &self.re * &o.im + &self.im * &o.re,
        }
    }

    fn add_assign(&mut self, o: &Coeff) {
        self.re += &o.re;
        self.im += &o.im;
    }
}

fn pass(e: &Expr) -> Expr {
    match e.node() {
        Node::Const(_) | Node::I | Node::Var(_) => e.clone(),
        Node::Sum(xs) => simplify_sum(xs.iter().map(pass).collect()),
        Node::Product(xs) => simplify_product(xs.iter().map(pass).collect()),
        Node::Power(b, x) => simplify_power(pass(b), pass(x)),
        Node::Exp(a) => simplify_exp(pass(a)),
        Node::Log(a) => simplify_log(pass(a)),
        Node::Airy(k, a) => Expr::airy(*k, pass(a)),
    }
}

/// Splits a term into its constant coefficient and the remaining monomial (`1` if none).
fn split_term(t: &Expr) -> (Coeff, Expr) {
    match t.node() {
        Node::Const(r) => (Coeff::real(r.clone()), Expr::one()),
        Node::I => (Coeff::imag_unit(), Expr::one()),
        Node::Product(fs) => {
            let mut c = Coeff::one();
            let mut rest = Vec::new();
            for f in fs {
                match f.node() {
                    Node::Const(r) => c = c.mul(&Coeff::real(r.clone())),
                    Node::I => c = c.mul(&Coeff::imag_unit()),
                    _ => rest.push(f.clone()),
                }
            }
            (c, Expr::product(rest))
        }
        _ => (Coeff::one(), t.clone()),
    }
}

fn monomial_factors(m: &Expr) -> Vec<Expr> {
    match m.node() {
        Node::Product(fs) => fs.clone(),
        _ if m.is_one() => vec![],
        _ => vec![m.clone()],
    }
}

/// Rebuilds `c * m` as one term, or two when `c` has both real and imaginary parts.
fn make_terms(c: &Coeff, factors: &[Expr]) -> Vec<Expr> {
    let mut out = Vec::new();
    if !c.re.is_zero() {
        let mut fs = Vec::with_capacity(factors.len() + 1);
        if !c.re.is_one() || factors.is_empty() {
            fs.push(Expr::constant(c.re.clone()));
        }
        fs.extend(factors.iter().cloned());
        out.push(Expr::product(fs));
    }
    if !c.im.is_zero() {
        let mut fs = Vec::with_capacity(factors.len() + 2);
        if !c.im.is_one() {
            fs.push(Expr::constant(c.im.clone()));
        }
        fs.push(Expr::i());
        fs.extend(factors.iter().cloned());
        out.push(Expr::product(fs));
    }
    out
}

fn simplify_sum(terms: Vec<Expr>) -> Expr {
    let mut flat = Vec::with_capacity(terms.len());
    for t in terms {
        match t.node() {
            Node::Sum(xs) => flat.extend(xs.iter().cloned()),
            _ => flat.push(t),
        }
    }
    let mut collected: BTreeMap<Expr, Coeff> = BTreeMap::new();
    for t in &flat {
        let (c, m) = split_term(t);
        if c.is_zero() {
            continue;
        }
        collected.entry(m).or_insert_with(Coeff::zero).add_assign(&c);
    }
    let mut out = Vec::new();
    for (m, c) in &collected {
        if c.is_zero() {
            continue;
        }
        out.extend(make_terms(c, &monomial_factors(m)));
    }
    Expr::sum(out)
}

fn simplify_product(factors: Vec<Expr>) -> Expr {
    let mut flat = Vec::with_capacity(factors.len());
    for f in factors {
        match f.node() {
            Node::Product(xs) => flat.extend(xs.iter().cloned()),
            _ => flat.push(f),
        }
    }
    let mut coeff = Coeff::one();
    let mut exps: Vec<Expr> = Vec::new();
    let mut bases: BTreeMap<Expr, Vec<Expr>> = BTreeMap::new();
    for f in flat {
        match f.node() {
            Node::Const(r) => {
                if r.is_zero() {
                    return Expr::zero();
                }
                coeff = coeff.mul(&Coeff::real(r.clone()));
            }
            Node::I => coeff = coeff.mul(&Coeff::imag_unit()),
            Node::Exp(a) => exps.push(a.clone()),
            Node::Power(b, x) => bases.entry(b.clone()).or_default().push(x.clone()),
            _ => bases.entry(f.clone()).or_default().push(Expr::one()),
        }
    }

    let mut sums: Vec<Vec<Expr>> = Vec::new();
    let mut rest: Vec<Expr> = Vec::new();
    for (b, xs) in bases {
        let x = simplify_sum(xs);
        if x.is_zero() {
            continue;
        }
        if let Node::Sum(ts) = b.node() {
            if let Some(n) = small_integer_of(&x).filter(|n| (1..=MAX_EXPANDED_POWER).contains(n)) {
                for _ in 0..n {
                    sums.push(ts.clone());
                }
                continue;
            }
        }
        let p = if x.is_one() { b } else { simplify_power(b, x) };
        match p.node() {
            Node::Const(r) => {
                if r.is_zero() {
                    return Expr::zero();
                }
                coeff = coeff.mul(&Coeff::real(r.clone()));
            }
            Node::I => coeff = coeff.mul(&Coeff::imag_unit()),
            Node::Sum(ts) => sums.push(ts.clone()),
            Node::Product(fs) => rest.extend(fs.iter().cloned()),
            _ => rest.push(p),
        }
    }
    if !exps.is_empty() {
        let e = simplify_exp(simplify_sum(exps));
        if !e.is_one() {
            rest.push(e);
        }
    }
    if coeff.is_zero() {
        return Expr::zero();
    }
    distribute(&coeff, rest, sums)
}

/// `coeff * prod(rest) * prod(sums)`, expanded into a canonical sum when `sums` is nonempty.
fn distribute(coeff: &Coeff, mut rest: Vec<Expr>, sums: Vec<Vec<Expr>>) -> Expr {
    if !sums.is_empty() {
        let mut head = make_terms(coeff, &rest);
        for s in sums {
            let mut next = Vec::with_capacity(head.len() * s.len());
            for h in &head {
                for t in &s {
                    next.push(Expr::from_node(Node::Product(vec![h.clone(), t.clone()])));
                }
            }
            head = next;
        }
        return simplify_sum(head.into_iter().map(|t| pass_product(&t)).collect());
    }
    rest.sort();
    Expr::sum(make_terms(coeff, &rest))
}

fn pass_product(t: &Expr) -> Expr {
    match t.node() {
        Node::Product(xs) => simplify_product(xs.clone()),
        _ => t.clone(),
    }
}

fn integer_of(e: &Expr) -> Option<BigInt> {
    e.as_const().filter(|r| r.is_integer()).map(|r| r.to_integer())
}

fn small_integer_of(e: &Expr) -> Option<i64> {
    integer_of(e).and_then(|n| n.to_i64())
}

fn rational_pow(r: &Rational, n: &BigInt) -> Option<Rational> {
    let k = n.abs().to_u32()?;
    let p = Rational::new(r.numer().pow(k), r.denom().pow(k));
    if n.is_negative() {
        if p.is_zero() {
            None
        } else {
            Some(p.recip())
        }
    } else {
        Some(p)
    }
}

fn exact_root(n: &BigInt, q: u32) -> Option<BigInt> {
    let r = n.nth_root(q);
    (r.pow(q) == *n).then_some(r)
}

fn simplify_power(b: Expr, x: Expr) -> Expr {
    if x.is_zero() || b.is_one() {
        return Expr::one();
    }
    if x.is_one() {
        return b;
    }
    if let (Node::Const(r), Node::Const(p)) = (b.node(), x.node()) {
        if let Some(folded) = fold_rational_power(r, p) {
            return folded;
        }
        return b.pow(x);
    }
    if let Some(n) = small_integer_of(&x) {
        match b.node() {
            Node::I => {
                return match n.rem_euclid(4) {
                    0 => Expr::one(),
                    1 => Expr::i(),
                    2 => Expr::int(-1),
                    _ => Expr::product(vec![Expr::int(-1), Expr::i()]),
                }
            }
            Node::Power(b0, y) => {
                return simplify_power(b0.clone(), simplify_product(vec![y.clone(), x]));
            }
            Node::Product(fs) => {
                return simplify_product(
                    fs.iter().map(|f| simplify_power(f.clone(), x.clone())).collect(),
                );
            }
            Node::Exp(a) => return simplify_exp(simplify_product(vec![a.clone(), x])),
            Node::Sum(ts) if (2..=MAX_EXPANDED_POWER).contains(&n) => {
                return distribute(&Coeff::one(), vec![], vec![ts.clone(); n as usize]);
            }
            _ => {}
        }
    }
    b.pow(x)
}

/// `r^p` for rational `r, p`: exact when possible, otherwise the integer part of the
/// exponent is pulled out so the remaining fractional exponent lies in `(0, 1)`.
fn fold_rational_power(r: &Rational, p: &Rational) -> Option<Expr> {
    if p.is_integer() {
        return rational_pow(r, &p.to_integer()).map(Expr::constant);
    }
    if r.is_zero() {
        return p.is_positive().then(Expr::zero);
    }
    if !r.is_positive() {
        return None;
    }
    let q = p.denom().to_u32()?;
    if let (Some(a), Some(b)) = (exact_root(r.numer(), q), exact_root(r.denom(), q)) {
        let root = Rational::new(a, b);
        return rational_pow(&root, p.numer()).map(Expr::constant);
    }
    let whole = p.numer().div_floor(p.denom());
    if whole.is_zero() {
        return None;
    }
    let frac = p - Rational::from_integer(whole.clone());
    let c = rational_pow(r, &whole)?;
    Some(Expr::product(vec![
        Expr::constant(c),
        Expr::constant(r.clone()).pow(Expr::constant(frac)),
    ]))
}

fn simplify_exp(a: Expr) -> Expr {
    if a.is_zero() {
        return Expr::one();
    }
    if let Node::Log(x) = a.node() {
        return x.clone();
    }
    a.exp()
}

fn simplify_log(a: Expr) -> Expr {
    if a.is_one() {
        return Expr::zero();
    }
    a.ln()
}
