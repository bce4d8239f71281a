//! Linear differential operators of order at most two with symbolic coefficients.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::expr::{Assignment, Expr};
use crate::sampling::SampleSpec;

pub const MAX_ORDER: usize = 2;

/// Sorted variable indices; `[]` is the zeroth-order part, `[i]` is `d/dx_i`, `[i, j]` is
/// `d^2/dx_i dx_j`.
pub type MultiIndex = Vec<usize>;

#[derive(Clone, PartialEq, Eq)]
pub struct DiffOp {
    vars: Vec<String>,
    coeffs: BTreeMap<MultiIndex, Expr>,
}

/// Outcome of a sampled operator comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct Equality {
    pub equal: bool,
    pub max_deviation: f64,
    pub samples_used: usize,
    pub skipped: usize,
}

const DEVIATION_FLOOR: f64 = 1e-300;

impl DiffOp {
    pub fn zero(vars: &[&str]) -> Self {
        DiffOp { vars: vars.iter().map(|s| s.to_string()).collect(), coeffs: BTreeMap::new() }
    }

    pub fn scalar(vars: &[&str], c: Expr) -> Self {
        Self::zero(vars).with_term(vec![], c)
    }

    /// `d/dx_i` for the variable named `var`.
    pub fn partial(vars: &[&str], var: &str) -> Self {
        let i = vars.iter().position(|v| *v == var).expect("variable is declared");
        Self::zero(vars).with_term(vec![i], Expr::one())
    }

    /// `a0 + sum_i a[i] d/dx_i`.
    pub fn first_order(vars: &[&str], a0: Expr, a: Vec<Expr>) -> Self {
        assert_eq!(a.len(), vars.len(), "one coefficient per variable");
        let mut op = Self::scalar(vars, a0);
        for (i, c) in a.into_iter().enumerate() {
            op = op.with_term(vec![i], c);
        }
        op
    }

    /// Adds `c` to the coefficient of `idx`; the coefficient is simplified and zeros dropped.
    pub fn with_term(mut self, mut idx: MultiIndex, c: Expr) -> Self {
        assert!(idx.len() <= MAX_ORDER, "order above {MAX_ORDER}");
        assert!(idx.iter().all(|&i| i < self.vars.len()), "index out of range");
        idx.sort_unstable();
        self.add_term(idx, c);
        self
    }

    fn add_term(&mut self, idx: MultiIndex, c: Expr) {
        let total = match self.coeffs.remove(&idx) {
            Some(old) => (old + c).simplify(),
            None => c.simplify(),
        };
        if !total.is_zero() {
            self.coeffs.insert(idx, total);
        }
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v == name)
    }

    pub fn coeffs(&self) -> &BTreeMap<MultiIndex, Expr> {
        &self.coeffs
    }

    pub fn coeff(&self, idx: &[usize]) -> Expr {
        let mut k = idx.to_vec();
        k.sort_unstable();
        self.coeffs.get(&k).cloned().unwrap_or_else(Expr::zero)
    }

    /// Coefficient of `d/d(name)`.
    pub fn coeff_of(&self, name: &str) -> Expr {
        self.var_index(name).map_or_else(Expr::zero, |i| self.coeff(&[i]))
    }

    pub fn order(&self) -> usize {
        self.coeffs.keys().map(Vec::len).max().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Coefficients of total degree `k`.
    pub fn part(&self, k: usize) -> impl Iterator<Item = (&MultiIndex, &Expr)> {
        self.coeffs.iter().filter(move |(i, _)| i.len() == k)
    }

    fn check_compatible(&self, o: &DiffOp) -> Result<()> {
        if self.vars != o.vars {
            return Err(Error::Input(format!(
                "operators act on different variables: {:?} vs {:?}",
                self.vars, o.vars
            )));
        }
        Ok(())
    }

    pub fn add(&self, o: &DiffOp) -> Result<DiffOp> {
        self.check_compatible(o)?;
        let mut out = self.clone();
        for (i, c) in &o.coeffs {
            out.add_term(i.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, o: &DiffOp) -> Result<DiffOp> {
        self.add(&o.scale(&Expr::int(-1)))
    }

    /// Left multiplication of every coefficient by `c`.
    pub fn scale(&self, c: &Expr) -> DiffOp {
        let mut out = DiffOp { vars: self.vars.clone(), coeffs: BTreeMap::new() };
        for (i, a) in &self.coeffs {
            out.add_term(i.clone(), c * a);
        }
        out
    }

    pub fn substitute(&self, map: &BTreeMap<String, Expr>) -> DiffOp {
        let mut out = DiffOp { vars: self.vars.clone(), coeffs: BTreeMap::new() };
        for (i, a) in &self.coeffs {
            out.add_term(i.clone(), a.substitute(map));
        }
        out
    }

    fn apply_index(&self, idx: &[usize], e: &Expr) -> Expr {
        idx.iter().fold(e.clone(), |acc, &i| acc.diff(&self.vars[i]))
    }

    /// `sum_alpha a_alpha d^alpha e`, simplified.
    pub fn apply(&self, e: &Expr) -> Expr {
        let terms: Vec<Expr> = self.coeffs.iter().map(|(i, c)| c * self.apply_index(i, e)).collect();
        Expr::sum(terms).simplify()
    }

    /// Applies only the derivative part `sum a^A d_A` of a first-order operator.
    fn derivation(&self, e: &Expr) -> Expr {
        let terms: Vec<Expr> =
            self.part(1).map(|(i, c)| c * e.diff(&self.vars[i[0]])).collect();
        Expr::sum(terms).simplify()
    }

    /// The operator product `self ∘ o`.
    pub fn compose(&self, o: &DiffOp) -> Result<DiffOp> {
        self.check_compatible(o)?;
        let order = self.order() + o.order();
        if order > MAX_ORDER {
            return Err(Error::UnsupportedOrder { order });
        }
        let mut out = DiffOp { vars: self.vars.clone(), coeffs: BTreeMap::new() };
        for (alpha, a) in &self.coeffs {
            for (beta, b) in &o.coeffs {
                // Leibniz: d^alpha (b d^beta) = sum over splits of alpha
                for mask in 0..(1usize << alpha.len()) {
                    let mut on_b = Vec::new();
                    let mut idx = beta.clone();
                    for (k, &i) in alpha.iter().enumerate() {
                        if mask & (1 << k) != 0 {
                            on_b.push(i);
                        } else {
                            idx.push(i);
                        }
                    }
                    let db = self.apply_index(&on_b, b);
                    if db.is_zero() {
                        continue;
                    }
                    idx.sort_unstable();
                    out.add_term(idx, a * db);
                }
            }
        }
        Ok(out)
    }

    pub fn commutator(&self, o: &DiffOp) -> Result<DiffOp> {
        self.check_compatible(o)?;
        let order = self.order().max(o.order());
        if order > 1 {
            return Err(Error::UnsupportedOrder { order });
        }
        let mut out = DiffOp { vars: self.vars.clone(), coeffs: BTreeMap::new() };
        out.add_term(vec![], self.derivation(&o.coeff(&[])) - o.derivation(&self.coeff(&[])));
        for b in 0..self.vars.len() {
            out.add_term(vec![b], self.derivation(&o.coeff(&[b])) - o.derivation(&self.coeff(&[b])));
        }
        Ok(out)
    }

    /// `f^{-1} ∘ self ∘ f` for a multiplication operator `f`.
    pub fn conjugate_by(&self, f: &Expr) -> Result<DiffOp> {
        let vars: Vec<&str> = self.vars.iter().map(String::as_str).collect();
        let right = self.compose(&DiffOp::scalar(&vars, f.clone()))?;
        DiffOp::scalar(&vars, f.recip()).compose(&right)
    }

    /// Numeric coefficient values at a point, keyed like `coeffs`.
    pub fn eval_coeffs(&self, a: &Assignment) -> Result<BTreeMap<MultiIndex, Complex64>> {
        self.coeffs.iter().map(|(i, c)| Ok((i.clone(), c.eval(a)?))).collect()
    }

    /// Applies the operator to a numeric field `f` at `point` using fourth-order central
    /// differences of width `h`. Coefficients are evaluated at `point` together with `params`.
    pub fn apply_numeric(
        &self,
        f: &dyn Fn(&[f64]) -> Result<Complex64>,
        point: &[f64],
        params: &Assignment,
        h: f64,
    ) -> Result<Complex64> {
        assert_eq!(point.len(), self.vars.len(), "point dimension");
        let mut at = params.clone();
        for (name, &x) in self.vars.iter().zip(point) {
            at.set(name, Complex64::new(x, 0.0));
        }
        let mut total = Complex64::new(0.0, 0.0);
        for (idx, c) in &self.coeffs {
            let c = c.eval(&at)?;
            total += c * fd_derivative(f, point, idx, h)?;
        }
        Ok(total)
    }

    /// Compares coefficients exactly after simplification, then at seeded sample points.
    /// The deviation at a point is `max |a - b| / max(max |a|, max |b|)` over coefficients.
    pub fn op_equal(&self, o: &DiffOp, spec: &SampleSpec, tol: f64) -> Result<Equality> {
        self.check_compatible(o)?;
        let diff = self.sub(o)?;
        if diff.is_zero() {
            return Ok(Equality { equal: true, max_deviation: 0.0, samples_used: 0, skipped: 0 });
        }
        let keys: Vec<MultiIndex> =
            self.coeffs.keys().chain(o.coeffs.keys()).cloned().collect::<std::collections::BTreeSet<_>>().into_iter().collect();
        let mut max_dev: f64 = 0.0;
        let mut used = 0;
        let mut skipped = 0;
        for p in spec.points() {
            let eval = |op: &DiffOp| -> Result<Vec<Complex64>> {
                keys.iter().map(|k| op.coeff(k).eval(&p)).collect()
            };
            match (eval(self), eval(o)) {
                (Ok(a), Ok(b)) => {
                    let scale = a
                        .iter()
                        .chain(b.iter())
                        .map(|z| z.norm())
                        .fold(DEVIATION_FLOOR, f64::max);
                    let dev = a.iter().zip(&b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max) / scale;
                    max_dev = max_dev.max(dev);
                    used += 1;
                }
                (Err(e), _) | (_, Err(e)) if is_skippable(&e) => skipped += 1,
                (Err(e), _) | (_, Err(e)) => return Err(e),
            }
        }
        if used == 0 {
            return Err(Error::Inconclusive(format!(
                "no usable sample points ({skipped} skipped)"
            )));
        }
        Ok(Equality { equal: max_dev <= tol, max_deviation: max_dev, samples_used: used, skipped })
    }
}

const FD1: [(f64, f64); 4] = [(-2.0, 1.0 / 12.0), (-1.0, -8.0 / 12.0), (1.0, 8.0 / 12.0), (2.0, -1.0 / 12.0)];
const FD2: [(f64, f64); 5] =
    [(-2.0, -1.0 / 12.0), (-1.0, 16.0 / 12.0), (0.0, -30.0 / 12.0), (1.0, 16.0 / 12.0), (2.0, -1.0 / 12.0)];

/// Fourth-order central difference for the multi-index `idx` (length at most two).
pub fn fd_derivative(
    f: &dyn Fn(&[f64]) -> Result<Complex64>,
    point: &[f64],
    idx: &[usize],
    h: f64,
) -> Result<Complex64> {
    let shifted = |moves: &[(usize, f64)]| -> Result<Complex64> {
        let mut p = point.to_vec();
        for &(i, s) in moves {
            p[i] += s * h;
        }
        f(&p)
    };
    match idx {
        [] => f(point),
        [i] => {
            let mut s = Complex64::new(0.0, 0.0);
            for (k, w) in FD1 {
                s += shifted(&[(*i, k)])? * w;
            }
            Ok(s / h)
        }
        [i, j] if i == j => {
            let mut s = Complex64::new(0.0, 0.0);
            for (k, w) in FD2 {
                s += shifted(&[(*i, k)])? * w;
            }
            Ok(s / (h * h))
        }
        [i, j] => {
            let mut s = Complex64::new(0.0, 0.0);
            for (a, wa) in FD1 {
                for (b, wb) in FD1 {
                    s += shifted(&[(*i, a), (*j, b)])? * (wa * wb);
                }
            }
            Ok(s / (h * h))
        }
        _ => Err(Error::UnsupportedOrder { order: idx.len() }),
    }
}

/// Errors that disqualify a sample point rather than the whole check.
pub fn is_skippable(e: &Error) -> bool {
    matches!(e, Error::Domain(_) | Error::NonFinite(_) | Error::Overflow(_))
}

impl fmt::Display for DiffOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return f.write_str("0");
        }
        for (k, (idx, c)) in self.coeffs.iter().enumerate() {
            if k > 0 {
                f.write_str(" + ")?;
            }
            if idx.is_empty() {
                write!(f, "({c})")?;
            } else {
                let names: Vec<&str> = idx.iter().map(|&i| self.vars[i].as_str()).collect();
                write!(f, "({c})*D[{}]", names.join(","))?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for DiffOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DiffOp[{}]({self})", self.vars.join(","))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::v;

    const X: [&str; 3] = ["x1", "x2", "x3"];

    fn xi2() -> DiffOp {
        DiffOp::first_order(&X, Expr::zero(), vec![Expr::zero(), Expr::one(), v("x1")])
    }

    fn xi3() -> DiffOp {
        DiffOp::partial(&X, "x3")
    }

    #[test]
    fn apply_examples() {
        assert_eq!(xi2().apply(&v("x3")), v("x1"));
        assert!(DiffOp::zero(&X).apply(&(v("x1").exp() * v("x2"))).is_zero());
        let q = ["q1", "q2"];
        let l = DiffOp::first_order(&q, Expr::zero(), vec![Expr::zero(), -v("q2")]);
        assert_eq!(l.apply(&v("q2").powi(2)), (-2 * v("q2").powi(2)).simplify());
    }

    #[test]
    fn compose_examples() {
        let c = xi2().compose(&xi3()).unwrap();
        assert_eq!(c.coeff(&[1, 2]), Expr::one());
        assert_eq!(c.coeff(&[2, 2]), v("x1"));
        assert_eq!(c.order(), 2);
        let one = DiffOp::scalar(&X, Expr::one());
        assert_eq!(one.compose(&xi2()).unwrap(), xi2());
        assert!(matches!(
            c.compose(&xi2()),
            Err(Error::UnsupportedOrder { order: 3 })
        ));
    }

    #[test]
    fn compose_is_leibniz_correct() {
        let a = DiffOp::first_order(&X, v("x2"), vec![v("x1").powi(2), Expr::zero(), v("x3").exp()]);
        let b = DiffOp::first_order(&X, Expr::one(), vec![Expr::zero(), v("x1") * v("x3"), Expr::zero()]);
        let f = (v("x1") * v("x2")).exp() + v("x3").powi(3);
        let lhs = a.compose(&b).unwrap().apply(&f);
        let rhs = a.apply(&b.apply(&f));
        assert!((lhs - rhs).simplify().is_zero());
    }

    #[test]
    fn commutator_examples() {
        let xi1 = DiffOp::partial(&X, "x1");
        let c = xi1.commutator(&xi2()).unwrap();
        assert_eq!(c, xi3());
        assert!(xi2().commutator(&xi2()).unwrap().is_zero());
        let second = xi2().compose(&xi3()).unwrap();
        assert!(matches!(second.commutator(&xi2()), Err(Error::UnsupportedOrder { order: 2 })));
    }

    #[test]
    fn op_equal_paths() {
        let spec = SampleSpec::new(20, 1).uniform("x1", -1.0, 1.0).uniform("x2", -1.0, 1.0).uniform("x3", -1.0, 1.0);
        let r = xi3().op_equal(&DiffOp::partial(&X, "x3"), &spec, 1e-12).unwrap();
        assert!(r.equal && r.samples_used == 0);
        let a = DiffOp::scalar(&X, Expr::i() * v("x1"));
        let b = DiffOp::scalar(&X, -(Expr::i() * v("x1")));
        let r = a.op_equal(&b, &spec, 1e-12).unwrap();
        assert!(!r.equal);
        assert!((r.max_deviation - 2.0).abs() < 1e-12);
        // ln(x1) is outside its domain on half of the points
        let c = DiffOp::scalar(&X, v("x1").ln());
        let d = DiffOp::scalar(&X, v("x1").ln() * 2);
        let r = c.op_equal(&d, &spec, 1e-12).unwrap();
        assert!(r.skipped > 0 && r.samples_used > 0);
        let neg = spec.clone().with_domain(|a| a.get("x1").unwrap().re < 0.0);
        assert!(matches!(c.op_equal(&d, &neg, 1e-12), Err(Error::Inconclusive(_))));
    }
}
