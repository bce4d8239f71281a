//! Exact rational arithmetic and dense rational linear algebra.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

pub fn rat(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn ratio(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// Parses `"p"`, `"p/q"` or a finite decimal such as `"-0.25"` into an exact rational.
pub fn parse_rational(text: &str) -> Result<Rational> {
    let s = text.trim();
    let bad = || Error::Input(format!("not a rational number: {text:?}"));
    if s.is_empty() {
        return Err(bad());
    }
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| bad())?;
        let q: BigInt = q.trim().parse().map_err(|_| bad())?;
        if q.is_zero() {
            return Err(Error::Input(format!("zero denominator in {text:?}")));
        }
        return Ok(Rational::new(p, q));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let negative = int.trim_start().starts_with('-');
        let int_part: BigInt = match int.trim() {
            "" | "-" | "+" => BigInt::zero(),
            other => other.parse().map_err(|_| bad())?,
        };
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let frac_part: BigInt = frac.parse().map_err(|_| bad())?;
        let scale = num_traits::pow(BigInt::from(10), frac.len());
        let frac_rat = Rational::new(frac_part, scale);
        let int_rat = Rational::from_integer(int_part);
        return Ok(if negative { int_rat - frac_rat } else { int_rat + frac_rat });
    }
    let p: BigInt = s.parse().map_err(|_| bad())?;
    Ok(Rational::from_integer(p))
}

pub fn format_rational(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        // very large numerators/denominators: fall back to a scaled division
        let n = r.numer().to_f64().unwrap_or(f64::NAN);
        let d = r.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

/// Dense row-major rational matrix.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct RatMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Rational>,
}

impl RatMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        RatMatrix { rows, cols, data: vec![Rational::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Rational::one();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Rational>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Input("ragged matrix rows".into()));
        }
        Ok(RatMatrix { rows: r, cols: c, data: rows.into_iter().flatten().collect() })
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(n: usize, columns: &[Vec<Rational>]) -> Self {
        let mut m = Self::zeros(n, columns.len());
        for (j, col) in columns.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                m[(i, j)] = v.clone();
            }
        }
        m
    }

    pub fn from_i64(rows: &[&[i64]]) -> Self {
        Self::from_rows(rows.iter().map(|r| r.iter().map(|&v| rat(v)).collect()).collect())
            .expect("rectangular literal")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[Rational] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<Rational> {
        (0..self.rows).map(|i| self[(i, j)].clone()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)].clone();
            }
        }
        t
    }

    pub fn is_symmetric(&self) -> bool {
        self.is_square()
            && (0..self.rows).all(|i| (0..i).all(|j| self[(i, j)] == self[(j, i)]))
    }

    pub fn is_antisymmetric(&self) -> bool {
        self.is_square()
            && (0..self.rows).all(|i| (0..=i).all(|j| self[(i, j)] == -self[(j, i)].clone()))
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Zero::is_zero)
    }

    pub fn mul(&self, other: &RatMatrix) -> RatMatrix {
        assert_eq!(self.cols, other.rows, "matrix shape mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = &other[(k, j)];
                    if !b.is_zero() {
                        out[(i, j)] += a * b;
                    }
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[Rational]) -> Vec<Rational> {
        assert_eq!(self.cols, v.len(), "matrix-vector shape mismatch");
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .filter(|(a, b)| !a.is_zero() && !b.is_zero())
                    .fold(Rational::zero(), |acc, (a, b)| acc + a * b)
            })
            .collect()
    }

    /// Reduced row echelon form and the pivot column of each nonzero row.
    pub fn rref(&self) -> (RatMatrix, Vec<usize>) {
        let mut m = self.clone();
        let mut pivots = Vec::new();
        let mut row = 0;
        for col in 0..m.cols {
            if row == m.rows {
                break;
            }
            let Some(p) = (row..m.rows).find(|&r| !m[(r, col)].is_zero()) else {
                continue;
            };
            m.swap_rows(row, p);
            let inv = m[(row, col)].recip();
            for j in col..m.cols {
                let v = &m[(row, j)] * &inv;
                m[(row, j)] = v;
            }
            for r in 0..m.rows {
                if r != row && !m[(r, col)].is_zero() {
                    let factor = m[(r, col)].clone();
                    for j in col..m.cols {
                        let v = &m[(row, j)] * &factor;
                        m[(r, j)] -= v;
                    }
                }
            }
            pivots.push(col);
            row += 1;
        }
        (m, pivots)
    }

    pub fn rank(&self) -> usize {
        self.rref().1.len()
    }

    /// Basis of the right kernel {v : M v = 0}, one vector per free column.
    pub fn kernel(&self) -> Vec<Vec<Rational>> {
        let (r, pivots) = self.rref();
        let free: Vec<usize> = (0..self.cols).filter(|c| !pivots.contains(c)).collect();
        free.iter()
            .map(|&f| {
                let mut v = vec![Rational::zero(); self.cols];
                v[f] = Rational::one();
                for (row, &p) in pivots.iter().enumerate() {
                    v[p] = -r[(row, f)].clone();
                }
                v
            })
            .collect()
    }

    pub fn determinant(&self) -> Rational {
        assert!(self.is_square(), "determinant of a non-square matrix");
        let mut m = self.clone();
        let n = m.rows;
        let mut det = Rational::one();
        for col in 0..n {
            let Some(p) = (col..n).find(|&r| !m[(r, col)].is_zero()) else {
                return Rational::zero();
            };
            if p != col {
                m.swap_rows(p, col);
                det = -det;
            }
            let pivot = m[(col, col)].clone();
            det *= &pivot;
            for r in col + 1..n {
                if !m[(r, col)].is_zero() {
                    let factor = &m[(r, col)] / &pivot;
                    for j in col..n {
                        let v = &m[(col, j)] * &factor;
                        m[(r, j)] -= v;
                    }
                }
            }
        }
        det
    }

    pub fn inverse(&self) -> Option<RatMatrix> {
        if !self.is_square() {
            return None;
        }
        let n = self.rows;
        let mut aug = Self::zeros(n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                aug[(i, j)] = self[(i, j)].clone();
            }
            aug[(i, n + i)] = Rational::one();
        }
        let (r, pivots) = aug.rref();
        if pivots.len() < n || pivots[n - 1] != n - 1 {
            return None;
        }
        let mut inv = Self::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                inv[(i, j)] = r[(i, n + j)].clone();
            }
        }
        Some(inv)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a != b {
            for j in 0..self.cols {
                self.data.swap(a * self.cols + j, b * self.cols + j);
            }
        }
    }
}

impl std::ops::Index<(usize, usize)> for RatMatrix {
    type Output = Rational;
    fn index(&self, (i, j): (usize, usize)) -> &Rational {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for RatMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Rational {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Display for RatMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            let row: Vec<String> = self.row(i).iter().map(format_rational).collect();
            writeln!(f, "[{}]", row.join(", "))?;
        }
        Ok(())
    }
}

/// Linear subspace of the ambient coordinate space, given by independent generators.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Subspace {
    ambient: usize,
    generators: Vec<Vec<Rational>>,
}

impl Subspace {
    /// Wraps generators that must already be linearly independent.
    pub fn new(ambient: usize, generators: Vec<Vec<Rational>>) -> Result<Self> {
        if generators.iter().any(|g| g.len() != ambient) {
            return Err(Error::Input(format!(
                "subspace generator length differs from ambient dimension {ambient}"
            )));
        }
        let rank = RatMatrix::from_columns(ambient, &generators).rank();
        if rank != generators.len() {
            return Err(Error::Precondition(format!(
                "degenerate subspace: {} generators span only rank {rank}",
                generators.len()
            )));
        }
        Ok(Subspace { ambient, generators })
    }

    /// Span of arbitrary (possibly dependent) vectors, reduced to an echelon basis.
    pub fn span(ambient: usize, vectors: &[Vec<Rational>]) -> Self {
        if vectors.is_empty() {
            return Self::zero(ambient);
        }
        let rows = RatMatrix::from_rows(vectors.to_vec()).expect("uniform vector lengths");
        let (r, pivots) = rows.rref();
        let generators = (0..pivots.len()).map(|i| r.row(i).to_vec()).collect();
        Subspace { ambient, generators }
    }

    pub fn zero(ambient: usize) -> Self {
        Subspace { ambient, generators: Vec::new() }
    }

    pub fn full(ambient: usize) -> Self {
        Self::coordinate(ambient, &(0..ambient).collect::<Vec<_>>())
    }

    /// Span of the standard basis vectors with the given 0-based indices.
    pub fn coordinate(ambient: usize, indices: &[usize]) -> Self {
        let generators = indices
            .iter()
            .map(|&i| {
                let mut v = vec![Rational::zero(); ambient];
                v[i] = Rational::one();
                v
            })
            .collect();
        Subspace { ambient, generators }
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    pub fn rank(&self) -> usize {
        self.generators.len()
    }

    pub fn generators(&self) -> &[Vec<Rational>] {
        &self.generators
    }

    pub fn contains(&self, v: &[Rational]) -> bool {
        if v.iter().all(Zero::is_zero) {
            return true;
        }
        let mut cols = self.generators.clone();
        cols.push(v.to_vec());
        RatMatrix::from_columns(self.ambient, &cols).rank() == self.rank()
    }

    pub fn is_subspace_of(&self, other: &Subspace) -> bool {
        self.generators.iter().all(|g| other.contains(g))
    }

    pub fn same_span(&self, other: &Subspace) -> bool {
        self.rank() == other.rank() && self.is_subspace_of(other)
    }
}

pub fn dot(a: &[Rational], b: &[Rational]) -> Rational {
    a.iter().zip(b).fold(Rational::zero(), |acc, (x, y)| acc + x * y)
}

pub fn is_zero_vec(v: &[Rational]) -> bool {
    v.iter().all(Zero::is_zero)
}

/// Signature (positive, negative) of a symmetric matrix by congruence diagonalization.
pub fn signature(m: &RatMatrix) -> (usize, usize) {
    assert!(m.is_symmetric(), "signature needs a symmetric matrix");
    let n = m.rows();
    let mut a = m.clone();
    let mut pos = 0;
    let mut neg = 0;
    let mut k = 0;
    while k < n {
        if a[(k, k)].is_zero() {
            if let Some(p) = (k + 1..n).find(|&i| !a[(i, i)].is_zero()) {
                swap_sym(&mut a, k, p);
            } else if let Some(p) = (k + 1..n).find(|&i| !a[(k, i)].is_zero()) {
                // row_k += row_p, col_k += col_p makes the diagonal 2 a_kp + a_pp = 2 a_kp
                add_sym(&mut a, k, p);
            } else {
                k += 1;
                continue;
            }
        }
        let pivot = a[(k, k)].clone();
        if pivot.is_positive() {
            pos += 1;
        } else {
            neg += 1;
        }
        for i in k + 1..n {
            if a[(i, k)].is_zero() {
                continue;
            }
            let factor = &a[(i, k)] / &pivot;
            for j in k..n {
                let v = &a[(k, j)] * &factor;
                a[(i, j)] -= v;
            }
            for j in k..n {
                let v = &a[(j, k)] * &factor;
                a[(j, i)] -= v;
            }
        }
        k += 1;
    }
    (pos, neg)
}

fn swap_sym(a: &mut RatMatrix, i: usize, j: usize) {
    a.swap_rows(i, j);
    for r in 0..a.rows() {
        let t = a[(r, i)].clone();
        a[(r, i)] = a[(r, j)].clone();
        a[(r, j)] = t;
    }
}

fn add_sym(a: &mut RatMatrix, k: usize, p: usize) {
    let n = a.rows();
    for j in 0..n {
        let v = a[(p, j)].clone();
        a[(k, j)] += v;
    }
    for r in 0..n {
        let v = a[(r, p)].clone();
        a[(r, k)] += v;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_rational_forms() {
        assert_eq!(parse_rational("3").unwrap(), rat(3));
        assert_eq!(parse_rational("-6/4").unwrap(), ratio(-3, 2));
        assert_eq!(parse_rational("-0.25").unwrap(), ratio(-1, 4));
        assert_eq!(parse_rational("1.5").unwrap(), ratio(3, 2));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("").is_err());
    }

    #[test]
    fn inverse_and_determinant() {
        let m = RatMatrix::from_i64(&[&[2, 1], &[1, 1]]);
        assert_eq!(m.determinant(), rat(1));
        let inv = m.inverse().unwrap();
        assert_eq!(inv, RatMatrix::from_i64(&[&[1, -1], &[-1, 2]]));
        assert_eq!(m.mul(&inv), RatMatrix::identity(2));
        let singular = RatMatrix::from_i64(&[&[1, 2], &[2, 4]]);
        assert!(singular.inverse().is_none());
        assert_eq!(singular.determinant(), rat(0));
    }

    #[test]
    fn kernel_is_annihilated() {
        let m = RatMatrix::from_i64(&[&[1, 2, 3], &[2, 4, 6]]);
        let ker = m.kernel();
        assert_eq!(ker.len(), 2);
        for v in &ker {
            assert!(is_zero_vec(&m.mul_vec(v)));
        }
    }

    #[test]
    fn subspace_membership() {
        let h = Subspace::coordinate(3, &[0, 2]);
        assert!(h.contains(&[rat(5), rat(0), rat(-1)]));
        assert!(!h.contains(&[rat(0), rat(1), rat(0)]));
        assert!(Subspace::new(3, vec![vec![rat(1), rat(0), rat(0)], vec![rat(2), rat(0), rat(0)]])
            .is_err());
        let s = Subspace::span(3, &[vec![rat(1), rat(1), rat(0)], vec![rat(2), rat(2), rat(0)]]);
        assert_eq!(s.rank(), 1);
    }

    #[test]
    fn signature_of_hyperbolic_forms() {
        let h3 = RatMatrix::from_i64(&[&[1, 0, 0], &[0, 0, 1], &[0, 1, 0]]);
        assert_eq!(signature(&h3), (2, 1));
        let g47 = RatMatrix::from_i64(&[&[0, 0, 1, 1], &[0, 0, 0, 1], &[1, 0, 0, 0], &[1, 1, 0, 0]]);
        assert_eq!(signature(&g47), (2, 2));
        assert_eq!(signature(&RatMatrix::identity(4)), (4, 0));
    }
}
