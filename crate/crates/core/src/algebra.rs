//! Structure-constant Lie algebras over the rationals and the exact checks built on them:
//! Jacobi identity, Kirillov form, annihilators, index, ideals and polarizations.

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{format_rational, parse_rational, ratio, RatMatrix, Rational, Subspace};

/// Bound `B` of the random rational covectors: numerators in `-B..=B`, denominators in `1..=B`.
pub const INDEX_SAMPLE_BOUND: i64 = 10;
pub const DEFAULT_INDEX_TRIALS: usize = 32;

/// A Lie algebra given by its structure constants `[e_i, e_j] = sum_k C_ij^k e_k`.
///
/// Only pairs `i < j` are stored; antisymmetry supplies the rest. Indices are 0-based
/// internally and 1-based in the JSON file format.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LieAlgebra {
    dim: usize,
    basis_names: Vec<String>,
    brackets: BTreeMap<(usize, usize), BTreeMap<usize, Rational>>,
}

/// A dual vector `lambda = sum_i lambda_i e^i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Covector(pub Vec<Rational>);

impl Covector {
    pub fn zero(n: usize) -> Self {
        Covector(vec![Rational::zero(); n])
    }

    /// `scale * e^k` (0-based `k`).
    pub fn basis(n: usize, k: usize, scale: Rational) -> Self {
        let mut v = vec![Rational::zero(); n];
        v[k] = scale;
        Covector(v)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JacobiViolation {
    pub triple: (usize, usize, usize),
    pub defect: Vec<Rational>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SubspaceFlags {
    pub is_subalgebra: bool,
    pub is_ideal: bool,
    pub is_commutative: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PolarizationFlags {
    pub subordinate: bool,
    pub dim_ok: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexEstimate {
    pub index: usize,
    /// A sampled covector whose annihilator attains `index`.
    pub witness: Covector,
}

impl LieAlgebra {
    /// Builds an algebra from `(i, j, [(k, C_ij^k)])` entries with 0-based indices.
    pub fn new(
        basis_names: Vec<String>,
        entries: impl IntoIterator<Item = (usize, usize, Vec<(usize, Rational)>)>,
    ) -> Result<Self> {
        let dim = basis_names.len();
        if dim == 0 {
            return Err(Error::Input("Lie algebra dimension must be positive".into()));
        }
        let mut brackets: BTreeMap<(usize, usize), BTreeMap<usize, Rational>> = BTreeMap::new();
        for (i, j, coeffs) in entries {
            if i >= dim || j >= dim {
                return Err(Error::Input(format!(
                    "bracket index ({}, {}) out of range 1..{dim}",
                    i + 1,
                    j + 1
                )));
            }
            let (a, b, sign) = match i.cmp(&j) {
                std::cmp::Ordering::Less => (i, j, Rational::one()),
                std::cmp::Ordering::Greater => (j, i, -Rational::one()),
                std::cmp::Ordering::Equal => {
                    if coeffs.iter().all(|(_, c)| c.is_zero()) {
                        continue;
                    }
                    return Err(Error::Input(format!(
                        "[e{0}, e{0}] must vanish by antisymmetry",
                        i + 1
                    )));
                }
            };
            let slot = brackets.entry((a, b)).or_default();
            for (k, c) in coeffs {
                if k >= dim {
                    return Err(Error::Input(format!(
                        "structure constant target index {} out of range 1..{dim}",
                        k + 1
                    )));
                }
                *slot.entry(k).or_insert_with(Rational::zero) += &sign * c;
            }
            slot.retain(|_, c| !c.is_zero());
        }
        brackets.retain(|_, v| !v.is_empty());
        Ok(LieAlgebra { dim, basis_names, brackets })
    }

    /// Builds an algebra with default basis names `e1..en` from 1-based integer data,
    /// e.g. `&[(1, 2, &[(3, 1)])]` for `[e1, e2] = e3`.
    pub fn from_integer_constants(dim: usize, data: &[(usize, usize, &[(usize, i64)])]) -> Self {
        let names = (1..=dim).map(|i| format!("e{i}")).collect();
        let entries = data.iter().map(|(i, j, cs)| {
            (i - 1, j - 1, cs.iter().map(|&(k, c)| (k - 1, ratio(c, 1))).collect())
        });
        Self::new(names, entries).expect("valid literal structure constants")
    }

    pub fn abelian(dim: usize) -> Self {
        Self::from_integer_constants(dim, &[])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn basis_names(&self) -> &[String] {
        &self.basis_names
    }

    /// `C_ij^k` for arbitrary 0-based `i, j, k`.
    pub fn structure_constant(&self, i: usize, j: usize, k: usize) -> Rational {
        let lookup = |a, b| self.brackets.get(&(a, b)).and_then(|m| m.get(&k)).cloned();
        match i.cmp(&j) {
            std::cmp::Ordering::Less => lookup(i, j).unwrap_or_else(Rational::zero),
            std::cmp::Ordering::Greater => lookup(j, i).map(|c| -c).unwrap_or_else(Rational::zero),
            std::cmp::Ordering::Equal => Rational::zero(),
        }
    }

    /// Coordinates of `[e_i, e_j]`.
    pub fn bracket_basis(&self, i: usize, j: usize) -> Vec<Rational> {
        (0..self.dim).map(|k| self.structure_constant(i, j, k)).collect()
    }

    pub fn bracket(&self, x: &[Rational], y: &[Rational]) -> Vec<Rational> {
        let mut out = vec![Rational::zero(); self.dim];
        for (&(i, j), coeffs) in &self.brackets {
            // x_i y_j - x_j y_i multiplies [e_i, e_j] for i < j
            let w = &x[i] * &y[j] - &x[j] * &y[i];
            if w.is_zero() {
                continue;
            }
            for (&k, c) in coeffs {
                out[k] += &w * c;
            }
        }
        out
    }

    /// Nonzero structure constants as `(i, j, k, C_ij^k)` with `i < j`.
    pub fn nonzero_constants(&self) -> impl Iterator<Item = (usize, usize, usize, &Rational)> {
        self.brackets
            .iter()
            .flat_map(|(&(i, j), m)| m.iter().map(move |(&k, c)| (i, j, k, c)))
    }

    /// `t_j = sum_k C_jk^k`, the trace of `ad(e_j)`.
    pub fn trace_vector(&self) -> Vec<Rational> {
        (0..self.dim)
            .map(|j| {
                (0..self.dim).fold(Rational::zero(), |acc, k| acc + self.structure_constant(j, k, k))
            })
            .collect()
    }

    pub fn is_unimodular(&self) -> bool {
        self.trace_vector().iter().all(Zero::is_zero)
    }

    /// All basis triples `i < j < k` whose cyclic Jacobi sum is nonzero.
    pub fn jacobi_defect(&self) -> Vec<JacobiViolation> {
        let n = self.dim;
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    let mut defect = vec![Rational::zero(); n];
                    for (a, b, c) in [(i, j, k), (j, k, i), (k, i, j)] {
                        let inner = self.bracket_basis(b, c);
                        let unit = unit_vector(n, a);
                        for (slot, v) in defect.iter_mut().zip(self.bracket(&unit, &inner)) {
                            *slot += v;
                        }
                    }
                    if defect.iter().any(|v| !v.is_zero()) {
                        out.push(JacobiViolation { triple: (i, j, k), defect });
                    }
                }
            }
        }
        out
    }

    /// `B_ij = <lambda, [e_i, e_j]>`.
    pub fn kirillov_matrix(&self, lambda: &Covector) -> RatMatrix {
        assert_eq!(lambda.0.len(), self.dim, "covector length must equal the dimension");
        let mut b = RatMatrix::zeros(self.dim, self.dim);
        for (i, j, k, c) in self.nonzero_constants() {
            let v = c * &lambda.0[k];
            b[(i, j)] += &v;
            b[(j, i)] -= v;
        }
        b
    }

    /// Stabilizer subalgebra of `lambda`: the kernel of the Kirillov form.
    pub fn annihilator(&self, lambda: &Covector) -> Subspace {
        let ker = self.kirillov_matrix(lambda).kernel();
        Subspace::new(self.dim, ker).expect("kernel basis is independent")
    }

    /// Minimal annihilator dimension over `trials` seeded random covectors.
    ///
    /// The result is always an upper bound on the true index and equals it unless every
    /// sample lands on the proper subvariety of singular covectors.
    pub fn index(&self, trials: usize, seed: u64) -> IndexEstimate {
        assert!(trials >= 1, "index needs at least one trial");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut best: Option<IndexEstimate> = None;
        for _ in 0..trials {
            let lambda = random_covector(&mut rng, self.dim, INDEX_SAMPLE_BOUND);
            let rank = self.annihilator(&lambda).rank();
            if best.as_ref().map_or(true, |b| rank < b.index) {
                best = Some(IndexEstimate { index: rank, witness: lambda });
            }
        }
        best.expect("at least one trial")
    }

    pub fn subspace_flags(&self, h: &Subspace) -> SubspaceFlags {
        let gens = h.generators();
        let mut is_subalgebra = true;
        let mut is_commutative = true;
        for (a, x) in gens.iter().enumerate() {
            for y in &gens[a + 1..] {
                let b = self.bracket(x, y);
                if b.iter().any(|v| !v.is_zero()) {
                    is_commutative = false;
                    if !h.contains(&b) {
                        is_subalgebra = false;
                    }
                }
            }
        }
        let is_ideal = (0..self.dim).all(|i| {
            let e = unit_vector(self.dim, i);
            gens.iter().all(|x| h.contains(&self.bracket(&e, x)))
        });
        SubspaceFlags { is_subalgebra, is_ideal, is_commutative }
    }

    /// Subordination `<lambda, [P, P]> = 0` and the dimension condition
    /// `2 dim P = dim g + ind g` for a candidate polarization `P`.
    pub fn is_polarization(
        &self,
        lambda: &Covector,
        p: &Subspace,
        index: usize,
    ) -> Result<PolarizationFlags> {
        if !self.subspace_flags(p).is_subalgebra {
            return Err(Error::Precondition("candidate polarization is not a subalgebra".into()));
        }
        let b = self.kirillov_matrix(lambda);
        let gens = p.generators();
        let subordinate = gens.iter().all(|x| {
            let bx = b.transpose().mul_vec(x);
            gens.iter().all(|y| crate::rational::dot(&bx, y).is_zero())
        });
        let dim_ok = 2 * p.rank() == self.dim + index;
        Ok(PolarizationFlags { subordinate, dim_ok })
    }

    /// Structure constants in the basis `e'_a = sum_i P_ia e_i` given by the columns of `p`.
    pub fn change_basis(&self, p: &RatMatrix) -> Result<LieAlgebra> {
        let p_inv = p
            .inverse()
            .ok_or_else(|| Error::Precondition("change of basis is not invertible".into()))?;
        let n = self.dim;
        let mut entries = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                let br = self.bracket(&p.column(a), &p.column(b));
                let coords = p_inv.mul_vec(&br);
                let cs: Vec<(usize, Rational)> =
                    coords.into_iter().enumerate().filter(|(_, c)| !c.is_zero()).collect();
                if !cs.is_empty() {
                    entries.push((a, b, cs));
                }
            }
        }
        let names = (1..=n).map(|i| format!("e'{i}")).collect();
        LieAlgebra::new(names, entries)
    }

    pub fn to_file(&self) -> AlgebraFile {
        let mut brackets = Vec::new();
        for (&(i, j), coeffs) in &self.brackets {
            brackets.push(BracketEntry {
                i: i + 1,
                j: j + 1,
                c: coeffs.iter().map(|(k, v)| ((k + 1).to_string(), format_rational(v))).collect(),
            });
        }
        AlgebraFile { dim: self.dim, basis: Some(self.basis_names.clone()), brackets }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: AlgebraFile = serde_json::from_str(text)
            .map_err(|e| Error::Input(format!("algebra file line {}: {e}", e.line())))?;
        file.into_algebra()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("serializable")
    }
}

/// Standard basis vector with a single 1 at (0-based) position `i`.
pub fn unit_vector(n: usize, i: usize) -> Vec<Rational> {
    let mut v = vec![Rational::zero(); n];
    v[i] = Rational::one();
    v
}

pub fn random_rational(rng: &mut impl Rng, bound: i64) -> Rational {
    ratio(rng.gen_range(-bound..=bound), rng.gen_range(1..=bound))
}

pub fn random_covector(rng: &mut impl Rng, n: usize, bound: i64) -> Covector {
    Covector((0..n).map(|_| random_rational(rng, bound)).collect())
}

/// Invertible change-of-basis matrix whose first `rank(h)` columns are the generators of
/// `h`, completed greedily by standard basis vectors in index order.
pub fn adapted_basis(n: usize, generators: &[Vec<Rational>]) -> Result<RatMatrix> {
    let h = Subspace::new(n, generators.to_vec())?;
    let mut cols: Vec<Vec<Rational>> = h.generators().to_vec();
    for i in 0..n {
        if cols.len() == n {
            break;
        }
        let e = unit_vector(n, i);
        let mut trial = cols.clone();
        trial.push(e);
        if RatMatrix::from_columns(n, &trial).rank() == trial.len() {
            cols = trial;
        }
    }
    Ok(RatMatrix::from_columns(n, &cols))
}

/// JSON layout of a Lie algebra file.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgebraFile {
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<Vec<String>>,
    #[serde(default)]
    pub brackets: Vec<BracketEntry>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BracketEntry {
    pub i: usize,
    pub j: usize,
    pub c: BTreeMap<String, String>,
}

impl AlgebraFile {
    pub fn into_algebra(self) -> Result<LieAlgebra> {
        let dim = self.dim;
        let names = match self.basis {
            Some(names) if names.len() != dim => {
                return Err(Error::Input(format!(
                    "field `basis` has {} names but `dim` is {dim}",
                    names.len()
                )))
            }
            Some(names) => names,
            None => (1..=dim).map(|i| format!("e{i}")).collect(),
        };
        let mut entries = Vec::new();
        for (n, b) in self.brackets.into_iter().enumerate() {
            let field = |what: &str| format!("brackets[{n}].{what}");
            if b.i == 0 || b.j == 0 {
                return Err(Error::Input(format!("{}: indices are 1-based", field("i/j"))));
            }
            let mut coeffs = Vec::new();
            for (k, v) in b.c {
                let k: usize = k
                    .parse()
                    .map_err(|_| Error::Input(format!("{}: bad index {k:?}", field("c"))))?;
                if k == 0 {
                    return Err(Error::Input(format!("{}: indices are 1-based", field("c"))));
                }
                let v = parse_rational(&v)
                    .map_err(|e| Error::Input(format!("{}[{k}]: {e}", field("c"))))?;
                coeffs.push((k - 1, v));
            }
            entries.push((b.i - 1, b.j - 1, coeffs));
        }
        LieAlgebra::new(names, entries)
    }
}

/// Parses a JSON array of rational coordinate vectors into a subspace.
pub fn subspace_from_json(n: usize, text: &str) -> Result<Subspace> {
    let raw: Vec<Vec<String>> = serde_json::from_str(text)
        .map_err(|e| Error::Input(format!("subspace file line {}: {e}", e.line())))?;
    let mut gens = Vec::new();
    for (g, row) in raw.iter().enumerate() {
        let v = row
            .iter()
            .enumerate()
            .map(|(c, s)| {
                parse_rational(s).map_err(|e| Error::Input(format!("generator {g}, entry {c}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        gens.push(v);
    }
    Subspace::new(n, gens)
}
