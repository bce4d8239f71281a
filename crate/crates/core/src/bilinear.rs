//! Symmetric nondegenerate bilinear forms on a Lie algebra and the coisotropy machinery.

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::algebra::{adapted_basis, LieAlgebra};
use crate::error::{Error, Result};
use crate::rational::{parse_rational, signature, RatMatrix, Rational, Subspace};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BilinearForm {
    matrix: RatMatrix,
    inverse: RatMatrix,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CoisotropyReport {
    pub is_commutative_ideal: bool,
    pub hperp_in_h: bool,
    pub block_zero: bool,
    pub verdict: bool,
}

/// Coefficient data of the Laplacian `sum G^ij xi_i xi_j + sum c^i xi_i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LaplacianData {
    pub g_inv: RatMatrix,
    pub c_vec: Vec<Rational>,
    /// First-order coefficients along the ideal, in the adapted basis.
    pub b_vec: Option<Vec<Rational>>,
}

impl BilinearForm {
    pub fn new(matrix: RatMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Input("bilinear form matrix must be square".into()));
        }
        if !matrix.is_symmetric() {
            return Err(Error::Input("bilinear form matrix must be symmetric".into()));
        }
        let inverse = matrix
            .inverse()
            .ok_or_else(|| Error::DegenerateForm("determinant is zero".into()))?;
        Ok(BilinearForm { matrix, inverse })
    }

    pub fn identity(n: usize) -> Self {
        Self::new(RatMatrix::identity(n)).expect("identity is nondegenerate")
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &RatMatrix {
        &self.matrix
    }

    /// The exact inverse `G^ij`.
    pub fn inverse(&self) -> &RatMatrix {
        &self.inverse
    }

    pub fn eval(&self, x: &[Rational], y: &[Rational]) -> Rational {
        crate::rational::dot(x, &self.matrix.mul_vec(y))
    }

    /// `(positive, negative)` counts from exact congruence diagonalization.
    pub fn signature(&self) -> (usize, usize) {
        signature(&self.matrix)
    }

    /// `{X : G(X, h) = 0 for all h in H}`.
    pub fn orth_complement(&self, h: &Subspace) -> Subspace {
        let n = self.dim();
        if h.rank() == 0 {
            return Subspace::full(n);
        }
        let rows: Vec<Vec<Rational>> = h.generators().iter().map(|g| self.matrix.mul_vec(g)).collect();
        let m = RatMatrix::from_rows(rows).expect("rectangular rows");
        Subspace::new(n, m.kernel()).expect("kernel basis is independent")
    }

    /// The form expressed in the basis given by the columns of `p`: `P^T G P`.
    pub fn change_basis(&self, p: &RatMatrix) -> Result<BilinearForm> {
        BilinearForm::new(p.transpose().mul(&self.matrix).mul(p))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: FormFile = serde_json::from_str(text)
            .map_err(|e| Error::Input(format!("form file line {}: {e}", e.line())))?;
        let rows = file
            .matrix
            .iter()
            .enumerate()
            .map(|(r, row)| {
                row.iter()
                    .enumerate()
                    .map(|(c, s)| {
                        parse_rational(s)
                            .map_err(|e| Error::Input(format!("matrix[{r}][{c}]: {e}")))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(RatMatrix::from_rows(rows)?)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormFile {
    pub matrix: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Tests `h^perp ⊆ h` both directly and through the vanishing of the lower-right block of
/// `G^{-1}` in a basis adapted to `h`. The two tests are equivalent; disagreement panics.
pub fn coisotropy_check(l: &LieAlgebra, g: &BilinearForm, h: &Subspace) -> Result<CoisotropyReport> {
    check_dims(l, g, h)?;
    let flags = l.subspace_flags(h);
    let is_commutative_ideal = flags.is_ideal && flags.is_commutative;
    let hperp = g.orth_complement(h);
    let hperp_in_h = hperp.is_subspace_of(h);
    let block_zero = lower_block_vanishes(g, h)?;
    assert_eq!(
        hperp_in_h, block_zero,
        "orthogonal-complement and block tests disagree: internal error"
    );
    Ok(CoisotropyReport {
        is_commutative_ideal,
        hperp_in_h,
        block_zero,
        verdict: is_commutative_ideal && hperp_in_h,
    })
}

fn lower_block_vanishes(g: &BilinearForm, h: &Subspace) -> Result<bool> {
    let n = g.dim();
    let s = h.rank();
    let p = adapted_basis(n, h.generators())?;
    let gp = g.change_basis(&p)?;
    let inv = gp.inverse();
    Ok((s..n).all(|a| (s..n).all(|b| inv[(a, b)].is_zero())))
}

fn check_dims(l: &LieAlgebra, g: &BilinearForm, h: &Subspace) -> Result<()> {
    if g.dim() != l.dim() || h.ambient() != l.dim() {
        return Err(Error::Input(format!(
            "dimension mismatch: algebra {}, form {}, subspace ambient {}",
            l.dim(),
            g.dim(),
            h.ambient()
        )));
    }
    Ok(())
}

/// `c^i = -sum_j G^ij sum_k C_jk^k`.
pub fn c_vector(l: &LieAlgebra, g: &BilinearForm) -> Vec<Rational> {
    let t = l.trace_vector();
    g.inverse().mul_vec(&t).into_iter().map(|v| -v).collect()
}

pub fn laplacian_data(l: &LieAlgebra, g: &BilinearForm, h: Option<&Subspace>) -> Result<LaplacianData> {
    let c_vec = c_vector(l, g);
    let b_vec = match h {
        None => None,
        Some(h) => {
            if !coisotropy_check(l, g, h)?.verdict {
                return Err(Error::Precondition(
                    "supplied subspace is not a coisotropic commutative ideal".into(),
                ));
            }
            let n = l.dim();
            let s = h.rank();
            let p = adapted_basis(n, h.generators())?;
            let lp = l.change_basis(&p)?;
            let gp = g.change_basis(&p)?;
            let cp = c_vector(&lp, &gp);
            let inv = gp.inverse();
            let b = (0..s)
                .map(|alpha| {
                    let mut acc = cp[alpha].clone();
                    for beta in 0..s {
                        for b in s..n {
                            acc -= lp.structure_constant(beta, b, alpha) * &inv[(beta, b)];
                        }
                    }
                    acc
                })
                .collect();
            Some(b)
        }
    };
    Ok(LaplacianData { g_inv: g.inverse().clone(), c_vec, b_vec })
}

/// `G^(1)` of the bundled four-dimensional model: `G_13 = 1, G_14 = alpha, G_24 = beta`.
pub fn g47_form(alpha: &Rational, beta: &Rational) -> Result<BilinearForm> {
    let z = Rational::zero;
    let one = Rational::from_integer(1.into());
    let rows = vec![
        vec![z(), z(), one.clone(), alpha.clone()],
        vec![z(), z(), z(), beta.clone()],
        vec![one, z(), z(), z()],
        vec![alpha.clone(), beta.clone(), z(), z()],
    ];
    BilinearForm::new(RatMatrix::from_rows(rows)?)
}

/// The Heisenberg form `G_11 = 1, G_23 = G_32 = 1`.
pub fn heisenberg_form() -> BilinearForm {
    BilinearForm::new(RatMatrix::from_i64(&[&[1, 0, 0], &[0, 0, 1], &[0, 1, 0]]))
        .expect("nondegenerate")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{rat, ratio};

    fn heisenberg() -> LieAlgebra {
        LieAlgebra::from_integer_constants(3, &[(1, 2, &[(3, 1)])])
    }

    fn g47() -> LieAlgebra {
        LieAlgebra::from_integer_constants(
            4,
            &[(1, 4, &[(1, 2)]), (2, 3, &[(1, 1)]), (2, 4, &[(2, 1)]), (3, 4, &[(2, 1), (3, 1)])],
        )
    }

    #[test]
    fn inverses() {
        let g = heisenberg_form();
        assert_eq!(g.inverse(), g.matrix());
        assert_eq!(BilinearForm::identity(4).inverse(), &RatMatrix::identity(4));
        for (a, b) in [(1, 1), (2, 3), (-1, 5)] {
            let (alpha, beta) = (rat(a), rat(b));
            let g = g47_form(&alpha, &beta).unwrap();
            let inv = g.inverse();
            assert_eq!(inv[(0, 2)], rat(1));
            assert_eq!(inv[(1, 2)], -&alpha / &beta);
            assert_eq!(inv[(1, 3)], rat(1) / &beta);
            for i in 2..4 {
                for j in 2..4 {
                    assert!(inv[(i, j)].is_zero());
                }
            }
            assert!(inv.is_symmetric());
            assert_eq!(g.matrix().mul(inv), RatMatrix::identity(4));
        }
    }

    #[test]
    fn singular_and_asymmetric_forms_are_rejected() {
        assert!(matches!(
            BilinearForm::new(RatMatrix::from_i64(&[&[1, 1], &[1, 1]])),
            Err(Error::DegenerateForm(_))
        ));
        assert!(matches!(
            BilinearForm::new(RatMatrix::from_i64(&[&[1, 2], &[0, 1]])),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn orthogonal_complements() {
        let h13 = Subspace::coordinate(3, &[0, 2]);
        let perp = heisenberg_form().orth_complement(&h13);
        assert!(perp.same_span(&Subspace::coordinate(3, &[2])));
        let perp = BilinearForm::identity(4).orth_complement(&Subspace::coordinate(4, &[0]));
        assert!(perp.same_span(&Subspace::coordinate(4, &[1, 2, 3])));
        let g = g47_form(&rat(1), &rat(1)).unwrap();
        let h12 = Subspace::coordinate(4, &[0, 1]);
        let perp = g.orth_complement(&h12);
        assert_eq!(perp.rank(), 2);
        assert!(perp.is_subspace_of(&h12));
    }

    #[test]
    fn coisotropy_examples() {
        let r = coisotropy_check(&heisenberg(), &heisenberg_form(), &Subspace::coordinate(3, &[0, 2]))
            .unwrap();
        assert!(r.verdict && r.block_zero && r.hperp_in_h && r.is_commutative_ideal);
        let g = g47_form(&rat(1), &rat(1)).unwrap();
        assert!(coisotropy_check(&g47(), &g, &Subspace::coordinate(4, &[0, 1])).unwrap().verdict);
        let r = coisotropy_check(
            &heisenberg(),
            &BilinearForm::identity(3),
            &Subspace::coordinate(3, &[0, 2]),
        )
        .unwrap();
        assert!(!r.verdict && !r.hperp_in_h && !r.block_zero && r.is_commutative_ideal);
    }

    #[test]
    fn laplacian_data_examples() {
        let d = laplacian_data(&heisenberg(), &heisenberg_form(), Some(&Subspace::coordinate(3, &[0, 2])))
            .unwrap();
        assert!(d.c_vec.iter().all(Zero::is_zero));
        for (a, b) in [(1, 1), (2, 3), (-3, 7)] {
            let (alpha, beta) = (rat(a), rat(b));
            let g = g47_form(&alpha, &beta).unwrap();
            let d = laplacian_data(&g47(), &g, Some(&Subspace::coordinate(4, &[0, 1]))).unwrap();
            assert_eq!(d.c_vec, vec![rat(0), rat(4) / &beta, rat(0), rat(0)]);
            assert_eq!(d.b_vec.unwrap(), vec![&alpha / &beta, rat(3) / &beta]);
        }
        let ab = LieAlgebra::abelian(3);
        let g = BilinearForm::new(RatMatrix::from_i64(&[&[0, 0, 1], &[0, 1, 0], &[1, 0, 0]])).unwrap();
        let d = laplacian_data(&ab, &g, Some(&Subspace::coordinate(3, &[0, 1]))).unwrap();
        assert!(d.c_vec.iter().all(Zero::is_zero));
        assert!(d.b_vec.unwrap().iter().all(Zero::is_zero));
    }

    #[test]
    fn laplacian_data_rejects_non_coisotropic_ideal() {
        let r = laplacian_data(
            &heisenberg(),
            &BilinearForm::identity(3),
            Some(&Subspace::coordinate(3, &[0, 2])),
        );
        assert!(matches!(r, Err(Error::Precondition(_))));
    }

    #[test]
    fn form_file_parsing() {
        let g = BilinearForm::from_json(r#"{"matrix": [["1","0","0"],["0","0","1"],["0","1","0"]]}"#)
            .unwrap();
        assert_eq!(g, heisenberg_form());
        let err = BilinearForm::from_json(r#"{"matrix": [["1","x"],["0","1"]]}"#).unwrap_err();
        assert!(err.to_string().contains("matrix[0][1]"), "{err}");
        let g = g47_form(&ratio(1, 2), &rat(-2)).unwrap();
        assert_eq!(g.signature(), (2, 2));
    }
}
