//! The equivariant quantum cohomology ring of ℂP¹:
//! k[H, λ]/(H² − Hλ − q) with basis {1, σ}, σ the hyperplane class. Serves
//! as the independent multiplication oracle for the A-model connection.

use crate::error::Result;
use crate::matrix::ScalarMatrix;
use crate::scalar::Scalar;
use crate::symbols::{Flavor, ParamSpec};

/// Elements are pairs (a, b) = a·1 + b·σ with σ² = λσ + q; deg q = 4,
/// grading weights 0 and 1 on the basis.
pub struct QhP1 {
    pub spec: ParamSpec,
}

impl Default for QhP1 {
    fn default() -> Self {
        Self::new()
    }
}

impl QhP1 {
    pub fn new() -> Self {
        let spec = ParamSpec::new(&["q"], &["l"], Flavor::Polynomial).expect("valid params");
        QhP1 { spec }
    }

    pub fn q(&self) -> Scalar {
        Scalar::symbol(self.spec.symbols(), 0)
    }

    pub fn lambda(&self) -> Scalar {
        Scalar::symbol(self.spec.symbols(), 1)
    }

    pub fn one_elt(&self) -> (Scalar, Scalar) {
        let syms = self.spec.symbols();
        (Scalar::one(syms), Scalar::zero(syms))
    }

    pub fn sigma(&self) -> (Scalar, Scalar) {
        let syms = self.spec.symbols();
        (Scalar::zero(syms), Scalar::one(syms))
    }

    /// (a + bσ)(c + dσ) = (ac + bd·q) + (ad + bc + bd·λ)σ.
    pub fn mul(&self, x: &(Scalar, Scalar), y: &(Scalar, Scalar)) -> (Scalar, Scalar) {
        let (a, b) = x;
        let (c, d) = y;
        let bd = b.mul(d);
        (
            a.mul(c).add(&bd.mul(&self.q())),
            a.mul(d).add(&b.mul(c)).add(&bd.mul(&self.lambda())),
        )
    }

    /// Matrix of multiplication by `x` in the basis {1, σ} (columns are the
    /// images of the basis vectors).
    pub fn mul_matrix(&self, x: &(Scalar, Scalar)) -> Result<ScalarMatrix> {
        let syms = self.spec.symbols();
        let c1 = self.mul(x, &self.one_elt());
        let c2 = self.mul(x, &self.sigma());
        ScalarMatrix::from_columns(syms, &[vec![c1.0, c1.1], vec![c2.0, c2.1]])
    }

    /// Matrix of (σ + λ)⋆ — the divisor-direction connection residue.
    pub fn sigma_plus_lambda_matrix(&self) -> Result<ScalarMatrix> {
        let s = self.sigma();
        let l = self.lambda();
        self.mul_matrix(&(l, s.1))
    }
}
