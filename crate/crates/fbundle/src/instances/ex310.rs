//! Rank-3 bundle over a two-variable formal base with constant connection
//! matrices (the identity and a cyclic weight matrix) and zero u-direction.
//! The standard worked example for the injectivity/generation checks: its
//! evaluation determinant is λ₁²λ₂α³ + λ₂²β³ + λ₁γ³ − 3λ₁λ₂αβγ, so maximal
//! unfoldings exist only after localizing.

use std::sync::Arc;

use crate::connection::{FBundle, TStructure};
use crate::error::Result;
use crate::matrix::ScalarMatrix;
use crate::parse::parse_scalar;
use crate::scalar::Scalar;
use crate::series::{SeriesMatrix, TruncOrder, VarSet};
use crate::symbols::{Flavor, ParamSpec, SymbolSet};

/// The cyclic weight matrix B with B·e₁ = λ₁e₂, B·e₂ = λ₂e₃, B·e₃ = e₁.
pub fn cyclic_weight_matrix(syms: &Arc<SymbolSet>, l1: &Scalar, l2: &Scalar) -> ScalarMatrix {
    let mut b = ScalarMatrix::zero(syms, 3, 3);
    b[(0, 2)] = Scalar::one(syms);
    b[(1, 0)] = l1.clone();
    b[(2, 1)] = l2.clone();
    b
}

/// Build the bundle over k⟦t₁,t₂⟧ with A₁ = Id₃, A₂ = B, U = 0, with the
/// requested localizations granted in the coefficient ring.
pub fn make_ex310(order: TruncOrder, localize_at: &[&str]) -> Result<FBundle> {
    let mut spec = ParamSpec::new(&[], &["l1", "l2"], Flavor::PowerSeriesLocal)?;
    for name in localize_at {
        let s = parse_scalar(name, &spec)?;
        spec.localize(s.num().clone())?;
    }
    let syms = spec.symbols().clone();
    let l1 = Scalar::symbol(&syms, 0);
    let l2 = Scalar::symbol(&syms, 1);
    let vars = VarSet::new(vec!["t1".into(), "t2".into()]);
    let a1 = SeriesMatrix::identity(&vars, order, 3, &syms);
    let b = SeriesMatrix::from_scalar_matrix(&cyclic_weight_matrix(&syms, &l1, &l2), &vars, order)?;
    let t = TStructure::new(spec, vars.clone(), vec![a1, b])?;
    // The u-direction with K = U(0) = 0, extended so the joint flatness
    // holds: U = −t₁A₁ − t₂A₂ for these commuting constants.
    let u0 = SeriesMatrix::zero(&vars, order, 3, &syms);
    crate::framing::extend_u_direction(&t, &u0, false)
}

/// The 3×3 evaluation matrix of the residue algebra basis (Id, B, B²)
/// applied to a symbolic fiber vector v = (α, β, γ), over the ring extended
/// by the three extra symbols.
pub fn symbolic_evaluation_matrix() -> Result<(ParamSpec, ScalarMatrix)> {
    let spec = ParamSpec::new(&["a", "b", "c"], &["l1", "l2"], Flavor::PowerSeriesLocal)?;
    let syms = spec.symbols().clone();
    let v: Vec<Scalar> = (0..3).map(|i| Scalar::symbol(&syms, i)).collect();
    let l1 = Scalar::symbol(&syms, 3);
    let l2 = Scalar::symbol(&syms, 4);
    let b = cyclic_weight_matrix(&syms, &l1, &l2);
    let b2 = b.mul(&b);
    let cols = vec![v.clone(), b.mul_vec(&v), b2.mul_vec(&v)];
    let m = ScalarMatrix::from_columns(&syms, &cols)?;
    Ok((spec, m))
}
