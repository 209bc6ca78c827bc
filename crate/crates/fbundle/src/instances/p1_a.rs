//! The ℂP¹ equivariant A-model quantum D-module.
//!
//! Small model: rank 2 over R = k\[λ\] in one variable, connection matrix the
//! multiplication by σ + λ at q̃ = q·e^{t₁} (divisor axiom), u-direction via
//! the grading operator. The big model is closed-form: a second variable
//! for the identity class whose connection matrix is the identity.

use crate::connection::{check_flatness, Bundle, FBundle, Grading, TStructure};
use crate::equivariant::{assemble_equivariant, lift_t_structure, EquivFBundle};
use crate::error::Result;
use crate::instances::{standard_grading, QhP1};
use crate::series::{Series, SeriesMatrix, TruncOrder, VarSet};

pub struct P1AModel {
    /// The small equivariant bundle at the requested cap, gradings attached.
    pub equiv: EquivFBundle,
    /// Closed-form big R-level (T)-structure over (t1, t2).
    pub big_closed_form: TStructure,
    /// Grading-formula u-direction of the big closed form.
    pub big_u: SeriesMatrix,
    pub big_grading: Grading,
    pub qh: QhP1,
}

/// Connection matrix of (σ+λ)⋆ with q replaced by q·e^{t_idx}.
fn divisor_matrix(
    qh: &QhP1,
    vars: &std::sync::Arc<VarSet>,
    order: TruncOrder,
    t_idx: usize,
) -> Result<SeriesMatrix> {
    let syms = qh.spec.symbols();
    let m0 = qh.sigma_plus_lambda_matrix()?;
    let mut m = SeriesMatrix::from_scalar_matrix(&m0, vars, order)?;
    let qexp = Series::exp_var(vars, order, t_idx, syms).mul_scalar(&qh.q());
    m[(0, 1)] = qexp;
    Ok(m)
}

pub fn p1_a_model(d_t: u32, lambda_cap: u32, u_max: i32) -> Result<P1AModel> {
    let qh = QhP1::new();
    let spec = qh.spec.clone();
    let syms = spec.symbols().clone();
    let order = TruncOrder::new(d_t, -2, u_max);

    // Small R-linear (T)-structure in the divisor direction.
    let r_vars = VarSet::new(vec!["t1".into()]);
    let a_small = divisor_matrix(&qh, &r_vars, order, 0)?;
    let r_tstruct = TStructure::new(spec.clone(), r_vars, vec![a_small])?;
    let r_grading = standard_grading(&spec, &[0, 1], &[(1, 2)], None);

    // k-linear lift and grading-induced u-direction.
    let lifted = lift_t_structure(&r_tstruct, lambda_cap)?;
    let k_grading = standard_grading(&spec, &[0, 1], &[(1, 2)], Some(lambda_cap));
    let u = k_grading.u_matrix(&lifted)?;
    let k_bundle = FBundle::new(lifted, u)?.with_lambda_euler(true);
    debug_assert!(check_flatness(&Bundle::F(k_bundle.clone()))?.flat);
    let mut equiv = assemble_equivariant(k_bundle, r_tstruct, lambda_cap)?;
    equiv.k_grading = Some(k_grading);
    equiv.r_grading = Some(r_grading);

    // Closed-form big model over (t1, t2).
    let big_vars = VarSet::new(vec!["t1".into(), "t2".into()]);
    let a1 = divisor_matrix(&qh, &big_vars, order, 0)?;
    let a2 = SeriesMatrix::identity(&big_vars, order, 2, &syms);
    let big_closed_form = TStructure::new(spec.clone(), big_vars, vec![a1, a2])?;
    let big_grading = standard_grading(&spec, &[0, 1], &[(1, 2), (0, 0)], None);
    let big_u = big_grading.u_matrix(&big_closed_form)?;

    Ok(P1AModel {
        equiv,
        big_closed_form,
        big_u,
        big_grading,
        qh,
    })
}
