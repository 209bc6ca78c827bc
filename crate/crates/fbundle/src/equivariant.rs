//! The equivariant layer: blow up R-linear (T)-structures along the
//! equivariant-parameter basis, pair them with a k-linear F-bundle, and run
//! the equivariant maximal unfolding (unfold the R-side, lift, extend the
//! u-direction from the fiber).

use crate::connection::{check_flatness, Bundle, FBundle, Grading, TStructure};
use crate::error::{Error, Result};
use crate::framing::{compute_framing, extend_u_direction, Gauge};
use crate::scalar::Scalar;
use crate::series::{blown_up_vars, psi_lambda, SeriesMatrix};
use crate::unfolding::{maximal_unfold, UnfoldResult};

/// A k-linear F-bundle in blown-up variables together with the R-linear
/// (T)-structure it lifts, comparable only at equal `lambda_cap`.
#[derive(Clone)]
pub struct EquivFBundle {
    pub k_bundle: FBundle,
    pub r_tstruct: TStructure,
    pub lambda_cap: u32,
    /// Grading data for the k-level bundle, when the model carries one.
    pub k_grading: Option<Grading>,
    /// Grading data restricted to the R-level variables.
    pub r_grading: Option<Grading>,
}

/// Apply the change of variables t_i ↦ Σ_{|k| ≤ cap} λ^k t_{i,k} to every
/// connection matrix; the direction t_{i,k} receives λ^k · ψ(A_i).
pub fn lift_t_structure(t: &TStructure, lambda_cap: u32) -> Result<TStructure> {
    let spec = &t.spec;
    let syms = spec.symbols().clone();
    let (tvars, multis) = blown_up_vars(t.vars(), spec, lambda_cap);
    let mut mats = Vec::with_capacity(tvars.len());
    for i in 0..t.n_vars() {
        let lifted = t.mat(i).try_map(|s| psi_lambda(s, spec, lambda_cap))?;
        for k in &multis {
            let mut mono = crate::poly::Poly::one(&syms);
            for (m, &e) in k.iter().enumerate() {
                mono = mono.mul(&crate::poly::Poly::symbol(&syms, spec.n_base() + m).pow(e as u32));
            }
            mats.push(lifted.mul_scalar(&Scalar::from_poly(mono)));
        }
    }
    TStructure::new(spec.clone(), tvars, mats)
}

/// Pair a k-linear F-bundle with its R-linear lift, validating that the
/// underlying (T)-structure is exactly the blow-up of the R-structure.
pub fn assemble_equivariant(
    k_bundle: FBundle,
    r_tstruct: TStructure,
    lambda_cap: u32,
) -> Result<EquivFBundle> {
    let expected = lift_t_structure(&r_tstruct, lambda_cap)?;
    if expected.n_vars() != k_bundle.t.n_vars() || expected.rank() != k_bundle.rank() {
        return Err(Error::LiftMismatch(format!(
            "lift has {} variables of rank {}, k-bundle has {} of rank {}",
            expected.n_vars(),
            expected.rank(),
            k_bundle.t.n_vars(),
            k_bundle.rank()
        )));
    }
    for i in 0..expected.n_vars() {
        if expected.vars().name(i) != k_bundle.t.vars().name(i) {
            return Err(Error::LiftMismatch(format!(
                "variable {} is `{}` in the lift but `{}` in the k-bundle",
                i,
                expected.vars().name(i),
                k_bundle.t.vars().name(i)
            )));
        }
        let diff = expected.mat(i).sub(k_bundle.t.mat(i));
        if !diff.is_zero() {
            let n = diff.size();
            let entry = (0..n * n)
                .map(|k| (k / n, k % n))
                .find(|&(r, c)| !diff[(r, c)].is_zero())
                .unwrap();
            return Err(Error::LiftMismatch(format!(
                "direction `{}` entry ({}, {}) differs by {:?}",
                expected.vars().name(i),
                entry.0,
                entry.1,
                diff[entry]
            )));
        }
    }
    Ok(EquivFBundle {
        k_bundle,
        r_tstruct,
        lambda_cap,
        k_grading: None,
        r_grading: None,
    })
}

/// Outcome of the equivariant maximal unfolding: the enlarged pair plus the
/// R-level unfolding data.
pub struct EquivUnfoldResult {
    pub bundle: EquivFBundle,
    pub r_unfold: UnfoldResult,
}

/// Maximal unfolding of an equivariant F-bundle with cyclic vector `v` in
/// the R-structure's fiber: unfold the R-linear (T)-structure, lift the
/// result at the same cap, and extend the u-direction from the original
/// k-bundle's U at t = 0 through the identity fiber identification.
pub fn equivariant_maximal_unfold(e: &EquivFBundle, v: &[Scalar]) -> Result<EquivUnfoldResult> {
    let r_unfold = maximal_unfold(&Bundle::T(e.r_tstruct.clone()), v)?;
    let Bundle::T(r_new) = &r_unfold.bundle else {
        unreachable!("T-structure input yields a T-structure unfolding");
    };
    let lifted = lift_t_structure(r_new, e.lambda_cap)?;

    let u0 = e.k_bundle.u_mat.eval_t0();
    let k_bundle = if lifted.is_framed() {
        extend_u_direction(&lifted, &u0, e.k_bundle.lambda_euler)?
    } else {
        let (gauge, framed) = compute_framing(&lifted)?;
        let fb = extend_u_direction(&framed, &u0, e.k_bundle.lambda_euler)?;
        let back = Gauge {
            p: gauge.p_inv.clone(),
            p_inv: gauge.p.clone(),
        };
        let mats = (0..lifted.n_vars())
            .map(|i| back.apply_t(fb.t.mat(i), i)?.truncate(lifted.order()))
            .collect::<Result<Vec<_>>>()?;
        let u = back.apply_u(&fb.u_mat)?.truncate(lifted.order())?;
        FBundle::new(
            TStructure::new(lifted.spec.clone(), lifted.vars().clone(), mats)?,
            u,
        )?
        .with_lambda_euler(e.k_bundle.lambda_euler)
    };
    debug_assert!(check_flatness(&Bundle::F(k_bundle.clone()))?.flat);

    let bundle = EquivFBundle {
        k_bundle,
        r_tstruct: r_new.clone(),
        lambda_cap: e.lambda_cap,
        k_grading: None,
        r_grading: None,
    };
    Ok(EquivUnfoldResult { bundle, r_unfold })
}

/// Restrict a bundle at cap Λ to a smaller cap Λ′ by setting the variables
/// with |k| > Λ′ to zero (used by the Λ-coherence checks).
pub fn restrict_lambda_cap(e: &EquivFBundle, smaller: u32) -> Result<EquivFBundle> {
    if smaller > e.lambda_cap {
        return Err(Error::Invalid("can only restrict to a smaller cap".into()));
    }
    let spec = &e.r_tstruct.spec;
    let (small_vars, _) = blown_up_vars(e.r_tstruct.vars(), spec, smaller);
    let big = e.k_bundle.t.vars();
    let order = e.k_bundle.t.order();
    // Keep directions whose names survive; set dropped variables to zero.
    let keep: Vec<usize> = (0..big.len())
        .filter(|&i| small_vars.index_of(big.name(i)).is_some())
        .collect();
    let restrict = |m: &SeriesMatrix| -> Result<SeriesMatrix> {
        let mut r = m.clone();
        for i in 0..big.len() {
            if small_vars.index_of(big.name(i)).is_none() {
                r = r.restrict_var(i);
            }
        }
        // Rebuild over the smaller variable set.
        let images: Vec<crate::series::Series> = (0..big.len())
            .map(|i| match small_vars.index_of(big.name(i)) {
                Some(j) => crate::series::Series::var(&small_vars, order, j, spec.symbols()),
                None => crate::series::Series::zero(&small_vars, order, spec.symbols()),
            })
            .collect();
        r.subst_vars(&images)
    };
    let mats: Vec<SeriesMatrix> = keep
        .iter()
        .map(|&i| restrict(e.k_bundle.t.mat(i)))
        .collect::<Result<_>>()?;
    let u = restrict(&e.k_bundle.u_mat)?;
    let t = TStructure::new(spec.clone(), small_vars, mats)?;
    Ok(EquivFBundle {
        k_bundle: FBundle::new(t, u)?.with_lambda_euler(e.k_bundle.lambda_euler),
        r_tstruct: e.r_tstruct.clone(),
        lambda_cap: smaller,
        k_grading: None,
        r_grading: None,
    })
}
