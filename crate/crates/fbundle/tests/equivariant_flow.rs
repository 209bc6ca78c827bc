//! Equivariant lift and unfolding pipeline checks on the ℂP¹ A-model and
//! the wrapped rank-3 example.

use fbundle::connection::{check_flatness, check_maximal, Bundle};
use fbundle::equivariant::{
    assemble_equivariant, equivariant_maximal_unfold, lift_t_structure, restrict_lambda_cap,
};
use fbundle::error::Error;
use fbundle::instances::{make_ex310, p1_a_model};
use fbundle::scalar::Scalar;
use fbundle::series::TruncOrder;

#[test]
fn lift_flatness_and_matrix_shape() {
    let m = p1_a_model(3, 2, 5).unwrap();
    let small = &m.equiv.r_tstruct;
    let lifted = lift_t_structure(small, 2).unwrap();
    assert_eq!(lifted.n_vars(), 3); // k = 0, 1, 2
    assert_eq!(
        lifted.vars().names(),
        &["t1_0".to_string(), "t1_1".to_string(), "t1_2".to_string()]
    );
    assert!(check_flatness(&Bundle::T(lifted.clone())).unwrap().flat);
    // Direction t1_k carries λ^k times the blown-up matrix.
    let syms = small.spec.symbols().clone();
    let lam = Scalar::symbol(&syms, 1);
    let a0 = lifted.mat(0);
    let a1 = lifted.mat(1);
    assert_eq!(&a0.mul_scalar(&lam), a1);
}

#[test]
fn lift_at_cap_zero_is_the_identity_functor() {
    let m = p1_a_model(3, 1, 5).unwrap();
    let small = &m.equiv.r_tstruct;
    let lifted = lift_t_structure(small, 0).unwrap();
    assert_eq!(lifted.n_vars(), 1);
    // Renaming t1_ back to t1 recovers the matrix exactly.
    let renamed = lifted.mat(0).subst_vars(&[fbundle::Series::var(
        small.vars(),
        small.order(),
        0,
        small.spec.symbols(),
    )]).unwrap();
    assert_eq!(&renamed, small.mat(0));
}

#[test]
fn assemble_rejects_mismatched_pairs() {
    let m = p1_a_model(2, 1, 4).unwrap();
    // Tamper with one entry of the k-bundle.
    let mut bad = m.equiv.k_bundle.clone();
    let vars = bad.t.vars().clone();
    let order = bad.t.order();
    let syms = bad.t.spec.symbols().clone();
    let mut mats = bad.t.mats().to_vec();
    mats[0] = mats[0].add(&fbundle::SeriesMatrix::identity(&vars, order, 2, &syms));
    bad.t = fbundle::connection::TStructure::new(bad.t.spec.clone(), vars, mats).unwrap();
    match assemble_equivariant(bad, m.equiv.r_tstruct.clone(), 1) {
        Err(Error::LiftMismatch(_)) => {}
        other => panic!("expected LiftMismatch, got {:?}", other.err().map(|e| e.to_string())),
    }
}

#[test]
fn equivariant_unfold_of_the_small_a_model() {
    let m = p1_a_model(3, 1, 5).unwrap();
    let syms = m.qh.spec.symbols().clone();
    let v = vec![Scalar::one(&syms), Scalar::zero(&syms)];
    let res = equivariant_maximal_unfold(&m.equiv, &v).unwrap();
    assert_eq!(res.r_unfold.added_vars, vec!["s1".to_string()]);
    // The R-structure of the output is maximal at v and the k-bundle is
    // flat with the equivariant u-direction convention.
    let max = check_maximal(&Bundle::T(res.bundle.r_tstruct.clone()), &v).unwrap();
    assert!(max.maximal);
    assert!(res.bundle.k_bundle.lambda_euler);
    assert!(check_flatness(&Bundle::F(res.bundle.k_bundle.clone()))
        .unwrap()
        .flat);
    // k-level variables are the blow-ups of (t1, s1).
    assert_eq!(
        res.bundle.k_bundle.t.vars().names(),
        &["t1_0".to_string(), "t1_1".to_string(), "s1_0".to_string(), "s1_1".to_string()]
    );
}

#[test]
fn lambda_cap_coherence() {
    // Building at Λ = 2 and restricting to Λ = 1 equals building at Λ = 1,
    // on both sides of the mirror.
    let m2 = p1_a_model(3, 2, 5).unwrap();
    let m1 = p1_a_model(3, 1, 5).unwrap();
    let restricted = restrict_lambda_cap(&m2.equiv, 1).unwrap();
    assert_eq!(restricted.k_bundle.t.vars().names(), m1.equiv.k_bundle.t.vars().names());
    for i in 0..restricted.k_bundle.t.n_vars() {
        assert_eq!(
            restricted.k_bundle.t.mat(i),
            m1.equiv.k_bundle.t.mat(i),
            "direction {i}"
        );
    }
    assert_eq!(restricted.k_bundle.u_mat, m1.equiv.k_bundle.u_mat);
    let b2 = fbundle::instances::p1_b_model(3, 2, 5).unwrap();
    let b1 = fbundle::instances::p1_b_model(3, 1, 5).unwrap();
    let restricted_b = restrict_lambda_cap(&b2.equiv, 1).unwrap();
    for i in 0..restricted_b.k_bundle.t.n_vars() {
        assert_eq!(restricted_b.k_bundle.t.mat(i), b1.equiv.k_bundle.t.mat(i));
    }
    assert_eq!(restricted_b.k_bundle.u_mat, b1.equiv.k_bundle.u_mat);
}

#[test]
fn u_residue_joins_the_generators_in_f_mode() {
    // With zero base matrices nothing generates in (T)-structure mode, but
    // the u-direction residue K can still generate the fiber in F-mode.
    use fbundle::connection::{check_conditions, ConditionMode, FBundle, TStructure};
    use fbundle::series::{SeriesMatrix, VarSet};
    let spec = fbundle::ParamSpec::new(&[], &["l1"], fbundle::Flavor::Polynomial).unwrap();
    let syms = spec.symbols().clone();
    let vars = VarSet::new(vec!["t1".into()]);
    let order = TruncOrder::new(2, -2, 4);
    let t = TStructure::new(
        spec,
        vars.clone(),
        vec![SeriesMatrix::zero(&vars, order, 2, &syms)],
    )
    .unwrap();
    let mut k = SeriesMatrix::zero(&vars, order, 2, &syms);
    k[(0, 1)] = fbundle::Series::one(&vars, order, &syms);
    k[(1, 0)] = fbundle::Series::one(&vars, order, &syms);
    let f = FBundle::new(t, k).unwrap();
    let v = vec![Scalar::one(&syms), Scalar::zero(&syms)];
    let rep_t = check_conditions(&Bundle::F(f.clone()), &v, ConditionMode::TStructure).unwrap();
    assert!(!rep_t.gc_prime);
    let rep_f = check_conditions(&Bundle::F(f), &v, ConditionMode::FBundle).unwrap();
    assert!(rep_f.gc_prime && rep_f.gc);
}

#[test]
fn wrapped_rank3_example_unfolds_equivariantly() {
    // The rank-3 bundle with equivariant parameters λ₁, λ₂, wrapped as an
    // equivariant pair at Λ = 1 over the λ₁-localized ring.
    let f = make_ex310(TruncOrder::new(2, -2, 4), &["l1"]).unwrap();
    let spec = f.t.spec.clone();
    let syms = spec.symbols().clone();
    let lifted = lift_t_structure(&f.t, 1).unwrap();
    let u0 = f.u_mat.eval_t0();
    let k_bundle = fbundle::framing::extend_u_direction(&lifted, &u0, false).unwrap();
    let e = assemble_equivariant(k_bundle, f.t.clone(), 1).unwrap();
    let v = vec![
        Scalar::zero(&syms),
        Scalar::zero(&syms),
        Scalar::one(&syms),
    ];
    let res = equivariant_maximal_unfold(&e, &v).unwrap();
    assert_eq!(res.r_unfold.added_vars.len(), 1);
    assert!(res.r_unfold.certificate.det.is_unit(&spec).unwrap());
    assert!(check_flatness(&Bundle::F(res.bundle.k_bundle.clone()))
        .unwrap()
        .flat);
}
