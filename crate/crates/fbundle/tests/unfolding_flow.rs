//! End-to-end unfolding pipeline checks on the rank-3 cyclic-weight bundle.

use fbundle::connection::{check_conditions, check_flatness, check_maximal, Bundle, ConditionMode};
use fbundle::error::Error;
use fbundle::instances::make_ex310;
use fbundle::parse::{parse_scalar, scalar_to_string};
use fbundle::scalar::Scalar;
use fbundle::series::TruncOrder;
use fbundle::unfolding::{compare_unfoldings, maximal_unfold, maximal_unfold_with};
use fbundle::Flavor;

fn e(syms: &std::sync::Arc<fbundle::SymbolSet>, n: usize, i: usize) -> Vec<Scalar> {
    (0..n)
        .map(|j| {
            if i == j {
                Scalar::one(syms)
            } else {
                Scalar::zero(syms)
            }
        })
        .collect()
}

#[test]
fn conditions_for_the_standard_cyclic_vectors() {
    let f = make_ex310(TruncOrder::new(3, -2, 4), &[]).unwrap();
    let syms = f.t.spec.symbols().clone();
    let b = Bundle::F(f);
    // v = e3: (GC') holds, (GC) fails, localization λ₁ reported.
    let rep = check_conditions(&b, &e(&syms, 3, 2), ConditionMode::FBundle).unwrap();
    assert!(rep.ic && rep.gc_prime && !rep.gc);
    assert_eq!(rep.needed_localizations.len(), 1);
    assert_eq!(scalar_to_string(&rep.needed_localizations[0]), "l1");
    // v = e2: localization λ₂² (the best determinant, unit-stripped).
    let rep2 = check_conditions(&b, &e(&syms, 3, 1), ConditionMode::FBundle).unwrap();
    assert!(rep2.ic && rep2.gc_prime && !rep2.gc);
    assert_eq!(rep2.needed_localizations.len(), 1);
    assert_eq!(scalar_to_string(&rep2.needed_localizations[0]), "l2^2");
    // v = e1: the determinant specializes to ±λ₁²λ₂.
    let rep1 = check_conditions(&b, &e(&syms, 3, 0), ConditionMode::FBundle).unwrap();
    assert!(rep1.ic && rep1.gc_prime);
    assert_eq!(scalar_to_string(&rep1.needed_localizations[0]), "l1^2*l2");
}

#[test]
fn unlocalized_unfold_reports_the_obstruction() {
    let f = make_ex310(TruncOrder::new(3, -2, 4), &[]).unwrap();
    let syms = f.t.spec.symbols().clone();
    match maximal_unfold(&Bundle::F(f), &e(&syms, 3, 2)) {
        Err(Error::ConditionsNotMet(_)) => {}
        other => panic!("expected ConditionsNotMet, got {:?}", other.err()),
    }
    // v = e2 over a ring localized only at λ₁ still reports λ₂².
    let f2 = make_ex310(TruncOrder::new(3, -2, 4), &["l1"]).unwrap();
    match maximal_unfold(&Bundle::F(f2), &e(&syms, 3, 1)) {
        Err(Error::ConditionsNotMet(msg)) => assert!(msg.contains("l2^2"), "{msg}"),
        other => panic!("expected ConditionsNotMet, got {:?}", other.err()),
    }
}

#[test]
fn localized_maximal_unfold_succeeds() {
    let f = make_ex310(TruncOrder::new(3, -2, 4), &["l1"]).unwrap();
    let syms = f.t.spec.symbols().clone();
    let input = Bundle::F(f.clone());
    let v = e(&syms, 3, 2);
    let res = maximal_unfold(&input, &v).unwrap();
    assert_eq!(res.added_vars, vec!["s1".to_string()]);
    // The certificate determinant is a unit (±λ₁ over the localized ring).
    assert!(res.certificate.maximal);
    let spec = &f.t.spec;
    assert_eq!(res.certificate.det.is_unit(spec), Ok(true));
    // The unfolded bundle is flat and maximal at v.
    assert!(check_flatness(&res.bundle).unwrap().flat);
    let max = check_maximal(&res.bundle, &v).unwrap();
    assert!(max.maximal);
    // Restriction law: setting s1 = 0 recovers the input exactly.
    let Bundle::F(out) = &res.bundle else { panic!() };
    let s_idx = out.t.vars().index_of("s1").unwrap();
    for (i, m) in f.t.mats().iter().enumerate() {
        let restricted = out.t.mat(i).restrict_var(s_idx);
        let expect = m
            .embed(out.t.vars(), out.t.order())
            .unwrap();
        assert_eq!(restricted, expect, "direction {i}");
    }
    assert_eq!(
        out.u_mat.restrict_var(s_idx),
        f.u_mat.embed(out.t.vars(), out.t.order()).unwrap()
    );
}

#[test]
fn distinct_complements_are_intertwined() {
    let order = TruncOrder::new(3, -2, 4);
    let f = make_ex310(order, &["l1"]).unwrap();
    let syms = f.t.spec.symbols().clone();
    let spec = f.t.spec.clone();
    let input = Bundle::F(f);
    let v = e(&syms, 3, 2);
    let u1 = maximal_unfold(&input, &v).unwrap();
    // Second unfolding: complement λ₁e₂ + e₁ instead of the greedy λ₁e₂.
    let l1 = parse_scalar("l1", &spec).unwrap();
    let mut alt = e(&syms, 3, 1);
    alt = alt.iter().map(|s| s.mul(&l1)).collect();
    alt[0] = Scalar::one(&syms);
    let u2 = maximal_unfold_with(&input, &v, Some(&[alt])).unwrap();
    assert!(u2.certificate.maximal);
    let iso = compare_unfoldings(&u1, &u2).unwrap();
    // The base map is invertible, nontrivial, and has coefficients in the
    // localized ring (asserted internally; spot-check the shape here).
    let nontrivial = iso
        .base_map
        .iter()
        .enumerate()
        .any(|(i, s)| {
            let vars = s.vars().clone();
            let x = fbundle::Series::var(&vars, s.order(), i, &syms);
            *s != x
        });
    assert!(nontrivial, "expected a nontrivial base identification");
    for s in &iso.base_map {
        for (_, c) in s.terms() {
            assert!(c.in_ring(&spec));
        }
    }
    // Identity comparison: an unfolding is isomorphic to itself trivially.
    let self_iso = compare_unfoldings(&u1, &u1).unwrap();
    for (i, s) in self_iso.base_map.iter().enumerate() {
        let x = fbundle::Series::var(s.vars(), s.order(), i, &syms);
        assert_eq!(*s, x);
    }
}

#[test]
fn different_cyclic_vectors_are_not_comparable() {
    let order = TruncOrder::new(2, -2, 4);
    let f = make_ex310(order, &["l1", "l2"]).unwrap();
    let syms = f.t.spec.symbols().clone();
    let input = Bundle::F(f);
    let u_e3 = maximal_unfold(&input, &e(&syms, 3, 2)).unwrap();
    let u_e2 = maximal_unfold(&input, &e(&syms, 3, 1)).unwrap();
    assert!(matches!(
        compare_unfoldings(&u_e3, &u_e2),
        Err(Error::NotComparable(_))
    ));
}

#[test]
fn already_maximal_input_is_returned_unchanged() {
    // The unfolded bundle, fed back in, needs no new variables.
    let f = make_ex310(TruncOrder::new(2, -2, 4), &["l1"]).unwrap();
    let syms = f.t.spec.symbols().clone();
    let v = e(&syms, 3, 2);
    let res = maximal_unfold(&Bundle::F(f), &v).unwrap();
    let res2 = maximal_unfold(&res.bundle, &v).unwrap();
    assert!(res2.added_vars.is_empty());
    let Bundle::F(a) = &res.bundle else { panic!() };
    let Bundle::F(b) = &res2.bundle else { panic!() };
    assert_eq!(a.t.mats().to_vec(), b.t.mats().to_vec());
    assert_eq!(a.u_mat, b.u_mat);
}

#[test]
fn gauge_covariance_of_condition_booleans() {
    use fbundle::ScalarMatrix;
    let f = make_ex310(TruncOrder::new(2, -2, 4), &[]).unwrap();
    let syms = f.t.spec.symbols().clone();
    let v = e(&syms, 3, 2);
    let rep = check_conditions(&Bundle::F(f.clone()), &v, ConditionMode::FBundle).unwrap();
    // Conjugate by a constant unimodular matrix and transport v.
    let mut p = ScalarMatrix::identity(&syms, 3);
    p[(0, 1)] = Scalar::from_i64(&syms, 2);
    p[(1, 2)] = Scalar::from_i64(&syms, -1);
    let t2 = f.t.conjugate_constant(&p).unwrap();
    let vars = t2.vars().clone();
    let order = t2.order();
    let pm = fbundle::SeriesMatrix::from_scalar_matrix(&p, &vars, order).unwrap();
    let pim =
        fbundle::SeriesMatrix::from_scalar_matrix(&p.inverse().unwrap(), &vars, order).unwrap();
    let u2 = pim.mul(&f.u_mat).unwrap().mul(&pm).unwrap();
    let f2 = fbundle::connection::FBundle::new(t2, u2).unwrap();
    let v2 = p.inverse().unwrap().mul_vec(&v);
    let rep2 = check_conditions(&Bundle::F(f2), &v2, ConditionMode::FBundle).unwrap();
    assert_eq!(rep.ic, rep2.ic);
    assert_eq!(rep.gc, rep2.gc);
    assert_eq!(rep.gc_prime, rep2.gc_prime);
}

#[test]
fn ex310_flavor_checks() {
    let spec = fbundle::ParamSpec::new(&[], &["l1", "l2"], Flavor::PowerSeriesLocal).unwrap();
    let l1 = Scalar::symbol(spec.symbols(), 0);
    assert_eq!(l1.is_unit(&spec), Ok(false));
}

#[test]
fn two_directions_cannot_be_maximal_at_rank_three() {
    let f = make_ex310(TruncOrder::new(2, -2, 4), &["l1", "l2"]).unwrap();
    let syms = f.t.spec.symbols().clone();
    let max = check_maximal(&Bundle::F(f), &e(&syms, 3, 2)).unwrap();
    assert!(!max.maximal);
}

#[test]
fn non_unit_explicit_complement_is_rejected() {
    let f = make_ex310(TruncOrder::new(2, -2, 4), &["l1"]).unwrap();
    let syms = f.t.spec.symbols().clone();
    let v = e(&syms, 3, 2);
    // λ₂·e₂ completes the evaluation image to full rank, but its determinant
    // ±λ₁λ₂ is not a unit over the λ₁-localized ring.
    let l2 = parse_scalar("l2", &f.t.spec).unwrap();
    let bad: Vec<Scalar> = e(&syms, 3, 1).iter().map(|s| s.mul(&l2)).collect();
    match maximal_unfold_with(&Bundle::F(f), &v, Some(&[bad])) {
        Err(Error::NoUnitComplement { best }) => assert!(best.contains("l2"), "{best}"),
        other => panic!("expected NoUnitComplement, got {:?}", other.err()),
    }
}

#[test]
fn lift_restricts_back_to_the_r_structure() {
    // Setting the k ≠ 0 blow-up variables to zero and renaming t_{i,0} → t_i
    // recovers the R-matrices exactly.
    let f = make_ex310(TruncOrder::new(2, -2, 4), &[]).unwrap();
    let lifted = fbundle::equivariant::lift_t_structure(&f.t, 2).unwrap();
    let syms = f.t.spec.symbols().clone();
    let multis = fbundle::series::lambda_multi_indices(2, 2);
    let per_var = multis.len();
    for i in 0..f.t.n_vars() {
        // Direction t_{i,0} is block index i*per_var.
        let mut m = lifted.mat(i * per_var).clone();
        for j in 0..lifted.n_vars() {
            if j % per_var != 0 {
                m = m.restrict_var(j);
            }
        }
        // Rename t_{i,0} back positionally onto (t1, t2).
        let images: Vec<fbundle::Series> = (0..lifted.n_vars())
            .map(|j| {
                if j % per_var == 0 {
                    fbundle::Series::var(f.t.vars(), f.t.order(), j / per_var, &syms)
                } else {
                    fbundle::Series::zero(f.t.vars(), f.t.order(), &syms)
                }
            })
            .collect();
        let renamed = m.subst_vars(&images).unwrap();
        assert_eq!(&renamed, f.t.mat(i), "direction {i}");
    }
}
