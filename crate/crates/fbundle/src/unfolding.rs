//! Construction of unfoldings from generating data, maximal unfoldings, and
//! the uniqueness isomorphism between two maximal unfoldings.
//!
//! The one-variable step builds the deformation matrix S(t, s) order by
//! order in s: at each order S_m is the unique element of the commutant of
//! {Tⁱ, U|_{u=0}} with prescribed value on the cyclic vector e₁ (a constant
//! linear system solved per t-monomial), and then
//! ∂_s Tⁱ = ∂_{tᵢ}S, ∂_s U = −S + u⁻¹[U, S] propagate the remaining data.

use std::sync::Arc;

use crate::connection::{
    best_complement, check_conditions, check_maximal, mu_v_matrix, Bundle, ConditionMode,
    ConditionReport,
};
use crate::connection::{FBundle, TStructure};
use crate::error::{Error, Result};
use crate::framing::{compute_framing, monomials_of_degree, Gauge};
use crate::matrix::ScalarMatrix;
use crate::scalar::Scalar;
use crate::series::{Series, SeriesMatrix, VarSet};

/// Maximality certificate: the (N | ∂f/∂s) matrix in good-basis
/// coordinates, its determinant, and any localization that would be needed.
#[derive(Clone, Debug)]
pub struct Certificate {
    pub matrix: ScalarMatrix,
    pub det: Scalar,
    pub localizations: Vec<Scalar>,
    pub maximal: bool,
}

/// An unfolding together with the data needed to compare it with others.
#[derive(Clone)]
pub struct UnfoldResult {
    /// The enlarged bundle in the original trivialization; restricting the
    /// added variables to zero recovers the input coefficientwise.
    pub bundle: Bundle,
    pub added_vars: Vec<String>,
    /// Fiber basis extending the cyclic vector (columns; first column = v).
    pub good_basis: ScalarMatrix,
    pub f_data: Vec<Series>,
    pub certificate: Certificate,
    pub conditions: ConditionReport,
    /// Framed bundle in good-basis coordinates (internal, for comparisons).
    pub(crate) framed: Bundle,
    /// The framed original in the same coordinates.
    pub(crate) original_framed: Bundle,
    pub(crate) cyclic: Vec<Scalar>,
}

/// The unique isomorphism intertwining two maximal unfoldings.
#[derive(Clone)]
pub struct UnfoldIso {
    /// Images of the second unfolding's variables as series in the first's.
    pub base_map: Vec<Series>,
    /// Bundle map in the induced good bases (the identity there).
    pub bundle_map: SeriesMatrix,
    pub direction: String,
}

fn fresh_var_names(existing: &Arc<VarSet>, count: usize) -> Vec<String> {
    let mut out = Vec::new();
    let mut k = 1usize;
    while out.len() < count {
        let cand = format!("s{k}");
        if existing.index_of(&cand).is_none() {
            out.push(cand);
        }
        k += 1;
    }
    out
}

/// Linear operator X ↦ [X, G] as an n²×n² scalar matrix (row-major X).
fn ad_matrix(g: &ScalarMatrix) -> ScalarMatrix {
    let n = g.rows();
    let syms = g.syms();
    ScalarMatrix::from_fn(syms, n * n, n * n, |row, col| {
        let (i, j) = (row / n, row % n);
        let (k, l) = (col / n, col % n);
        // (XG)_{ij} coefficient of X_{kl} is δ_{ik} G_{lj};
        // (GX)_{ij} coefficient is G_{ik} δ_{jl}.
        let mut v = Scalar::zero(syms);
        if i == k {
            v = v.add(&g[(l, j)]);
        }
        if j == l {
            v = v.sub(&g[(i, k)]);
        }
        v
    })
}

/// Solver for the per-monomial S-coefficient systems: the commutant
/// conditions against the residues plus the prescribed action on e₁.
struct DeformationSolver {
    sys: ScalarMatrix,
    n: usize,
}

impl DeformationSolver {
    fn new(gens: &[ScalarMatrix]) -> Self {
        let n = gens[0].rows();
        let syms = gens[0].syms();
        let mut rows: Vec<Scalar> = Vec::new();
        for g in gens {
            let ad = ad_matrix(g);
            for r in 0..n * n {
                for c in 0..n * n {
                    rows.push(ad[(r, c)].clone());
                }
            }
        }
        // Rows X_{i,0} = prescribed.
        for i in 0..n {
            for c in 0..n * n {
                rows.push(if c == i * n {
                    Scalar::one(syms)
                } else {
                    Scalar::zero(syms)
                });
            }
        }
        let sys = ScalarMatrix::new(gens.len() * n * n + n, n * n, rows).expect("shape");
        DeformationSolver { sys, n }
    }

    /// Solve for X given the stacked right-hand side (commutator targets per
    /// generator, then the e₁-column target).
    fn solve(&self, rhs: Vec<Scalar>) -> Result<ScalarMatrix> {
        let syms = self.sys.syms();
        let b = ScalarMatrix::new(rhs.len(), 1, rhs)?;
        let sol = self.sys.solve(&b).map_err(|e| match e {
            Error::NoSolution { rank, witness } => Error::GCFailed(format!(
                "deformation system inconsistent (rank {rank}, row {witness})"
            )),
            other => other,
        })?;
        if !sol.unique {
            return Err(Error::GCFailed(
                "deformation system is underdetermined; the chosen vector does not generate"
                    .into(),
            ));
        }
        Ok(ScalarMatrix::from_fn(syms, self.n, self.n, |i, j| {
            sol.x[(i * self.n + j, 0)].clone()
        }))
    }
}

/// One-variable unfolding step. The structure is framed, in coordinates
/// where e₁ is the generating vector; `g` prescribes S·e₁ = Σ gᵢ(t, s) eᵢ
/// (the vector of ∂f/∂s). Everything lives over the enlarged variable set
/// already; `s_idx` names the new variable. The u-direction, when present,
/// joins the commutant conditions and is propagated by
/// ∂_s U = −S + u⁻¹[U, S].
fn unfold_one_variable(
    t: &TStructure,
    u_mat: Option<&SeriesMatrix>,
    s_idx: usize,
    g_vec: &[Series],
) -> Result<(TStructure, Option<SeriesMatrix>)> {
    let syms = t.spec.symbols().clone();
    let vars = t.vars().clone();
    let order = t.order();
    let n = t.rank();
    let cap = order.t_cap;

    // Residue generators at t = s = 0 (constant coefficients of the system).
    let mut gens: Vec<ScalarMatrix> = t
        .mats()
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != s_idx)
        .map(|(_, m)| m.residue(&syms))
        .collect();
    if let Some(u) = u_mat {
        gens.push(u.residue(&syms));
    }
    let solver = DeformationSolver::new(&gens);

    let mut mats: Vec<SeriesMatrix> = t.mats().to_vec();
    let mut u = u_mat.cloned();
    let mut s_mat = SeriesMatrix::zero(&vars, order, n, &syms);

    let dir_indices: Vec<usize> = (0..vars.len()).filter(|&i| i != s_idx).collect();

    for m in 0..cap {
        // --- Solve for S_m(t), t-degree by t-degree. ---
        // Commutator targets: [S, Tⁱ] = 0 and [S, U|_{u=0}] = 0 read at
        // s-order m; the part involving S_m is moved to the left.
        let u0 = u.as_ref().map(|um| um.map(|e| e.u_coefficient(0)));
        let mut comm_rhs: Vec<SeriesMatrix> = Vec::new();
        for &i in &dir_indices {
            comm_rhs.push(s_mat.commutator(&mats[i])?.neg().var_coeff(s_idx, m));
        }
        if let Some(u0) = &u0 {
            comm_rhs.push(s_mat.commutator(u0)?.neg().var_coeff(s_idx, m));
        }
        let g_m: Vec<Series> = g_vec.iter().map(|gi| gi.var_coeff(s_idx, m)).collect();

        // The t⁰ parts of the generators at s-order 0 are constant; higher
        // t-orders of Tⁱ, U feed the right-hand side.
        let mut s_m = SeriesMatrix::zero(&vars, order, n, &syms);
        for d in 0..=cap.saturating_sub(m) {
            for kappa in monomials_of_degree(vars.len(), d) {
                if kappa[s_idx] != 0 {
                    continue;
                }
                let mut rhs: Vec<Scalar> = Vec::new();
                // Commutator blocks: target minus contributions from lower
                // t-orders of S_m against higher t-orders of the generator.
                for (bi, &i) in dir_indices.iter().enumerate() {
                    let ti_s0 = mats[i].var_coeff(s_idx, 0);
                    let corr = s_m.commutator(&ti_s0)?;
                    let want = comm_rhs[bi].mono_coeff(&kappa).residue(&syms);
                    let have = corr.mono_coeff(&kappa).residue(&syms);
                    let diff = want.sub(&have);
                    for r in 0..n {
                        for c in 0..n {
                            rhs.push(diff[(r, c)].clone());
                        }
                    }
                }
                if let Some(u0) = &u0 {
                    let u0_s0 = u0.var_coeff(s_idx, 0);
                    let corr = s_m.commutator(&u0_s0)?;
                    let want = comm_rhs.last().unwrap().mono_coeff(&kappa).residue(&syms);
                    let have = corr.mono_coeff(&kappa).residue(&syms);
                    let diff = want.sub(&have);
                    for r in 0..n {
                        for c in 0..n {
                            rhs.push(diff[(r, c)].clone());
                        }
                    }
                }
                // e₁ rows.
                let have_col: Vec<Scalar> =
                    (0..n).map(|r| s_m[(r, 0)].mono_coeff(&kappa).coeff_t0(0)).collect();
                for r in 0..n {
                    let want = g_m[r].mono_coeff(&kappa).coeff_t0(0);
                    rhs.push(want.sub(&have_col[r]));
                }
                let x = solver.solve(rhs)?;
                let xm = SeriesMatrix::from_scalar_matrix(&x, &vars, order)?;
                s_m.add_mono_times(&kappa, &xm)?;
            }
        }
        // Record S_m s^m into S.
        let mut sm_shift = vec![0u16; vars.len()];
        sm_shift[s_idx] = m as u16;
        s_mat.add_mono_times(&sm_shift, &s_m)?;

        // --- Propagate T and U to s-order m+1. ---
        let inv = Scalar::from_i64(&syms, (m + 1) as i64).inv().expect("m+1 > 0");
        let mut next_shift = vec![0u16; vars.len()];
        next_shift[s_idx] = (m + 1) as u16;
        for &i in &dir_indices {
            let ds = s_mat.diff_var(i).var_coeff(s_idx, m).mul_scalar(&inv);
            mats[i].add_mono_times(&next_shift, &ds)?;
        }
        // ∂_s U = −S + u⁻¹[U, S]; exactness of the division is the
        // commutation [S, U|_{u=0}] = 0 established above.
        if let Some(u) = u.as_mut() {
            let du_full = u.commutator(&s_mat)?.exact_div_u().map_err(|_| {
                Error::GCFailed("u-division failed in the U-propagation".into())
            })?;
            let du = du_full.sub(&s_mat).var_coeff(s_idx, m).mul_scalar(&inv);
            u.add_mono_times(&next_shift, &du)?;
        }
        // The new variable's own connection matrix is S itself.
        mats[s_idx] = s_mat.clone();
    }
    mats[s_idx] = s_mat;
    let t_new = TStructure::new(t.spec.clone(), vars, mats)?;
    Ok((t_new, u))
}

/// Construct the unfolding of a framed F-bundle prescribed by `f`
/// (one series per fiber dimension over the enlarged base, vanishing at
/// s = 0), with e₁ the generating vector. The added variables must already
/// be the trailing variables of `f`'s variable set.
pub fn unfold_with_f(b: &FBundle, added: &[String], f: &[Series]) -> Result<FBundle> {
    if b.lambda_euler {
        return Err(Error::LambdaEulerUnsupported(
            "unfold the R-linear structure instead".into(),
        ));
    }
    match unfold_bundle_with_f(&Bundle::F(b.clone()), added, f)? {
        Bundle::F(f) => Ok(f),
        Bundle::T(_) => unreachable!("F-bundle input keeps its u-direction"),
    }
}

/// Unfolding prescribed by `f` for either kind of bundle; a plain
/// (T)-structure runs the same induction without the u-direction equations.
pub fn unfold_bundle_with_f(b: &Bundle, added: &[String], f: &[Series]) -> Result<Bundle> {
    let t = b.tstructure();
    if let Some(dir) = t.unframed_direction() {
        return Err(Error::NotFramed(dir.to_string()));
    }
    let n = t.rank();
    if f.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "need {} prescription series, got {}",
            n,
            f.len()
        )));
    }
    let syms = t.spec.symbols().clone();
    let e1: Vec<Scalar> = (0..n)
        .map(|i| {
            if i == 0 {
                Scalar::one(&syms)
            } else {
                Scalar::zero(&syms)
            }
        })
        .collect();
    let mode = match b {
        Bundle::F(_) => ConditionMode::FBundle,
        Bundle::T(_) => ConditionMode::TStructure,
    };
    let rep = check_conditions(b, &e1, mode)?;
    if !rep.gc_prime {
        return Err(Error::GCFailed(
            "the generation condition fails over the fraction field".into(),
        ));
    }

    let big_vars = t.vars().extend(added);
    let order = t.order();
    let mut cur_t = TStructure::new(
        t.spec.clone(),
        big_vars.clone(),
        t.mats()
            .iter()
            .map(|m| m.embed(&big_vars, order))
            .chain(added.iter().map(|_| Ok(SeriesMatrix::zero(&big_vars, order, n, &syms))))
            .collect::<Result<Vec<_>>>()?,
    )?;
    let mut cur_u = match b {
        Bundle::F(fb) => Some(fb.u_mat.embed(&big_vars, order)?),
        Bundle::T(_) => None,
    };

    for (k, name) in added.iter().enumerate() {
        let s_idx = big_vars
            .index_of(name)
            .ok_or_else(|| Error::UnknownVariable(name.clone()))?;
        // Restriction of f to the not-yet-unfolded variables = 0, and check
        // f(s = 0) = 0 on the first pass.
        let mut g_vec: Vec<Series> = Vec::with_capacity(n);
        for fi in f {
            let mut fi_cur = fi.embed(&big_vars, order)?;
            for later in &added[k + 1..] {
                let idx = big_vars.index_of(later).unwrap();
                fi_cur = fi_cur.restrict_var(idx);
            }
            if k == 0 {
                let mut at_zero = fi_cur.clone();
                for a in added {
                    let idx = big_vars.index_of(a).unwrap();
                    at_zero = at_zero.restrict_var(idx);
                }
                if !at_zero.is_zero() {
                    return Err(Error::Invalid(
                        "prescription series must vanish when the added variables do".into(),
                    ));
                }
            }
            g_vec.push(fi_cur.diff_var(s_idx));
        }
        let (t_new, u_new) = unfold_one_variable(&cur_t, cur_u.as_ref(), s_idx, &g_vec)?;
        cur_t = t_new;
        cur_u = u_new;
    }
    Ok(match cur_u {
        Some(u) => Bundle::F(FBundle::new(cur_t, u)?),
        None => Bundle::T(cur_t),
    })
}

/// Greedy completion of `v` to an invertible fiber basis using standard
/// basis vectors.
fn good_fiber_basis(spec: &crate::symbols::ParamSpec, v: &[Scalar]) -> Result<ScalarMatrix> {
    let syms = spec.symbols();
    let n = v.len();
    let mut cols: Vec<Vec<Scalar>> = vec![v.to_vec()];
    for j in 0..n {
        if cols.len() == n {
            break;
        }
        let mut e = vec![Scalar::zero(syms); n];
        e[j] = Scalar::one(syms);
        let mut cand = cols.clone();
        cand.push(e.clone());
        if ScalarMatrix::from_columns(syms, &cand)?.rank() == cand.len() {
            cols.push(e);
        }
    }
    if cols.len() != n {
        return Err(Error::SingularFiberBasis);
    }
    let c = ScalarMatrix::from_columns(syms, &cols)?;
    if !c.det()?.is_unit(spec).unwrap_or(false) {
        // The completion uses standard vectors, so the determinant is ±(a
        // v-entry); localize the cyclic vector if this ever fires.
        return Err(Error::SingularFiberBasis);
    }
    Ok(c)
}

fn conjugate_bundle(b: &Bundle, c: &ScalarMatrix) -> Result<Bundle> {
    Ok(match b {
        Bundle::T(t) => Bundle::T(t.conjugate_constant(c)?),
        Bundle::F(f) => Bundle::F(conjugate_fbundle(f, c)?),
    })
}

fn conjugate_fbundle(b: &FBundle, c: &ScalarMatrix) -> Result<FBundle> {
    let t = b.t.conjugate_constant(c)?;
    let vars = t.vars().clone();
    let order = t.order();
    let cm = SeriesMatrix::from_scalar_matrix(c, &vars, order)?;
    let cim = SeriesMatrix::from_scalar_matrix(&c.inverse()?, &vars, order)?;
    let u = cim.mul(&b.u_mat)?.mul(&cm)?;
    Ok(FBundle::new(t, u)?.with_lambda_euler(b.lambda_euler))
}

/// Build a maximal unfolding with cyclic vector induced from `v`.
///
/// The input is framed, moved to a good basis extending `v`, lifted to an
/// F-bundle when needed (u-direction initial condition 0), unfolded with a
/// linear prescription read off a unit complement of the evaluation map,
/// and finally conjugated back so the restriction to the added variables
/// equals the input exactly.
pub fn maximal_unfold(b: &Bundle, v: &[Scalar]) -> Result<UnfoldResult> {
    maximal_unfold_with(b, v, None)
}

/// Like [`maximal_unfold`], but with an explicit complement choice: the
/// columns (in the original fiber coordinates) whose classes extend the
/// image of the evaluation map. The combined determinant must still be a
/// unit.
pub fn maximal_unfold_with(
    b: &Bundle,
    v: &[Scalar],
    complement: Option<&[Vec<Scalar>]>,
) -> Result<UnfoldResult> {
    let was_tstructure = matches!(b, Bundle::T(_));
    let t_orig = b.tstructure();
    let spec = t_orig.spec.clone();
    let syms = spec.symbols().clone();
    let n = t_orig.rank();
    let d = t_orig.n_vars();
    if v.len() != n {
        return Err(Error::DimensionMismatch("cyclic vector length".into()));
    }
    if d > n {
        return Err(Error::ConditionsNotMet(format!(
            "{d} directions exceed the rank {n}; the evaluation map cannot be injective"
        )));
    }
    if let Bundle::F(f) = b {
        if f.lambda_euler {
            return Err(Error::LambdaEulerUnsupported(
                "maximal_unfold expects an R-linear u-direction".into(),
            ));
        }
    }

    // Frame and change to the good basis extending v. A (T)-structure stays
    // a (T)-structure: the construction needs no u-direction (the commutant
    // conditions against the base residues already pin the deformation).
    let (gauge, framed_t) = compute_framing(t_orig)?;
    let framed_bundle = match b {
        Bundle::F(f) => {
            let u_framed = gauge.apply_u(&f.u_mat)?.truncate(framed_t.order())?;
            Bundle::F(FBundle::new(framed_t.clone(), u_framed)?)
        }
        Bundle::T(_) => Bundle::T(framed_t.clone()),
    };
    let c = good_fiber_basis(&spec, v)?;
    let b_c = conjugate_bundle(&framed_bundle, &c)?;

    let e1: Vec<Scalar> = (0..n)
        .map(|i| {
            if i == 0 {
                Scalar::one(&syms)
            } else {
                Scalar::zero(&syms)
            }
        })
        .collect();
    let mode = if was_tstructure {
        ConditionMode::TStructure
    } else {
        ConditionMode::FBundle
    };
    let rep = check_conditions(&b_c, &e1, mode)?;
    if !(rep.ic && rep.gc) {
        return Err(Error::ConditionsNotMet(
            serde_json::to_string(&rep.to_json()).unwrap_or_default(),
        ));
    }

    // Already maximal: nothing to add.
    if d == n {
        let max = check_maximal(b, v)?;
        if max.maximal {
            let cert_matrix = mu_v_matrix(&b_c, &e1)?;
            let det = cert_matrix.det()?;
            return Ok(UnfoldResult {
                bundle: b.clone(),
                added_vars: vec![],
                good_basis: c,
                f_data: vec![],
                certificate: Certificate {
                    matrix: cert_matrix,
                    det: det.clone(),
                    localizations: vec![],
                    maximal: true,
                },
                conditions: rep,
                framed: b_c.clone(),
                original_framed: b_c,
                cyclic: v.to_vec(),
            });
        }
    }

    // Complement selection in good-basis coordinates.
    let base_cols: Vec<Vec<Scalar>> = (0..d).map(|j| rep.mu_matrix.column(j)).collect();
    let (complement_cols, cert_matrix, det) = match complement {
        None => {
            let Some((chosen, cert_matrix, det)) =
                best_complement(&spec, &base_cols, &rep.orbit_basis, n)?
            else {
                return Err(Error::NoUnitComplement {
                    best: "no full-rank complement in the orbit".into(),
                });
            };
            let cols: Vec<Vec<Scalar>> = chosen
                .iter()
                .map(|&i| rep.orbit_basis[i].clone())
                .collect();
            (cols, cert_matrix, det)
        }
        Some(cols_orig) => {
            if cols_orig.len() != n - d {
                return Err(Error::DimensionMismatch(format!(
                    "need {} complement vectors, got {}",
                    n - d,
                    cols_orig.len()
                )));
            }
            // Convert to good-basis coordinates.
            let c_inv = c.inverse()?;
            let cols: Vec<Vec<Scalar>> = cols_orig.iter().map(|w| c_inv.mul_vec(w)).collect();
            let mut all = base_cols.clone();
            all.extend(cols.iter().cloned());
            let cert_matrix = ScalarMatrix::from_columns(&syms, &all)?;
            let det = cert_matrix.det()?;
            (cols, cert_matrix, det)
        }
    };
    if !det.is_unit(&spec).unwrap_or(false) {
        return Err(Error::NoUnitComplement {
            best: crate::parse::scalar_to_string(&Scalar::from_poly(det.non_unit_part(&spec))),
        });
    }

    // Linear prescription f_i = Σ_k c_{ik} s_k from the chosen complement.
    let added = fresh_var_names(t_orig.vars(), n - d);
    let big_vars = t_orig.vars().extend(&added);
    let order = t_orig.order();
    let mut f_data: Vec<Series> = (0..n)
        .map(|_| Series::zero(&big_vars, order, &syms))
        .collect();
    for (k, col) in complement_cols.iter().enumerate() {
        let s_idx = big_vars.index_of(&added[k]).unwrap();
        let s_series = Series::var(&big_vars, order, s_idx, &syms);
        for (i, fi) in f_data.iter_mut().enumerate() {
            *fi = fi.add(&s_series.mul_scalar(&col[i]));
        }
    }

    let unfolded_c = unfold_bundle_with_f(&b_c, &added, &f_data)?;

    // Back to the original trivialization: undo the constant basis change,
    // then the framing gauge (both extended trivially over s).
    let c_inv = c.inverse()?;
    let unfolded_framed = conjugate_bundle(&unfolded_c, &c_inv)?;
    let out_order = unfolded_framed.tstructure().order();
    let back = Gauge {
        p: gauge.p_inv.embed(&big_vars, out_order)?,
        p_inv: gauge.p.embed(&big_vars, out_order)?,
    };
    let out_mats: Vec<SeriesMatrix> = (0..big_vars.len())
        .map(|i| {
            back.apply_t(unfolded_framed.tstructure().mat(i), i)?
                .truncate(order)
        })
        .collect::<Result<_>>()?;
    let out_t = TStructure::new(spec.clone(), big_vars, out_mats)?;
    let out_bundle = match &unfolded_framed {
        Bundle::F(f) => {
            let out_u = back.apply_u(&f.u_mat)?.truncate(order)?;
            Bundle::F(FBundle::new(out_t, out_u)?)
        }
        Bundle::T(_) => Bundle::T(out_t),
    };

    // The report the result carries is taken at the enlarged base.
    let out_conditions = check_conditions(&out_bundle, v, mode)?;
    Ok(UnfoldResult {
        bundle: out_bundle,
        added_vars: added,
        good_basis: c,
        f_data,
        certificate: Certificate {
            matrix: cert_matrix,
            det,
            localizations: vec![],
            maximal: true,
        },
        conditions: out_conditions,
        framed: unfolded_c,
        original_framed: b_c,
        cyclic: v.to_vec(),
    })
}

/// Treat an already-built enlarged bundle as an unfolding of `original`:
/// recompute the framed internals and the maximality certificate, so it can
/// participate in [`compare_unfoldings`]. The enlarged bundle must restrict
/// to the original when the added variables vanish.
pub fn promote_unfolding(
    bundle: &Bundle,
    original: &Bundle,
    added_vars: Vec<String>,
    good_basis: &ScalarMatrix,
    f_data: Vec<Series>,
    cyclic: &[Scalar],
) -> Result<UnfoldResult> {
    let spec = bundle.tstructure().spec.clone();
    let syms = spec.symbols().clone();
    let n = bundle.rank();
    let to_framed = |b: &Bundle| -> Result<Bundle> {
        let (gauge, framed_t) = compute_framing(b.tstructure())?;
        let fb = match b {
            Bundle::F(f) => Bundle::F(FBundle::new(
                framed_t.clone(),
                gauge.apply_u(&f.u_mat)?.truncate(framed_t.order())?,
            )?),
            Bundle::T(_) => Bundle::T(framed_t),
        };
        conjugate_bundle(&fb, good_basis)
    };
    let framed = to_framed(bundle)?;
    let original_framed = to_framed(original)?;
    let e1: Vec<Scalar> = (0..n)
        .map(|i| {
            if i == 0 {
                Scalar::one(&syms)
            } else {
                Scalar::zero(&syms)
            }
        })
        .collect();
    let mode = match original {
        Bundle::F(_) => ConditionMode::FBundle,
        Bundle::T(_) => ConditionMode::TStructure,
    };
    let conditions = check_conditions(&framed, &e1, mode)?;
    let cert_matrix = mu_v_matrix(&framed, &e1)?;
    if cert_matrix.cols() != n {
        return Err(Error::DimensionMismatch(
            "promoted bundle is not maximal-sized".into(),
        ));
    }
    let det = cert_matrix.det()?;
    let maximal = det.is_unit(&spec).unwrap_or(false);
    Ok(UnfoldResult {
        bundle: bundle.clone(),
        added_vars,
        good_basis: good_basis.clone(),
        f_data,
        certificate: Certificate {
            matrix: cert_matrix,
            det,
            localizations: vec![],
            maximal,
        },
        conditions,
        framed,
        original_framed,
        cyclic: cyclic.to_vec(),
    })
}

/// Matrix potential A with dA = Σᵢ Tⁱ dtᵢ and A(0) = 0 (the 1-form is
/// closed for a flat framed structure).
pub(crate) fn matrix_potential(mats: &[SeriesMatrix]) -> Result<SeriesMatrix> {
    let vars = mats[0].vars().clone();
    let order = mats[0].order();
    let n = mats[0].size();
    let nv = vars.len();
    let syms = mats[0].syms().clone();
    let mut a = SeriesMatrix::zero(&vars, order, n, &syms);
    for deg in 1..=order.t_cap {
        for beta in monomials_of_degree(nv, deg) {
            let mut part = SeriesMatrix::zero(&vars, order, n, &syms);
            for i in 0..nv {
                if beta[i] == 0 {
                    continue;
                }
                let mut gamma = beta.clone();
                gamma[i] -= 1;
                part = part.add(&mats[i].mono_coeff(&gamma));
            }
            let inv = Scalar::from_i64(&syms, deg as i64).inv().expect("deg > 0");
            a.add_mono_times(&beta, &part.mul_scalar(&inv))?;
        }
    }
    // Exactness check: dA must reproduce the input 1-form.
    for (i, mat) in mats.iter().enumerate() {
        let lhs = a.diff_var(i);
        let rhs = mat.truncate(lhs.order())?;
        if lhs != rhs {
            return Err(Error::Invalid(
                "connection 1-form is not closed; structure is not flat".into(),
            ));
        }
    }
    Ok(a)
}

/// Invert a formal coordinate map ψ (one series per variable, ψ(0) = 0,
/// Jacobian at 0 invertible): returns φ with ψ∘φ = φ∘ψ = id at order.
pub(crate) fn invert_map(psi: &[Series], spec: &crate::symbols::ParamSpec) -> Result<Vec<Series>> {
    let vars = psi[0].vars().clone();
    let order = psi[0].order();
    let nv = vars.len();
    if psi.len() != nv {
        return Err(Error::DimensionMismatch("coordinate map arity".into()));
    }
    let syms = spec.symbols();
    let jac = ScalarMatrix::from_fn(syms, nv, nv, |i, j| {
        let mut e = vec![0u16; nv];
        e[j] = 1;
        psi[i].coeff(&e, 0)
    });
    let jinv = jac.inverse().map_err(|_| {
        Error::NotComparable("base map has singular Jacobian at the origin".into())
    })?;
    let x: Vec<Series> = (0..nv).map(|i| Series::var(&vars, order, i, syms)).collect();
    let apply_jinv = |v: &[Series]| -> Vec<Series> {
        (0..nv)
            .map(|i| {
                let mut acc = Series::zero(&vars, order, syms);
                for (j, vj) in v.iter().enumerate() {
                    acc = acc.add(&vj.mul_scalar(&jinv[(i, j)]));
                }
                acc
            })
            .collect()
    };
    let mut phi = apply_jinv(&x);
    for _ in 0..order.t_cap {
        // φ ← φ + J⁻¹(x − ψ(φ)), gaining one degree of accuracy per pass.
        let psi_phi: Vec<Series> = psi
            .iter()
            .map(|p| p.subst_vars(&phi))
            .collect::<Result<_>>()?;
        let err: Vec<Series> = (0..nv).map(|i| x[i].sub(&psi_phi[i])).collect();
        if err.iter().all(|e| e.is_zero()) {
            break;
        }
        let corr = apply_jinv(&err);
        phi = (0..nv).map(|i| phi[i].add(&corr[i])).collect();
    }
    for (i, p) in psi.iter().enumerate() {
        if p.subst_vars(&phi)? != x[i] {
            return Err(Error::NotComparable("coordinate map is not invertible".into()));
        }
    }
    Ok(phi)
}

/// Decide whether two maximal unfoldings of the same bundle with the same
/// induced good basis are isomorphic, and construct the isomorphism.
pub fn compare_unfoldings(u1: &UnfoldResult, u2: &UnfoldResult) -> Result<UnfoldIso> {
    let spec = &u1.framed.tstructure().spec;
    let syms = spec.symbols().clone();
    if u1.cyclic != u2.cyclic {
        return Err(Error::NotComparable(
            "cyclic vectors are induced from different fiber vectors".into(),
        ));
    }
    if u1.good_basis != u2.good_basis {
        return Err(Error::NotComparable("different upstream good bases".into()));
    }
    if !(u1.certificate.maximal && u2.certificate.maximal) {
        return Err(Error::NotComparable("both unfoldings must be maximal".into()));
    }
    // Same original bundle, compared in the shared framed coordinates.
    let same_t = u1
        .original_framed
        .tstructure()
        .mats()
        .iter()
        .zip(u2.original_framed.tstructure().mats())
        .all(|(a, b)| a == b);
    let same_u = match (&u1.original_framed, &u2.original_framed) {
        (Bundle::F(f1), Bundle::F(f2)) => f1.u_mat == f2.u_mat,
        (Bundle::T(_), Bundle::T(_)) => true,
        _ => false,
    };
    if !(same_t && same_u) {
        return Err(Error::NotComparable("different original bundles".into()));
    }

    let a1 = matrix_potential(u1.framed.tstructure().mats())?;
    let a2 = matrix_potential(u2.framed.tstructure().mats())?;
    let n = a1.size();
    let nv = u1.framed.tstructure().vars().len();
    let vars2 = u2.framed.tstructure().vars().clone();
    if vars2.len() != nv {
        return Err(Error::NotComparable("different base dimensions".into()));
    }
    let psi1: Vec<Series> = (0..nv).map(|i| a1[(i, 0)].clone()).collect();
    let psi2: Vec<Series> = (0..nv).map(|i| a2[(i, 0)].clone()).collect();
    let phi2 = invert_map(&psi2, spec)?;
    let base_map: Vec<Series> = phi2
        .iter()
        .map(|c| c.subst_vars(&psi1))
        .collect::<Result<_>>()?;

    // Verify the intertwining: A₂∘f = A₁ and U₂∘f = U₁ (bundle map = Id in
    // the induced good bases).
    let a2_pulled = a2.subst_vars(&base_map)?;
    if a2_pulled != a1 {
        return Err(Error::NotComparable(
            "pulled-back potential disagrees; unfoldings are not isomorphic over this base map"
                .into(),
        ));
    }
    if let (Bundle::F(f1), Bundle::F(f2)) = (&u1.framed, &u2.framed) {
        let u2_pulled = f2.u_mat.subst_vars(&base_map)?;
        if u2_pulled != f1.u_mat {
            return Err(Error::NotComparable(
                "u-directions disagree after pullback".into(),
            ));
        }
    }
    // Coefficients of the base map must lie in the (localized) ring.
    for s in &base_map {
        for (_, c) in s.terms() {
            if !c.in_ring(spec) {
                return Err(Error::Invalid(format!(
                    "base map coefficient {c:?} escapes the coefficient ring"
                )));
            }
        }
    }
    Ok(UnfoldIso {
        base_map,
        bundle_map: SeriesMatrix::identity(
            u1.framed.tstructure().vars(),
            u1.framed.tstructure().order(),
            n,
            &syms,
        ),
        direction: "first-to-second".into(),
    })
}
