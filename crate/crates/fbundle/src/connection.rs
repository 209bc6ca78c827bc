//! (T)-structure and F-bundle data types, flatness verification, residue
//! extraction, and the injectivity/generation/maximality condition checkers.

use std::sync::Arc;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::matrix::ScalarMatrix;
use crate::parse::{scalar_to_string, series_to_string};
use crate::scalar::Scalar;
use crate::series::{Series, SeriesMatrix, TruncOrder, VarSet};
use crate::symbols::ParamSpec;

/// Connection data in the base directions: ∇_{∂tᵢ} = ∂tᵢ + u⁻¹Aᵢ with one
/// matrix per variable, all sharing rank and truncation order.
#[derive(Clone)]
pub struct TStructure {
    pub spec: ParamSpec,
    vars: Arc<VarSet>,
    rank: usize,
    mats: Vec<SeriesMatrix>,
}

impl TStructure {
    pub fn new(spec: ParamSpec, vars: Arc<VarSet>, mats: Vec<SeriesMatrix>) -> Result<Self> {
        if mats.len() != vars.len() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} connection matrices, got {}",
                vars.len(),
                mats.len()
            )));
        }
        let rank = mats.first().map(|m| m.size()).unwrap_or(0);
        if mats.iter().any(|m| m.size() != rank) {
            return Err(Error::DimensionMismatch("unequal matrix ranks".into()));
        }
        Ok(TStructure {
            spec,
            vars,
            rank,
            mats,
        })
    }

    pub fn vars(&self) -> &Arc<VarSet> {
        &self.vars
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn mats(&self) -> &[SeriesMatrix] {
        &self.mats
    }

    pub fn mat(&self, i: usize) -> &SeriesMatrix {
        &self.mats[i]
    }

    pub fn order(&self) -> TruncOrder {
        self.mats
            .first()
            .map(|m| m.order())
            .unwrap_or(TruncOrder::new(0, -2, 0))
    }

    pub fn n_vars(&self) -> usize {
        self.vars.len()
    }

    /// True when every matrix is independent of u.
    pub fn is_framed(&self) -> bool {
        self.mats.iter().all(|m| m.is_u_free())
    }

    /// First u-dependent direction, if any.
    pub fn unframed_direction(&self) -> Option<&str> {
        self.mats
            .iter()
            .position(|m| !m.is_u_free())
            .map(|i| self.vars.name(i))
    }

    /// Conjugate every matrix by a constant invertible matrix:
    /// Aᵢ ↦ C⁻¹AᵢC.
    pub fn conjugate_constant(&self, c: &ScalarMatrix) -> Result<TStructure> {
        let cinv = c.inverse()?;
        let vars = self.vars.clone();
        let order = self.order();
        let cm = SeriesMatrix::from_scalar_matrix(c, &vars, order)?;
        let cim = SeriesMatrix::from_scalar_matrix(&cinv, &vars, order)?;
        let mats = self
            .mats
            .iter()
            .map(|a| cim.mul(a)?.mul(&cm))
            .collect::<Result<Vec<_>>>()?;
        TStructure::new(self.spec.clone(), vars, mats)
    }

    /// Residues μᵢ = Aᵢ(t=0, u=0).
    pub fn residues(&self) -> Vec<ScalarMatrix> {
        let syms = self.spec.symbols();
        self.mats.iter().map(|m| m.residue(syms)).collect()
    }
}

/// An F-bundle: a (T)-structure plus ∇_{∂u} = ∂u + u⁻²U.
///
/// When `lambda_euler` is set, the u-direction additionally carries the
/// equivariant-parameter Euler operator at the u⁻¹ level
/// (∇_{∂u} = ∂u + u⁻¹Σλᵢ∂_{λᵢ} + u⁻²U); the flatness equations then pick up
/// a λ∂λ(Aᵢ) term. This is how the grading-induced u-direction of the
/// equivariant quantum-cohomology models is represented with matrix data.
#[derive(Clone)]
pub struct FBundle {
    pub t: TStructure,
    pub u_mat: SeriesMatrix,
    pub lambda_euler: bool,
}

impl FBundle {
    pub fn new(t: TStructure, u_mat: SeriesMatrix) -> Result<Self> {
        if u_mat.size() != t.rank() {
            return Err(Error::DimensionMismatch(
                "u-direction matrix rank mismatch".into(),
            ));
        }
        Ok(FBundle {
            t,
            u_mat,
            lambda_euler: false,
        })
    }

    pub fn with_lambda_euler(mut self, on: bool) -> Self {
        self.lambda_euler = on;
        self
    }

    pub fn rank(&self) -> usize {
        self.t.rank()
    }

    pub fn vars(&self) -> &Arc<VarSet> {
        self.t.vars()
    }

    /// (μᵢ residues, K = U(t=0, u=0)).
    pub fn residues(&self) -> (Vec<ScalarMatrix>, ScalarMatrix) {
        let syms = self.t.spec.symbols();
        (self.t.residues(), self.u_mat.residue(syms))
    }
}

/// Either kind of bundle, for the operations that accept both.
#[derive(Clone)]
pub enum Bundle {
    T(TStructure),
    F(FBundle),
}

impl From<TStructure> for Bundle {
    fn from(t: TStructure) -> Self {
        Bundle::T(t)
    }
}

impl From<FBundle> for Bundle {
    fn from(f: FBundle) -> Self {
        Bundle::F(f)
    }
}

impl Bundle {
    pub fn tstructure(&self) -> &TStructure {
        match self {
            Bundle::T(t) => t,
            Bundle::F(f) => &f.t,
        }
    }

    pub fn rank(&self) -> usize {
        self.tstructure().rank()
    }
}

// ---------------------------------------------------------------------------
// Flatness
// ---------------------------------------------------------------------------

/// Location and value of the first nonzero flatness residual.
#[derive(Clone, Debug)]
pub struct ResidualInfo {
    /// "t-t" for a base-direction pair, "u-t" for the u-direction check.
    pub kind: String,
    pub directions: (String, String),
    pub entry: (usize, usize),
    pub value: Series,
}

#[derive(Clone, Debug)]
pub struct FlatnessReport {
    pub flat: bool,
    pub residual: Option<ResidualInfo>,
}

impl FlatnessReport {
    pub fn to_json(&self) -> Value {
        match &self.residual {
            None => json!({ "flat": self.flat }),
            Some(r) => json!({
                "flat": self.flat,
                "residual": {
                    "kind": r.kind,
                    "directions": [r.directions.0, r.directions.1],
                    "entry": [r.entry.0, r.entry.1],
                    "value": series_to_string(&r.value),
                }
            }),
        }
    }
}

fn first_nonzero(m: &SeriesMatrix) -> Option<(usize, usize)> {
    let n = m.size();
    (0..n * n)
        .map(|k| (k / n, k % n))
        .find(|&(i, j)| !m[(i, j)].is_zero())
}

/// Pairwise base-direction residual u(∂ᵢAⱼ − ∂ⱼAᵢ) + [Aᵢ, Aⱼ], collected per
/// u-power; identically zero iff the (T)-structure is flat to order.
fn t_pair_residual(t: &TStructure, i: usize, j: usize) -> Result<SeriesMatrix> {
    let wide = t.order().with_u_max(t.order().u_max + 2);
    let ai = t.mat(i).truncate(wide)?;
    let aj = t.mat(j).truncate(wide)?;
    let d = aj.diff_var(i).sub(&ai.diff_var(j)).mul_u_power(1)?;
    Ok(d.add(&ai.commutator(&aj)?))
}

/// u-direction residual u(∂ᵢU + Aᵢ − u∂ᵤAᵢ − [λ∂λAᵢ]) + [Aᵢ, U].
fn u_dir_residual(f: &FBundle, i: usize) -> Result<SeriesMatrix> {
    let wide = f.t.order().with_u_max(f.t.order().u_max + 3);
    let ai = f.t.mat(i).truncate(wide)?;
    let u = f.u_mat.truncate(wide)?;
    let mut inner = u.diff_var(i).add(&ai).sub(&ai.diff_u()?.mul_u_power(1)?);
    if f.lambda_euler {
        inner = inner.sub(&ai.lambda_euler(&f.t.spec));
    }
    Ok(inner.mul_u_power(1)?.add(&ai.commutator(&u)?))
}

pub fn check_flatness(b: &Bundle) -> Result<FlatnessReport> {
    let t = b.tstructure();
    for i in 0..t.n_vars() {
        for j in i + 1..t.n_vars() {
            let r = t_pair_residual(t, i, j)?;
            if let Some(entry) = first_nonzero(&r) {
                return Ok(FlatnessReport {
                    flat: false,
                    residual: Some(ResidualInfo {
                        kind: "t-t".into(),
                        directions: (t.vars().name(i).into(), t.vars().name(j).into()),
                        entry,
                        value: r[entry].clone(),
                    }),
                });
            }
        }
    }
    if let Bundle::F(f) = b {
        for i in 0..t.n_vars() {
            let r = u_dir_residual(f, i)?;
            if let Some(entry) = first_nonzero(&r) {
                return Ok(FlatnessReport {
                    flat: false,
                    residual: Some(ResidualInfo {
                        kind: "u-t".into(),
                        directions: ("u".into(), t.vars().name(i).into()),
                        entry,
                        value: r[entry].clone(),
                    }),
                });
            }
        }
    }
    Ok(FlatnessReport {
        flat: true,
        residual: None,
    })
}

// ---------------------------------------------------------------------------
// Evaluation maps and conditions
// ---------------------------------------------------------------------------

/// Columns μᵢ·v in the fiber basis; dimensions n × (#vars).
pub fn mu_v_matrix(b: &Bundle, v: &[Scalar]) -> Result<ScalarMatrix> {
    let t = b.tstructure();
    if v.len() != t.rank() {
        return Err(Error::DimensionMismatch(format!(
            "fiber vector length {} vs rank {}",
            v.len(),
            t.rank()
        )));
    }
    let syms = t.spec.symbols();
    let cols: Vec<Vec<Scalar>> = t.residues().iter().map(|m| m.mul_vec(v)).collect();
    ScalarMatrix::from_columns(syms, &cols)
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ConditionMode {
    TStructure,
    FBundle,
}

/// Report of the injectivity/generation checks for a fiber vector.
#[derive(Clone, Debug)]
pub struct ConditionReport {
    pub ic: bool,
    pub gc: bool,
    pub gc_prime: bool,
    /// `Some(true)` when a unit complement certifies a free cokernel;
    /// `None` means undecided.
    pub coker_free: Option<bool>,
    pub mu_matrix: ScalarMatrix,
    pub orbit_basis: Vec<Vec<Scalar>>,
    pub needed_localizations: Vec<Scalar>,
    /// Best determinant over n-element orbit subsets (the (GC) certificate).
    pub best_orbit_det: Option<Scalar>,
}

impl ConditionReport {
    pub fn to_json(&self) -> Value {
        let grid = |m: &ScalarMatrix| -> Value {
            Value::Array(
                (0..m.rows())
                    .map(|i| {
                        Value::Array(
                            (0..m.cols())
                                .map(|j| Value::String(scalar_to_string(&m[(i, j)])))
                                .collect(),
                        )
                    })
                    .collect(),
            )
        };
        json!({
            "ic": self.ic,
            "gc": self.gc,
            "gc_prime": self.gc_prime,
            "coker_free": match self.coker_free {
                Some(b) => json!(b),
                None => json!("unknown"),
            },
            "mu_matrix": grid(&self.mu_matrix),
            "orbit_basis": self.orbit_basis.iter().map(|v| {
                Value::Array(v.iter().map(|s| Value::String(scalar_to_string(s))).collect())
            }).collect::<Vec<_>>(),
            "needed_localizations": self.needed_localizations.iter()
                .map(|s| Value::String(scalar_to_string(s))).collect::<Vec<_>>(),
            "best_orbit_det": self.best_orbit_det.as_ref().map(scalar_to_string),
        })
    }
}

/// Orbit of `v` under the unital algebra generated by `gens`, as a list of
/// vectors (words of length ≤ rank, then one extra round to confirm
/// stabilization of the spanned subspace).
pub fn orbit_vectors(
    syms: &Arc<crate::symbols::SymbolSet>,
    gens: &[ScalarMatrix],
    v: &[Scalar],
    rank: usize,
) -> Result<Vec<Vec<Scalar>>> {
    let mut vecs: Vec<Vec<Scalar>> = vec![v.to_vec()];
    let mut frontier: Vec<Vec<Scalar>> = vec![v.to_vec()];
    let cap_total = 64usize;
    for round in 0..=rank {
        let mut next = Vec::new();
        for w in &frontier {
            for g in gens {
                let gw = g.mul_vec(w);
                if gw.iter().all(|s| s.is_zero()) {
                    continue;
                }
                if vecs.iter().chain(next.iter()).any(|x| x == &gw) {
                    continue;
                }
                next.push(gw);
                if vecs.len() + next.len() >= cap_total {
                    break;
                }
            }
        }
        if round == rank {
            // Words of length ≤ rank span the whole orbit over the fraction
            // field; one extra round must not grow the span.
            let before = span_rank(syms, &vecs);
            let mut all = vecs.clone();
            all.extend(next);
            let after = span_rank(syms, &all);
            assert_eq!(
                before, after,
                "orbit span must stabilize within word length = rank"
            );
            break;
        }
        vecs.extend(next.clone());
        frontier = next;
        if frontier.is_empty() {
            break;
        }
    }
    Ok(vecs)
}

fn span_rank(syms: &Arc<crate::symbols::SymbolSet>, vecs: &[Vec<Scalar>]) -> usize {
    if vecs.is_empty() {
        return 0;
    }
    ScalarMatrix::from_columns(syms, vecs).map(|m| m.rank()).unwrap_or(0)
}

/// Preference for determinant candidates: units first, then nonzero with
/// structurally small non-unit part.
fn det_quality(det: &Scalar, spec: &ParamSpec) -> (u8, u32, usize) {
    if det.is_zero() {
        return (3, u32::MAX, usize::MAX);
    }
    match det.is_unit(spec) {
        Ok(true) => (0, 0, 0),
        _ => {
            let nu = det.non_unit_part(spec);
            (1, nu.total_degree(), nu.num_terms())
        }
    }
}

/// Greedy search for `need` complement vectors among `pool` extending the
/// columns of `base` to an n×n matrix, preferring unit determinants.
/// Returns (chosen indices, full matrix, determinant) of the best candidate.
pub fn best_complement(
    spec: &ParamSpec,
    base_cols: &[Vec<Scalar>],
    pool: &[Vec<Scalar>],
    n: usize,
) -> Result<Option<(Vec<usize>, ScalarMatrix, Scalar)>> {
    let syms = spec.symbols();
    let need = n - base_cols.len();
    if need == 0 {
        let m = ScalarMatrix::from_columns(syms, base_cols)?;
        let det = m.det()?;
        return Ok(Some((vec![], m, det)));
    }
    type Candidate = (Vec<usize>, ScalarMatrix, Scalar, (u8, u32, usize));
    let idxs: Vec<usize> = (0..pool.len()).collect();
    let mut best: Option<Candidate> = None;
    // Enumerate subsets in lexicographic order over the (short-word-first)
    // pool; determinism comes from the fixed pool order.
    let mut stack: Vec<(Vec<usize>, usize)> = vec![(vec![], 0)];
    while let Some((chosen, start)) = stack.pop() {
        if chosen.len() == need {
            let mut cols = base_cols.to_vec();
            for &i in &chosen {
                cols.push(pool[i].clone());
            }
            let m = ScalarMatrix::from_columns(syms, &cols)?;
            let det = m.det()?;
            if det.is_zero() {
                continue;
            }
            let q = det_quality(&det, spec);
            let better = match &best {
                None => true,
                Some((.., bq)) => q < *bq,
            };
            if better {
                let is_best_possible = q.0 == 0;
                best = Some((chosen.clone(), m, det, q));
                if is_best_possible {
                    break;
                }
            }
            continue;
        }
        // Push in reverse so the stack explores lexicographically.
        for &i in idxs[start..].iter().rev() {
            let mut c = chosen.clone();
            c.push(i);
            stack.push((c, i + 1));
        }
    }
    Ok(best.map(|(c, m, d, _)| (c, m, d)))
}

/// Check (IC), (GC'), (GC) and cokernel freeness for a fiber vector.
pub fn check_conditions(b: &Bundle, v: &[Scalar], mode: ConditionMode) -> Result<ConditionReport> {
    let t = b.tstructure();
    let spec = &t.spec;
    let syms = spec.symbols();
    let n = t.rank();
    let mu = mu_v_matrix(b, v)?;
    let d = t.n_vars();
    let ic = mu.rank() == d;

    let mut gens = t.residues();
    if let (ConditionMode::FBundle, Bundle::F(f)) = (mode, b) {
        gens.push(f.u_mat.residue(syms));
    }
    let orbit = orbit_vectors(syms, &gens, v, n)?;
    let gc_prime = span_rank(syms, &orbit) == n;

    // (GC): a unit n×n minor among orbit vectors.
    let mut gc = false;
    let mut best_det = None;
    let mut needed = Vec::new();
    if gc_prime {
        if let Some((_, _, det)) = best_complement(spec, &[], &orbit, n)? {
            gc = det.is_unit(spec).unwrap_or(false);
            if !gc {
                let nu = det.non_unit_part(spec);
                if !nu.is_constant() {
                    needed.push(Scalar::from_poly(nu));
                }
            }
            best_det = Some(det);
        }
    }

    // Cokernel freeness: unit complement of the μ_v columns.
    let mut coker_free = None;
    if ic && gc_prime {
        let base: Vec<Vec<Scalar>> = (0..d).map(|j| mu.column(j)).collect();
        if let Some((_, _, det)) = best_complement(spec, &base, &orbit, n)? {
            if det.is_unit(spec).unwrap_or(false) {
                coker_free = Some(true);
            } else {
                let nu = det.non_unit_part(spec);
                if !nu.is_constant() && needed.is_empty() {
                    needed.push(Scalar::from_poly(nu));
                }
            }
        }
    }

    debug_assert!(!gc || gc_prime, "(GC) must imply (GC')");
    Ok(ConditionReport {
        ic,
        gc,
        gc_prime,
        coker_free,
        mu_matrix: mu,
        orbit_basis: orbit,
        needed_localizations: needed,
        best_orbit_det: best_det,
    })
}

/// Maximality: #vars = rank and det μ_v is a unit.
#[derive(Clone, Debug)]
pub struct MaximalReport {
    pub maximal: bool,
    pub certificate: Scalar,
}

pub fn check_maximal(b: &Bundle, v: &[Scalar]) -> Result<MaximalReport> {
    let t = b.tstructure();
    let mu = mu_v_matrix(b, v)?;
    if t.n_vars() != t.rank() {
        return Ok(MaximalReport {
            maximal: false,
            certificate: Scalar::zero(t.spec.symbols()),
        });
    }
    let det = mu.det()?;
    let maximal = det.is_unit(&t.spec).unwrap_or(false);
    Ok(MaximalReport {
        maximal,
        certificate: det,
    })
}

// ---------------------------------------------------------------------------
// Gradings
// ---------------------------------------------------------------------------

/// The grading operator Gr = u∂u + E + μ̄ (+ Σλᵢ∂λᵢ), with the Euler field
/// E = Σᵢ (cᵢ + wᵢ tᵢ)∂_{tᵢ} described by per-variable constants and weights.
#[derive(Clone, Debug)]
pub struct Grading {
    pub mu_bar: ScalarMatrix,
    pub euler_const: Vec<Scalar>,
    pub euler_weight: Vec<i64>,
    pub lambda_euler: bool,
}

impl Grading {
    /// The coefficient series of E per variable.
    pub fn euler_coeffs(&self, vars: &Arc<VarSet>, order: TruncOrder) -> Vec<Series> {
        let syms = self.euler_const[0].symbols().clone();
        (0..vars.len())
            .map(|i| {
                let mut c = Series::constant(vars, order, self.euler_const[i].clone());
                if self.euler_weight[i] != 0 {
                    c = c.add(&Series::var(vars, order, i, &syms).mul_i64(self.euler_weight[i]));
                }
                c
            })
            .collect()
    }

    /// Residual of the compatibility [Gr, ∇ⱼ] = −wⱼ∇ⱼ in direction `j`:
    /// −Aⱼ + E(Aⱼ) + [μ̄, Aⱼ] + λ∂λ(Aⱼ) + wⱼAⱼ, which must vanish.
    pub fn residual(&self, t: &TStructure, j: usize) -> Result<SeriesMatrix> {
        let a = t.mat(j);
        let vars = t.vars().clone();
        let order = a.order();
        let coeffs = self.euler_coeffs(&vars, order);
        let ea = a.try_map(|e| e.apply_derivation(&coeffs))?;
        let mu = SeriesMatrix::from_scalar_matrix(&self.mu_bar, &vars, order)?;
        let mut r = a.neg().add(&ea).add(&mu.commutator(a)?);
        if self.lambda_euler {
            r = r.add(&a.lambda_euler(&t.spec));
        }
        Ok(r.add(&a.mul_i64(self.euler_weight[j])))
    }

    /// The u-direction matrix induced by Gr − ∇_E:
    /// U = u·μ̄ − Σᵢ (cᵢ + wᵢtᵢ)Aᵢ.
    pub fn u_matrix(&self, t: &TStructure) -> Result<SeriesMatrix> {
        let vars = t.vars().clone();
        let order = t.order();
        let coeffs = self.euler_coeffs(&vars, order);
        let mut u = SeriesMatrix::from_scalar_matrix(&self.mu_bar, &vars, order)?.mul_u_power(1)?;
        for (i, c) in coeffs.iter().enumerate() {
            u = u.sub(&t.mat(i).mul_series(c)?);
        }
        Ok(u)
    }
}
