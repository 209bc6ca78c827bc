//! Truncated multivariate power series in base variables with a bounded
//! Laurent range in `u`, over [`Scalar`] coefficients.
//!
//! A [`TruncOrder`] names the finite quotient in which all computations are
//! exact: total degree ≤ `t_cap` in the base variables, `u`-exponents in
//! `[u_min, u_max]`. Products that overflow past `u_max` are dropped (they
//! are outside the window by construction); products that underflow below
//! `u_min` are an error, because the pole order at `u = 0` is a global
//! invariant of the structures built on top.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num::{BigInt, BigRational};

use crate::error::{Error, Result};
use crate::matrix::ScalarMatrix;
use crate::poly::Poly;
use crate::scalar::Scalar;
use crate::symbols::{ParamSpec, SymbolSet};

/// Ordered base-variable names (t's, s's, y's …); `u` is implicit.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VarSet {
    vars: Vec<String>,
}

impl VarSet {
    pub fn new(vars: Vec<String>) -> Arc<Self> {
        Arc::new(VarSet { vars })
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.vars[i]
    }

    pub fn names(&self) -> &[String] {
        &self.vars
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v == name)
    }

    /// New set with extra variables appended.
    pub fn extend(&self, extra: &[String]) -> Arc<VarSet> {
        let mut vars = self.vars.clone();
        vars.extend_from_slice(extra);
        VarSet::new(vars)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct TruncOrder {
    #[serde(rename = "t_degree_cap")]
    pub t_cap: u32,
    pub u_min: i32,
    pub u_max: i32,
}

impl TruncOrder {
    pub fn new(t_cap: u32, u_min: i32, u_max: i32) -> Self {
        assert!(u_min <= u_max);
        TruncOrder { t_cap, u_min, u_max }
    }

    /// The tighter of two orders.
    pub fn meet(&self, o: &TruncOrder) -> TruncOrder {
        TruncOrder {
            t_cap: self.t_cap.min(o.t_cap),
            u_min: self.u_min.max(o.u_min),
            u_max: self.u_max.min(o.u_max),
        }
    }

    pub fn with_u_max(&self, u_max: i32) -> TruncOrder {
        TruncOrder { u_max, ..*self }
    }

    pub fn contains(&self, tdeg: u32, u: i32) -> bool {
        tdeg <= self.t_cap && u >= self.u_min && u <= self.u_max
    }
}

pub type Mono = (Vec<u16>, i32);

/// Truncated series with `Scalar` coefficients; no stored coefficient is
/// zero and every stored exponent respects `order`.
#[derive(Clone, PartialEq, Eq)]
pub struct Series {
    vars: Arc<VarSet>,
    order: TruncOrder,
    syms: Arc<SymbolSet>,
    terms: BTreeMap<Mono, Scalar>,
}

fn tdeg(e: &[u16]) -> u32 {
    e.iter().map(|&x| x as u32).sum()
}

impl Series {
    pub fn zero(vars: &Arc<VarSet>, order: TruncOrder, syms: &Arc<SymbolSet>) -> Self {
        Series {
            vars: vars.clone(),
            order,
            syms: syms.clone(),
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(vars: &Arc<VarSet>, order: TruncOrder, c: Scalar) -> Self {
        let syms = c.symbols().clone();
        let mut s = Series::zero(vars, order, &syms);
        s.add_term(vec![0; vars.len()], 0, c);
        s
    }

    pub fn one(vars: &Arc<VarSet>, order: TruncOrder, syms: &Arc<SymbolSet>) -> Self {
        Series::constant(vars, order, Scalar::one(syms))
    }

    pub fn var(vars: &Arc<VarSet>, order: TruncOrder, idx: usize, syms: &Arc<SymbolSet>) -> Self {
        let mut e = vec![0u16; vars.len()];
        e[idx] = 1;
        let mut s = Series::zero(vars, order, syms);
        s.add_term(e, 0, Scalar::one(syms));
        s
    }

    pub fn u_power(vars: &Arc<VarSet>, order: TruncOrder, k: i32, syms: &Arc<SymbolSet>) -> Self {
        let mut s = Series::zero(vars, order, syms);
        s.add_term(vec![0; vars.len()], k, Scalar::one(syms));
        s
    }

    /// e^{t_idx} truncated to the order's t-cap.
    pub fn exp_var(vars: &Arc<VarSet>, order: TruncOrder, idx: usize, syms: &Arc<SymbolSet>) -> Self {
        Self::exp_var_scaled(vars, order, idx, &Scalar::one(syms))
    }

    /// e^{c·t_idx} = Σ cᵏ t_idxᵏ/k! truncated to the order's t-cap.
    pub fn exp_var_scaled(vars: &Arc<VarSet>, order: TruncOrder, idx: usize, c: &Scalar) -> Self {
        let mut s = Series::zero(vars, order, c.symbols());
        let mut fact = BigRational::from_integer(BigInt::from(1));
        let mut cpow = Scalar::one(c.symbols());
        for k in 0..=order.t_cap {
            if k > 0 {
                fact *= BigRational::from_integer(BigInt::from(k));
                cpow = cpow.mul(c);
            }
            let mut e = vec![0u16; vars.len()];
            e[idx] = k as u16;
            let inv_fact = Scalar::from_rat(
                c.symbols(),
                BigRational::from_integer(BigInt::from(1)) / fact.clone(),
            );
            s.add_term(e, 0, cpow.mul(&inv_fact));
        }
        s
    }

    pub fn vars(&self) -> &Arc<VarSet> {
        &self.vars
    }

    pub fn order(&self) -> TruncOrder {
        self.order
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Mono, &Scalar)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Insert respecting the order window; silently drops overflow above
    /// `u_max` and beyond `t_cap`.
    fn add_term(&mut self, e: Vec<u16>, u: i32, c: Scalar) {
        if c.is_zero() {
            return;
        }
        if tdeg(&e) > self.order.t_cap || u > self.order.u_max {
            return;
        }
        debug_assert!(u >= self.order.u_min);
        match self.terms.entry((e, u)) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let s = o.get().add(&c);
                if s.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    pub fn coeff(&self, e: &[u16], u: i32) -> Scalar {
        self.terms
            .get(&(e.to_vec(), u))
            .cloned()
            .unwrap_or_else(|| Scalar::zero(&self.syms))
    }

    pub fn syms(&self) -> &Arc<SymbolSet> {
        &self.syms
    }

    pub fn add(&self, o: &Series) -> Series {
        debug_assert_eq!(self.vars, o.vars);
        // An exactly-zero summand carries no degree information: keep the
        // other side's order instead of meeting down to the zero's.
        if self.is_zero() {
            return o.clone();
        }
        if o.is_zero() {
            return self.clone();
        }
        let order = self.order.meet(&o.order);
        let mut r = Series::zero(&self.vars, order, &self.syms);
        for ((e, u), c) in self.terms.iter().chain(o.terms.iter()) {
            if order.contains(tdeg(e), *u) {
                r.add_term(e.clone(), *u, c.clone());
            }
        }
        r
    }

    pub fn neg(&self) -> Series {
        let mut r = self.clone();
        for c in r.terms.values_mut() {
            *c = c.neg();
        }
        r
    }

    pub fn sub(&self, o: &Series) -> Series {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &Series) -> Result<Series> {
        debug_assert_eq!(self.vars, o.vars);
        let order = self.order.meet(&o.order);
        let mut r = Series::zero(&self.vars, order, &self.syms);
        for ((ea, ua), ca) in &self.terms {
            for ((eb, ub), cb) in &o.terms {
                let u = ua + ub;
                if u < order.u_min {
                    return Err(Error::ULaurentUnderflow {
                        exp: u,
                        floor: order.u_min,
                    });
                }
                if u > order.u_max {
                    continue;
                }
                let e: Vec<u16> = ea.iter().zip(eb).map(|(x, y)| x + y).collect();
                if tdeg(&e) > order.t_cap {
                    continue;
                }
                r.add_term(e, u, ca.mul(cb));
            }
        }
        Ok(r)
    }

    pub fn mul_scalar(&self, c: &Scalar) -> Series {
        let mut r = Series::zero(&self.vars, self.order, &self.syms);
        for ((e, u), v) in &self.terms {
            r.add_term(e.clone(), *u, v.mul(c));
        }
        r
    }

    pub fn mul_i64(&self, n: i64) -> Series {
        let mut r = Series::zero(&self.vars, self.order, &self.syms);
        for ((e, u), v) in &self.terms {
            r.add_term(e.clone(), *u, v.mul_i64(n));
        }
        r
    }

    /// Multiply by `u^k`, shifting the Laurent exponent.
    pub fn mul_u_power(&self, k: i32) -> Result<Series> {
        let mut r = Series::zero(&self.vars, self.order, &self.syms);
        for ((e, u), v) in &self.terms {
            let nu = u + k;
            if nu < self.order.u_min {
                return Err(Error::ULaurentUnderflow {
                    exp: nu,
                    floor: self.order.u_min,
                });
            }
            if nu > self.order.u_max {
                continue;
            }
            r.add_term(e.clone(), nu, v.clone());
        }
        Ok(r)
    }

    /// Partial derivative with respect to base variable `idx`; the effective
    /// t-cap drops by one.
    pub fn diff_var(&self, idx: usize) -> Series {
        let order = TruncOrder {
            t_cap: self.order.t_cap.saturating_sub(1),
            ..self.order
        };
        let mut r = Series::zero(&self.vars, order, &self.syms);
        for ((e, u), c) in &self.terms {
            if e[idx] == 0 {
                continue;
            }
            let mut e2 = e.clone();
            e2[idx] -= 1;
            r.add_term(e2, *u, c.mul_i64(e[idx] as i64));
        }
        r
    }

    /// Partial derivative with respect to `u`.
    pub fn diff_u(&self) -> Result<Series> {
        let mut r = Series::zero(&self.vars, self.order, &self.syms);
        for ((e, u), c) in &self.terms {
            if *u == 0 {
                continue;
            }
            let nu = u - 1;
            if nu < self.order.u_min {
                return Err(Error::ULaurentUnderflow {
                    exp: nu,
                    floor: self.order.u_min,
                });
            }
            r.add_term(e.clone(), nu, c.mul_i64(*u as i64));
        }
        Ok(r)
    }

    /// Retruncate to a (typically tighter) order. Underflowing terms error.
    pub fn truncate(&self, order: TruncOrder) -> Result<Series> {
        let mut r = Series::zero(&self.vars, order, &self.syms);
        for ((e, u), c) in &self.terms {
            if *u < order.u_min {
                return Err(Error::ULaurentUnderflow {
                    exp: *u,
                    floor: order.u_min,
                });
            }
            if order.contains(tdeg(e), *u) {
                r.add_term(e.clone(), *u, c.clone());
            }
        }
        Ok(r)
    }

    /// Total-degree-`d` part in the base variables.
    pub fn degree_part(&self, d: u32) -> Series {
        let mut r = Series::zero(&self.vars, self.order, &self.syms);
        for ((e, u), c) in &self.terms {
            if tdeg(e) == d {
                r.add_term(e.clone(), *u, c.clone());
            }
        }
        r
    }

    pub fn max_t_degree(&self) -> u32 {
        self.terms.keys().map(|(e, _)| tdeg(e)).max().unwrap_or(0)
    }

    pub fn max_u_degree(&self) -> Option<i32> {
        self.terms.keys().map(|(_, u)| *u).max()
    }

    /// Coefficient of the base monomial `e` as a series in `u` alone
    /// (keeping the same variable set with zero exponents).
    pub fn mono_coeff(&self, e: &[u16]) -> Series {
        let mut r = Series::zero(&self.vars, self.order, &self.syms);
        let zero = vec![0u16; self.vars.len()];
        for ((te, u), c) in &self.terms {
            if te == e {
                r.add_term(zero.clone(), *u, c.clone());
            }
        }
        r
    }

    /// Multiply by the base monomial `t^e`.
    pub fn mul_mono(&self, e: &[u16]) -> Result<Series> {
        let mut r = Series::zero(&self.vars, self.order, &self.syms);
        for ((te, u), c) in &self.terms {
            let ne: Vec<u16> = te.iter().zip(e).map(|(a, b)| a + b).collect();
            r.add_term(ne, *u, c.clone());
        }
        Ok(r)
    }

    /// Coefficient of `var^k` for one base variable (exponent zeroed).
    pub fn var_coeff(&self, idx: usize, k: u32) -> Series {
        let mut r = Series::zero(&self.vars, self.order, &self.syms);
        for ((te, u), c) in &self.terms {
            if te[idx] as u32 == k {
                let mut e2 = te.clone();
                e2[idx] = 0;
                r.add_term(e2, *u, c.clone());
            }
        }
        r
    }

    /// Coefficient of `u^k` as a `u`-free series (window kept, widened to
    /// contain 0).
    pub fn u_coefficient(&self, k: i32) -> Series {
        let order = TruncOrder {
            u_min: self.order.u_min.min(0),
            u_max: self.order.u_max.max(0),
            ..self.order
        };
        let mut r = Series::zero(&self.vars, order, &self.syms);
        for ((e, u), c) in &self.terms {
            if *u == k {
                r.add_term(e.clone(), 0, c.clone());
            }
        }
        r
    }

    /// Simultaneous substitution of every base variable. `images[i]` replaces
    /// variable `i`; they must share a variable set and order among
    /// themselves, which become the result's. Coefficients pass through.
    pub fn subst_vars(&self, images: &[Series]) -> Result<Series> {
        assert_eq!(images.len(), self.vars.len());
        let (tvars, torder) = match images.first() {
            Some(s) => (s.vars.clone(), s.order),
            None => (self.vars.clone(), self.order),
        };
        let mut r = Series::zero(&tvars, torder, &self.syms);
        // Cache powers of each image.
        let mut powers: Vec<Vec<Series>> = images
            .iter()
            .map(|im| vec![Series::constant(&tvars, torder, Scalar::one(im.syms()))])
            .collect();
        for ((e, u), c) in &self.terms {
            let mut term = Series::constant(&tvars, torder, Scalar::one(&self.syms));
            for (i, &k) in e.iter().enumerate() {
                let k = k as usize;
                while powers[i].len() <= k {
                    let next = powers[i].last().unwrap().mul(&images[i])?;
                    powers[i].push(next);
                }
                term = term.mul(&powers[i][k])?;
            }
            term = term.mul_scalar(c).mul_u_power(*u)?;
            r = r.add(&term);
        }
        Ok(r)
    }

    /// Embed into a larger variable set (old variables must appear in order
    /// as a subset).
    pub fn embed(&self, tvars: &Arc<VarSet>, torder: TruncOrder) -> Result<Series> {
        let syms = self.syms.clone();
        let images: Vec<Series> = self
            .vars
            .names()
            .iter()
            .map(|n| {
                let idx = tvars
                    .index_of(n)
                    .ok_or_else(|| Error::UnknownVariable(n.clone()))?;
                Ok(Series::var(tvars, torder, idx, &syms))
            })
            .collect::<Result<_>>()?;
        self.subst_vars(&images)
    }

    /// Move a series that is free of the base variables onto a different
    /// variable set.
    pub fn retarget_t_free(&self, tvars: &Arc<VarSet>, torder: TruncOrder) -> Result<Series> {
        let mut r = Series::zero(tvars, torder, &self.syms);
        let zero = vec![0u16; tvars.len()];
        for ((e, u), c) in &self.terms {
            if e.iter().any(|&x| x != 0) {
                return Err(Error::Invalid(
                    "series involves base variables and cannot be retargeted".into(),
                ));
            }
            if *u < torder.u_min {
                return Err(Error::ULaurentUnderflow {
                    exp: *u,
                    floor: torder.u_min,
                });
            }
            r.add_term(zero.clone(), *u, c.clone());
        }
        Ok(r)
    }

    /// Set one base variable to zero.
    pub fn restrict_var(&self, idx: usize) -> Series {
        let mut r = Series::zero(&self.vars, self.order, &self.syms);
        for ((e, u), c) in &self.terms {
            if e[idx] == 0 {
                r.add_term(e.clone(), *u, c.clone());
            }
        }
        r
    }

    /// Evaluate all base variables at zero, leaving a `u`-Laurent polynomial.
    pub fn eval_t0(&self) -> Series {
        let mut r = Series::zero(&self.vars, self.order, &self.syms);
        for ((e, u), c) in &self.terms {
            if tdeg(e) == 0 {
                r.add_term(e.clone(), *u, c.clone());
            }
        }
        r
    }

    /// The scalar value at t = 0, u-exponent `k`.
    pub fn coeff_t0(&self, k: i32) -> Scalar {
        self.coeff(&vec![0u16; self.vars.len()], k)
    }

    /// Apply a parameter substitution to every coefficient.
    pub fn subst_param(&self, idx: usize, value: &Poly) -> Result<Series> {
        let mut r = Series::zero(&self.vars, self.order, &self.syms);
        for ((e, u), c) in &self.terms {
            r.add_term(e.clone(), *u, c.subst_param(idx, value)?);
        }
        Ok(r)
    }

    /// Σ λᵢ∂_{λᵢ} applied to every coefficient.
    pub fn lambda_euler(&self, spec: &ParamSpec) -> Series {
        let mut r = Series::zero(&self.vars, self.order, &self.syms);
        for ((e, u), c) in &self.terms {
            r.add_term(e.clone(), *u, c.lambda_euler(spec));
        }
        r
    }

    /// Derivation Σᵢ cᵢ(t)∂_{tᵢ} with series coefficients.
    pub fn apply_derivation(&self, coeffs: &[Series]) -> Result<Series> {
        let mut r = Series::zero(&self.vars, self.order, &self.syms);
        for (i, c) in coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            r = r.add(&self.diff_var(i).mul(c)?);
        }
        Ok(r)
    }
}

impl fmt::Debug for Series {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", crate::parse::series_to_string(self))
    }
}

/// Blow up the variables of `a` by `t_i ↦ Σ_{|k| ≤ cap} λ^k t_{i,k}`.
///
/// The coefficients of `a` must be polynomial in the equivariant parameters
/// (elements of R). Only the substitution index set is capped; coefficients
/// keep whatever λ-degree they acquire.
pub fn psi_lambda(a: &Series, spec: &ParamSpec, lambda_cap: u32) -> Result<Series> {
    for (_, c) in a.terms() {
        if !c.is_polynomial_in_equiv(spec) {
            return Err(Error::ScalarNotInR(format!("{c:?}")));
        }
    }
    let (tvars, multis) = blown_up_vars(a.vars(), spec, lambda_cap);
    let torder = a.order();
    let syms = spec.symbols().clone();
    let images: Vec<Series> = (0..a.vars().len())
        .map(|i| {
            let mut im = Series::zero(&tvars, torder, &syms);
            for (j, k) in multis.iter().enumerate() {
                let mut mono = Poly::one(&syms);
                for (m, &e) in k.iter().enumerate() {
                    mono = mono.mul(&Poly::symbol(&syms, spec.n_base() + m).pow(e as u32));
                }
                let mut ev = vec![0u16; tvars.len()];
                ev[i * multis.len() + j] = 1;
                let mut t = Series::zero(&tvars, torder, &syms);
                t.add_term(ev, 0, Scalar::from_poly(mono));
                im = im.add(&t);
            }
            im
        })
        .collect();
    a.subst_vars(&images)
}

/// The blown-up variable set `{t_{i,k}}` together with the ordered list of
/// λ-multi-indices `|k| ≤ cap` (graded lexicographic).
pub fn blown_up_vars(
    vars: &Arc<VarSet>,
    spec: &ParamSpec,
    lambda_cap: u32,
) -> (Arc<VarSet>, Vec<Vec<u16>>) {
    let multis = lambda_multi_indices(spec.n_equiv(), lambda_cap);
    let mut names = Vec::with_capacity(vars.len() * multis.len());
    for base in vars.names() {
        for k in &multis {
            names.push(blown_up_name(base, k));
        }
    }
    (VarSet::new(names), multis)
}

pub fn blown_up_name(base: &str, k: &[u16]) -> String {
    let digits: String = k.iter().map(|d| d.to_string()).collect();
    format!("{base}_{digits}")
}

/// Multi-indices k ∈ ℕⁿ with |k| ≤ cap, in graded lexicographic order.
pub fn lambda_multi_indices(n: usize, cap: u32) -> Vec<Vec<u16>> {
    let mut out = Vec::new();
    if n == 0 {
        out.push(vec![]);
        return out;
    }
    for total in 0..=cap {
        let mut idx = vec![0u16; n];
        fill(&mut out, &mut idx, 0, total as u16, n);
    }
    fn fill(out: &mut Vec<Vec<u16>>, idx: &mut Vec<u16>, pos: usize, rem: u16, n: usize) {
        if pos == n - 1 {
            idx[pos] = rem;
            out.push(idx.clone());
            return;
        }
        for v in (0..=rem).rev() {
            idx[pos] = v;
            fill(out, idx, pos + 1, rem - v, n);
        }
    }
    out
}

/// Square matrix of series sharing variables and order.
#[derive(Clone, PartialEq, Eq)]
pub struct SeriesMatrix {
    n: usize,
    entries: Vec<Series>,
}

impl SeriesMatrix {
    pub fn new(n: usize, entries: Vec<Series>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} series matrix needs {} entries",
                n,
                n,
                n * n
            )));
        }
        Ok(SeriesMatrix { n, entries })
    }

    pub fn zero(vars: &Arc<VarSet>, order: TruncOrder, n: usize, syms: &Arc<SymbolSet>) -> Self {
        SeriesMatrix {
            n,
            entries: vec![Series::zero(vars, order, syms); n * n],
        }
    }

    pub fn identity(vars: &Arc<VarSet>, order: TruncOrder, n: usize, syms: &Arc<SymbolSet>) -> Self {
        let mut m = Self::zero(vars, order, n, syms);
        for i in 0..n {
            m[(i, i)] = Series::one(vars, order, syms);
        }
        m
    }

    pub fn from_scalar_matrix(
        m: &ScalarMatrix,
        vars: &Arc<VarSet>,
        order: TruncOrder,
    ) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::NonSquare {
                rows: m.rows(),
                cols: m.cols(),
            });
        }
        let n = m.rows();
        let mut r = Self::zero(vars, order, n, m.syms());
        for i in 0..n {
            for j in 0..n {
                r[(i, j)] = Series::constant(vars, order, m[(i, j)].clone());
            }
        }
        Ok(r)
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn vars(&self) -> &Arc<VarSet> {
        self.entries[0].vars()
    }

    pub fn syms(&self) -> &Arc<SymbolSet> {
        self.entries[0].syms()
    }

    pub fn order(&self) -> TruncOrder {
        self.entries[0].order()
    }

    pub fn map(&self, f: impl FnMut(&Series) -> Series) -> SeriesMatrix {
        SeriesMatrix {
            n: self.n,
            entries: self.entries.iter().map(f).collect(),
        }
    }

    pub fn try_map(&self, f: impl FnMut(&Series) -> Result<Series>) -> Result<SeriesMatrix> {
        Ok(SeriesMatrix {
            n: self.n,
            entries: self
                .entries
                .iter()
                .map(f)
                .collect::<Result<Vec<_>>>()?,
        })
    }

    /// Re-truncate every entry to the meet of the entry orders, so the
    /// matrix carries one uniform truncation order. Exactly-zero entries
    /// contribute whatever order they inherited, which keeps an all-zero
    /// summand from tightening anything.
    fn unify_order(self) -> SeriesMatrix {
        let meet = self
            .entries
            .iter()
            .map(|e| e.order())
            .reduce(|a, b| a.meet(&b))
            .expect("nonempty matrix");
        if self.entries.iter().all(|e| e.order() == meet) {
            return self;
        }
        SeriesMatrix {
            n: self.n,
            entries: self
                .entries
                .iter()
                .map(|e| e.truncate(meet).expect("meet only tightens"))
                .collect(),
        }
    }

    pub fn add(&self, o: &SeriesMatrix) -> SeriesMatrix {
        assert_eq!(self.n, o.n);
        SeriesMatrix {
            n: self.n,
            entries: self
                .entries
                .iter()
                .zip(&o.entries)
                .map(|(a, b)| a.add(b))
                .collect(),
        }
        .unify_order()
    }

    pub fn sub(&self, o: &SeriesMatrix) -> SeriesMatrix {
        self.add(&o.neg())
    }

    pub fn neg(&self) -> SeriesMatrix {
        self.map(|e| e.neg())
    }

    pub fn mul(&self, o: &SeriesMatrix) -> Result<SeriesMatrix> {
        assert_eq!(self.n, o.n);
        let n = self.n;
        let vars = self.vars().clone();
        let order = self.order().meet(&o.order());
        let syms = self.syms().clone();
        let mut r = SeriesMatrix::zero(&vars, order, n, &syms);
        for i in 0..n {
            for j in 0..n {
                let mut acc = Series::zero(&vars, order, &syms);
                for k in 0..n {
                    acc = acc.add(&self[(i, k)].mul(&o[(k, j)])?);
                }
                r[(i, j)] = acc;
            }
        }
        Ok(r.unify_order())
    }

    pub fn commutator(&self, o: &SeriesMatrix) -> Result<SeriesMatrix> {
        Ok(self.mul(o)?.sub(&o.mul(self)?))
    }

    pub fn mul_series(&self, s: &Series) -> Result<SeriesMatrix> {
        Ok(self.try_map(|e| e.mul(s))?.unify_order())
    }

    pub fn mul_scalar(&self, c: &Scalar) -> SeriesMatrix {
        self.map(|e| e.mul_scalar(c))
    }

    pub fn mul_i64(&self, k: i64) -> SeriesMatrix {
        self.map(|e| e.mul_i64(k))
    }

    pub fn mul_u_power(&self, k: i32) -> Result<SeriesMatrix> {
        self.try_map(|e| e.mul_u_power(k))
    }

    pub fn diff_var(&self, idx: usize) -> SeriesMatrix {
        self.map(|e| e.diff_var(idx)).unify_order()
    }

    pub fn diff_u(&self) -> Result<SeriesMatrix> {
        Ok(self.try_map(|e| e.diff_u())?.unify_order())
    }

    pub fn truncate(&self, order: TruncOrder) -> Result<SeriesMatrix> {
        self.try_map(|e| e.truncate(order))
    }

    pub fn subst_vars(&self, images: &[Series]) -> Result<SeriesMatrix> {
        self.try_map(|e| e.subst_vars(images))
    }

    pub fn embed(&self, tvars: &Arc<VarSet>, torder: TruncOrder) -> Result<SeriesMatrix> {
        self.try_map(|e| e.embed(tvars, torder))
    }

    pub fn restrict_var(&self, idx: usize) -> SeriesMatrix {
        self.map(|e| e.restrict_var(idx))
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|e| e.is_zero())
    }

    /// True when no entry involves `u`.
    pub fn is_u_free(&self) -> bool {
        self.entries
            .iter()
            .all(|e| e.terms().all(|((_, u), _)| *u == 0))
    }

    /// Value at t = 0, u = 0 as a scalar matrix.
    pub fn residue(&self, syms: &Arc<SymbolSet>) -> ScalarMatrix {
        ScalarMatrix::from_fn(syms, self.n, self.n, |i, j| self[(i, j)].coeff_t0(0))
    }

    /// Value at t = 0 as a matrix of u-polynomials.
    pub fn eval_t0(&self) -> SeriesMatrix {
        self.map(|e| e.eval_t0())
    }

    /// Total-degree-`d` part entrywise.
    pub fn degree_part(&self, d: u32) -> SeriesMatrix {
        self.map(|e| e.degree_part(d))
    }

    pub fn max_t_degree(&self) -> u32 {
        self.entries.iter().map(|e| e.max_t_degree()).max().unwrap_or(0)
    }

    pub fn max_u_degree(&self) -> Option<i32> {
        self.entries.iter().filter_map(|e| e.max_u_degree()).max()
    }

    /// Coefficient of the base monomial `e`, entrywise (u-series entries).
    pub fn mono_coeff(&self, e: &[u16]) -> SeriesMatrix {
        self.map(|s| s.mono_coeff(e))
    }

    /// Coefficient of `var^k`, entrywise.
    pub fn var_coeff(&self, idx: usize, k: u32) -> SeriesMatrix {
        self.map(|s| s.var_coeff(idx, k))
    }

    /// Add `t^e · part` in place; the part adopts the target's order first,
    /// so tighter intermediate truncations do not drop the shifted terms.
    pub fn add_mono_times(&mut self, e: &[u16], part: &SeriesMatrix) -> Result<()> {
        assert_eq!(self.n, part.n);
        for k in 0..self.entries.len() {
            let widened = part.entries[k].truncate(self.entries[k].order())?;
            let shifted = widened.mul_mono(e)?;
            self.entries[k] = self.entries[k].add(&shifted);
        }
        Ok(())
    }

    /// Divide by u, requiring no entry to have a u⁰ term.
    pub fn exact_div_u(&self) -> Result<SeriesMatrix> {
        for s in &self.entries {
            if !s.u_coefficient(0).is_zero() {
                return Err(Error::ULaurentUnderflow {
                    exp: -1,
                    floor: self.order().u_min.max(0),
                });
            }
        }
        let wide = self.order();
        let lowered = self.truncate(TruncOrder {
            u_min: wide.u_min.min(-1),
            ..wide
        })?;
        lowered.mul_u_power(-1)?.truncate(wide)
    }

    /// Matrix · column vector of series.
    pub fn mul_vec(&self, v: &[Series]) -> Result<Vec<Series>> {
        assert_eq!(v.len(), self.n);
        let vars = self.vars().clone();
        let order = self.order();
        (0..self.n)
            .map(|i| {
                let mut acc = Series::zero(&vars, order, self.syms());
                for k in 0..self.n {
                    acc = acc.add(&self[(i, k)].mul(&v[k])?);
                }
                Ok(acc)
            })
            .collect()
    }

    /// Inverse of a matrix whose residue at (t, u) = 0 is Id (Neumann
    /// series in the (t, u)-adic filtration; exact at the truncation order).
    pub fn inverse_unipotent(&self, syms: &Arc<SymbolSet>) -> Result<SeriesMatrix> {
        let id = SeriesMatrix::identity(self.vars(), self.order(), self.n, syms);
        if self.residue(syms) != ScalarMatrix::identity(syms, self.n) {
            return Err(Error::Invalid(
                "inverse_unipotent requires residue Id at t = u = 0".into(),
            ));
        }
        let nil = self.sub(&id);
        if nil
            .entries
            .iter()
            .any(|e| e.terms().any(|((te, u), _)| tdeg(te) == 0 && *u < 0))
        {
            return Err(Error::Invalid(
                "inverse_unipotent requires no constant-term Laurent tail".into(),
            ));
        }
        let order = self.order();
        let steps = order.t_cap + order.u_max.max(0) as u32 + 1;
        let mut acc = id.clone();
        let mut pow = id;
        for _ in 0..steps {
            pow = pow.mul(&nil)?.neg();
            if pow.is_zero() {
                break;
            }
            acc = acc.add(&pow);
        }
        Ok(acc)
    }

    /// Entrywise Σλᵢ∂_{λᵢ} on coefficients.
    pub fn lambda_euler(&self, spec: &ParamSpec) -> SeriesMatrix {
        self.map(|e| e.lambda_euler(spec))
    }

    pub fn subst_param(&self, idx: usize, value: &Poly) -> Result<SeriesMatrix> {
        self.try_map(|e| e.subst_param(idx, value))
    }
}

impl std::ops::Index<(usize, usize)> for SeriesMatrix {
    type Output = Series;
    fn index(&self, (i, j): (usize, usize)) -> &Series {
        &self.entries[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for SeriesMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Series {
        &mut self.entries[i * self.n + j]
    }
}

impl fmt::Debug for SeriesMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "[")?;
        for i in 0..self.n {
            write!(f, "  [")?;
            for j in 0..self.n {
                if j > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{:?}", self[(i, j)])?;
            }
            writeln!(f, "]")?;
        }
        write!(f, "]")
    }
}
