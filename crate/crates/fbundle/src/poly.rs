//! Dense-exponent multivariate polynomials over ℚ.
//!
//! Exponent vectors index into a shared [`SymbolSet`]; coefficients are
//! arbitrary-precision rationals. The gcd is a primitive PRS, which is all
//! the instances in this crate need (low degrees, few variables).

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num::{BigInt, BigRational, One, Zero};

use crate::symbols::SymbolSet;

pub type Exp = Vec<u16>;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Poly {
    syms: Arc<SymbolSet>,
    /// Nonzero coefficients only, keyed by exponent vector (length = #symbols).
    terms: BTreeMap<Exp, BigRational>,
}

fn lex_cmp(a: &Exp, b: &Exp) -> Ordering {
    a.cmp(b)
}

impl Poly {
    pub fn zero(syms: &Arc<SymbolSet>) -> Self {
        Poly {
            syms: syms.clone(),
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(syms: &Arc<SymbolSet>, c: BigRational) -> Self {
        let mut p = Poly::zero(syms);
        if !c.is_zero() {
            p.terms.insert(vec![0; syms.len()], c);
        }
        p
    }

    pub fn one(syms: &Arc<SymbolSet>) -> Self {
        Poly::constant(syms, BigRational::one())
    }

    pub fn from_i64(syms: &Arc<SymbolSet>, n: i64) -> Self {
        Poly::constant(syms, BigRational::from_integer(BigInt::from(n)))
    }

    pub fn symbol(syms: &Arc<SymbolSet>, idx: usize) -> Self {
        let mut e = vec![0u16; syms.len()];
        e[idx] = 1;
        let mut p = Poly::zero(syms);
        p.terms.insert(e, BigRational::one());
        p
    }

    pub fn symbols(&self) -> &Arc<SymbolSet> {
        &self.syms
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exp, &BigRational)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.len() <= 1 && self.terms.keys().all(|e| e.iter().all(|&x| x == 0))
    }

    /// The constant term (zero exponent) of the polynomial.
    pub fn constant_term(&self) -> BigRational {
        self.terms
            .get(&vec![0u16; self.syms.len()])
            .cloned()
            .unwrap_or_else(BigRational::zero)
    }

    pub fn as_constant(&self) -> Option<BigRational> {
        if self.is_zero() {
            return Some(BigRational::zero());
        }
        if self.is_constant() {
            return Some(self.constant_term());
        }
        None
    }

    fn insert_term(&mut self, e: Exp, c: BigRational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(e) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let s = o.get().clone() + c;
                if s.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        debug_assert_eq!(self.syms, other.syms);
        let mut r = self.clone();
        for (e, c) in &other.terms {
            r.insert_term(e.clone(), c.clone());
        }
        r
    }

    pub fn neg(&self) -> Poly {
        let mut r = self.clone();
        for c in r.terms.values_mut() {
            *c = -c.clone();
        }
        r
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        debug_assert_eq!(self.syms, other.syms);
        let mut r = Poly::zero(&self.syms);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e: Exp = ea.iter().zip(eb).map(|(x, y)| x + y).collect();
                r.insert_term(e, ca * cb);
            }
        }
        r
    }

    pub fn mul_rat(&self, c: &BigRational) -> Poly {
        if c.is_zero() {
            return Poly::zero(&self.syms);
        }
        let mut r = self.clone();
        for v in r.terms.values_mut() {
            *v = v.clone() * c;
        }
        r
    }

    pub fn pow(&self, mut n: u32) -> Poly {
        let mut base = self.clone();
        let mut acc = Poly::one(&self.syms);
        while n > 0 {
            if n & 1 == 1 {
                acc = acc.mul(&base);
            }
            n >>= 1;
            if n > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    pub fn derivative(&self, var: usize) -> Poly {
        let mut r = Poly::zero(&self.syms);
        for (e, c) in &self.terms {
            if e[var] == 0 {
                continue;
            }
            let mut e2 = e.clone();
            e2[var] -= 1;
            r.insert_term(e2, c * BigRational::from_integer(BigInt::from(e[var])));
        }
        r
    }

    /// Substitute `value` for the symbol `var`.
    pub fn subst(&self, var: usize, value: &Poly) -> Poly {
        let mut r = Poly::zero(&self.syms);
        let mut powers: Vec<Poly> = vec![Poly::one(&self.syms)];
        for (e, c) in &self.terms {
            let k = e[var] as usize;
            while powers.len() <= k {
                let next = powers.last().unwrap().mul(value);
                powers.push(next);
            }
            let mut e2 = e.clone();
            e2[var] = 0;
            let mut mono = Poly::zero(&self.syms);
            mono.insert_term(e2, c.clone());
            r = r.add(&mono.mul(&powers[k]));
        }
        r
    }

    pub fn degree_in(&self, var: usize) -> u16 {
        self.terms.keys().map(|e| e[var]).max().unwrap_or(0)
    }

    pub fn total_degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|e| e.iter().map(|&x| x as u32).sum())
            .max()
            .unwrap_or(0)
    }

    /// Leading (exponent, coefficient) in lexicographic order.
    pub fn leading_term(&self) -> Option<(&Exp, &BigRational)> {
        self.terms.iter().max_by(|a, b| lex_cmp(a.0, b.0))
    }

    /// True when no equivariant- or base-symbol outside `allowed` occurs.
    pub fn uses_only(&self, allowed: impl Fn(usize) -> bool) -> bool {
        self.terms
            .keys()
            .all(|e| e.iter().enumerate().all(|(i, &x)| x == 0 || allowed(i)))
    }

    /// Exact division; `None` when `self` is not a multiple of `d`.
    pub fn exact_div(&self, d: &Poly) -> Option<Poly> {
        if d.is_zero() {
            return None;
        }
        if let Some(c) = d.as_constant() {
            return Some(self.mul_rat(&(BigRational::one() / c)));
        }
        let mut rem = self.clone();
        let mut quot = Poly::zero(&self.syms);
        let (dl_e, dl_c) = {
            let (e, c) = d.leading_term().unwrap();
            (e.clone(), c.clone())
        };
        while !rem.is_zero() {
            let (rl_e, rl_c) = {
                let (e, c) = rem.leading_term().unwrap();
                (e.clone(), c.clone())
            };
            if rl_e.iter().zip(&dl_e).any(|(a, b)| a < b) {
                return None;
            }
            let qe: Exp = rl_e.iter().zip(&dl_e).map(|(a, b)| a - b).collect();
            let qc = rl_c / dl_c.clone();
            let mut qt = Poly::zero(&self.syms);
            qt.insert_term(qe, qc);
            rem = rem.sub(&qt.mul(d));
            quot = quot.add(&qt);
        }
        Some(quot)
    }

    /// The coefficients of `self` viewed as univariate in `var`, keyed by the
    /// `var`-exponent. Coefficient polynomials have that exponent zeroed.
    fn univariate_in(&self, var: usize) -> BTreeMap<u16, Poly> {
        let mut m: BTreeMap<u16, Poly> = BTreeMap::new();
        for (e, c) in &self.terms {
            let k = e[var];
            let mut e2 = e.clone();
            e2[var] = 0;
            m.entry(k)
                .or_insert_with(|| Poly::zero(&self.syms))
                .insert_term(e2, c.clone());
        }
        m.retain(|_, p| !p.is_zero());
        m
    }

    /// Content (gcd of the univariate coefficients) and primitive part.
    fn content_pp(&self, var: usize) -> (Poly, Poly) {
        let coeffs = self.univariate_in(var);
        let mut cont = Poly::zero(&self.syms);
        for p in coeffs.values() {
            cont = gcd(&cont, p);
            if cont.is_constant() && !cont.is_zero() {
                cont = Poly::one(&self.syms);
                break;
            }
        }
        let pp = self.exact_div(&cont).expect("content divides");
        (cont, pp)
    }

    /// Pseudo-remainder of `self` by `d`, both viewed as univariate in `var`.
    fn prem(&self, d: &Poly, var: usize) -> Poly {
        let du = d.univariate_in(var);
        let (&dd, dl) = du.iter().next_back().expect("nonzero divisor");
        let mut r = self.clone();
        loop {
            let ru = r.univariate_in(var);
            let (rd, rl) = match ru.iter().next_back() {
                Some((&rd, rl)) => (rd, rl.clone()),
                None => return r,
            };
            if rd < dd {
                return r;
            }
            // r <- dl*r - rl * x^(rd-dd) * d
            let mut shift = Poly::zero(&self.syms);
            let mut e = vec![0u16; self.syms.len()];
            e[var] = rd - dd;
            shift.insert_term(e, BigRational::one());
            r = r.mul(dl).sub(&rl.mul(&shift).mul(d));
        }
    }

    /// Normalize to have lexicographic leading coefficient 1.
    fn monic_lex(&self) -> Poly {
        match self.leading_term() {
            None => self.clone(),
            Some((_, c)) => {
                let inv = BigRational::one() / c.clone();
                self.mul_rat(&inv)
            }
        }
    }

    /// Highest symbol index that actually occurs, if any.
    fn main_var(&self) -> Option<usize> {
        let mut mv = None;
        for e in self.terms.keys() {
            for (i, &x) in e.iter().enumerate().rev() {
                if x > 0 {
                    mv = Some(mv.map_or(i, |m: usize| m.max(i)));
                    break;
                }
            }
        }
        mv
    }
}

/// Gcd of two polynomials, normalized to lex-leading coefficient 1.
pub fn gcd(a: &Poly, b: &Poly) -> Poly {
    if a.is_zero() {
        return b.monic_lex();
    }
    if b.is_zero() {
        return a.monic_lex();
    }
    if a.is_constant() || b.is_constant() {
        return Poly::one(&a.syms);
    }
    if a == b {
        return a.monic_lex();
    }
    let var = a.main_var().unwrap().max(b.main_var().unwrap());
    if a.degree_in(var) == 0 || b.degree_in(var) == 0 {
        // One of them is free of the chosen main variable: gcd divides the
        // content of the other in that variable.
        let (ca, _) = a.content_pp(var);
        let (cb, _) = b.content_pp(var);
        let (lo, hi) = if a.degree_in(var) == 0 { (a, cb) } else { (b, ca) };
        return gcd(lo, &hi);
    }
    let (ca, mut pa) = a.content_pp(var);
    let (cb, mut pb) = b.content_pp(var);
    let cont = gcd(&ca, &cb);
    if pa.degree_in(var) < pb.degree_in(var) {
        std::mem::swap(&mut pa, &mut pb);
    }
    loop {
        let r = pa.prem(&pb, var);
        if r.is_zero() {
            let (_, pp) = pb.content_pp(var);
            return cont.mul(&pp).monic_lex();
        }
        if r.degree_in(var) == 0 {
            return cont.monic_lex();
        }
        let (_, rp) = r.content_pp(var);
        pa = pb;
        pb = rp;
    }
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", crate::parse::poly_to_string(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbols::SymbolSet;

    fn setup() -> Arc<SymbolSet> {
        SymbolSet::new(vec!["q".into(), "l1".into(), "l2".into()])
    }

    #[test]
    fn product_difference_of_squares() {
        let s = setup();
        let l1 = Poly::symbol(&s, 1);
        let l2 = Poly::symbol(&s, 2);
        let p = l1.add(&l2).mul(&l1.sub(&l2));
        assert_eq!(p, l1.mul(&l1).sub(&l2.mul(&l2)));
    }

    #[test]
    fn exact_division() {
        let s = setup();
        let l1 = Poly::symbol(&s, 1);
        let l2 = Poly::symbol(&s, 2);
        let num = l1.pow(2).sub(&l2.pow(2));
        let q = num.exact_div(&l1.sub(&l2)).unwrap();
        assert_eq!(q, l1.add(&l2));
        assert!(l1.exact_div(&l2).is_none());
    }

    #[test]
    fn gcd_simple() {
        let s = setup();
        let q = Poly::symbol(&s, 0);
        let l1 = Poly::symbol(&s, 1);
        let l2 = Poly::symbol(&s, 2);
        let a = l1.add(&l2).mul(&q).mul(&l1);
        let b = l1.add(&l2).mul(&l1).mul(&l1);
        let g = gcd(&a, &b);
        // gcd = l1*(l1+l2) up to normalization
        assert!(a.exact_div(&g).is_some());
        assert!(b.exact_div(&g).is_some());
        assert_eq!(g.total_degree(), 2);
    }

    #[test]
    fn gcd_coprime() {
        let s = setup();
        let q = Poly::symbol(&s, 0);
        let l1 = Poly::symbol(&s, 1);
        let one = Poly::one(&s);
        let a = q.add(&one);
        let b = l1.add(&one);
        assert_eq!(gcd(&a, &b), one);
    }

    #[test]
    fn substitution_kills_variable() {
        let s = setup();
        let q = Poly::symbol(&s, 0);
        let l1 = Poly::symbol(&s, 1);
        let p = q.mul(&l1).add(&l1.pow(2));
        let r = p.subst(1, &Poly::zero(&s));
        assert!(r.is_zero());
    }
}
