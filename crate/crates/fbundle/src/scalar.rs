//! Reduced rational functions over ℚ in the declared parameters.

use std::fmt;
use std::sync::Arc;

use num::{BigRational, One};

use crate::error::{Error, Result};
use crate::poly::{gcd, Poly};
use crate::symbols::{Flavor, ParamSpec, SymbolSet};

/// A rational function `num/den`, stored reduced: gcd(num, den) = 1 and the
/// denominator is lex-monic. Equality is structural.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Scalar {
    num: Poly,
    den: Poly,
}

impl Scalar {
    pub fn from_poly(num: Poly) -> Self {
        let den = Poly::one(num.symbols());
        Scalar { num, den }
    }

    pub fn zero(syms: &Arc<SymbolSet>) -> Self {
        Scalar::from_poly(Poly::zero(syms))
    }

    pub fn one(syms: &Arc<SymbolSet>) -> Self {
        Scalar::from_poly(Poly::one(syms))
    }

    pub fn from_i64(syms: &Arc<SymbolSet>, n: i64) -> Self {
        Scalar::from_poly(Poly::from_i64(syms, n))
    }

    pub fn from_rat(syms: &Arc<SymbolSet>, c: BigRational) -> Self {
        Scalar::from_poly(Poly::constant(syms, c))
    }

    pub fn symbol(syms: &Arc<SymbolSet>, idx: usize) -> Self {
        Scalar::from_poly(Poly::symbol(syms, idx))
    }

    pub fn new(num: Poly, den: Poly) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::DivisionByZero);
        }
        Ok(Self::reduced(num, den))
    }

    fn reduced(num: Poly, den: Poly) -> Self {
        if num.is_zero() {
            return Scalar::zero(num.symbols());
        }
        // Fast path: polynomial scalars need no gcd.
        if let Some(c) = den.as_constant() {
            if c.is_one() {
                return Scalar { num, den };
            }
            let inv = BigRational::one() / c;
            return Scalar {
                num: num.mul_rat(&inv),
                den: den.mul_rat(&inv),
            };
        }
        let g = gcd(&num, &den);
        let (mut num, mut den) = if g.is_constant() {
            (num, den)
        } else {
            (
                num.exact_div(&g).expect("gcd divides"),
                den.exact_div(&g).expect("gcd divides"),
            )
        };
        // Normalize: lex-leading coefficient of the denominator becomes 1.
        let lc = den.leading_term().expect("nonzero").1.clone();
        if !lc.is_one() {
            let inv = BigRational::one() / lc;
            num = num.mul_rat(&inv);
            den = den.mul_rat(&inv);
        }
        Scalar { num, den }
    }

    pub fn num(&self) -> &Poly {
        &self.num
    }

    pub fn den(&self) -> &Poly {
        &self.den
    }

    pub fn symbols(&self) -> &Arc<SymbolSet> {
        self.num.symbols()
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.num == self.den
    }

    pub fn as_rat(&self) -> Option<BigRational> {
        match (self.num.as_constant(), self.den.as_constant()) {
            (Some(n), Some(d)) => Some(n / d),
            _ => None,
        }
    }

    pub fn add(&self, o: &Scalar) -> Scalar {
        Scalar::reduced(
            self.num.mul(&o.den).add(&o.num.mul(&self.den)),
            self.den.mul(&o.den),
        )
    }

    pub fn sub(&self, o: &Scalar) -> Scalar {
        self.add(&o.neg())
    }

    pub fn neg(&self) -> Scalar {
        Scalar {
            num: self.num.neg(),
            den: self.den.clone(),
        }
    }

    pub fn mul(&self, o: &Scalar) -> Scalar {
        Scalar::reduced(self.num.mul(&o.num), self.den.mul(&o.den))
    }

    pub fn div(&self, o: &Scalar) -> Result<Scalar> {
        if o.is_zero() {
            return Err(Error::DivisionByZero);
        }
        Ok(Scalar::reduced(
            self.num.mul(&o.den),
            self.den.mul(&o.num),
        ))
    }

    pub fn inv(&self) -> Result<Scalar> {
        Scalar::one(self.symbols()).div(self)
    }

    pub fn mul_i64(&self, n: i64) -> Scalar {
        self.mul(&Scalar::from_i64(self.symbols(), n))
    }

    pub fn pow(&self, n: u32) -> Scalar {
        Scalar {
            num: self.num.pow(n),
            den: self.den.pow(n),
        }
    }

    /// Substitute a polynomial for a parameter (both parts).
    pub fn subst_param(&self, idx: usize, value: &Poly) -> Result<Scalar> {
        let num = self.num.subst(idx, value);
        let den = self.den.subst(idx, value);
        if den.is_zero() {
            return Err(Error::DivisionByZero);
        }
        Ok(Scalar::reduced(num, den))
    }

    /// Σᵢ λᵢ ∂/∂λᵢ over the equivariant parameters, by the quotient rule.
    pub fn lambda_euler(&self, spec: &ParamSpec) -> Scalar {
        let syms = self.symbols();
        let mut dn = Poly::zero(syms);
        let mut dd = Poly::zero(syms);
        for i in 0..syms.len() {
            if spec.is_equiv(i) {
                let li = Poly::symbol(syms, i);
                dn = dn.add(&li.mul(&self.num.derivative(i)));
                dd = dd.add(&li.mul(&self.den.derivative(i)));
            }
        }
        // (dn*den - num*dd) / den^2
        Scalar::reduced(
            dn.mul(&self.den).sub(&self.num.mul(&dd)),
            self.den.mul(&self.den),
        )
    }

    /// Strip factors that are units of the ring described by `spec` from `p`:
    /// base-parameter symbols and declared localized polynomials. Returns the
    /// remaining factor.
    fn strip_units(p: &Poly, spec: &ParamSpec) -> Poly {
        let syms = p.symbols();
        let mut r = p.clone();
        for i in 0..spec.n_base() {
            let s = Poly::symbol(syms, i);
            while r.degree_in(i) > 0 {
                match r.exact_div(&s) {
                    Some(q) => r = q,
                    None => break,
                }
            }
        }
        let mut changed = true;
        let mut guard = 0;
        while changed && guard < 512 {
            changed = false;
            for l in &spec.localized_at {
                if let Some(q) = r.exact_div(l) {
                    r = q;
                    changed = true;
                }
            }
            guard += 1;
        }
        r
    }

    /// Constant λ-term of `p` (all equivariant exponents zero) as a
    /// polynomial in the base parameters.
    fn equiv_constant_part(p: &Poly, spec: &ParamSpec) -> Poly {
        let mut r = p.clone();
        for i in spec.n_base()..p.symbols().len() {
            r = r.subst(i, &Poly::zero(p.symbols()));
        }
        r
    }

    fn poly_is_ring_unit(p: &Poly, spec: &ParamSpec) -> bool {
        if p.is_zero() {
            return false;
        }
        let stripped = Self::strip_units(p, spec);
        match spec.flavor {
            Flavor::Polynomial => stripped.uses_only(|i| spec.is_base(i)),
            Flavor::PowerSeriesLocal => !Self::equiv_constant_part(&stripped, spec).is_zero(),
        }
    }

    /// Membership of the (reduced) scalar in the ring described by `spec`:
    /// the denominator must be a unit of that ring.
    pub fn in_ring(&self, spec: &ParamSpec) -> bool {
        if self.is_zero() {
            return true;
        }
        Self::poly_is_ring_unit(&self.den, spec)
    }

    /// True when this scalar lies in R = (k-coefficients)\[λ\] — i.e. the
    /// denominator involves no equivariant parameter at all.
    pub fn is_polynomial_in_equiv(&self, spec: &ParamSpec) -> bool {
        self.den.uses_only(|i| spec.is_base(i))
    }

    /// Invertibility in the ring described by `spec`.
    ///
    /// Errors with [`Error::NotInRing`] when the scalar is not even a ring
    /// element.
    pub fn is_unit(&self, spec: &ParamSpec) -> Result<bool> {
        if !self.in_ring(spec) {
            return Err(Error::NotInRing(format!("{self:?}")));
        }
        if self.is_zero() {
            return Ok(false);
        }
        Ok(Self::poly_is_ring_unit(&self.num, spec))
    }

    /// The non-unit factor left after stripping ring units from the
    /// numerator; `1` for units.
    pub fn non_unit_part(&self, spec: &ParamSpec) -> Poly {
        if self.is_zero() {
            return Poly::zero(self.symbols());
        }
        let mut r = Self::strip_units(&self.num, spec);
        if spec.flavor == Flavor::PowerSeriesLocal
            && !Self::equiv_constant_part(&r, spec).is_zero()
        {
            // Unit power series: nothing left to invert.
            r = Poly::one(self.symbols());
        }
        // Canonical sign/scale: monic in lex order.
        if let Some((_, c)) = r.leading_term() {
            let inv = BigRational::one() / c.clone();
            r = r.mul_rat(&inv);
        }
        r
    }
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", crate::parse::scalar_to_string(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec_psl() -> ParamSpec {
        ParamSpec::new(&[], &["l1", "l2"], Flavor::PowerSeriesLocal).unwrap()
    }

    fn sym(spec: &ParamSpec, name: &str) -> Scalar {
        Scalar::symbol(spec.symbols(), spec.symbols().index_of(name).unwrap())
    }

    #[test]
    fn identity_division() {
        let spec = spec_psl();
        let l1 = sym(&spec, "l1");
        assert!(l1.div(&l1).unwrap().is_one());
    }

    #[test]
    fn q_times_inverse() {
        let spec = ParamSpec::new(&["q"], &["l1"], Flavor::Polynomial).unwrap();
        let q = sym(&spec, "q");
        let inv = q.inv().unwrap();
        assert!(q.mul(&inv).is_one());
    }

    #[test]
    fn difference_of_squares_division() {
        let spec = spec_psl();
        let l1 = sym(&spec, "l1");
        let l2 = sym(&spec, "l2");
        let num = l1.mul(&l1).sub(&l2.mul(&l2));
        let q = num.div(&l1.sub(&l2)).unwrap();
        // Oracle: expand (l1+l2)(l1-l2) and compare.
        let expect = l1.add(&l2);
        assert_eq!(q, expect);
        assert_eq!(expect.mul(&l1.sub(&l2)), num);
    }

    #[test]
    fn division_by_zero() {
        let spec = spec_psl();
        let l1 = sym(&spec, "l1");
        assert_eq!(
            l1.div(&Scalar::zero(spec.symbols())),
            Err(Error::DivisionByZero)
        );
    }

    #[test]
    fn unit_tests_power_series_local() {
        let mut spec = spec_psl();
        let l1 = sym(&spec, "l1");
        // λ₁ is not a unit of k⟦λ₁,λ₂⟧ …
        assert_eq!(l1.is_unit(&spec), Ok(false));
        // … until λ₁ is localized.
        spec.localize(l1.num().clone()).unwrap();
        assert_eq!(l1.is_unit(&spec), Ok(true));
        // 1+λ₁ has a nonzero constant term, hence is a unit already.
        let spec2 = spec_psl();
        let one = Scalar::one(spec2.symbols());
        let u = one.add(&sym(&spec2, "l1"));
        assert_eq!(u.is_unit(&spec2), Ok(true));
    }

    #[test]
    fn unit_test_polynomial_flavor() {
        let spec = ParamSpec::new(&["q"], &["l1"], Flavor::Polynomial).unwrap();
        let q = sym(&spec, "q");
        let l1 = sym(&spec, "l1");
        assert_eq!(q.is_unit(&spec), Ok(true));
        assert_eq!(l1.is_unit(&spec), Ok(false));
        assert_eq!(Scalar::from_i64(spec.symbols(), -1).is_unit(&spec), Ok(true));
        // 1/λ₁ is not in R at all.
        assert_eq!(
            l1.inv().unwrap().is_unit(&spec),
            Err(Error::NotInRing("(1)/(l1)".into()))
        );
    }

    #[test]
    fn unit_multiplicativity() {
        let mut spec = spec_psl();
        let l1 = sym(&spec, "l1");
        spec.localize(l1.num().clone()).unwrap();
        let l2 = sym(&spec, "l2");
        let one = Scalar::one(spec.symbols());
        let cases = [
            l1.clone(),
            l2.clone(),
            one.add(&l2),
            l1.mul(&l2),
            one.add(&l1).mul(&l1),
        ];
        for a in &cases {
            for b in &cases {
                let lhs = a.mul(b).is_unit(&spec).unwrap();
                let rhs = a.is_unit(&spec).unwrap() && b.is_unit(&spec).unwrap();
                assert_eq!(lhs, rhs, "multiplicativity failed for {a:?}, {b:?}");
            }
        }
    }
}
